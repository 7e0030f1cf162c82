#include "suffixrl/run_config.hpp"

#include <cmath>
#include <cstdlib>
#include <initializer_list>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config: unknown key '" + where + item.key() + "'");
  }
}

double get_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    throw ConfigError(std::string("config: '") + key + "' must be an integer");
  return j[key].get<int>();
}

std::string get_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ConfigError(std::string("config: '") + key + "' must be a string");
  return j[key].get<std::string>();
}

std::vector<std::string> get_string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw ConfigError(std::string("config: '") + key + "' must be an array");
  for (const auto& e : j[key]) {
    if (!e.is_string())
      throw ConfigError(std::string("config: '") + key + "' entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

PpoConfig parse_ppo(const json& j) {
  check_keys(j, "ppo.",
             {"k", "iterations", "batch_size", "samples_per_iteration", "learning_rate",
              "clip_epsilon", "entropy_coeff", "kl_old_coeff", "grad_clip_norm", "sync_period",
              "inner_epochs", "optimizer", "temperature", "temperature_floor",
              "oracle_parallelism", "seed"});
  PpoConfig c;
  c.k = get_int(j, "k", c.k);
  c.iterations = get_int(j, "iterations", c.iterations);
  c.batch_size = get_int(j, "batch_size", c.batch_size);
  c.samples_per_iteration = get_int(j, "samples_per_iteration", c.samples_per_iteration);
  c.learning_rate = get_number(j, "learning_rate", c.learning_rate);
  if (j.contains("clip_epsilon")) {
    // "inf" disables clipping (JSON has no infinity literal).
    if (j["clip_epsilon"].is_string() && j["clip_epsilon"].get<std::string>() == "inf")
      c.clip_epsilon = std::numeric_limits<double>::infinity();
    else
      c.clip_epsilon = get_number(j, "clip_epsilon", c.clip_epsilon);
  }
  c.entropy_coeff = get_number(j, "entropy_coeff", c.entropy_coeff);
  c.kl_old_coeff = get_number(j, "kl_old_coeff", c.kl_old_coeff);
  c.grad_clip_norm = get_number(j, "grad_clip_norm", c.grad_clip_norm);
  c.sync_period = get_int(j, "sync_period", c.sync_period);
  c.inner_epochs = get_int(j, "inner_epochs", c.inner_epochs);
  c.optimizer = get_string(j, "optimizer", c.optimizer);
  c.temperature = get_number(j, "temperature", c.temperature);
  c.temperature_floor = get_number(j, "temperature_floor", c.temperature_floor);
  c.oracle_parallelism = get_int(j, "oracle_parallelism", c.oracle_parallelism);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw ConfigError("config: 'seed' must be an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  return c;
}

RewardConfig parse_reward(const json& j) {
  check_keys(j, "reward.", {"lambda_fluency", "beta_kl_uniform", "baseline_decay"});
  RewardConfig c;
  c.lambda_fluency = get_number(j, "lambda_fluency", c.lambda_fluency);
  c.beta_kl_uniform = get_number(j, "beta_kl_uniform", c.beta_kl_uniform);
  c.baseline_decay = get_number(j, "baseline_decay", c.baseline_decay);
  return c;
}

OracleChoice parse_oracle(const json& j) {
  check_keys(j, "oracle.", {"type", "cache", "config", "url", "timeout_ms", "retries"});
  OracleChoice c;
  c.type = get_string(j, "type", c.type);
  if (j.contains("cache")) {
    if (!j["cache"].is_boolean()) throw ConfigError("config: 'oracle.cache' must be a boolean");
    c.cache = j["cache"].get<bool>();
  }
  if (c.type == "synthetic") {
    if (j.contains("url") || j.contains("timeout_ms") || j.contains("retries"))
      throw ConfigError("config: remote keys given for a synthetic oracle");
    if (j.contains("config")) c.synthetic = SyntheticOracleConfig::from_json_text(j["config"].dump());
  } else if (c.type == "remote") {
    if (j.contains("config")) throw ConfigError("config: 'oracle.config' is synthetic-only");
    c.remote.base_url = get_string(j, "url", "");
    c.remote.timeout_ms = get_int(j, "timeout_ms", c.remote.timeout_ms);
    c.remote.retries = get_int(j, "retries", c.remote.retries);
  } else {
    throw ConfigError("config: oracle.type must be \"synthetic\" or \"remote\"");
  }
  return c;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: not a JSON object");
  check_keys(j, "",
             {"ppo", "reward", "oracle", "vocab", "lm_corpus", "tasks", "datasets",
              "eval_datasets", "max_input_length", "output_dir"});
  RunConfig c;
  if (j.contains("ppo")) c.ppo = parse_ppo(j["ppo"]);
  if (j.contains("reward")) c.reward = parse_reward(j["reward"]);
  if (j.contains("oracle")) c.oracle = parse_oracle(j["oracle"]);
  c.vocab_path = get_string(j, "vocab", "");
  c.lm_corpus_path = get_string(j, "lm_corpus", "");
  c.task_paths = get_string_list(j, "tasks");
  c.dataset_paths = get_string_list(j, "datasets");
  c.eval_dataset_paths = get_string_list(j, "eval_datasets");
  c.max_input_length = get_int(j, "max_input_length", c.max_input_length);
  c.output_dir = get_string(j, "output_dir", "");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string RunConfig::to_json_text() const {
  json j;
  json ppo;
  ppo["k"] = this->ppo.k;
  ppo["iterations"] = this->ppo.iterations;
  ppo["batch_size"] = this->ppo.batch_size;
  ppo["samples_per_iteration"] = this->ppo.samples_per_iteration;
  ppo["learning_rate"] = this->ppo.learning_rate;
  if (std::isinf(this->ppo.clip_epsilon))
    ppo["clip_epsilon"] = "inf";
  else
    ppo["clip_epsilon"] = this->ppo.clip_epsilon;
  ppo["entropy_coeff"] = this->ppo.entropy_coeff;
  ppo["kl_old_coeff"] = this->ppo.kl_old_coeff;
  ppo["grad_clip_norm"] = this->ppo.grad_clip_norm;
  ppo["sync_period"] = this->ppo.sync_period;
  ppo["inner_epochs"] = this->ppo.inner_epochs;
  ppo["optimizer"] = this->ppo.optimizer;
  ppo["temperature"] = this->ppo.temperature;
  ppo["temperature_floor"] = this->ppo.temperature_floor;
  ppo["oracle_parallelism"] = this->ppo.oracle_parallelism;
  ppo["seed"] = this->ppo.seed;
  j["ppo"] = std::move(ppo);

  json reward;
  reward["lambda_fluency"] = this->reward.lambda_fluency;
  reward["beta_kl_uniform"] = this->reward.beta_kl_uniform;
  reward["baseline_decay"] = this->reward.baseline_decay;
  j["reward"] = std::move(reward);

  json oracle;
  oracle["type"] = this->oracle.type;
  oracle["cache"] = this->oracle.cache;
  if (this->oracle.type == "synthetic") {
    oracle["config"] = json::parse(this->oracle.synthetic.to_json_text());
  } else {
    oracle["url"] = this->oracle.remote.base_url;
    oracle["timeout_ms"] = this->oracle.remote.timeout_ms;
    oracle["retries"] = this->oracle.remote.retries;
  }
  j["oracle"] = std::move(oracle);

  j["vocab"] = vocab_path;
  if (!lm_corpus_path.empty()) j["lm_corpus"] = lm_corpus_path;
  j["tasks"] = task_paths;
  j["datasets"] = dataset_paths;
  if (!eval_dataset_paths.empty()) j["eval_datasets"] = eval_dataset_paths;
  j["max_input_length"] = max_input_length;
  j["output_dir"] = output_dir;
  return j.dump(2) + "\n";
}

void RunConfig::validate() const {
  ppo.validate();
  reward.validate();
  if (vocab_path.empty()) throw ConfigError("config: 'vocab' is required");
  if (task_paths.empty()) throw ConfigError("config: 'tasks' must be non-empty");
  if (task_paths.size() != dataset_paths.size())
    throw ConfigError("config: 'tasks' and 'datasets' must align");
  if (!eval_dataset_paths.empty() && eval_dataset_paths.size() != task_paths.size())
    throw ConfigError("config: 'eval_datasets' must align with 'tasks'");
  if (output_dir.empty()) throw ConfigError("config: 'output_dir' is required");
  if (max_input_length < 1) throw ConfigError("config: 'max_input_length' must be >= 1");
  if (reward.lambda_fluency > 0.0 && lm_corpus_path.empty())
    throw ConfigError("config: lambda_fluency > 0 requires 'lm_corpus'");
  if (oracle.type == "remote" && oracle.remote.base_url.empty())
    throw ConfigError("config: remote oracle requires 'url' (or SUFFIXRL_ORACLE_URL)");
}

void apply_env_overrides(RunConfig& config) {
  if (const char* url = std::getenv("SUFFIXRL_ORACLE_URL"); url && *url)
    config.oracle.remote.base_url = url;
  if (const char* timeout = std::getenv("SUFFIXRL_ORACLE_TIMEOUT_MS"); timeout && *timeout) {
    try {
      config.oracle.remote.timeout_ms = std::stoi(timeout);
    } catch (const std::exception&) {
      throw ConfigError("SUFFIXRL_ORACLE_TIMEOUT_MS is not an integer");
    }
  }
}

}  // namespace suffixrl
