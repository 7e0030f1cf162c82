#include "suffixrl/harness.hpp"

#include <ctime>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "suffixrl/cached_oracle.hpp"
#include "suffixrl/dataset.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/eval.hpp"
#include "suffixrl/ngram_lm.hpp"
#include "suffixrl/policy.hpp"
#include "suffixrl/remote_oracle.hpp"
#include "suffixrl/trainer.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path fp(p);
  return fp.is_absolute() ? fp : base / fp;
}

std::string file_hash_hex(const fs::path& path) { return hash_hex(fnv1a64(read_text_file(path))); }

struct BuiltOracle {
  std::shared_ptr<const ScoringOracle> oracle;
  std::shared_ptr<const CachedOracle> cache;  // set when caching is on
};

BuiltOracle build_oracle(const OracleChoice& choice, const std::vector<TaskSpec>& tasks) {
  BuiltOracle built;
  if (choice.type == "synthetic") {
    built.oracle = std::make_shared<SyntheticOracle>(choice.synthetic, tasks);
  } else if (choice.type == "remote") {
    built.oracle = std::make_shared<RemoteOracle>(choice.remote);
  } else {
    throw ConfigError("unknown oracle type: " + choice.type);
  }
  if (choice.cache) {
    built.cache = cached(built.oracle);
    built.oracle = built.cache;
  }
  return built;
}

}  // namespace

std::string RunManifest::to_json_text() const {
  json j;
  j["artifact_version"] = artifact_version;
  j["created_unix"] = created_unix;
  j["config"] = config;
  j["file_hashes"] = file_hashes;
  j["oracle"] = json{{"name", oracle_name}, {"deterministic", oracle_deterministic}};
  j["outputs"] = outputs;
  j["truncated_instances"] = truncated_instances;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: malformed JSON: ") + e.what());
  }
  RunManifest m;
  m.artifact_version = j.value("artifact_version", std::string{});
  m.created_unix = j.value("created_unix", std::int64_t{0});
  if (j.contains("config")) m.config = j["config"];
  if (j.contains("file_hashes"))
    for (const auto& item : j["file_hashes"].items())
      m.file_hashes[item.key()] = item.value().get<std::string>();
  if (j.contains("oracle")) {
    m.oracle_name = j["oracle"].value("name", std::string{});
    m.oracle_deterministic = j["oracle"].value("deterministic", false);
  }
  if (j.contains("outputs"))
    for (const auto& item : j["outputs"].items())
      m.outputs[item.key()] = item.value().get<std::string>();
  m.truncated_instances = j.value("truncated_instances", 0);
  return m;
}

Suffix random_suffix_baseline(const AttackVocabulary& vocab, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("random_suffix_baseline: k must be >= 1");
  Rng rng(seed);
  std::vector<int> ids(static_cast<std::size_t>(k));
  for (auto& id : ids)
    id = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(vocab.size())));
  return make_suffix(vocab, std::move(ids));
}

void write_suffix_json(const Suffix& suffix, const AttackVocabulary& vocab,
                       const std::filesystem::path& path) {
  json j;
  j["k"] = suffix.token_ids.size();
  j["token_ids"] = suffix.token_ids;
  j["rendered"] = suffix.rendered;
  j["vocab_hash"] = hash_hex(vocab.content_hash());
  write_text_file(path, j.dump(2) + "\n");
}

Suffix read_suffix_json(const std::filesystem::path& path, const AttackVocabulary& vocab) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("suffix file " + path.string() + ": malformed JSON: " + e.what());
  }
  if (!j.contains("token_ids") || !j["token_ids"].is_array())
    throw ConfigError("suffix file " + path.string() + ": missing token_ids");
  if (j.contains("vocab_hash") &&
      j["vocab_hash"].get<std::string>() != hash_hex(vocab.content_hash()))
    throw ConfigError("suffix file " + path.string() + ": vocab_hash mismatch");
  std::vector<int> ids;
  for (const auto& t : j["token_ids"]) ids.push_back(t.get<int>());
  return make_suffix(vocab, std::move(ids));
}

PlantedFixture make_planted_fixture() {
  PlantedFixture fix;

  std::vector<std::string> tokens;
  tokens.reserve(32);
  for (int i = 0; i < 32; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    tokens.emplace_back(buf);
  }
  fix.vocab = std::make_shared<AttackVocabulary>(std::move(tokens));

  fix.planted_ids = {7, 19, 3, 28};
  for (int id : fix.planted_ids) fix.planted_tokens.push_back(fix.vocab->token(id));

  std::map<std::string, SurfaceSet> surfaces;
  surfaces["pos"] = SurfaceSet{{"yes"}};
  surfaces["neg"] = SurfaceSet{{"no"}};
  fix.tasks.push_back(TaskSpec("planted", {"pos", "neg"}, std::move(surfaces), WrapperStyle::raw,
                               "\nThe answer is: ",
                               "Decide whether the input leans pos or neg."));

  fix.train_data.push_back({
      {"the crowd felt pos about the opening night", "pos"},
      {"early reviews lean neg on the premise", "neg"},
      {"a warm pos reception greeted the cast", "pos"},
      {"the committee stayed neg after the recount", "neg"},
      {"analysts turned pos once figures landed", "pos"},
      {"the editorial remained neg despite appeals", "neg"},
      {"audiences grew pos through the final act", "pos"},
      {"the verdict read neg in every column", "neg"},
  });

  fix.eval_data.push_back({
      {"morning traders stayed pos on the report", "pos"},
      {"the panel scored it neg without dissent", "neg"},
      {"her letter sounded pos from the first line", "pos"},
      {"the audit came back neg on both counts", "neg"},
      {"team morale held pos across the quarter", "pos"},
      {"the referee ruled neg on the appeal", "neg"},
      {"the tasting notes ran pos for the vintage", "pos"},
      {"the survey trended neg among commuters", "neg"},
      {"his second draft felt pos and confident", "pos"},
      {"the board voted neg on the merger", "neg"},
      {"the pilot tested pos with focus groups", "pos"},
      {"the rematch ended neg for the visitors", "neg"},
      {"the forecast stayed pos despite the clouds", "pos"},
      {"the inspection was neg on the third floor", "neg"},
      {"the chorus sounded pos in the encore", "pos"},
      {"the ledger closed neg for the quarter", "neg"},
      {"the jury seemed pos toward the defense", "pos"},
      {"the tide turned neg before the vote", "neg"},
      {"the tutors stayed pos about the cohort", "pos"},
      {"the recall came back neg in the district", "neg"},
  });

  fix.sensitive.label_bias = {};
  fix.sensitive.planted_tokens = fix.planted_tokens;
  fix.sensitive.planted_strength = 2.0;
  fix.sensitive.context_weight = 1.0;
  fix.sensitive.seed = 7;

  fix.insensitive = fix.sensitive;
  fix.insensitive.planted_tokens.reset();
  fix.insensitive.planted_strength = 0.0;
  fix.insensitive.seed = 8;

  return fix;
}

void run_train(const RunConfig& config_in, const std::filesystem::path& base_dir) {
  RunConfig config = config_in;
  apply_env_overrides(config);
  config.validate();

  const fs::path vocab_path = resolve(base_dir, config.vocab_path);
  auto vocab = std::make_shared<const AttackVocabulary>(AttackVocabulary::load(vocab_path));

  std::vector<TaskSpec> tasks;
  std::vector<fs::path> task_paths;
  for (const auto& p : config.task_paths) {
    task_paths.push_back(resolve(base_dir, p));
    tasks.push_back(TaskSpec::load(task_paths.back()));
  }

  std::vector<std::vector<TaskInstance>> datasets;
  std::vector<fs::path> dataset_paths;
  int truncated = 0;
  for (std::size_t t = 0; t < config.dataset_paths.size(); ++t) {
    dataset_paths.push_back(resolve(base_dir, config.dataset_paths[t]));
    LoadResult lr;
    datasets.push_back(load_task_data(tasks[t], DatasetFile{dataset_paths.back(), "train"},
                                      config.max_input_length, &lr));
    truncated += lr.truncated;
  }

  std::unique_ptr<NgramLm> lm;
  fs::path lm_path;
  if (!config.lm_corpus_path.empty()) {
    lm_path = resolve(base_dir, config.lm_corpus_path);
    lm = std::make_unique<NgramLm>(read_text_file(lm_path));
  }

  if (config.oracle.type == "synthetic" && config.oracle.synthetic.planted_tokens &&
      config.oracle.synthetic.planted_tokens->size() != static_cast<std::size_t>(config.ppo.k))
    throw ConfigError("config: planted_tokens length must equal ppo.k");

  BuiltOracle built = build_oracle(config.oracle, tasks);

  const fs::path out_dir = resolve(base_dir, config.output_dir);
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.created_unix = static_cast<std::int64_t>(std::time(nullptr));
  manifest.config = json::parse(config.to_json_text());
  manifest.file_hashes[vocab_path.string()] = file_hash_hex(vocab_path);
  for (const auto& p : task_paths) manifest.file_hashes[p.string()] = file_hash_hex(p);
  for (const auto& p : dataset_paths) manifest.file_hashes[p.string()] = file_hash_hex(p);
  if (!lm_path.empty()) manifest.file_hashes[lm_path.string()] = file_hash_hex(lm_path);
  manifest.oracle_name = built.oracle->info().name;
  manifest.oracle_deterministic = built.oracle->info().deterministic;
  manifest.outputs = {{"manifest", "manifest.json"},
                      {"history", "history.jsonl"},
                      {"policy", "policy.json"},
                      {"best_suffix_txt", "best_suffix.txt"},
                      {"best_suffix_json", "best_suffix.json"}};
  manifest.truncated_instances = truncated;
  write_text_file(out_dir / "manifest.json", manifest.to_json_text());

  std::ofstream history(out_dir / "history.jsonl", std::ios::binary | std::ios::trunc);
  if (!history) throw std::runtime_error("cannot write " + (out_dir / "history.jsonl").string());
  const auto observer = [&history](const IterationRecord& rec) {
    history << to_json_line(rec) << '\n';
    history.flush();
  };

  TrainResult result = train(config.ppo, config.reward, vocab, tasks, datasets, *built.oracle,
                             lm.get(), observer);

  save_policy(result.policy, out_dir / "policy.json");
  write_text_file(out_dir / "best_suffix.txt", result.best_suffix.rendered + "\n");
  write_suffix_json(result.best_suffix, *vocab, out_dir / "best_suffix.json");
}

namespace {

int run_eval_command(const std::string& task_path, const std::string& data_path,
                     const std::string& suffix_text, const std::string& oracle_cfg_path,
                     const std::string& oracle_url, bool use_cache, int max_input_length,
                     int parallelism, const std::string& out_path) {
  TaskSpec task = TaskSpec::load(task_path);
  auto instances = load_task_data(task, DatasetFile{data_path, "validation"}, max_input_length);

  OracleChoice choice;
  const char* env_url = std::getenv("SUFFIXRL_ORACLE_URL");
  if (!oracle_url.empty() || (env_url && *env_url)) {
    choice.type = "remote";
    choice.remote.base_url = oracle_url.empty() ? env_url : oracle_url;
    if (const char* t = std::getenv("SUFFIXRL_ORACLE_TIMEOUT_MS"); t && *t)
      choice.remote.timeout_ms = std::stoi(t);
  } else if (!oracle_cfg_path.empty()) {
    choice.type = "synthetic";
    choice.synthetic = SyntheticOracleConfig::load(oracle_cfg_path);
  } else {
    throw ConfigError("eval: provide --oracle (synthetic config) or --oracle-url");
  }
  choice.cache = use_cache;
  BuiltOracle built = build_oracle(choice, {task});

  TaskMetrics m = evaluate_task(*built.oracle, task, instances, suffix_text, parallelism);

  json j;
  j["task"] = task.name();
  j["suffix"] = suffix_text;
  j["n"] = m.n;
  j["correct"] = m.correct;
  j["accuracy"] = m.accuracy;
  j["calce"] = m.calce;
  const std::string text = j.dump(2) + "\n";
  write_text_file(out_path, text);
  std::cout << text;
  return 0;
}

int run_transfer_command(const std::string& config_path) {
  const fs::path base = fs::path(config_path).parent_path();
  json j;
  try {
    j = json::parse(read_text_file(config_path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("transfer config: malformed JSON: ") + e.what());
  }
  for (const auto& item : j.items()) {
    static const std::vector<std::string> allowed = {
        "oracles", "suffixes", "vocab",      "tasks",       "datasets",
        "k_values", "max_input_length", "parallelism", "output_dir"};
    bool ok = false;
    for (const auto& k : allowed) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("transfer config: unknown key '" + item.key() + "'");
  }
  for (const char* key : {"oracles", "suffixes", "vocab", "tasks", "datasets", "k_values",
                          "output_dir"})
    if (!j.contains(key))
      throw ConfigError(std::string("transfer config: missing key '") + key + "'");

  const fs::path vocab_path = resolve(base, j["vocab"].get<std::string>());
  auto vocab = std::make_shared<const AttackVocabulary>(AttackVocabulary::load(vocab_path));

  const int max_len = j.value("max_input_length", 256);
  const int parallelism = j.value("parallelism", 1);

  std::vector<TaskSpec> tasks;
  std::vector<fs::path> task_paths;
  for (const auto& p : j["tasks"]) {
    task_paths.push_back(resolve(base, p.get<std::string>()));
    tasks.push_back(TaskSpec::load(task_paths.back()));
  }
  std::vector<std::vector<TaskInstance>> datasets;
  std::vector<fs::path> dataset_paths;
  for (std::size_t t = 0; t < j["datasets"].size(); ++t) {
    dataset_paths.push_back(resolve(base, j["datasets"][t].get<std::string>()));
    datasets.push_back(
        load_task_data(tasks[t], DatasetFile{dataset_paths.back(), "validation"}, max_len));
  }
  if (tasks.size() != datasets.size())
    throw ConfigError("transfer config: tasks and datasets must align");

  std::vector<std::shared_ptr<const ScoringOracle>> owners;
  std::vector<std::pair<std::string, const ScoringOracle*>> oracles;
  for (const auto& item : j["oracles"].items()) {
    auto cfg = SyntheticOracleConfig::from_json_text(item.value().dump());
    owners.push_back(std::make_shared<SyntheticOracle>(cfg, tasks));
    oracles.emplace_back(item.key(), owners.back().get());
  }

  std::map<std::string, Suffix> suffixes;
  std::vector<fs::path> suffix_paths;
  for (const auto& item : j["suffixes"].items()) {
    suffix_paths.push_back(resolve(base, item.value().get<std::string>()));
    suffixes.emplace(item.key(), read_suffix_json(suffix_paths.back(), *vocab));
  }

  std::vector<int> k_values;
  for (const auto& k : j["k_values"]) k_values.push_back(k.get<int>());

  TransferReport report =
      transfer_matrix(suffixes, oracles, tasks, datasets, k_values, parallelism);

  const fs::path out_dir = resolve(base, j["output_dir"].get<std::string>());
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.created_unix = static_cast<std::int64_t>(std::time(nullptr));
  manifest.config = j;
  manifest.file_hashes[vocab_path.string()] = file_hash_hex(vocab_path);
  for (const auto& p : task_paths) manifest.file_hashes[p.string()] = file_hash_hex(p);
  for (const auto& p : dataset_paths) manifest.file_hashes[p.string()] = file_hash_hex(p);
  for (const auto& p : suffix_paths) manifest.file_hashes[p.string()] = file_hash_hex(p);
  manifest.oracle_name = "synthetic-grid";
  manifest.oracle_deterministic = true;
  manifest.outputs = {{"manifest", "manifest.json"},
                      {"report_json", "report.json"},
                      {"report_md", "report.md"},
                      {"report_csv", "report.csv"}};
  write_text_file(out_dir / "manifest.json", manifest.to_json_text());

  write_text_file(out_dir / "report.json", render_report_json(report));
  write_text_file(out_dir / "report.md", render_report_md(report));
  write_text_file(out_dir / "report.csv", render_report_csv(report));
  std::cout << render_report_md(report);
  return 0;
}

int run_report_command(const std::string& run_dir, bool force) {
  const fs::path dir(run_dir);
  RunManifest manifest = RunManifest::from_json_text(read_text_file(dir / "manifest.json"));
  for (const auto& [path, stored] : manifest.file_hashes) {
    std::string current;
    try {
      current = file_hash_hex(path);
    } catch (const std::exception&) {
      current = "<missing>";
    }
    if (current != stored) {
      const std::string msg = "report: hash mismatch for " + path + " (manifest " + stored +
                              ", current " + current + ")";
      if (!force) throw std::runtime_error(msg + "; pass --force to render anyway");
      std::cerr << "warning: " << msg << "\n";
    }
  }
  TransferReport report = report_from_json(read_text_file(dir / "report.json"));
  write_text_file(dir / "report.md", render_report_md(report));
  write_text_file(dir / "report.csv", render_report_csv(report));
  std::cout << render_report_md(report);
  return 0;
}

int run_synth_check_command(int seeds) {
  const PlantedFixture fix = make_planted_fixture();
  RewardConfig reward;
  reward.lambda_fluency = 0.0;

  int converged = 0;
  for (int s = 0; s < seeds; ++s) {
    PpoConfig ppo;  // defaults: K=4, 200 iterations, lr 5e-2, batch 32
    ppo.seed = static_cast<std::uint64_t>(s);
    SyntheticOracle oracle(fix.sensitive, fix.tasks);
    TrainResult result = train(ppo, reward, fix.vocab, fix.tasks, fix.train_data, oracle);

    double min_mass = 1.0;
    for (std::size_t i = 0; i < result.policy.k(); ++i) {
      const auto p = result.policy.position_probs(i);
      min_mass = std::min(min_mass, p[static_cast<std::size_t>(fix.planted_ids[i])]);
    }
    const bool best_ok = result.best_suffix.token_ids == fix.planted_ids;
    const bool ok = min_mass >= 0.9 && best_ok;
    if (ok) ++converged;
    std::cout << "seed " << s << ": min planted mass " << format_double(min_mass)
              << ", best suffix " << (best_ok ? "matches" : "differs") << " -> "
              << (ok ? "ok" : "MISS") << "\n";
  }
  const int need = seeds == 1 ? 1 : (9 * seeds + 9) / 10;  // ceil(0.9 * seeds)
  const bool pass = converged >= need;
  std::cout << "synth-check: " << converged << "/" << seeds << " seeds converged (need " << need
            << "): " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 2;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  CLI::App app{"Adversarial suffix search against black-box scoring oracles"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Train a suffix policy from a run config");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "Run config JSON")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate one task under a suffix");
  std::string eval_task, eval_data, eval_suffix, eval_oracle, eval_oracle_url;
  std::string eval_out = "report.json";
  bool eval_cache = false;
  int eval_max_len = 256, eval_par = 1;
  eval_cmd->add_option("--task", eval_task, "Task spec JSON")->required();
  eval_cmd->add_option("--data", eval_data, "Instances JSONL")->required();
  eval_cmd->add_option("--suffix", eval_suffix, "Suffix text; empty = clean");
  eval_cmd->add_option("--oracle", eval_oracle, "Synthetic oracle config JSON");
  eval_cmd->add_option("--oracle-url", eval_oracle_url, "Remote oracle base URL");
  eval_cmd->add_flag("--cache", eval_cache, "Memoize oracle calls");
  eval_cmd->add_option("--max-input-length", eval_max_len, "Token truncation limit");
  eval_cmd->add_option("--parallelism", eval_par, "Concurrent instance scoring");
  eval_cmd->add_option("--out", eval_out, "Metrics output path");

  auto* transfer_cmd = app.add_subcommand("transfer", "Evaluate a suffix set across oracles");
  std::string transfer_config;
  transfer_cmd->add_option("--config", transfer_config, "Transfer config JSON")->required();

  auto* report_cmd = app.add_subcommand("report", "Re-render tables from a run directory");
  std::string report_dir;
  bool report_force = false;
  report_cmd->add_option("--run-dir", report_dir, "Run directory")->required();
  report_cmd->add_flag("--force", report_force, "Render despite hash mismatches");

  auto* synth_cmd = app.add_subcommand("synth-check", "Planted-oracle convergence check");
  int synth_seeds = 10;
  synth_cmd->add_option("--seeds", synth_seeds, "Seeds to try (pass needs 90%)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) {
      run_train(RunConfig::load(train_config), fs::path(train_config).parent_path());
      return 0;
    }
    if (*eval_cmd)
      return run_eval_command(eval_task, eval_data, eval_suffix, eval_oracle, eval_oracle_url,
                              eval_cache, eval_max_len, eval_par, eval_out);
    if (*transfer_cmd) return run_transfer_command(transfer_config);
    if (*report_cmd) return run_report_command(report_dir, report_force);
    if (*synth_cmd) return run_synth_check_command(synth_seeds);
    return 1;
  } catch (const TrainAbortedError& e) {
    std::cerr << "error: " << e.what() << " (last completed iteration "
              << e.last_completed_iteration << ")\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace suffixrl
