#include "suffixrl/synthetic_oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

namespace {

using nlohmann::json;

const char* const kConfigKeys[] = {"label_bias", "planted_tokens", "planted_strength",
                                   "context_weight", "seed"};

void check_known_keys(const json& j) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : kConfigKeys) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("synthetic oracle config: unknown key '" + item.key() + "'");
  }
}

}  // namespace

SyntheticOracleConfig SyntheticOracleConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic oracle config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("synthetic oracle config: not a JSON object");
  check_known_keys(j);
  SyntheticOracleConfig cfg;
  if (j.contains("label_bias")) {
    if (!j["label_bias"].is_object())
      throw ConfigError("synthetic oracle config: label_bias must be an object");
    for (const auto& item : j["label_bias"].items()) {
      if (!item.value().is_number())
        throw ConfigError("synthetic oracle config: label_bias values must be numbers");
      cfg.label_bias[item.key()] = item.value().get<double>();
    }
  }
  if (j.contains("planted_tokens") && !j["planted_tokens"].is_null()) {
    if (!j["planted_tokens"].is_array())
      throw ConfigError("synthetic oracle config: planted_tokens must be an array");
    std::vector<std::string> toks;
    for (const auto& t : j["planted_tokens"]) {
      if (!t.is_string())
        throw ConfigError("synthetic oracle config: planted_tokens entries must be strings");
      toks.push_back(t.get<std::string>());
    }
    cfg.planted_tokens = std::move(toks);
  }
  if (j.contains("planted_strength")) cfg.planted_strength = j["planted_strength"].get<double>();
  if (j.contains("context_weight")) cfg.context_weight = j["context_weight"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::int64_t>();
  if (cfg.planted_strength < 0.0)
    throw ConfigError("synthetic oracle config: planted_strength must be >= 0");
  return cfg;
}

SyntheticOracleConfig SyntheticOracleConfig::load(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string SyntheticOracleConfig::to_json_text() const {
  json j = json::object();
  j["label_bias"] = json::object();
  for (const auto& [surface, bias] : label_bias) j["label_bias"][surface] = bias;
  if (planted_tokens)
    j["planted_tokens"] = *planted_tokens;
  else
    j["planted_tokens"] = nullptr;
  j["planted_strength"] = planted_strength;
  j["context_weight"] = context_weight;
  j["seed"] = seed;
  return j.dump(2);
}

SyntheticOracle::SyntheticOracle(SyntheticOracleConfig config, std::vector<TaskSpec> tasks)
    : config_(std::move(config)), tasks_(std::move(tasks)) {
  if (tasks_.empty()) throw std::invalid_argument("SyntheticOracle: at least one task required");
  if (config_.planted_strength < 0.0)
    throw std::invalid_argument("SyntheticOracle: planted_strength must be >= 0");
  if (config_.planted_tokens && config_.planted_tokens->empty())
    throw std::invalid_argument("SyntheticOracle: planted_tokens must be non-empty when set");
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    for (const auto& surface : tasks_[i].surface_union()) {
      if (!surface_owner_.count(surface))
        surface_owner_[surface] = Resolved{i, tasks_[i].label_of_surface(surface)};
    }
  }
  info_.name = "synthetic(seed=" + std::to_string(config_.seed) + ")";
  info_.deterministic = true;
}

const TaskSpec& SyntheticOracle::resolve_task(const std::string& prompt,
                                              const std::string& continuation,
                                              std::string* label_out) const {
  auto it = surface_owner_.find(continuation);
  if (it == surface_owner_.end())
    throw std::invalid_argument("SyntheticOracle: continuation '" + continuation +
                                "' is not a surface of any bound task");
  // Prefer a candidate task whose answer prefix terminates the prompt.
  std::size_t chosen = it->second.task_index;
  bool chosen_matches = false;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const auto& task = tasks_[i];
    if (task.label_of_surface(continuation).empty()) continue;
    const std::string& prefix = task.answer_prefix();
    bool matches = prompt.size() >= prefix.size() &&
                   prompt.compare(prompt.size() - prefix.size(), prefix.size(), prefix) == 0;
    if (matches && !chosen_matches) {
      chosen = i;
      chosen_matches = true;
    }
  }
  const TaskSpec& task = tasks_[chosen];
  if (label_out) *label_out = task.label_of_surface(continuation);
  return task;
}

std::string SyntheticOracle::extract_content(const TaskSpec& task, const std::string& prompt) const {
  const std::string& prefix = task.answer_prefix();
  if (prompt == prefix) return "";  // null prompt

  std::string head;
  std::string tail;
  switch (task.wrapper_style()) {
    case WrapperStyle::raw:
      head = task.instruction() + "\n";
      tail = prefix;
      break;
    case WrapperStyle::alpaca:
      head = "### Instruction:\n" + task.instruction() + "\n\n### Input:\n";
      tail = "\n\n### Response:" + prefix;
      break;
    case WrapperStyle::chatml:
      head = "<|im_start|>system\n" + task.instruction() + "<|im_end|>\n<|im_start|>user\n";
      tail = "<|im_end|>\n<|im_start|>assistant" + prefix;
      break;
  }
  if (prompt.size() >= head.size() + tail.size() &&
      prompt.compare(0, head.size(), head) == 0 &&
      prompt.compare(prompt.size() - tail.size(), tail.size(), tail) == 0) {
    return prompt.substr(head.size(), prompt.size() - head.size() - tail.size());
  }
  // Unknown layout: use everything before a trailing answer prefix.
  if (prompt.size() >= prefix.size() &&
      prompt.compare(prompt.size() - prefix.size(), prefix.size(), prefix) == 0) {
    return prompt.substr(0, prompt.size() - prefix.size());
  }
  return prompt;
}

std::vector<TokenScore> SyntheticOracle::score_continuation(const std::string& prompt,
                                                            const std::string& continuation) const {
  if (prompt.empty()) throw std::invalid_argument("score_continuation: empty prompt");
  if (continuation.empty()) throw std::invalid_argument("score_continuation: empty continuation");

  std::string gold_label;
  const TaskSpec& task = resolve_task(prompt, continuation, &gold_label);
  const std::string content = extract_content(task, prompt);
  const std::vector<std::string> content_tokens = split_whitespace(content);

  // Which labels does the context point to?
  std::map<std::string, int> match;
  for (const auto& label : task.labels()) {
    int m = 0;
    for (const auto& tok : content_tokens) {
      if (tok == label) {
        m = 1;
        break;
      }
    }
    match[label] = m;
  }

  int planted_hits = 0;
  if (config_.planted_tokens) {
    const auto& planted = *config_.planted_tokens;
    const std::size_t k = planted.size();
    const std::size_t n = content_tokens.size();
    for (std::size_t i = 0; i < k; ++i) {
      // Position i of the planted suffix lines up with token n - k + i.
      if (n + i >= k && content_tokens[n - k + i] == planted[i]) ++planted_hits;
    }
  }

  const auto& surfaces = task.surface_union();
  std::vector<double> logits(surfaces.size());
  double target_logit = 0.0;
  bool found = false;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    double bias = 0.0;
    auto bit = config_.label_bias.find(surfaces[i]);
    if (bit != config_.label_bias.end()) bias = bit->second;
    logits[i] = bias + config_.context_weight * match[task.label_of_surface(surfaces[i])];
    if (surfaces[i] == continuation) {
      target_logit = logits[i];
      found = true;
    }
  }
  if (!found)
    throw std::invalid_argument("SyntheticOracle: continuation missing from resolved task");

  double total = target_logit - log_sum_exp(logits);
  if (match[gold_label] == 1) total -= config_.planted_strength * planted_hits;

  auto chunks = segment_continuation(continuation);
  std::vector<TokenScore> out;
  out.reserve(chunks.size());
  const double per_chunk = total / static_cast<double>(chunks.size());
  for (const auto& chunk : chunks) out.push_back(TokenScore{chunk, per_chunk});
  return out;
}

}  // namespace suffixrl
