#include "suffixrl/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

namespace {

using nlohmann::json;

std::vector<double> row_log_probs(const LogitMatrix& logits, double temperature, std::size_t i) {
  if (i >= logits.k) throw std::invalid_argument("position index out of range");
  std::vector<double> scaled(logits.v);
  for (std::size_t v = 0; v < logits.v; ++v) scaled[v] = logits.at(i, v) / temperature;
  const double lse = log_sum_exp(scaled);
  for (double& s : scaled) s -= lse;
  return scaled;
}

std::vector<double> row_probs(const LogitMatrix& logits, double temperature, std::size_t i) {
  auto lp = row_log_probs(logits, temperature, i);
  for (double& x : lp) x = std::exp(x);
  return lp;
}

}  // namespace

std::vector<double> PolicySnapshot::position_probs(std::size_t i) const {
  return row_probs(logits, temperature, i);
}

std::vector<double> PolicySnapshot::position_log_probs(std::size_t i) const {
  return row_log_probs(logits, temperature, i);
}

double PolicySnapshot::log_prob(const Suffix& suffix) const {
  if (suffix.token_ids.size() != logits.k)
    throw std::invalid_argument("log_prob: suffix length does not match policy K");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.k; ++i) {
    const int t = suffix.token_ids[i];
    if (t < 0 || static_cast<std::size_t>(t) >= logits.v)
      throw std::invalid_argument("log_prob: token id out of range");
    total += position_log_probs(i)[static_cast<std::size_t>(t)];
  }
  return total;
}

SuffixPolicy::SuffixPolicy(std::shared_ptr<const AttackVocabulary> vocab, std::size_t k,
                           double temperature, double temperature_floor)
    : vocab_(std::move(vocab)), temperature_floor_(temperature_floor) {
  if (!vocab_) throw std::invalid_argument("SuffixPolicy: null vocabulary");
  if (k == 0) throw std::invalid_argument("SuffixPolicy: K must be >= 1");
  if (!(temperature_floor_ > 0.0))
    throw std::invalid_argument("SuffixPolicy: temperature floor must be > 0");
  if (!std::isfinite(temperature))
    throw std::invalid_argument("SuffixPolicy: non-finite temperature");
  logits_ = LogitMatrix::zeros(k, static_cast<std::size_t>(vocab_->size()));
  if (temperature < temperature_floor_) {
    temperature_ = temperature_floor_;
    ++temperature_clamps_;
  } else {
    temperature_ = temperature;
  }
}

void SuffixPolicy::set_temperature(double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("set_temperature: non-finite value");
  if (t < temperature_floor_) {
    temperature_ = temperature_floor_;
    ++temperature_clamps_;
  } else {
    temperature_ = t;
  }
}

std::vector<double> SuffixPolicy::position_probs(std::size_t i) const {
  return row_probs(logits_, temperature_, i);
}

std::vector<double> SuffixPolicy::position_log_probs(std::size_t i) const {
  return row_log_probs(logits_, temperature_, i);
}

std::vector<Suffix> sample(const SuffixPolicy& policy, int n, std::uint64_t rng_seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  Rng rng(rng_seed);
  // Per-position CDFs, computed once.
  std::vector<std::vector<double>> cdfs(policy.k());
  for (std::size_t i = 0; i < policy.k(); ++i) {
    auto p = policy.position_probs(i);
    double cum = 0.0;
    for (double& x : p) {
      cum += x;
      x = cum;
    }
    cdfs[i] = std::move(p);
  }
  std::vector<Suffix> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::vector<int> ids(policy.k());
    for (std::size_t i = 0; i < policy.k(); ++i) {
      const double u = rng.next_double();
      const auto& cdf = cdfs[i];
      std::size_t pick = cdf.size() - 1;
      for (std::size_t v = 0; v < cdf.size(); ++v) {
        if (u < cdf[v]) {
          pick = v;
          break;
        }
      }
      ids[i] = static_cast<int>(pick);
    }
    out.push_back(make_suffix(policy.vocab(), std::move(ids)));
  }
  return out;
}

double log_prob(const SuffixPolicy& policy, const Suffix& suffix) {
  if (suffix.token_ids.size() != policy.k())
    throw std::invalid_argument("log_prob: suffix length does not match policy K");
  double total = 0.0;
  for (std::size_t i = 0; i < policy.k(); ++i) {
    const int t = suffix.token_ids[i];
    if (t < 0 || static_cast<std::size_t>(t) >= policy.vocab_size())
      throw std::invalid_argument("log_prob: token id out of range");
    total += policy.position_log_probs(i)[static_cast<std::size_t>(t)];
  }
  return total;
}

double entropy(const SuffixPolicy& policy) {
  double total = 0.0;
  for (std::size_t i = 0; i < policy.k(); ++i) {
    const auto lp = policy.position_log_probs(i);
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    total += h;
  }
  return total;
}

double kl_to_uniform(const SuffixPolicy& policy) {
  const double log_v = std::log(static_cast<double>(policy.vocab_size()));
  double total = 0.0;
  for (std::size_t i = 0; i < policy.k(); ++i) {
    const auto lp = policy.position_log_probs(i);
    double kl = 0.0;
    for (double l : lp) kl += std::exp(l) * (l + log_v);
    total += kl;
  }
  return total;
}

double kl_to_snapshot(const SuffixPolicy& policy, const PolicySnapshot& snap) {
  if (!policy.logits().same_shape(snap.logits))
    throw std::invalid_argument("kl_to_snapshot: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < policy.k(); ++i) {
    const auto lp = policy.position_log_probs(i);
    const auto lq = snap.position_log_probs(i);
    double kl = 0.0;
    for (std::size_t v = 0; v < lp.size(); ++v) kl += std::exp(lp[v]) * (lp[v] - lq[v]);
    total += kl;
  }
  return total;
}

PolicySnapshot snapshot(const SuffixPolicy& policy) {
  return PolicySnapshot{policy.logits(), policy.temperature()};
}

LogitMatrix grad_log_prob(const SuffixPolicy& policy, const Suffix& suffix) {
  if (suffix.token_ids.size() != policy.k())
    throw std::invalid_argument("grad_log_prob: suffix length does not match policy K");
  LogitMatrix g = LogitMatrix::zeros(policy.k(), policy.vocab_size());
  const double tau = policy.temperature();
  for (std::size_t i = 0; i < policy.k(); ++i) {
    const int t = suffix.token_ids[i];
    if (t < 0 || static_cast<std::size_t>(t) >= policy.vocab_size())
      throw std::invalid_argument("grad_log_prob: token id out of range");
    const auto p = policy.position_probs(i);
    for (std::size_t v = 0; v < p.size(); ++v) {
      const double indicator = static_cast<std::size_t>(t) == v ? 1.0 : 0.0;
      g.at(i, v) = (indicator - p[v]) / tau;
    }
  }
  return g;
}

LogitMatrix grad_entropy(const SuffixPolicy& policy) {
  LogitMatrix g = LogitMatrix::zeros(policy.k(), policy.vocab_size());
  const double tau = policy.temperature();
  for (std::size_t i = 0; i < policy.k(); ++i) {
    const auto lp = policy.position_log_probs(i);
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    for (std::size_t v = 0; v < lp.size(); ++v)
      g.at(i, v) = -(std::exp(lp[v]) / tau) * (lp[v] + h);
  }
  return g;
}

LogitMatrix grad_kl_uniform(const SuffixPolicy& policy) {
  LogitMatrix g = grad_entropy(policy);
  for (double& x : g.data) x = -x;
  return g;
}

LogitMatrix grad_kl_snapshot(const SuffixPolicy& policy, const PolicySnapshot& snap) {
  if (!policy.logits().same_shape(snap.logits))
    throw std::invalid_argument("grad_kl_snapshot: shape mismatch");
  LogitMatrix g = LogitMatrix::zeros(policy.k(), policy.vocab_size());
  const double tau = policy.temperature();
  for (std::size_t i = 0; i < policy.k(); ++i) {
    const auto lp = policy.position_log_probs(i);
    const auto lq = snap.position_log_probs(i);
    double kl = 0.0;
    for (std::size_t v = 0; v < lp.size(); ++v) kl += std::exp(lp[v]) * (lp[v] - lq[v]);
    for (std::size_t v = 0; v < lp.size(); ++v)
      g.at(i, v) = (std::exp(lp[v]) / tau) * ((lp[v] - lq[v]) - kl);
  }
  return g;
}

std::vector<int> argmax_ids(const SuffixPolicy& policy) {
  std::vector<int> ids(policy.k());
  for (std::size_t i = 0; i < policy.k(); ++i) {
    std::size_t best = 0;
    for (std::size_t v = 1; v < policy.vocab_size(); ++v)
      if (policy.logits().at(i, v) > policy.logits().at(i, best)) best = v;
    ids[i] = static_cast<int>(best);
  }
  return ids;
}

std::string policy_to_json(const SuffixPolicy& policy) {
  json j;
  j["k"] = policy.k();
  j["vocab_hash"] = hash_hex(policy.vocab().content_hash());
  j["temperature"] = policy.temperature();
  json rows = json::array();
  for (std::size_t i = 0; i < policy.k(); ++i) {
    json row = json::array();
    for (std::size_t v = 0; v < policy.vocab_size(); ++v) row.push_back(policy.logits().at(i, v));
    rows.push_back(std::move(row));
  }
  j["logits"] = std::move(rows);
  return j.dump(2) + "\n";
}

void save_policy(const SuffixPolicy& policy, const std::filesystem::path& path) {
  write_text_file(path, policy_to_json(policy));
}

SuffixPolicy load_policy(const std::filesystem::path& path,
                         std::shared_ptr<const AttackVocabulary> vocab,
                         double temperature_floor) {
  if (!vocab) throw std::invalid_argument("load_policy: null vocabulary");
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("load_policy: malformed JSON in " + path.string() + ": " + e.what());
  }
  for (const char* key : {"k", "vocab_hash", "temperature", "logits"})
    if (!j.contains(key))
      throw ConfigError(std::string("load_policy: missing key '") + key + "'");
  const auto stored_hash = j["vocab_hash"].get<std::string>();
  if (stored_hash != hash_hex(vocab->content_hash()))
    throw ConfigError("load_policy: vocab_hash mismatch (policy was trained on a different "
                      "vocabulary)");
  const auto k = j["k"].get<std::size_t>();
  const auto& rows = j["logits"];
  if (!rows.is_array() || rows.size() != k)
    throw ConfigError("load_policy: logits row count does not match k");
  SuffixPolicy policy(std::move(vocab), k, j["temperature"].get<double>(), temperature_floor);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.size() != policy.vocab_size())
      throw ConfigError("load_policy: logits column count does not match vocabulary size");
    for (std::size_t v = 0; v < policy.vocab_size(); ++v) {
      const double x = row[v].get<double>();
      if (!std::isfinite(x)) throw ConfigError("load_policy: non-finite logit");
      policy.mutable_logits().at(i, v) = x;
    }
  }
  return policy;
}

}  // namespace suffixrl
