#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "suffixrl/prompt.hpp"
#include "suffixrl/vocab.hpp"

namespace suffixrl {

// Dense K x |V| matrix of doubles, used for logits and gradients.
struct LogitMatrix {
  std::size_t k = 0;
  std::size_t v = 0;
  std::vector<double> data;  // row-major, data[i * v + j]

  static LogitMatrix zeros(std::size_t k, std::size_t v) {
    LogitMatrix m;
    m.k = k;
    m.v = v;
    m.data.assign(k * v, 0.0);
    return m;
  }
  double& at(std::size_t i, std::size_t j) { return data[i * v + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * v + j]; }
  bool same_shape(const LogitMatrix& o) const { return k == o.k && v == o.v; }
};

// Frozen copy of the policy parameters at a synchronization point.
struct PolicySnapshot {
  LogitMatrix logits;
  double temperature = 1.0;

  std::vector<double> position_probs(std::size_t i) const;
  std::vector<double> position_log_probs(std::size_t i) const;
  double log_prob(const Suffix& suffix) const;
};

// Factored categorical policy over suffixes: position i draws token t_i from
// softmax(logits[i] / temperature), independently across positions. Logits
// start at zero (exact uniform). Setting the temperature below the floor
// clamps to the floor and counts a warning.
class SuffixPolicy {
 public:
  SuffixPolicy(std::shared_ptr<const AttackVocabulary> vocab, std::size_t k,
               double temperature = 1.0, double temperature_floor = 0.2);

  std::size_t k() const { return logits_.k; }
  std::size_t vocab_size() const { return logits_.v; }
  const AttackVocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const AttackVocabulary> vocab_ptr() const { return vocab_; }

  const LogitMatrix& logits() const { return logits_; }
  LogitMatrix& mutable_logits() { return logits_; }

  double temperature() const { return temperature_; }
  double temperature_floor() const { return temperature_floor_; }
  void set_temperature(double t);
  // How many times a set_temperature call had to be clamped to the floor.
  std::uint64_t temperature_clamps() const { return temperature_clamps_; }

  std::vector<double> position_probs(std::size_t i) const;
  std::vector<double> position_log_probs(std::size_t i) const;

 private:
  std::shared_ptr<const AttackVocabulary> vocab_;
  LogitMatrix logits_;
  double temperature_;
  double temperature_floor_;
  std::uint64_t temperature_clamps_ = 0;
};

// n suffixes, each position drawn independently; reproducible from the seed.
std::vector<Suffix> sample(const SuffixPolicy& policy, int n, std::uint64_t rng_seed);

// Sum over positions of log softmax(logits[i]/tau)[t_i]. Throws
// std::invalid_argument on length mismatch or out-of-range token ids.
double log_prob(const SuffixPolicy& policy, const Suffix& suffix);

// Sum of per-position entropies, natural log.
double entropy(const SuffixPolicy& policy);

// Sum over positions of KL(pi_i || Uniform(|V|)).
double kl_to_uniform(const SuffixPolicy& policy);

// Sum over positions of KL(pi_i || snapshot_i). Throws on shape mismatch.
double kl_to_snapshot(const SuffixPolicy& policy, const PolicySnapshot& snap);

PolicySnapshot snapshot(const SuffixPolicy& policy);

// Closed-form Jacobians with respect to theta (all at the current
// temperature tau, with p the per-position softmax):
//   d log pi(s) / d theta_{i,v}   = (1[v = t_i] - p_{i,v}) / tau
//   d H / d theta_{i,v}           = -(p_{i,v}/tau) (log p_{i,v} + H_i)
//   d KL(p||U) / d theta_{i,v}    =  (p_{i,v}/tau) (log p_{i,v} + H_i)
//   d KL(p||q) / d theta_{i,v}    =  (p_{i,v}/tau) (log(p_{i,v}/q_{i,v}) - KL_i)
LogitMatrix grad_log_prob(const SuffixPolicy& policy, const Suffix& suffix);
LogitMatrix grad_entropy(const SuffixPolicy& policy);
LogitMatrix grad_kl_uniform(const SuffixPolicy& policy);
LogitMatrix grad_kl_snapshot(const SuffixPolicy& policy, const PolicySnapshot& snap);

// Per-position argmax token ids; ties go to the lowest id.
std::vector<int> argmax_ids(const SuffixPolicy& policy);

// Persistence: JSON {k, vocab_hash, temperature, logits}. Loading verifies
// the stored vocab_hash against the supplied vocabulary.
std::string policy_to_json(const SuffixPolicy& policy);
void save_policy(const SuffixPolicy& policy, const std::filesystem::path& path);
SuffixPolicy load_policy(const std::filesystem::path& path,
                         std::shared_ptr<const AttackVocabulary> vocab,
                         double temperature_floor = 0.2);

}  // namespace suffixrl
