#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "suffixrl/oracle.hpp"
#include "suffixrl/task.hpp"

namespace suffixrl {

struct RewardConfig {
  double lambda_fluency = 0.1;    // weight of the LM cross-entropy penalty
  double beta_kl_uniform = 0.01;  // weight of the KL-to-uniform penalty
  double baseline_decay = 0.9;    // EMA decay of the per-task baseline

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

// Per-task exponential moving average of shaped rewards. An uninitialized
// task starts at the first observed reward; afterwards
// b' = decay * b + (1 - decay) * r.
class BaselineTracker {
 public:
  explicit BaselineTracker(double decay);

  // Returns total_reward minus the current baseline (0 on the first
  // observation), then applies the moving-average update.
  double advantage(const std::string& task_name, double total_reward);

  // Applies the moving-average update without computing an advantage, for
  // callers that batch several advantages against one baseline read.
  void observe(const std::string& task_name, double reward);

  std::optional<double> peek(const std::string& task_name) const;
  double decay() const { return decay_; }

 private:
  double decay_;
  std::map<std::string, double> baselines_;
};

struct ShapedReward {
  double r_cal = 0.0;
  double fluency_ce = 0.0;
  double kl_uniform = 0.0;
  double total = 0.0;      // r_cal - lambda_fl * fluency_ce - beta * kl_uniform
  double advantage = 0.0;  // total - baseline at computation time
};

// -sequence_logprob of the surface given the wrapped (possibly attacked)
// prompt. The surface must belong to one of the task's labels.
double context_ce(const ScoringOracle& oracle, const TaskSpec& task, const TaskInstance& instance,
                  const std::string& suffix_text, const std::string& surface);

// -sequence_logprob of the surface given the bare answer prefix; independent
// of instance and suffix.
double null_ce(const ScoringOracle& oracle, const TaskSpec& task, const std::string& surface);

// ctx - null; may be negative. Throws std::invalid_argument on non-finite
// input.
double calibrated_ce(double ctx, double null_value);

// Soft-min over per-surface calibrated cross-entropies:
// -log sum_i exp(-c_i), max-shifted for stability. Throws
// std::invalid_argument on an empty list or non-finite values.
double aggregate_surfaces(const std::vector<double>& calce_values);

// Assembles the shaped reward; `advantage` is left 0 for the caller to fill.
// Throws std::invalid_argument on non-finite inputs.
ShapedReward shaped_reward(const RewardConfig& config, double r_cal, double fluency_ce,
                           double kl_uniform);

}  // namespace suffixrl
