#include "suffixrl/reward.hpp"

#include <cmath>
#include <stdexcept>

#include "suffixrl/errors.hpp"
#include "suffixrl/prompt.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

void RewardConfig::validate() const {
  if (!(lambda_fluency >= 0.0)) throw ConfigError("reward: lambda_fluency must be >= 0");
  if (!(beta_kl_uniform >= 0.0)) throw ConfigError("reward: beta_kl_uniform must be >= 0");
  if (!(baseline_decay > 0.0 && baseline_decay < 1.0))
    throw ConfigError("reward: baseline_decay must be in (0,1)");
}

BaselineTracker::BaselineTracker(double decay) : decay_(decay) {
  if (!(decay > 0.0 && decay < 1.0))
    throw std::invalid_argument("BaselineTracker: decay must be in (0,1)");
}

double BaselineTracker::advantage(const std::string& task_name, double total_reward) {
  if (!std::isfinite(total_reward))
    throw std::invalid_argument("BaselineTracker: non-finite reward");
  auto it = baselines_.find(task_name);
  double adv;
  if (it == baselines_.end()) {
    adv = 0.0;
    baselines_[task_name] = total_reward;
  } else {
    adv = total_reward - it->second;
    it->second = decay_ * it->second + (1.0 - decay_) * total_reward;
  }
  return adv;
}

void BaselineTracker::observe(const std::string& task_name, double reward) {
  if (!std::isfinite(reward)) throw std::invalid_argument("BaselineTracker: non-finite reward");
  auto it = baselines_.find(task_name);
  if (it == baselines_.end())
    baselines_[task_name] = reward;
  else
    it->second = decay_ * it->second + (1.0 - decay_) * reward;
}

std::optional<double> BaselineTracker::peek(const std::string& task_name) const {
  auto it = baselines_.find(task_name);
  if (it == baselines_.end()) return std::nullopt;
  return it->second;
}

double context_ce(const ScoringOracle& oracle, const TaskSpec& task, const TaskInstance& instance,
                  const std::string& suffix_text, const std::string& surface) {
  if (task.label_of_surface(surface).empty())
    throw std::invalid_argument("context_ce: surface '" + surface +
                                "' is not in any label's surface set");
  auto bundle = wrap_prompt(task, instance, suffix_text);
  return -sequence_logprob(oracle, bundle.prompt_text, surface);
}

double null_ce(const ScoringOracle& oracle, const TaskSpec& task, const std::string& surface) {
  if (task.label_of_surface(surface).empty())
    throw std::invalid_argument("null_ce: surface '" + surface +
                                "' is not in any label's surface set");
  auto bundle = null_prompt(task);
  return -sequence_logprob(oracle, bundle.prompt_text, surface);
}

double calibrated_ce(double ctx, double null_value) {
  if (!std::isfinite(ctx) || !std::isfinite(null_value))
    throw std::invalid_argument("calibrated_ce: non-finite input");
  return ctx - null_value;
}

double aggregate_surfaces(const std::vector<double>& calce_values) {
  if (calce_values.empty()) throw std::invalid_argument("aggregate_surfaces: empty list");
  std::vector<double> negated;
  negated.reserve(calce_values.size());
  for (double c : calce_values) {
    if (!std::isfinite(c)) throw std::invalid_argument("aggregate_surfaces: non-finite value");
    negated.push_back(-c);
  }
  return -log_sum_exp(negated);
}

ShapedReward shaped_reward(const RewardConfig& config, double r_cal, double fluency_ce,
                           double kl_uniform) {
  if (!std::isfinite(r_cal) || !std::isfinite(fluency_ce) || !std::isfinite(kl_uniform))
    throw std::invalid_argument("shaped_reward: non-finite input");
  ShapedReward r;
  r.r_cal = r_cal;
  r.fluency_ce = fluency_ce;
  r.kl_uniform = kl_uniform;
  r.total = r_cal - config.lambda_fluency * fluency_ce - config.beta_kl_uniform * kl_uniform;
  r.advantage = 0.0;
  return r;
}

}  // namespace suffixrl
