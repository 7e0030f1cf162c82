#include "suffixrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

namespace {

using nlohmann::json;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Seed-stream tags; distinct per purpose so streams never collide.
constexpr std::uint64_t kStreamSuffixSampling = 1;
constexpr std::uint64_t kStreamTaskShuffleBase = 1000;

json nullable(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

void PpoConfig::validate() const {
  if (k < 1) throw ConfigError("ppo: k must be >= 1");
  if (iterations < 0) throw ConfigError("ppo: iterations must be >= 0");
  if (batch_size < 1) throw ConfigError("ppo: batch_size must be >= 1");
  if (samples_per_iteration < 1) throw ConfigError("ppo: samples_per_iteration must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning_rate must be > 0");
  const bool eps_ok =
      (clip_epsilon > 0.0 && clip_epsilon < 1.0) || std::isinf(clip_epsilon);
  if (!eps_ok) throw ConfigError("ppo: clip_epsilon must be in (0,1) or infinity");
  if (!(entropy_coeff >= 0.0)) throw ConfigError("ppo: entropy_coeff must be >= 0");
  if (!(kl_old_coeff >= 0.0)) throw ConfigError("ppo: kl_old_coeff must be >= 0");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("ppo: grad_clip_norm must be > 0");
  if (sync_period < 1) throw ConfigError("ppo: sync_period must be >= 1");
  if (inner_epochs < 1) throw ConfigError("ppo: inner_epochs must be >= 1");
  if (optimizer != "adam" && optimizer != "gd")
    throw ConfigError("ppo: optimizer must be \"adam\" or \"gd\"");
  if (!(temperature_floor > 0.0)) throw ConfigError("ppo: temperature_floor must be > 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("ppo: temperature must be positive and finite");
  if (oracle_parallelism < 1) throw ConfigError("ppo: oracle_parallelism must be >= 1");
}

RolloutBatch sample_rollout(const PpoConfig& config, const RewardConfig& reward_config,
                            const std::vector<TaskSpec>& tasks,
                            const std::vector<std::vector<TaskInstance>>& datasets,
                            const SuffixPolicy& policy, const PolicySnapshot& snapshot,
                            const ScoringOracle& oracle, const NgramLm* lm,
                            BaselineTracker& tracker, int iteration) {
  if (tasks.empty()) throw std::invalid_argument("sample_rollout: no tasks");
  if (tasks.size() != datasets.size())
    throw std::invalid_argument("sample_rollout: tasks and datasets differ in count");
  for (std::size_t t = 0; t < tasks.size(); ++t)
    if (datasets[t].empty())
      throw std::invalid_argument("sample_rollout: empty dataset for task " + tasks[t].name());
  if (iteration < 0) throw std::invalid_argument("sample_rollout: negative iteration");

  const std::size_t num_tasks = tasks.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  RolloutBatch out;

  // Round-robin instance draw with a stateless cursor: task t serves n_t
  // slots per iteration, and its global draw index advances iteration by
  // iteration. Each dataset epoch gets its own seeded shuffle, so the order
  // depends only on (seed, task index, epoch).
  std::vector<std::size_t> slots_per_task(num_tasks, batch / num_tasks);
  for (std::size_t t = 0; t < batch % num_tasks; ++t) ++slots_per_task[t];
  std::map<std::pair<std::size_t, std::uint64_t>, std::vector<std::size_t>> epoch_orders;
  std::vector<std::size_t> taken(num_tasks, 0);
  for (std::size_t j = 0; j < batch; ++j) {
    const std::size_t t = j % num_tasks;
    const std::uint64_t cursor =
        static_cast<std::uint64_t>(iteration) * slots_per_task[t] + taken[t]++;
    const std::uint64_t epoch = cursor / datasets[t].size();
    const std::size_t pos = static_cast<std::size_t>(cursor % datasets[t].size());
    auto key = std::make_pair(t, epoch);
    auto it = epoch_orders.find(key);
    if (it == epoch_orders.end()) {
      std::vector<std::size_t> order(datasets[t].size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(config.seed, kStreamTaskShuffleBase + t, epoch));
      seeded_shuffle(order, rng);
      it = epoch_orders.emplace(key, std::move(order)).first;
    }
    out.instances.push_back(DrawnInstance{t, datasets[t][it->second[pos]]});
  }

  out.samples = sample(policy, config.samples_per_iteration,
                       derive_seed(config.seed, kStreamSuffixSampling,
                                   static_cast<std::uint64_t>(iteration)));
  const std::size_t num_samples = out.samples.size();
  out.logp_current.resize(num_samples);
  out.logp_old.resize(num_samples);
  for (std::size_t j = 0; j < num_samples; ++j) {
    out.logp_current[j] = log_prob(policy, out.samples[j]);
    out.logp_old[j] = snapshot.log_prob(out.samples[j]);
  }

  out.kl_uniform = kl_to_uniform(policy);
  if (!std::isfinite(out.kl_uniform)) throw NanGuardError("non-finite KL-to-uniform");

  std::vector<double> fluency(num_samples, 0.0);
  if (lm) {
    for (std::size_t j = 0; j < num_samples; ++j) {
      fluency[j] = lm_cross_entropy(*lm, out.samples[j].rendered);
      if (!std::isfinite(fluency[j])) throw NanGuardError("non-finite fluency CE");
    }
  } else if (reward_config.lambda_fluency > 0.0) {
    throw ConfigError("sample_rollout: lambda_fluency > 0 but no LM supplied");
  }

  // Null-prompt cross-entropies, one oracle call per (task, surface) used.
  std::map<std::pair<std::size_t, std::string>, double> null_values;
  for (const auto& drawn : out.instances) {
    const TaskSpec& task = tasks[drawn.task_index];
    const auto& gold_surfaces = task.surfaces(drawn.instance.gold_label).variants;
    for (const auto& surface : gold_surfaces) {
      auto key = std::make_pair(drawn.task_index, surface);
      if (null_values.count(key)) continue;
      const double nv = null_ce(oracle, task, surface);
      if (!std::isfinite(nv)) throw NanGuardError("non-finite null CE for surface " + surface);
      null_values.emplace(key, nv);
    }
  }

  // Score all (sample, instance) pairs; concurrent oracle fan-out writes
  // only to the slot owned by each flat index.
  out.rewards.assign(num_samples, std::vector<ShapedReward>(batch));
  parallel_for(num_samples * batch, config.oracle_parallelism, [&](std::size_t flat) {
    const std::size_t j = flat / batch;
    const std::size_t i = flat % batch;
    const DrawnInstance& drawn = out.instances[i];
    const TaskSpec& task = tasks[drawn.task_index];
    const auto& gold_surfaces = task.surfaces(drawn.instance.gold_label).variants;
    std::vector<double> calces;
    calces.reserve(gold_surfaces.size());
    for (const auto& surface : gold_surfaces) {
      const double ctx =
          context_ce(oracle, task, drawn.instance, out.samples[j].rendered, surface);
      if (!std::isfinite(ctx)) throw NanGuardError("non-finite context CE for surface " + surface);
      calces.push_back(calibrated_ce(ctx, null_values.at({drawn.task_index, surface})));
    }
    const double r_cal = aggregate_surfaces(calces);
    out.rewards[j][i] = shaped_reward(reward_config, r_cal, fluency[j], out.kl_uniform);
  });

  // Per-task mean rewards; baselines read before this iteration's update.
  std::vector<double> task_sum(num_tasks, 0.0);
  std::vector<std::size_t> task_count(num_tasks, 0);
  double grand_sum = 0.0;
  for (std::size_t j = 0; j < num_samples; ++j) {
    for (std::size_t i = 0; i < batch; ++i) {
      const double total = out.rewards[j][i].total;
      task_sum[out.instances[i].task_index] += total;
      ++task_count[out.instances[i].task_index];
      grand_sum += total;
    }
  }
  out.mean_reward = grand_sum / static_cast<double>(num_samples * batch);

  std::vector<double> baseline(num_tasks, 0.0);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    if (task_count[t] == 0) continue;
    const double mean_t = task_sum[t] / static_cast<double>(task_count[t]);
    auto existing = tracker.peek(tasks[t].name());
    baseline[t] = existing ? *existing : mean_t;
  }

  out.advantages.resize(num_samples);
  for (std::size_t j = 0; j < num_samples; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      ShapedReward& r = out.rewards[j][i];
      r.advantage = r.total - baseline[out.instances[i].task_index];
      sum += r.advantage;
    }
    out.advantages[j] = sum / static_cast<double>(batch);
  }

  for (std::size_t t = 0; t < num_tasks; ++t) {
    if (task_count[t] == 0) continue;
    tracker.observe(tasks[t].name(), task_sum[t] / static_cast<double>(task_count[t]));
  }

  return out;
}

double ppo_surrogate(const SuffixPolicy& policy, const PolicySnapshot& snapshot,
                     const RolloutBatch& batch, double clip_epsilon) {
  if (batch.samples.empty()) throw std::invalid_argument("ppo_surrogate: empty batch");
  const double lo = 1.0 - clip_epsilon;
  const double hi = 1.0 + clip_epsilon;
  double sum = 0.0;
  for (std::size_t j = 0; j < batch.samples.size(); ++j) {
    const double ratio =
        std::exp(log_prob(policy, batch.samples[j]) - snapshot.log_prob(batch.samples[j]));
    if (!std::isfinite(ratio)) throw NanGuardError("non-finite PPO ratio");
    const double a = batch.advantages[j];
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, lo, hi) * a;
    sum += std::min(unclipped, clipped);
  }
  return sum / static_cast<double>(batch.samples.size());
}

LogitMatrix objective_gradient(const SuffixPolicy& policy, const PolicySnapshot& snapshot,
                               const RolloutBatch& batch, const PpoConfig& config) {
  if (batch.samples.empty()) throw std::invalid_argument("objective_gradient: empty batch");
  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;
  const double n = static_cast<double>(batch.samples.size());

  LogitMatrix g = LogitMatrix::zeros(policy.k(), policy.vocab_size());
  for (std::size_t j = 0; j < batch.samples.size(); ++j) {
    const double ratio =
        std::exp(log_prob(policy, batch.samples[j]) - snapshot.log_prob(batch.samples[j]));
    if (!std::isfinite(ratio)) throw NanGuardError("non-finite PPO ratio");
    const double a = batch.advantages[j];
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, lo, hi) * a;
    // The surrogate takes min(unclipped, clipped); only the unclipped branch
    // carries a policy gradient.
    if (unclipped > clipped) continue;
    const LogitMatrix glp = grad_log_prob(policy, batch.samples[j]);
    const double coeff = ratio * a / n;
    for (std::size_t idx = 0; idx < g.data.size(); ++idx)
      g.data[idx] -= coeff * glp.data[idx];  // loss = -surrogate
  }

  if (config.entropy_coeff != 0.0) {
    const LogitMatrix gh = grad_entropy(policy);
    for (std::size_t idx = 0; idx < g.data.size(); ++idx)
      g.data[idx] -= config.entropy_coeff * gh.data[idx];
  }
  if (config.kl_old_coeff != 0.0) {
    const LogitMatrix gk = grad_kl_snapshot(policy, snapshot);
    for (std::size_t idx = 0; idx < g.data.size(); ++idx)
      g.data[idx] += config.kl_old_coeff * gk.data[idx];
  }

  if (!all_finite(g.data)) throw NanGuardError("non-finite objective gradient");
  return g;
}

double apply_update(SuffixPolicy& policy, const LogitMatrix& gradient, const PpoConfig& config,
                    AdamState* adam) {
  if (!gradient.same_shape(policy.logits()))
    throw std::invalid_argument("apply_update: gradient shape mismatch");
  if (!all_finite(gradient.data)) throw NanGuardError("apply_update: non-finite gradient");

  double sq = 0.0;
  for (double x : gradient.data) sq += x * x;
  const double norm = std::sqrt(sq);
  const double scale = norm > config.grad_clip_norm ? config.grad_clip_norm / norm : 1.0;

  LogitMatrix& theta = policy.mutable_logits();
  if (config.optimizer == "gd") {
    for (std::size_t idx = 0; idx < theta.data.size(); ++idx)
      theta.data[idx] -= config.learning_rate * scale * gradient.data[idx];
  } else if (config.optimizer == "adam") {
    if (!adam) throw std::invalid_argument("apply_update: adam optimizer needs AdamState");
    if (adam->m.data.empty()) {
      adam->m = LogitMatrix::zeros(theta.k, theta.v);
      adam->v = LogitMatrix::zeros(theta.k, theta.v);
      adam->step = 0;
    }
    if (!adam->m.same_shape(theta))
      throw std::invalid_argument("apply_update: AdamState shape mismatch");
    ++adam->step;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam->step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam->step));
    for (std::size_t idx = 0; idx < theta.data.size(); ++idx) {
      const double gi = scale * gradient.data[idx];
      adam->m.data[idx] = kAdamBeta1 * adam->m.data[idx] + (1.0 - kAdamBeta1) * gi;
      adam->v.data[idx] = kAdamBeta2 * adam->v.data[idx] + (1.0 - kAdamBeta2) * gi * gi;
      const double mhat = adam->m.data[idx] / bc1;
      const double vhat = adam->v.data[idx] / bc2;
      theta.data[idx] -= config.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  } else {
    throw std::invalid_argument("apply_update: unknown optimizer " + config.optimizer);
  }

  policy.set_temperature(policy.temperature());  // re-assert the floor
  return norm;
}

std::string to_json_line(const IterationRecord& record) {
  json j;
  j["iteration"] = record.iteration;
  j["mean_reward"] = nullable(record.mean_reward);
  j["mean_advantage"] = nullable(record.mean_advantage);
  j["surrogate"] = nullable(record.surrogate);
  j["entropy"] = nullable(record.entropy);
  j["kl_uniform"] = nullable(record.kl_uniform);
  j["kl_old"] = nullable(record.kl_old);
  j["grad_norm"] = nullable(record.grad_norm);
  j["nan_incidents"] = record.nan_incidents;
  return j.dump();
}

TrainResult train(const PpoConfig& config, const RewardConfig& reward_config,
                  std::shared_ptr<const AttackVocabulary> vocab,
                  const std::vector<TaskSpec>& tasks,
                  const std::vector<std::vector<TaskInstance>>& datasets,
                  const ScoringOracle& oracle, const NgramLm* lm,
                  const IterationObserver& observer) {
  config.validate();
  reward_config.validate();
  if (!vocab) throw std::invalid_argument("train: null vocabulary");
  if (tasks.empty()) throw std::invalid_argument("train: no tasks");
  if (tasks.size() != datasets.size())
    throw std::invalid_argument("train: tasks and datasets differ in count");
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (datasets[t].empty()) throw std::invalid_argument("train: empty dataset for " + tasks[t].name());
    vocab->check_answer_prefix(tasks[t].answer_prefix());
  }
  if (reward_config.lambda_fluency > 0.0 && !lm)
    throw ConfigError("train: lambda_fluency > 0 but no LM supplied");

  SuffixPolicy policy(vocab, static_cast<std::size_t>(config.k), config.temperature,
                      config.temperature_floor);
  BaselineTracker tracker(reward_config.baseline_decay);
  AdamState adam;
  PolicySnapshot snap = snapshot(policy);
  TrainingHistory history;
  std::uint64_t nan_total = 0;
  const double quiet_nan = std::numeric_limits<double>::quiet_NaN();

  for (int it = 0; it < config.iterations; ++it) {
    if (it % config.sync_period == 0) snap = snapshot(policy);

    IterationRecord rec;
    rec.iteration = it;
    try {
      RolloutBatch batch = sample_rollout(config, reward_config, tasks, datasets, policy, snap,
                                          oracle, lm, tracker, it);
      const double surrogate0 = ppo_surrogate(policy, snap, batch, config.clip_epsilon);
      double last_norm = 0.0;
      for (int e = 0; e < config.inner_epochs; ++e) {
        const LogitMatrix grad = objective_gradient(policy, snap, batch, config);
        last_norm = apply_update(policy, grad, config, &adam);
      }
      rec.mean_reward = batch.mean_reward;
      double adv_sum = 0.0;
      for (double a : batch.advantages) adv_sum += a;
      rec.mean_advantage = adv_sum / static_cast<double>(batch.advantages.size());
      rec.surrogate = surrogate0;
      rec.grad_norm = last_norm;
    } catch (const NanGuardError&) {
      ++nan_total;
      rec.mean_reward = quiet_nan;
      rec.mean_advantage = quiet_nan;
      rec.surrogate = quiet_nan;
      rec.grad_norm = quiet_nan;
    } catch (const OracleUnavailableError& e) {
      throw TrainAbortedError(
          "training aborted at iteration " + std::to_string(it) + ": " + e.what(), it - 1);
    }

    rec.entropy = entropy(policy);
    rec.kl_uniform = kl_to_uniform(policy);
    rec.kl_old = kl_to_snapshot(policy, snap);
    rec.nan_incidents = nan_total;
    history.records.push_back(rec);
    if (observer) observer(rec);
  }

  Suffix best = make_suffix(*vocab, argmax_ids(policy));
  return TrainResult{std::move(policy), std::move(best), std::move(history)};
}

}  // namespace suffixrl
