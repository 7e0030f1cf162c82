#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "suffixrl/ngram_lm.hpp"
#include "suffixrl/oracle.hpp"
#include "suffixrl/policy.hpp"
#include "suffixrl/reward.hpp"
#include "suffixrl/task.hpp"

namespace suffixrl {

struct PpoConfig {
  int k = 4;                        // suffix length
  int iterations = 200;
  int batch_size = 32;              // task instances per iteration
  int samples_per_iteration = 8;    // suffix samples per iteration
  double learning_rate = 5e-2;
  double clip_epsilon = 0.2;        // infinity disables clipping
  double entropy_coeff = 1e-3;      // eta
  double kl_old_coeff = 0.0;        // gamma
  double grad_clip_norm = 1.0;      // global-norm clip
  int sync_period = 4;              // iterations between snapshot refreshes
  int inner_epochs = 1;             // gradient steps per rollout
  std::string optimizer = "adam";   // "adam" | "gd"
  double temperature = 1.0;
  double temperature_floor = 0.2;
  int oracle_parallelism = 1;       // concurrent oracle calls in rollouts
  std::uint64_t seed = 0;

  // Throws ConfigError on invalid values.
  void validate() const;
};

struct DrawnInstance {
  std::size_t task_index = 0;
  TaskInstance instance;
};

struct RolloutBatch {
  std::vector<Suffix> samples;
  std::vector<double> logp_current;               // under the sampling policy
  std::vector<double> logp_old;                   // under the snapshot
  std::vector<DrawnInstance> instances;           // batch_size entries
  std::vector<std::vector<ShapedReward>> rewards; // [sample][instance]
  std::vector<double> advantages;                 // per sample
  double kl_uniform = 0.0;                        // shared across the batch
  double mean_reward = 0.0;                       // mean total over all pairs
};

struct IterationRecord {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
  double surrogate = 0.0;
  double entropy = 0.0;
  double kl_uniform = 0.0;
  double kl_old = 0.0;
  double grad_norm = 0.0;            // pre-clip global norm of the last step
  std::uint64_t nan_incidents = 0;   // cumulative count of skipped updates
};

// One JSON object, single line, no trailing newline. NaN fields (from an
// iteration whose update was skipped) serialize as null.
std::string to_json_line(const IterationRecord& record);

struct TrainingHistory {
  std::vector<IterationRecord> records;
};

// Adam accumulators; persists across iterations, untouched when an update is
// skipped.
struct AdamState {
  LogitMatrix m;
  LogitMatrix v;
  long step = 0;
};

// Draws batch_size instances round-robin across tasks (within-task order is
// a per-epoch seeded shuffle advanced by a stateless cursor), samples
// suffixes from the policy, scores every (sample, instance) pair, and fills
// advantages against per-task baselines. Baselines update once per task with
// the iteration's mean total reward; an unseen task's baseline seeds at that
// mean, so its first-iteration advantages are centered.
// Throws NanGuardError when any reward input is non-finite and
// OracleUnavailableError/OracleProtocolError from the oracle.
RolloutBatch sample_rollout(const PpoConfig& config, const RewardConfig& reward_config,
                            const std::vector<TaskSpec>& tasks,
                            const std::vector<std::vector<TaskInstance>>& datasets,
                            const SuffixPolicy& policy, const PolicySnapshot& snapshot,
                            const ScoringOracle& oracle, const NgramLm* lm,
                            BaselineTracker& tracker, int iteration);

// Mean over samples of min(r * A, clip(r, 1 - eps, 1 + eps) * A) with
// r = exp(logp_current - logp_old) recomputed from the given policy and
// snapshot. Throws NanGuardError on a non-finite ratio.
double ppo_surrogate(const SuffixPolicy& policy, const PolicySnapshot& snapshot,
                     const RolloutBatch& batch, double clip_epsilon);

// Analytic gradient of the loss
//   -L_PPO - eta * H[pi] + gamma * KL(pi || pi_old)
// with respect to theta. Samples whose clipped branch is selected contribute
// zero policy gradient. Throws NanGuardError on non-finite entries.
LogitMatrix objective_gradient(const SuffixPolicy& policy, const PolicySnapshot& snapshot,
                               const RolloutBatch& batch, const PpoConfig& config);

// Global-norm clip followed by one optimizer step (plain descent or Adam per
// config), then re-asserts the temperature floor. Returns the pre-clip
// gradient norm. Throws NanGuardError on non-finite gradients; the policy is
// untouched in that case.
double apply_update(SuffixPolicy& policy, const LogitMatrix& gradient, const PpoConfig& config,
                    AdamState* adam);

struct TrainResult {
  SuffixPolicy policy;
  Suffix best_suffix;   // per-position argmax, ties to the lowest token id
  TrainingHistory history;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

// The training loop. Deterministic given (config, tasks, datasets, a
// deterministic oracle). An iteration whose rollout or gradient trips the
// NaN guard is recorded (reward-dependent fields as NaN) and skipped without
// touching the policy or optimizer state. OracleUnavailableError aborts the
// run with TrainAbortedError carrying the last completed iteration.
TrainResult train(const PpoConfig& config, const RewardConfig& reward_config,
                  std::shared_ptr<const AttackVocabulary> vocab,
                  const std::vector<TaskSpec>& tasks,
                  const std::vector<std::vector<TaskInstance>>& datasets,
                  const ScoringOracle& oracle, const NgramLm* lm = nullptr,
                  const IterationObserver& observer = {});

}  // namespace suffixrl
