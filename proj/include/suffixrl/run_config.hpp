#pragma once

#include <string>
#include <vector>

#include "suffixrl/remote_oracle.hpp"
#include "suffixrl/reward.hpp"
#include "suffixrl/synthetic_oracle.hpp"
#include "suffixrl/trainer.hpp"

namespace suffixrl {

// Which oracle a run talks to, plus the optional memoizing cache.
struct OracleChoice {
  std::string type = "synthetic";  // "synthetic" | "remote"
  SyntheticOracleConfig synthetic;
  RemoteOracleConfig remote;
  bool cache = false;
};

// The single-document run configuration. Unknown keys anywhere are errors.
//
// Schema:
//   {
//     "ppo":    { k, iterations, batch_size, samples_per_iteration,
//                 learning_rate, clip_epsilon, entropy_coeff, kl_old_coeff,
//                 grad_clip_norm, sync_period, inner_epochs, optimizer,
//                 temperature, temperature_floor, oracle_parallelism, seed },
//     "reward": { lambda_fluency, beta_kl_uniform, baseline_decay },
//     "oracle": { "type": "synthetic"|"remote", "cache": bool,
//                 "config": {...synthetic...} | "url"/"timeout_ms"/"retries" },
//     "vocab": "path", "lm_corpus": "path"?,
//     "tasks": ["path", ...], "datasets": ["path", ...],
//     "eval_datasets": ["path", ...]?,
//     "max_input_length": int, "output_dir": "path"
//   }
//
// Environment overrides (applied by apply_env_overrides):
//   SUFFIXRL_ORACLE_URL         -> oracle.url (remote)
//   SUFFIXRL_ORACLE_TIMEOUT_MS  -> oracle.timeout_ms (remote)
struct RunConfig {
  PpoConfig ppo;
  RewardConfig reward;
  OracleChoice oracle;
  std::string vocab_path;
  std::string lm_corpus_path;  // empty = no LM
  std::vector<std::string> task_paths;
  std::vector<std::string> dataset_paths;
  std::vector<std::string> eval_dataset_paths;  // optional, aligned with tasks
  int max_input_length = 256;
  std::string output_dir;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json_text() const;

  // Cross-field checks beyond per-module validate(). Throws ConfigError.
  void validate() const;
};

// Reads SUFFIXRL_ORACLE_URL / SUFFIXRL_ORACLE_TIMEOUT_MS.
void apply_env_overrides(RunConfig& config);

}  // namespace suffixrl
