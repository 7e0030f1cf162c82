#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "suffixrl/prompt.hpp"
#include "suffixrl/run_config.hpp"
#include "suffixrl/synthetic_oracle.hpp"
#include "suffixrl/task.hpp"
#include "suffixrl/vocab.hpp"

namespace suffixrl {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Immutable record of a run's inputs, written before training starts.
// File hashes let a later eval/report invocation detect post-hoc edits.
struct RunManifest {
  std::string artifact_version = kArtifactVersion;
  std::int64_t created_unix = 0;
  nlohmann::json config;                             // normalized snapshot
  std::map<std::string, std::string> file_hashes;    // resolved path -> fnv64
  std::string oracle_name;
  bool oracle_deterministic = false;
  std::map<std::string, std::string> outputs;        // logical name -> file
  int truncated_instances = 0;

  std::string to_json_text() const;
  static RunManifest from_json_text(const std::string& text);
};

// Uniform i.i.d. suffix draw, the sanity comparator for reports.
Suffix random_suffix_baseline(const AttackVocabulary& vocab, int k, std::uint64_t seed);

// best_suffix.json round-trip. Loading checks the stored vocab_hash.
void write_suffix_json(const Suffix& suffix, const AttackVocabulary& vocab,
                       const std::filesystem::path& path);
Suffix read_suffix_json(const std::filesystem::path& path, const AttackVocabulary& vocab);

// The deterministic convergence fixture: a 32-token vocabulary, a two-label
// task whose instances mention their gold label, a planted 4-token suffix,
// and a pair of oracle configs (one lowered by planted hits, one blind to
// them).
struct PlantedFixture {
  std::shared_ptr<const AttackVocabulary> vocab;
  std::vector<TaskSpec> tasks;
  std::vector<std::vector<TaskInstance>> train_data;
  std::vector<std::vector<TaskInstance>> eval_data;
  std::vector<std::string> planted_tokens;
  std::vector<int> planted_ids;
  SyntheticOracleConfig sensitive;    // planted_strength 2.0
  SyntheticOracleConfig insensitive;  // planted_strength 0
};
PlantedFixture make_planted_fixture();

// Training runs end to end: config -> manifest, history.jsonl, policy.json,
// best_suffix.txt, best_suffix.json under output_dir. Relative paths in the
// config resolve against base_dir.
void run_train(const RunConfig& config, const std::filesystem::path& base_dir);

// CLI dispatch; exit 0 on success, 1 on usage error, 2 on runtime failure.
int run_command(int argc, const char* const* argv);

}  // namespace suffixrl
