#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "suffixrl/oracle.hpp"
#include "suffixrl/task.hpp"

namespace suffixrl {

// Configuration of the deterministic test-double oracle.
struct SyntheticOracleConfig {
  std::map<std::string, double> label_bias;          // surface -> logit bias
  std::optional<std::vector<std::string>> planted_tokens;
  double planted_strength = 0.0;                     // >= 0
  double context_weight = 0.0;
  std::int64_t seed = 0;

  static SyntheticOracleConfig from_json_text(const std::string& text);
  static SyntheticOracleConfig load(const std::string& path);
  std::string to_json_text() const;
};

// Fully analytic oracle over the surface union of one or more bound tasks.
//
// Scoring a continuation:
//   1. Resolve the owning task: candidates are bound tasks whose surface
//      union contains the continuation; among those, tasks whose answer
//      prefix terminates the prompt are preferred; ties go to binding order.
//   2. Extract the user content from the prompt by inverting the task's
//      wrapper template (the null prompt yields empty content; a prompt that
//      matches no template falls back to the prompt minus any trailing
//      answer prefix).
//   3. match(label) = 1 iff the label id occurs as a whitespace token of the
//      content. Base logit of each surface in the union is
//      label_bias[surface] + context_weight * match(label(surface)); base
//      log-probabilities are the log-softmax of those logits.
//   4. Planted attack: hits = number of positions where the last
//      |planted_tokens| whitespace tokens of the content equal
//      planted_tokens positionally. The log-probability of every surface of
//      a matched label is lowered by planted_strength * hits, so the gold
//      surface drops by exactly planted_strength per hit and the total mass
//      stays <= 1.
//
// A multi-token surface splits its sequence log-probability equally across
// the segmentation chunks. All state is immutable after construction, so
// concurrent score calls are safe.
class SyntheticOracle : public ScoringOracle {
 public:
  SyntheticOracle(SyntheticOracleConfig config, std::vector<TaskSpec> tasks);

  const OracleInfo& info() const override { return info_; }
  std::vector<TokenScore> score_continuation(const std::string& prompt,
                                             const std::string& continuation) const override;

  const SyntheticOracleConfig& config() const { return config_; }

 private:
  struct Resolved {
    std::size_t task_index;
    std::string label;
  };
  const TaskSpec& resolve_task(const std::string& prompt, const std::string& continuation,
                               std::string* label_out) const;
  std::string extract_content(const TaskSpec& task, const std::string& prompt) const;

  SyntheticOracleConfig config_;
  std::vector<TaskSpec> tasks_;
  // surface -> (task index, label), first binding wins on collisions
  std::map<std::string, Resolved> surface_owner_;
  OracleInfo info_;
};

}  // namespace suffixrl
