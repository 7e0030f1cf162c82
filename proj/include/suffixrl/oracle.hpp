#pragma once

#include <string>
#include <vector>

namespace suffixrl {

// One continuation token with its natural-log probability.
struct TokenScore {
  std::string token;
  double logprob = 0.0;
};

struct OracleInfo {
  std::string name;
  bool deterministic = false;
};

// A frozen model abstracted as a scoring oracle: maps (prompt, continuation)
// to per-token log-probabilities under the oracle's own segmentation of the
// continuation. The segmentation concatenates back to the continuation
// exactly. Implementations must tolerate concurrent score calls.
class ScoringOracle {
 public:
  virtual ~ScoringOracle() = default;

  virtual const OracleInfo& info() const = 0;

  // Throws std::invalid_argument on empty prompt/continuation; oracle errors
  // per implementation (OracleUnavailableError, OracleProtocolError).
  virtual std::vector<TokenScore> score_continuation(const std::string& prompt,
                                                     const std::string& continuation) const = 0;
};

// Sum of per-token logprobs.
double sequence_logprob(const ScoringOracle& oracle, const std::string& prompt,
                        const std::string& continuation);

// Splits text into chunks, each a run of whitespace followed by a run of
// non-whitespace (trailing whitespace attaches to the last chunk), so the
// chunks concatenate back exactly. The segmentation used by the in-process
// oracles.
std::vector<std::string> segment_continuation(const std::string& text);

}  // namespace suffixrl
