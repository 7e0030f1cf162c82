#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "suffixrl/oracle.hpp"

namespace suffixrl {

// Memoizes a deterministic oracle on (prompt, continuation). Semantically
// transparent: wrapped and unwrapped oracles produce identical outputs for
// any call sequence. Concurrent lookups and inserts are allowed; duplicate
// concurrent computation of the same key is tolerated (results are identical
// by determinism, last write wins).
class CachedOracle : public ScoringOracle {
 public:
  // Throws std::invalid_argument when the inner oracle is not deterministic.
  explicit CachedOracle(std::shared_ptr<const ScoringOracle> inner);

  const OracleInfo& info() const override { return info_; }
  std::vector<TokenScore> score_continuation(const std::string& prompt,
                                             const std::string& continuation) const override;

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

 private:
  std::shared_ptr<const ScoringOracle> inner_;
  OracleInfo info_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::pair<std::string, std::string>, std::vector<TokenScore>> cache_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
};

// Convenience wrapper matching the op name.
std::shared_ptr<CachedOracle> cached(std::shared_ptr<const ScoringOracle> oracle);

}  // namespace suffixrl
