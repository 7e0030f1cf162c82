#include "suffixrl/cached_oracle.hpp"

#include <mutex>
#include <stdexcept>

namespace suffixrl {

CachedOracle::CachedOracle(std::shared_ptr<const ScoringOracle> inner) : inner_(std::move(inner)) {
  if (!inner_) throw std::invalid_argument("CachedOracle: null inner oracle");
  if (!inner_->info().deterministic)
    throw std::invalid_argument("CachedOracle: inner oracle must be deterministic");
  info_.name = "cached(" + inner_->info().name + ")";
  info_.deterministic = true;
}

std::vector<TokenScore> CachedOracle::score_continuation(const std::string& prompt,
                                                         const std::string& continuation) const {
  const std::pair<std::string, std::string> key{prompt, continuation};
  {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  auto result = inner_->score_continuation(prompt, continuation);
  ++misses_;
  {
    std::unique_lock lock(mutex_);
    cache_[key] = result;
  }
  return result;
}

std::shared_ptr<CachedOracle> cached(std::shared_ptr<const ScoringOracle> oracle) {
  return std::make_shared<CachedOracle>(std::move(oracle));
}

}  // namespace suffixrl
