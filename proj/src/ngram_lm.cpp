#include "suffixrl/ngram_lm.hpp"

#include <cmath>
#include <stdexcept>

#include "suffixrl/util.hpp"

namespace suffixrl {

NgramLm::NgramLm(const std::string& corpus_text) {
  auto tokens = split_whitespace(corpus_text);
  if (tokens.empty()) throw std::invalid_argument("NgramLm: empty corpus");
  total_ = static_cast<std::int64_t>(tokens.size());
  for (const auto& t : tokens) ++unigram_[t];
  for (std::size_t i = 1; i < tokens.size(); ++i) ++bigram_[{tokens[i - 1], tokens[i]}];
  info_.name = "ngram-lm";
  info_.deterministic = true;
}

NgramLm NgramLm::from_corpus_file(const std::string& path) {
  return NgramLm(read_text_file(path));
}

double NgramLm::unigram_logprob(const std::string& token) const {
  auto it = unigram_.find(token);
  const double count = it == unigram_.end() ? 0.0 : static_cast<double>(it->second);
  const double v = static_cast<double>(unigram_.size());
  return std::log((count + 1.0) / (static_cast<double>(total_) + v));
}

double NgramLm::bigram_logprob(const std::string& prev, const std::string& cur) const {
  auto pit = unigram_.find(prev);
  const double prev_count = pit == unigram_.end() ? 0.0 : static_cast<double>(pit->second);
  auto bit = bigram_.find({prev, cur});
  const double pair_count = bit == bigram_.end() ? 0.0 : static_cast<double>(bit->second);
  const double v = static_cast<double>(unigram_.size());
  return std::log((pair_count + 1.0) / (prev_count + v));
}

std::vector<TokenScore> NgramLm::score_continuation(const std::string& prompt,
                                                    const std::string& continuation) const {
  if (prompt.empty()) throw std::invalid_argument("score_continuation: empty prompt");
  if (continuation.empty()) throw std::invalid_argument("score_continuation: empty continuation");
  auto tokens = split_whitespace(continuation);
  if (tokens.empty())
    throw std::invalid_argument("score_continuation: continuation has no tokens");
  auto chunks = segment_continuation(continuation);

  std::vector<TokenScore> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double lp =
        i == 0 ? unigram_logprob(tokens[i]) : bigram_logprob(tokens[i - 1], tokens[i]);
    out.push_back(TokenScore{chunks[i], lp});
  }
  return out;
}

double lm_cross_entropy(const NgramLm& lm, const std::string& suffix_text) {
  auto tokens = split_whitespace(suffix_text);
  if (tokens.empty()) throw std::invalid_argument("lm_cross_entropy: empty suffix");
  double total = -lm.unigram_logprob(tokens[0]);
  for (std::size_t i = 1; i < tokens.size(); ++i)
    total -= lm.bigram_logprob(tokens[i - 1], tokens[i]);
  return total / static_cast<double>(tokens.size());
}

}  // namespace suffixrl
