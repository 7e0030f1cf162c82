#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "suffixrl/oracle.hpp"

namespace suffixrl {

// Bigram language model with add-1 smoothing over whitespace tokens, trained
// on a small checked-in corpus. Stands in for the frozen model's own language
// modeling distribution when scoring suffix fluency.
//
//   P(t)        = (count(t) + 1) / (N + |V|)
//   P(b | a)    = (count(a,b) + 1) / (count(a) + |V|)
//
// where N is the corpus token count and |V| the distinct-token count. The
// first token of a sequence is scored by the unigram, the rest by the bigram.
class NgramLm : public ScoringOracle {
 public:
  explicit NgramLm(const std::string& corpus_text);
  static NgramLm from_corpus_file(const std::string& path);

  const OracleInfo& info() const override { return info_; }

  // Scores the continuation unconditionally; the prompt only passes the
  // non-empty guard.
  std::vector<TokenScore> score_continuation(const std::string& prompt,
                                             const std::string& continuation) const override;

  double unigram_logprob(const std::string& token) const;
  double bigram_logprob(const std::string& prev, const std::string& cur) const;

  std::size_t corpus_tokens() const { return total_; }
  std::size_t vocab_size() const { return unigram_.size(); }

 private:
  std::map<std::string, std::int64_t> unigram_;
  std::map<std::pair<std::string, std::string>, std::int64_t> bigram_;
  std::int64_t total_ = 0;
  OracleInfo info_;
};

// Mean negative log-probability per whitespace token of suffix_text.
// Throws std::invalid_argument when suffix_text has no tokens.
double lm_cross_entropy(const NgramLm& lm, const std::string& suffix_text);

}  // namespace suffixrl
