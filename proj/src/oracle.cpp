#include "suffixrl/oracle.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace suffixrl {

double sequence_logprob(const ScoringOracle& oracle, const std::string& prompt,
                        const std::string& continuation) {
  auto scores = oracle.score_continuation(prompt, continuation);
  double total = 0.0;
  for (const auto& s : scores) total += s.logprob;
  return total;
}

std::vector<std::string> segment_continuation(const std::string& text) {
  std::vector<std::string> chunks;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    std::size_t start = i;
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    chunks.push_back(text.substr(start, i - start));
  }
  if (chunks.empty()) return chunks;
  // A trailing whitespace run was emitted as its own chunk; merge it back.
  const std::string& last = chunks.back();
  bool all_space = true;
  for (char c : last) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      all_space = false;
      break;
    }
  }
  if (all_space && chunks.size() > 1) {
    chunks[chunks.size() - 2] += last;
    chunks.pop_back();
  }
  return chunks;
}

}  // namespace suffixrl
