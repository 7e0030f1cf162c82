#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace suffixrl {

// Ordered list of candidate suffix token strings the policy selects from.
// Immutable after construction.
class AttackVocabulary {
 public:
  // Validates: >= 2 tokens, all non-empty, no internal whitespace, no
  // duplicates.
  explicit AttackVocabulary(std::vector<std::string> tokens);

  // One token per line; blank lines ignored.
  static AttackVocabulary load(const std::filesystem::path& path);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  // -1 if absent.
  int id_of(const std::string& token) const;

  // FNV-1a over the token list; guards policy files against vocab mismatch.
  std::uint64_t content_hash() const { return hash_; }

  // Throws std::invalid_argument if any token contains the answer prefix
  // (a suffix drawn from this vocabulary could otherwise spoof the answer
  // slot). Called when a vocabulary is bound to a task.
  void check_answer_prefix(const std::string& answer_prefix) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t hash_ = 0;
};

}  // namespace suffixrl
