#include "suffixrl/vocab.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

#include "suffixrl/util.hpp"

namespace suffixrl {

AttackVocabulary::AttackVocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2) {
    throw std::invalid_argument("AttackVocabulary: need at least 2 tokens");
  }
  index_.reserve(tokens_.size());
  std::uint64_t h = fnv1a64("");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) {
      throw std::invalid_argument("AttackVocabulary: empty token at index " + std::to_string(i));
    }
    for (char c : t) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        throw std::invalid_argument("AttackVocabulary: token contains whitespace: \"" + t + "\"");
      }
    }
    if (!index_.emplace(t, static_cast<int>(i)).second) {
      throw std::invalid_argument("AttackVocabulary: duplicate token \"" + t + "\"");
    }
    h ^= fnv1a64(t);
    h *= 0x100000001b3ull;
  }
  hash_ = h;
}

AttackVocabulary AttackVocabulary::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return AttackVocabulary(std::move(tokens));
}

const std::string& AttackVocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw std::invalid_argument("AttackVocabulary: token id " + std::to_string(id) + " out of range [0," + std::to_string(size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

int AttackVocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

void AttackVocabulary::check_answer_prefix(const std::string& answer_prefix) const {
  if (answer_prefix.empty()) return;
  for (const std::string& t : tokens_) {
    if (t.find(answer_prefix) != std::string::npos) {
      throw std::invalid_argument("AttackVocabulary: token \"" + t + "\" contains the answer prefix");
    }
  }
}

}  // namespace suffixrl
