#pragma once

#include <string>
#include <vector>

#include "suffixrl/task.hpp"
#include "suffixrl/vocab.hpp"

namespace suffixrl {

// A suffix as selected token ids plus its rendered (space-joined) text.
struct Suffix {
  std::vector<int> token_ids;
  std::string rendered;

  bool operator==(const Suffix& other) const { return token_ids == other.token_ids; }
};

// Tokens joined by single spaces; empty id list renders to "".
std::string render_suffix(const AttackVocabulary& vocab, const std::vector<int>& token_ids);

Suffix make_suffix(const AttackVocabulary& vocab, std::vector<int> token_ids);

// A fully wrapped prompt. Continuations are scored immediately after
// prompt_text; prompt_text always ends with the task's answer prefix.
struct PromptBundle {
  std::string prompt_text;
};

// Canonical templates, byte-exact:
//   raw:    instruction + "\n" + x + (" " + suffix)? + answer_prefix
//   alpaca: "### Instruction:\n" + instruction + "\n\n### Input:\n" + x
//           + (" " + suffix)? + "\n\n### Response:" + answer_prefix
//   chatml: "<|im_start|>system\n" + instruction + "<|im_end|>\n<|im_start|>user\n"
//           + x + (" " + suffix)? + "<|im_end|>\n<|im_start|>assistant" + answer_prefix
// The suffix sits at the end of the user content, before the answer prefix,
// for all three styles. Empty suffix_text gives the clean prompt.
PromptBundle wrap_prompt(const TaskSpec& task, const TaskInstance& instance,
                         const std::string& suffix_text);

// The bare answer prefix: no wrapper, no input, no suffix. Instance- and
// suffix-independent by construction.
PromptBundle null_prompt(const TaskSpec& task);

}  // namespace suffixrl
