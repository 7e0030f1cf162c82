#include "suffixrl/prompt.hpp"

#include <stdexcept>

namespace suffixrl {

std::string render_suffix(const AttackVocabulary& vocab, const std::vector<int>& token_ids) {
  std::string out;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += vocab.token(token_ids[i]);
  }
  return out;
}

Suffix make_suffix(const AttackVocabulary& vocab, std::vector<int> token_ids) {
  std::string rendered = render_suffix(vocab, token_ids);
  return Suffix{std::move(token_ids), std::move(rendered)};
}

namespace {

void check_single_trailing_prefix(const std::string& text, const std::string& prefix) {
  if (text.size() < prefix.size() || text.compare(text.size() - prefix.size(), prefix.size(), prefix) != 0) {
    throw std::invalid_argument("prompt does not end with the answer prefix");
  }
  const std::string head = text.substr(0, text.size() - prefix.size());
  if (head.size() >= prefix.size() &&
      head.compare(head.size() - prefix.size(), prefix.size(), prefix) == 0) {
    throw std::invalid_argument("prompt ends with a doubled answer prefix");
  }
}

}  // namespace

PromptBundle wrap_prompt(const TaskSpec& task, const TaskInstance& instance,
                         const std::string& suffix_text) {
  const std::string suffixed =
      suffix_text.empty() ? instance.text : instance.text + " " + suffix_text;
  std::string text;
  switch (task.wrapper_style()) {
    case WrapperStyle::raw:
      text = task.instruction() + "\n" + suffixed + task.answer_prefix();
      break;
    case WrapperStyle::alpaca:
      text = "### Instruction:\n" + task.instruction() + "\n\n### Input:\n" + suffixed +
             "\n\n### Response:" + task.answer_prefix();
      break;
    case WrapperStyle::chatml:
      text = "<|im_start|>system\n" + task.instruction() + "<|im_end|>\n<|im_start|>user\n" +
             suffixed + "<|im_end|>\n<|im_start|>assistant" + task.answer_prefix();
      break;
  }
  check_single_trailing_prefix(text, task.answer_prefix());
  return PromptBundle{std::move(text)};
}

PromptBundle null_prompt(const TaskSpec& task) {
  return PromptBundle{task.answer_prefix()};
}

}  // namespace suffixrl
