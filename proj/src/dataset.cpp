#include "suffixrl/dataset.hpp"

#include <cctype>
#include <stdexcept>

#include "json.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

namespace {

using nlohmann::json;

bool is_blank(const std::string& line) {
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

std::string truncate_tokens(const std::string& text, int max_tokens, bool* was_truncated) {
  if (was_truncated) *was_truncated = false;
  if (max_tokens < 1) throw std::invalid_argument("truncate_tokens: max_tokens must be >= 1");
  int tokens_seen = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    ++tokens_seen;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (tokens_seen == max_tokens) {
      if (i < text.size()) {
        // Anything left beyond this token boundary is dropped.
        bool more_tokens = false;
        for (std::size_t j = i; j < text.size(); ++j) {
          if (!std::isspace(static_cast<unsigned char>(text[j]))) {
            more_tokens = true;
            break;
          }
        }
        if (more_tokens) {
          if (was_truncated) *was_truncated = true;
          return text.substr(0, i);
        }
      }
      return text;
    }
  }
  return text;
}

LoadResult scan_task_data(const TaskSpec& task, const DatasetFile& file, int max_input_length) {
  if (max_input_length < 1)
    throw std::invalid_argument("scan_task_data: max_input_length must be >= 1");
  std::string content;
  try {
    content = read_text_file(file.path);
  } catch (const std::exception& e) {
    throw DataLoadError(e.what());
  }

  LoadResult result;
  const auto lines = split_lines(content);
  result.line_count = static_cast<int>(lines.size());
  for (std::size_t idx = 0; idx < lines.size(); ++idx) {
    const int line_no = static_cast<int>(idx) + 1;
    const std::string& line = lines[idx];
    if (is_blank(line)) {
      result.errors.push_back("line " + std::to_string(line_no) + ": blank line");
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      result.errors.push_back("line " + std::to_string(line_no) + ": malformed JSON (" +
                              e.what() + ")");
      continue;
    }
    if (!j.is_object() || !j.contains("text") || !j.contains("label") ||
        !j["text"].is_string() || !j["label"].is_string()) {
      result.errors.push_back("line " + std::to_string(line_no) +
                              ": expected {\"text\": string, \"label\": string}");
      continue;
    }
    std::string text = j["text"].get<std::string>();
    const std::string label = j["label"].get<std::string>();
    if (text.empty()) {
      result.errors.push_back("line " + std::to_string(line_no) + ": empty text");
      continue;
    }
    if (!task.has_label(label)) {
      result.errors.push_back("line " + std::to_string(line_no) + ": unknown label '" + label +
                              "' for task " + task.name());
      continue;
    }
    bool was_truncated = false;
    text = truncate_tokens(text, max_input_length, &was_truncated);
    if (was_truncated) ++result.truncated;
    result.instances.push_back(TaskInstance{std::move(text), label});
  }
  return result;
}

std::vector<TaskInstance> load_task_data(const TaskSpec& task, const DatasetFile& file,
                                         int max_input_length, LoadResult* result) {
  LoadResult scan = scan_task_data(task, file, max_input_length);
  if (!scan.errors.empty()) {
    std::string msg = file.path.string() + ": " + std::to_string(scan.errors.size()) +
                      " bad line(s):";
    for (const auto& e : scan.errors) msg += "\n  " + e;
    throw DataLoadError(msg);
  }
  if (result) *result = scan;
  return std::move(scan.instances);
}

}  // namespace suffixrl
