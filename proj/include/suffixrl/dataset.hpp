#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "suffixrl/task.hpp"

namespace suffixrl {

// A JSONL dataset: one {"text": string, "label": string} object per line.
struct DatasetFile {
  std::filesystem::path path;
  std::string split = "train";
};

// Outcome of scanning a dataset file. Every line is either loaded or
// reported: instances.size() + errors.size() == line_count, so nothing is
// silently dropped (blank lines are errors, not skips).
struct LoadResult {
  std::vector<TaskInstance> instances;
  std::vector<std::string> errors;  // "line N: reason"
  int line_count = 0;
  int truncated = 0;
};

// Validates every line against the task's label set, truncates texts longer
// than max_input_length whitespace tokens at a token boundary (original
// spacing preserved up to the cut), and collects all errors instead of
// stopping at the first.
LoadResult scan_task_data(const TaskSpec& task, const DatasetFile& file, int max_input_length);

// scan_task_data that throws DataLoadError listing every bad line when any
// error was found. On success `result` mirrors the scan outcome.
std::vector<TaskInstance> load_task_data(const TaskSpec& task, const DatasetFile& file,
                                         int max_input_length, LoadResult* result = nullptr);

// Cuts text after its max_tokens-th whitespace token; returns text unchanged
// when it has no more than max_tokens tokens. Sets *was_truncated.
std::string truncate_tokens(const std::string& text, int max_tokens, bool* was_truncated);

}  // namespace suffixrl
