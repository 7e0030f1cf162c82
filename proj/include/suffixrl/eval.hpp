#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "suffixrl/oracle.hpp"
#include "suffixrl/prompt.hpp"
#include "suffixrl/task.hpp"

namespace suffixrl {

struct TaskMetrics {
  double accuracy = 0.0;  // correct / n, exact integer ratio
  double calce = 0.0;     // mean soft-min calibrated CE of the gold label
  int n = 0;
  int correct = 0;
};

struct DeltaMetrics {
  double delta_acc = 0.0;    // attacked - clean
  double delta_calce = 0.0;  // attacked - clean
};

struct TransferKey {
  std::string seen;    // oracle the suffix was trained against
  std::string target;  // oracle being evaluated
  std::string task;
  int k = 0;

  bool operator<(const TransferKey& o) const {
    return std::tie(seen, target, task, k) < std::tie(o.seen, o.target, o.task, o.k);
  }
};

struct TransferCell {
  TaskMetrics clean;
  TaskMetrics attacked;
  DeltaMetrics delta;
  bool failed = false;
  std::string error;  // set when failed
};

struct TransferReport {
  std::map<TransferKey, TransferCell> grid;
};

// log-sum-exp over the label's surfaces of the sequence log-probability
// given the wrapped (possibly attacked) prompt. Throws std::invalid_argument
// when the label is not in the task.
double label_score(const ScoringOracle& oracle, const TaskSpec& task, const TaskInstance& instance,
                   const std::string& suffix_text, const std::string& label);

// argmax of label_score over task labels; ties go to the earlier label in
// TaskSpec order.
std::string predict(const ScoringOracle& oracle, const TaskSpec& task, const TaskInstance& instance,
                    const std::string& suffix_text);

// Accuracy and mean calibrated CE over the instances; suffix_text "" gives
// the clean row. Instance scoring may fan out across `parallelism` threads;
// reduction is in instance order either way.
TaskMetrics evaluate_task(const ScoringOracle& oracle, const TaskSpec& task,
                          const std::vector<TaskInstance>& instances,
                          const std::string& suffix_text, int parallelism = 1);

// Componentwise attacked - clean. Throws std::invalid_argument when instance
// counts differ.
DeltaMetrics delta(const TaskMetrics& clean, const TaskMetrics& attacked);

// Evaluates every (seen, target, task) cell at the k of the seen suffix.
// Clean metrics are computed once per (target, task) and shared across
// cells. A cell whose evaluation throws is marked failed with the message,
// never dropped. Every suffix length must appear in k_values.
TransferReport transfer_matrix(
    const std::map<std::string, Suffix>& suffixes,
    const std::vector<std::pair<std::string, const ScoringOracle*>>& oracles,
    const std::vector<TaskSpec>& tasks, const std::vector<std::vector<TaskInstance>>& datasets,
    const std::vector<int>& k_values, int parallelism = 1);

// "%.2f / %+0.2f", the Acc/CalCE and dAcc/dCalCE cell style.
std::string format_cell(double first, double second);

std::string render_report_json(const TransferReport& report);
std::string render_report_md(const TransferReport& report);
std::string render_report_csv(const TransferReport& report);

// Inverse of render_report_json, for re-rendering a stored report.
TransferReport report_from_json(const std::string& text);

}  // namespace suffixrl
