#include "suffixrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "suffixrl/reward.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

namespace {

using nlohmann::json;

}  // namespace

double label_score(const ScoringOracle& oracle, const TaskSpec& task, const TaskInstance& instance,
                   const std::string& suffix_text, const std::string& label) {
  if (!task.has_label(label))
    throw std::invalid_argument("label_score: unknown label '" + label + "'");
  const auto bundle = wrap_prompt(task, instance, suffix_text);
  const auto& surfaces = task.surfaces(label).variants;
  std::vector<double> logps;
  logps.reserve(surfaces.size());
  for (const auto& surface : surfaces)
    logps.push_back(sequence_logprob(oracle, bundle.prompt_text, surface));
  return log_sum_exp(logps);
}

std::string predict(const ScoringOracle& oracle, const TaskSpec& task, const TaskInstance& instance,
                    const std::string& suffix_text) {
  const auto& labels = task.labels();
  std::string best = labels.front();
  double best_score = label_score(oracle, task, instance, suffix_text, best);
  for (std::size_t i = 1; i < labels.size(); ++i) {
    const double score = label_score(oracle, task, instance, suffix_text, labels[i]);
    if (score > best_score) {
      best_score = score;
      best = labels[i];
    }
  }
  return best;
}

TaskMetrics evaluate_task(const ScoringOracle& oracle, const TaskSpec& task,
                          const std::vector<TaskInstance>& instances,
                          const std::string& suffix_text, int parallelism) {
  if (instances.empty()) throw std::invalid_argument("evaluate_task: no instances");
  for (const auto& inst : instances)
    if (!task.has_label(inst.gold_label))
      throw std::invalid_argument("evaluate_task: instance label '" + inst.gold_label +
                                  "' not in task " + task.name());

  // Null CEs once per surface; shared across instances.
  std::map<std::string, double> null_values;
  for (const auto& label : task.labels())
    for (const auto& surface : task.surfaces(label).variants)
      null_values.emplace(surface, null_ce(oracle, task, surface));

  std::vector<int> correct_flags(instances.size(), 0);
  std::vector<double> calces(instances.size(), 0.0);
  parallel_for(instances.size(), parallelism, [&](std::size_t i) {
    const TaskInstance& inst = instances[i];
    correct_flags[i] = predict(oracle, task, inst, suffix_text) == inst.gold_label ? 1 : 0;
    const auto& gold_surfaces = task.surfaces(inst.gold_label).variants;
    std::vector<double> values;
    values.reserve(gold_surfaces.size());
    for (const auto& surface : gold_surfaces) {
      const double ctx = context_ce(oracle, task, inst, suffix_text, surface);
      values.push_back(calibrated_ce(ctx, null_values.at(surface)));
    }
    calces[i] = aggregate_surfaces(values);
  });

  TaskMetrics m;
  m.n = static_cast<int>(instances.size());
  for (int flag : correct_flags) m.correct += flag;
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.n);
  double sum = 0.0;
  for (double c : calces) sum += c;
  m.calce = sum / static_cast<double>(m.n);
  return m;
}

DeltaMetrics delta(const TaskMetrics& clean, const TaskMetrics& attacked) {
  if (clean.n != attacked.n)
    throw std::invalid_argument("delta: clean and attacked instance counts differ");
  DeltaMetrics d;
  d.delta_acc = attacked.accuracy - clean.accuracy;
  d.delta_calce = attacked.calce - clean.calce;
  return d;
}

TransferReport transfer_matrix(
    const std::map<std::string, Suffix>& suffixes,
    const std::vector<std::pair<std::string, const ScoringOracle*>>& oracles,
    const std::vector<TaskSpec>& tasks, const std::vector<std::vector<TaskInstance>>& datasets,
    const std::vector<int>& k_values, int parallelism) {
  if (suffixes.empty()) throw std::invalid_argument("transfer_matrix: no suffixes");
  if (oracles.empty()) throw std::invalid_argument("transfer_matrix: no oracles");
  if (tasks.size() != datasets.size())
    throw std::invalid_argument("transfer_matrix: tasks and datasets differ in count");
  for (const auto& [seen, suffix] : suffixes) {
    const int k = static_cast<int>(suffix.token_ids.size());
    if (std::find(k_values.begin(), k_values.end(), k) == k_values.end())
      throw std::invalid_argument("transfer_matrix: suffix for '" + seen + "' has K=" +
                                  std::to_string(k) + ", not in k_values");
  }

  TransferReport report;
  std::map<std::pair<std::string, std::string>, TaskMetrics> clean_cache;
  for (const auto& [seen, suffix] : suffixes) {
    const int k = static_cast<int>(suffix.token_ids.size());
    for (const auto& [target, oracle] : oracles) {
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        TransferKey key{seen, target, tasks[t].name(), k};
        TransferCell cell;
        try {
          auto cache_key = std::make_pair(target, tasks[t].name());
          auto it = clean_cache.find(cache_key);
          if (it == clean_cache.end()) {
            it = clean_cache
                     .emplace(cache_key,
                              evaluate_task(*oracle, tasks[t], datasets[t], "", parallelism))
                     .first;
          }
          cell.clean = it->second;
          cell.attacked =
              evaluate_task(*oracle, tasks[t], datasets[t], suffix.rendered, parallelism);
          cell.delta = delta(cell.clean, cell.attacked);
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        report.grid.emplace(std::move(key), std::move(cell));
      }
    }
  }
  return report;
}

std::string format_cell(double first, double second) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f / %+0.2f", first, second);
  return std::string(buf);
}

std::string render_report_json(const TransferReport& report) {
  json cells = json::array();
  for (const auto& [key, cell] : report.grid) {
    json c;
    c["seen"] = key.seen;
    c["target"] = key.target;
    c["task"] = key.task;
    c["k"] = key.k;
    c["failed"] = cell.failed;
    if (cell.failed) {
      c["error"] = cell.error;
    } else {
      c["n"] = cell.clean.n;
      c["acc_clean"] = cell.clean.accuracy;
      c["calce_clean"] = cell.clean.calce;
      c["acc_attacked"] = cell.attacked.accuracy;
      c["calce_attacked"] = cell.attacked.calce;
      c["delta_acc"] = cell.delta.delta_acc;
      c["delta_calce"] = cell.delta.delta_calce;
    }
    cells.push_back(std::move(c));
  }
  json j;
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string render_report_md(const TransferReport& report) {
  // Collect the axes in deterministic order.
  std::set<std::string> targets;
  std::set<std::string> seens;
  std::set<std::string> task_names;
  std::set<int> ks;
  for (const auto& [key, cell] : report.grid) {
    targets.insert(key.target);
    seens.insert(key.seen);
    task_names.insert(key.task);
    ks.insert(key.k);
  }

  std::string md;
  md += "# Transfer report\n\n";
  md += "Cells are Acc / CalCE for the clean table and dAcc / dCalCE for the transfer\n";
  md += "tables. n is the instance count behind each cell. Per-instance CalCE\n";
  md += "collapses the gold label's surface variants with the same soft-min used by\n";
  md += "the training reward before averaging over instances.\n";

  // Clean baselines: task rows, target-oracle columns.
  md += "\n## Clean baselines\n\n";
  md += "| task |";
  for (const auto& t : targets) md += " " + t + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < targets.size(); ++i) md += "---|";
  md += "\n";
  for (const auto& tn : task_names) {
    md += "| " + tn + " |";
    for (const auto& tgt : targets) {
      // Any cell with this (target, task) carries the clean metrics.
      std::string text = "-";
      for (const auto& [key, cell] : report.grid) {
        if (key.target == tgt && key.task == tn) {
          text = cell.failed ? "ERROR"
                             : format_cell(cell.clean.accuracy, cell.clean.calce) +
                                   " (n=" + std::to_string(cell.clean.n) + ")";
          break;
        }
      }
      md += " " + text + " |";
    }
    md += "\n";
  }

  // One transfer table per (task, k): seen rows, target columns.
  for (const auto& tn : task_names) {
    for (int k : ks) {
      bool any = false;
      for (const auto& [key, cell] : report.grid)
        if (key.task == tn && key.k == k) any = true;
      if (!any) continue;
      md += "\n## Transfer: " + tn + " (K=" + std::to_string(k) + ")\n\n";
      md += "| seen \\ target |";
      for (const auto& t : targets) md += " " + t + " |";
      md += "\n|---|";
      for (std::size_t i = 0; i < targets.size(); ++i) md += "---|";
      md += "\n";
      for (const auto& seen : seens) {
        bool row_any = false;
        std::string row = "| " + seen + " |";
        for (const auto& tgt : targets) {
          auto it = report.grid.find(TransferKey{seen, tgt, tn, k});
          if (it == report.grid.end()) {
            row += " - |";
            continue;
          }
          row_any = true;
          row += " " + (it->second.failed
                            ? std::string("ERROR")
                            : format_cell(it->second.delta.delta_acc,
                                          it->second.delta.delta_calce)) +
                 " |";
        }
        if (row_any) md += row + "\n";
      }
    }
  }
  return md;
}

TransferReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("report_from_json: malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("cells") || !j["cells"].is_array())
    throw std::invalid_argument("report_from_json: missing 'cells' array");
  TransferReport report;
  for (const auto& c : j["cells"]) {
    TransferKey key{c.at("seen").get<std::string>(), c.at("target").get<std::string>(),
                    c.at("task").get<std::string>(), c.at("k").get<int>()};
    TransferCell cell;
    cell.failed = c.at("failed").get<bool>();
    if (cell.failed) {
      cell.error = c.value("error", std::string{});
    } else {
      const int n = c.at("n").get<int>();
      cell.clean.n = n;
      cell.clean.accuracy = c.at("acc_clean").get<double>();
      cell.clean.correct = static_cast<int>(std::lround(cell.clean.accuracy * n));
      cell.clean.calce = c.at("calce_clean").get<double>();
      cell.attacked.n = n;
      cell.attacked.accuracy = c.at("acc_attacked").get<double>();
      cell.attacked.correct = static_cast<int>(std::lround(cell.attacked.accuracy * n));
      cell.attacked.calce = c.at("calce_attacked").get<double>();
      cell.delta.delta_acc = c.at("delta_acc").get<double>();
      cell.delta.delta_calce = c.at("delta_calce").get<double>();
    }
    report.grid.emplace(std::move(key), std::move(cell));
  }
  return report;
}

std::string render_report_csv(const TransferReport& report) {
  std::string csv =
      "seen,target,task,k,acc_clean,calce_clean,acc_attacked,calce_attacked,delta_acc,"
      "delta_calce\n";
  for (const auto& [key, cell] : report.grid) {
    csv += key.seen + "," + key.target + "," + key.task + "," + std::to_string(key.k) + ",";
    if (cell.failed) {
      csv += ",,,,,\n";
    } else {
      csv += format_double(cell.clean.accuracy) + "," + format_double(cell.clean.calce) + "," +
             format_double(cell.attacked.accuracy) + "," + format_double(cell.attacked.calce) +
             "," + format_double(cell.delta.delta_acc) + "," +
             format_double(cell.delta.delta_calce) + "\n";
    }
  }
  return csv;
}

}  // namespace suffixrl
