#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace suffixrl {

enum class WrapperStyle { raw, alpaca, chatml };

WrapperStyle wrapper_style_from_string(const std::string& s);
std::string to_string(WrapperStyle style);

// Closure of a base surface list under first-letter lowercase, first-letter
// uppercase, and a trailing-period variant of each casing (the period rule is
// idempotent: it never doubles an existing period). Base entries come first,
// then new variants in generation order; first occurrence wins on dedupe.
std::vector<std::string> expand_surfaces(const std::vector<std::string>& base);

// Lexical realizations of one label.
struct SurfaceSet {
  std::vector<std::string> variants;
};

// One labeled example.
struct TaskInstance {
  std::string text;
  std::string gold_label;
};

// A classification task: label space, per-label surface sets, prompt wrapper
// style, answer prefix, and instruction preamble. Immutable after
// construction.
class TaskSpec {
 public:
  // Surfaces are taken as given (deduplicated). Constraints checked here:
  // every label has a non-empty surface set, the expansion closures of
  // distinct labels are disjoint (so "yes" vs "Yes" on different labels is a
  // hard failure), and answer_prefix is non-empty.
  TaskSpec(std::string name, std::vector<std::string> labels,
           std::map<std::string, SurfaceSet> surfaces, WrapperStyle style,
           std::string answer_prefix, std::string instruction);

  // File schema: {name, labels: [string], surfaces: {label: [string]},
  // wrapper: "chatml"|"alpaca"|"raw", instruction, answer_prefix}.
  // Each label's surface list is run through expand_surfaces.
  static TaskSpec from_json(const nlohmann::json& j);
  static TaskSpec load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::string& name() const { return name_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const SurfaceSet& surfaces(const std::string& label) const;
  WrapperStyle wrapper_style() const { return style_; }
  const std::string& answer_prefix() const { return answer_prefix_; }
  const std::string& instruction() const { return instruction_; }

  bool has_label(const std::string& label) const;

  // All surfaces of all labels, in label order then surface order.
  std::vector<std::string> surface_union() const;

  // Label owning a surface, or empty string if unknown.
  const std::string& label_of_surface(const std::string& surface) const;

 private:
  std::string name_;
  std::vector<std::string> labels_;
  std::map<std::string, SurfaceSet> surfaces_;
  WrapperStyle style_;
  std::string answer_prefix_;
  std::string instruction_;
  std::map<std::string, std::string> surface_to_label_;
};

}  // namespace suffixrl
