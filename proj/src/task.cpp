#include "suffixrl/task.hpp"

#include <cctype>
#include <set>
#include <stdexcept>

#include "suffixrl/errors.hpp"
#include "suffixrl/util.hpp"

namespace suffixrl {

WrapperStyle wrapper_style_from_string(const std::string& s) {
  if (s == "raw") return WrapperStyle::raw;
  if (s == "alpaca") return WrapperStyle::alpaca;
  if (s == "chatml") return WrapperStyle::chatml;
  throw std::invalid_argument("unknown wrapper style: \"" + s + "\"");
}

std::string to_string(WrapperStyle style) {
  switch (style) {
    case WrapperStyle::raw: return "raw";
    case WrapperStyle::alpaca: return "alpaca";
    case WrapperStyle::chatml: return "chatml";
  }
  return "raw";
}

namespace {

std::string lower_first(std::string s) {
  s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

std::string upper_first(std::string s) {
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string with_period(std::string s) {
  if (s.back() != '.') s.push_back('.');
  return s;
}

}  // namespace

std::vector<std::string> expand_surfaces(const std::vector<std::string>& base) {
  if (base.empty()) throw std::invalid_argument("expand_surfaces: empty base");
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& s) {
    if (seen.insert(s).second) out.push_back(s);
  };
  for (const std::string& s : base) {
    if (s.empty()) throw std::invalid_argument("expand_surfaces: empty entry");
    add(s);
  }
  for (const std::string& s : base) {
    std::string lo = lower_first(s);
    std::string up = upper_first(s);
    add(lo);
    add(up);
    add(with_period(lo));
    add(with_period(up));
  }
  return out;
}

TaskSpec::TaskSpec(std::string name, std::vector<std::string> labels,
                   std::map<std::string, SurfaceSet> surfaces, WrapperStyle style,
                   std::string answer_prefix, std::string instruction)
    : name_(std::move(name)),
      labels_(std::move(labels)),
      surfaces_(std::move(surfaces)),
      style_(style),
      answer_prefix_(std::move(answer_prefix)),
      instruction_(std::move(instruction)) {
  if (name_.empty()) throw std::invalid_argument("TaskSpec: empty name");
  if (labels_.empty()) throw std::invalid_argument("TaskSpec: empty label space");
  if (answer_prefix_.empty()) throw std::invalid_argument("TaskSpec: empty answer prefix");
  {
    std::set<std::string> uniq(labels_.begin(), labels_.end());
    if (uniq.size() != labels_.size()) throw std::invalid_argument("TaskSpec: duplicate label");
  }
  for (const auto& [label, set] : surfaces_) {
    if (!has_label(label)) {
      throw std::invalid_argument("TaskSpec \"" + name_ + "\": surfaces given for unknown label \"" + label + "\"");
    }
  }
  // Disjointness is checked on the expansion closure of each label's set, so
  // case/period collisions across labels fail here rather than at eval time.
  std::map<std::string, std::string> closure_owner;
  for (const std::string& label : labels_) {
    auto it = surfaces_.find(label);
    if (it == surfaces_.end() || it->second.variants.empty()) {
      throw std::invalid_argument("TaskSpec \"" + name_ + "\": label \"" + label + "\" has no surfaces");
    }
    std::set<std::string> uniq(it->second.variants.begin(), it->second.variants.end());
    if (uniq.size() != it->second.variants.size()) {
      throw std::invalid_argument("TaskSpec \"" + name_ + "\": duplicate surface for label \"" + label + "\"");
    }
    for (const std::string& s : expand_surfaces(it->second.variants)) {
      auto [owner, inserted] = closure_owner.emplace(s, label);
      if (!inserted && owner->second != label) {
        throw std::invalid_argument("TaskSpec \"" + name_ + "\": surface \"" + s +
                                    "\" collides between labels \"" + owner->second + "\" and \"" + label + "\"");
      }
    }
    for (const std::string& s : it->second.variants) {
      surface_to_label_[s] = label;
    }
  }
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataLoadError("task spec: expected a JSON object");
  for (const auto& key : {"name", "labels", "surfaces", "wrapper", "instruction", "answer_prefix"}) {
    if (!j.contains(key)) throw DataLoadError(std::string("task spec: missing key \"") + key + "\"");
  }
  std::vector<std::string> labels = j.at("labels").get<std::vector<std::string>>();
  std::map<std::string, SurfaceSet> surfaces;
  for (const auto& [label, variants] : j.at("surfaces").items()) {
    surfaces[label] = SurfaceSet{expand_surfaces(variants.get<std::vector<std::string>>())};
  }
  return TaskSpec(j.at("name").get<std::string>(), std::move(labels), std::move(surfaces),
                  wrapper_style_from_string(j.at("wrapper").get<std::string>()),
                  j.at("answer_prefix").get<std::string>(), j.at("instruction").get<std::string>());
}

TaskSpec TaskSpec::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataLoadError("task spec " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json TaskSpec::to_json() const {
  nlohmann::json surfaces = nlohmann::json::object();
  for (const auto& [label, set] : surfaces_) surfaces[label] = set.variants;
  return nlohmann::json{{"name", name_},
                        {"labels", labels_},
                        {"surfaces", surfaces},
                        {"wrapper", to_string(style_)},
                        {"instruction", instruction_},
                        {"answer_prefix", answer_prefix_}};
}

const SurfaceSet& TaskSpec::surfaces(const std::string& label) const {
  auto it = surfaces_.find(label);
  if (it == surfaces_.end()) {
    throw std::invalid_argument("TaskSpec \"" + name_ + "\": unknown label \"" + label + "\"");
  }
  return it->second;
}

bool TaskSpec::has_label(const std::string& label) const {
  for (const std::string& l : labels_) {
    if (l == label) return true;
  }
  return false;
}

std::vector<std::string> TaskSpec::surface_union() const {
  std::vector<std::string> out;
  for (const std::string& label : labels_) {
    const SurfaceSet& set = surfaces_.at(label);
    out.insert(out.end(), set.variants.begin(), set.variants.end());
  }
  return out;
}

const std::string& TaskSpec::label_of_surface(const std::string& surface) const {
  static const std::string empty;
  auto it = surface_to_label_.find(surface);
  return it == surface_to_label_.end() ? empty : it->second;
}

}  // namespace suffixrl
