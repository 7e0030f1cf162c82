#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "suffixrl/prompt.hpp"
#include "suffixrl/task.hpp"
#include "suffixrl/util.hpp"
#include "suffixrl/vocab.hpp"
#include "test_support.hpp"

using namespace suffixrl;
using namespace suffixrl::testing;

namespace {

// Independent recomputation of the vocabulary fingerprint.
std::uint64_t reference_vocab_hash(const std::vector<std::string>& tokens) {
  std::uint64_t h = fnv1a64("");
  for (const std::string& t : tokens) {
    h ^= fnv1a64(t);
    h *= 0x100000001b3ull;
  }
  return h;
}

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

}  // namespace

TEST_SUITE("vocab_prompt") {

TEST_CASE("vocabulary construction and lookup") {
  AttackVocabulary v({"alpha", "beta", "gamma"});
  CHECK(v.size() == 3);
  CHECK(v.token(0) == "alpha");
  CHECK(v.token(2) == "gamma");
  CHECK(v.id_of("beta") == 1);
  CHECK(v.id_of("missing") == -1);
  CHECK_THROWS_AS(v.token(-1), std::invalid_argument);
  CHECK_THROWS_AS(v.token(3), std::invalid_argument);
}

TEST_CASE("vocabulary rejects malformed token lists") {
  CHECK_THROWS_AS(AttackVocabulary({"solo"}), std::invalid_argument);
  CHECK_THROWS_AS(AttackVocabulary({}), std::invalid_argument);
  CHECK_THROWS_AS(AttackVocabulary({"a", ""}), std::invalid_argument);
  CHECK_THROWS_AS(AttackVocabulary({"a", "b c"}), std::invalid_argument);
  CHECK_THROWS_AS(AttackVocabulary({"a", "b\tc"}), std::invalid_argument);
  CHECK_THROWS_AS(AttackVocabulary({"a", "b\n"}), std::invalid_argument);
  CHECK_THROWS_AS(AttackVocabulary({"a", "b", "a"}), std::invalid_argument);
}

TEST_CASE("vocabulary hash matches reference and is order sensitive") {
  std::vector<std::string> tokens{"alpha", "beta", "gamma"};
  AttackVocabulary v(tokens);
  CHECK(v.content_hash() == reference_vocab_hash(tokens));
  AttackVocabulary swapped({"beta", "alpha", "gamma"});
  CHECK(swapped.content_hash() != v.content_hash());
  AttackVocabulary other({"alpha", "beta", "delta"});
  CHECK(other.content_hash() != v.content_hash());
}

TEST_CASE("vocabulary load strips line endings and blank lines") {
  ScopedTempDir dir("vocab");
  auto path = dir.path / "vocab.txt";
  write_text_file(path, "alpha\r\nbeta  \n\n\ngamma\n");
  AttackVocabulary v = AttackVocabulary::load(path);
  REQUIRE(v.size() == 3);
  CHECK(v.token(0) == "alpha");
  CHECK(v.token(1) == "beta");
  CHECK(v.token(2) == "gamma");
  CHECK(v.content_hash() == AttackVocabulary({"alpha", "beta", "gamma"}).content_hash());
}

TEST_CASE("answer prefix screening") {
  AttackVocabulary clean({"alpha", "beta"});
  CHECK_NOTHROW(clean.check_answer_prefix("\nThe answer is: "));
  CHECK_NOTHROW(clean.check_answer_prefix(""));
  AttackVocabulary tainted({"alpha", "xAnswer:y"});
  CHECK_THROWS_AS(tainted.check_answer_prefix("Answer:"), std::invalid_argument);
  // Whitespace-bearing prefixes can never occur inside whitespace-free tokens.
  CHECK_NOTHROW(tainted.check_answer_prefix("\nAnswer: "));
}

TEST_CASE("surface expansion generates case and period variants in order") {
  CHECK(expand_surfaces({"yes"}) ==
        std::vector<std::string>{"yes", "Yes", "yes.", "Yes."});
  CHECK(expand_surfaces({"Yes", "yes"}) ==
        std::vector<std::string>{"Yes", "yes", "yes.", "Yes."});
  CHECK(expand_surfaces({"ok."}) == std::vector<std::string>{"ok.", "Ok."});
}

TEST_CASE("surface expansion is idempotent") {
  for (const auto& base : std::vector<std::vector<std::string>>{
           {"yes"}, {"ok."}, {"A"}, {"true", "True"}, {"entailment"}}) {
    auto once = expand_surfaces(base);
    CHECK(expand_surfaces(once) == once);
  }
}

TEST_CASE("surface expansion rejects empty input") {
  CHECK_THROWS_AS(expand_surfaces({}), std::invalid_argument);
  CHECK_THROWS_AS(expand_surfaces({"yes", ""}), std::invalid_argument);
}

TEST_CASE("task construction enforces label and surface hygiene") {
  auto make = [](std::vector<std::string> labels,
                 std::map<std::string, SurfaceSet> surfaces) {
    return TaskSpec("t", std::move(labels), std::move(surfaces), WrapperStyle::raw,
                    "\nThe answer is: ", "Decide.");
  };
  CHECK_NOTHROW(make({"pos", "neg"},
                     {{"pos", SurfaceSet{{"yes"}}}, {"neg", SurfaceSet{{"no"}}}}));
  // Duplicate label.
  CHECK_THROWS_AS(make({"pos", "pos"}, {{"pos", SurfaceSet{{"yes"}}}}),
                  std::invalid_argument);
  // Surfaces for a label outside the label space.
  CHECK_THROWS_AS(make({"pos"}, {{"pos", SurfaceSet{{"yes"}}},
                                 {"ghost", SurfaceSet{{"no"}}}}),
                  std::invalid_argument);
  // Label with no surfaces.
  CHECK_THROWS_AS(make({"pos", "neg"}, {{"pos", SurfaceSet{{"yes"}}}}),
                  std::invalid_argument);
  // Duplicate surface within one label.
  CHECK_THROWS_AS(make({"pos", "neg"}, {{"pos", SurfaceSet{{"yes", "yes"}}},
                                        {"neg", SurfaceSet{{"no"}}}}),
                  std::invalid_argument);
  // Direct collision across labels.
  CHECK_THROWS_AS(make({"pos", "neg"}, {{"pos", SurfaceSet{{"yes"}}},
                                        {"neg", SurfaceSet{{"yes"}}}}),
                  std::invalid_argument);
  // Collision only after expansion: "Yes" expands into pos's closure.
  CHECK_THROWS_AS(make({"pos", "neg"}, {{"pos", SurfaceSet{{"yes"}}},
                                        {"neg", SurfaceSet{{"Yes"}}}}),
                  std::invalid_argument);
}

TEST_CASE("task accessors and surface union order") {
  TaskSpec task = make_binary_task("toy", WrapperStyle::alpaca);
  CHECK(task.name() == "toy");
  CHECK(task.labels() == std::vector<std::string>{"pos", "neg"});
  CHECK(task.has_label("pos"));
  CHECK_FALSE(task.has_label("maybe"));
  CHECK(task.surface_union() == std::vector<std::string>{"yes", "no"});
  CHECK(task.label_of_surface("yes") == "pos");
  CHECK(task.label_of_surface("no") == "neg");
  CHECK(task.label_of_surface("banana").empty());
  CHECK_THROWS_AS(task.surfaces("maybe"), std::invalid_argument);
}

TEST_CASE("task json parsing expands surfaces and round-trips") {
  nlohmann::json j{{"name", "demo"},
                   {"labels", {"pos", "neg"}},
                   {"surfaces", {{"pos", {"yes"}}, {"neg", {"no"}}}},
                   {"wrapper", "chatml"},
                   {"instruction", "Pick a side."},
                   {"answer_prefix", "\nThe answer is: "}};
  TaskSpec task = TaskSpec::from_json(j);
  CHECK(task.surfaces("pos").variants ==
        std::vector<std::string>{"yes", "Yes", "yes.", "Yes."});
  CHECK(task.surfaces("neg").variants ==
        std::vector<std::string>{"no", "No", "no.", "No."});
  CHECK(task.wrapper_style() == WrapperStyle::chatml);
  // Serialization of an expansion-closed task is a fixpoint.
  nlohmann::json out = task.to_json();
  CHECK(TaskSpec::from_json(out).to_json() == out);
}

TEST_CASE("task json parsing reports missing keys") {
  nlohmann::json j{{"name", "demo"}, {"labels", {"pos"}}};
  CHECK_THROWS_AS(TaskSpec::from_json(j), DataLoadError);
  CHECK_THROWS_AS(TaskSpec::from_json(nlohmann::json::array()), DataLoadError);
}

TEST_CASE("wrapper style names round-trip and reject unknowns") {
  for (auto style : {WrapperStyle::raw, WrapperStyle::alpaca, WrapperStyle::chatml}) {
    CHECK(wrapper_style_from_string(to_string(style)) == style);
  }
  CHECK_THROWS_AS(wrapper_style_from_string("vicuna"), std::invalid_argument);
}

TEST_CASE("render_suffix joins tokens with single spaces") {
  AttackVocabulary v({"a", "b"});
  CHECK(render_suffix(v, {1, 0, 1}) == "b a b");
  CHECK(render_suffix(v, {}) == "");
  CHECK_THROWS_AS(render_suffix(v, {2}), std::invalid_argument);
  Suffix s = make_suffix(v, {0, 1});
  CHECK(s.token_ids == std::vector<int>{0, 1});
  CHECK(s.rendered == "a b");
}

TEST_CASE("prompt wrapping is byte-exact per style") {
  const std::string prefix = "\nThe answer is: ";
  const std::string instr = "Classify the sentiment.";
  TaskInstance inst{"good movie", "pos"};
  auto task_with = [&](WrapperStyle style) {
    return make_binary_task("t", style, "pos", "yes", "neg", "no", prefix, instr);
  };

  CHECK(wrap_prompt(task_with(WrapperStyle::raw), inst, "zq kx").prompt_text ==
        "Classify the sentiment.\ngood movie zq kx\nThe answer is: ");
  CHECK(wrap_prompt(task_with(WrapperStyle::raw), inst, "").prompt_text ==
        "Classify the sentiment.\ngood movie\nThe answer is: ");
  CHECK(wrap_prompt(task_with(WrapperStyle::alpaca), inst, "zq kx").prompt_text ==
        "### Instruction:\nClassify the sentiment.\n\n### Input:\ngood movie zq kx"
        "\n\n### Response:\nThe answer is: ");
  CHECK(wrap_prompt(task_with(WrapperStyle::chatml), inst, "zq kx").prompt_text ==
        "<|im_start|>system\nClassify the sentiment.<|im_end|>\n<|im_start|>user\n"
        "good movie zq kx<|im_end|>\n<|im_start|>assistant\nThe answer is: ");
}

TEST_CASE("wrapped prompts end with the answer prefix and are suffix-local") {
  TaskInstance inst{"the weather turned", "pos"};
  const std::string suffix = "qq ww ee";
  for (auto style : {WrapperStyle::raw, WrapperStyle::alpaca, WrapperStyle::chatml}) {
    TaskSpec task = make_binary_task("t", style);
    PromptBundle with = wrap_prompt(task, inst, suffix);
    PromptBundle without = wrap_prompt(task, inst, "");
    CHECK(ends_with(with.prompt_text, task.answer_prefix()));
    CHECK(ends_with(without.prompt_text, task.answer_prefix()));
    // Folding the suffix into the input text reproduces the suffixed prompt.
    TaskInstance folded{inst.text + " " + suffix, inst.gold_label};
    CHECK(wrap_prompt(task, folded, "").prompt_text == with.prompt_text);
    // Deleting " <suffix>" from the suffixed prompt recovers the clean one.
    std::string cut = with.prompt_text;
    auto pos = cut.find(" " + suffix);
    REQUIRE(pos != std::string::npos);
    cut.erase(pos, suffix.size() + 1);
    CHECK(cut == without.prompt_text);
  }
}

TEST_CASE("prompt wrapping rejects a doubled answer prefix") {
  TaskSpec task = make_binary_task("t", WrapperStyle::raw);
  TaskInstance sneaky{"text that already ends with\nThe answer is: ", "pos"};
  CHECK_THROWS_AS(wrap_prompt(task, sneaky, ""), std::invalid_argument);
}

TEST_CASE("null prompt is the bare answer prefix") {
  TaskSpec raw = make_binary_task("a", WrapperStyle::raw);
  TaskSpec chat = make_binary_task("b", WrapperStyle::chatml);
  CHECK(null_prompt(raw).prompt_text == "\nThe answer is: ");
  CHECK(null_prompt(chat).prompt_text == raw.answer_prefix());
}

}  // TEST_SUITE
