// Release gate for the suffix-attack artifact. Each criterion prints exactly
// one "criterion N: PASS|FAIL" line on stdout; diagnostics go to stderr. The
// process exits 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "suffixrl/errors.hpp"
#include "suffixrl/eval.hpp"
#include "suffixrl/harness.hpp"
#include "suffixrl/policy.hpp"
#include "suffixrl/reward.hpp"
#include "suffixrl/synthetic_oracle.hpp"
#include "suffixrl/trainer.hpp"
#include "suffixrl/util.hpp"
#include "test_support.hpp"

using namespace suffixrl;
using namespace suffixrl::testing;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::shared_ptr<const AttackVocabulary> toy_vocab(std::size_t n) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(i));
  return std::make_shared<AttackVocabulary>(std::move(tokens));
}

void scramble(SuffixPolicy& policy, Rng& rng, double scale) {
  for (std::size_t i = 0; i < policy.k(); ++i)
    for (std::size_t v = 0; v < policy.vocab().size(); ++v)
      policy.mutable_logits().at(i, v) = scale * (2.0 * rng.next_double() - 1.0);
}

// ---------------------------------------------------------------------------
// 1. Analytic gradient vs central finite differences.

bool criterion_gradient_fd() {
  const auto start = clock_type::now();
  double worst = 0.0;
  const double temperatures[] = {0.7, 1.0, 1.3};

  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(900 + static_cast<std::uint64_t>(inst));
    const std::size_t k = 1 + rng.next_below(3);   // K <= 3
    const std::size_t v = 2 + rng.next_below(5);   // |V| <= 6
    const int n_samples = 1 + static_cast<int>(rng.next_below(8));
    const double tau = temperatures[inst % 3];
    PpoConfig cfg;
    cfg.clip_epsilon = (inst % 2 == 0) ? std::numeric_limits<double>::infinity() : 0.2;
    cfg.entropy_coeff = (inst % 3 == 0) ? 0.0 : 1e-3 * (1 + inst % 5);
    cfg.kl_old_coeff = (inst % 4 == 0) ? 0.05 : 0.0;

    auto vocab = toy_vocab(v);
    SuffixPolicy policy(vocab, k, tau, 0.1);
    SuffixPolicy old_policy(vocab, k, tau, 0.1);

    RolloutBatch batch;
    PolicySnapshot snap = snapshot(old_policy);
    for (int attempt = 0; attempt < 200; ++attempt) {
      scramble(policy, rng, 1.0);
      scramble(old_policy, rng, 1.0);
      snap = snapshot(old_policy);
      batch.samples.clear();
      batch.advantages.clear();
      for (int s = 0; s < n_samples; ++s) {
        std::vector<int> ids;
        for (std::size_t i = 0; i < k; ++i)
          ids.push_back(static_cast<int>(rng.next_below(v)));
        batch.samples.push_back(make_suffix(*vocab, std::move(ids)));
        batch.advantages.push_back(2.4 * rng.next_double() - 1.2);
      }
      if (std::isinf(cfg.clip_epsilon)) break;
      // Keep every sample clear of the clip boundary so the loss is smooth
      // within the finite-difference stencil.
      bool clear = true;
      for (int s = 0; s < n_samples; ++s) {
        const double ratio =
            std::exp(log_prob(policy, batch.samples[s]) - snap.log_prob(batch.samples[s]));
        const double clipped = std::min(std::max(ratio, 0.8), 1.2);
        const double a = batch.advantages[s];
        if (std::abs(ratio * a - clipped * a) < 1e-4) clear = false;
      }
      if (clear) break;
    }

    auto loss = [&](SuffixPolicy& p) {
      return -ppo_surrogate(p, snap, batch, cfg.clip_epsilon) -
             cfg.entropy_coeff * entropy(p) + cfg.kl_old_coeff * kl_to_snapshot(p, snap);
    };
    LogitMatrix grad = objective_gradient(policy, snap, batch, cfg);
    const double h = 1e-6;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t vv = 0; vv < v; ++vv) {
        const double saved = policy.mutable_logits().at(i, vv);
        policy.mutable_logits().at(i, vv) = saved + h;
        const double up = loss(policy);
        policy.mutable_logits().at(i, vv) = saved - h;
        const double dn = loss(policy);
        policy.mutable_logits().at(i, vv) = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double an = grad.at(i, vv);
        const double rel =
            std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
        worst = std::max(worst, rel);
      }
    }
  }

  const double elapsed = seconds_since(start);
  std::cerr << "[1] max relative error " << worst << " over 20 instances in " << elapsed
            << " s\n";
  return worst < 1e-5 && elapsed < 10.0;
}

// ---------------------------------------------------------------------------
// 2. Factored closed forms vs exhaustive enumeration.

bool criterion_enumeration() {
  const std::pair<std::size_t, std::size_t> shapes[] = {{1, 2}, {2, 4}, {3, 6}, {2, 6}, {3, 3}};
  const double tol = 1e-10;
  bool ok = true;
  for (const auto& [k, v] : shapes) {
    Rng rng(41 * k + v);
    auto vocab = toy_vocab(v);
    SuffixPolicy policy(vocab, k, 1.0, 0.2);
    SuffixPolicy other(vocab, k, 1.0, 0.2);
    scramble(policy, rng, 1.2);
    scramble(other, rng, 1.2);
    PolicySnapshot snap = snapshot(other);

    double mass = 0.0, h_joint = 0.0, klu_joint = 0.0, klold_joint = 0.0;
    for (const auto& ids : enumerate_ids(k, v)) {
      Suffix s = make_suffix(*vocab, ids);
      const double lp = log_prob(policy, s);
      const double lq = snap.log_prob(s);
      const double p = std::exp(lp);
      mass += p;
      h_joint -= p * lp;
      klu_joint += p * (lp + static_cast<double>(k) * std::log(static_cast<double>(v)));
      klold_joint += p * (lp - lq);
    }
    const double h = entropy(policy);
    const double klu = kl_to_uniform(policy);
    const double klold = kl_to_snapshot(policy, snap);
    const double identity =
        std::abs(klu - (static_cast<double>(k) * std::log(static_cast<double>(v)) - h));
    const bool shape_ok = std::abs(mass - 1.0) < tol && std::abs(h - h_joint) < tol &&
                          std::abs(klu - klu_joint) < tol &&
                          std::abs(klold - klold_joint) < tol && identity < tol;
    if (!shape_ok) {
      std::cerr << "[2] shape K=" << k << " V=" << v << " mass " << mass << " dH "
                << std::abs(h - h_joint) << " dKLu " << std::abs(klu - klu_joint) << " dKLold "
                << std::abs(klold - klold_joint) << " identity " << identity << "\n";
      ok = false;
    }
  }
  return ok;
}

// ---------------------------------------------------------------------------
// 3. Soft-min aggregation bounds and the equal-pair identity.

bool criterion_softmin() {
  bool ok = true;
  Rng rng(777);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.next_below(8);
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
      double base = 20.0 * rng.next_double() - 10.0;
      if (trial % 7 == 0) base -= 880.0;  // deep-negative regime
      values.push_back(base);
    }
    const double agg = aggregate_surfaces(values);
    const double lo = *std::min_element(values.begin(), values.end()) -
                      std::log(static_cast<double>(n));
    const double hi = *std::min_element(values.begin(), values.end());
    if (!(agg >= lo - 1e-9 && agg <= hi + 1e-9)) {
      std::cerr << "[3] bounds violated: agg " << agg << " not in [" << lo << ", " << hi
                << "]\n";
      ok = false;
    }
  }
  for (double c : {-900.0, -7.5, -1.0, 0.0, 2.5, 41.0}) {
    const double agg = aggregate_surfaces({c, c});
    if (std::abs(agg - (c - std::log(2.0))) > 1e-12) {
      std::cerr << "[3] identity violated at c=" << c << ": " << agg << "\n";
      ok = false;
    }
  }
  return ok;
}

// ---------------------------------------------------------------------------
// 4. Planted-oracle convergence across seeds.

bool criterion_planted_convergence() {
  const auto start = clock_type::now();
  const PlantedFixture fix = make_planted_fixture();
  RewardConfig reward;
  reward.lambda_fluency = 0.0;

  int converged = 0;
  for (int seed = 0; seed < 10; ++seed) {
    PpoConfig ppo;  // defaults: K=4, 200 iterations, lr 5e-2, entropy 1e-3, batch 32
    ppo.seed = static_cast<std::uint64_t>(seed);
    SyntheticOracle oracle(fix.sensitive, fix.tasks);
    TrainResult result = train(ppo, reward, fix.vocab, fix.tasks, fix.train_data, oracle);
    double min_mass = 1.0;
    for (std::size_t i = 0; i < result.policy.k(); ++i)
      min_mass = std::min(
          min_mass,
          result.policy.position_probs(i)[static_cast<std::size_t>(fix.planted_ids[i])]);
    const bool hit = result.best_suffix.token_ids == fix.planted_ids && min_mass >= 0.9;
    if (hit) ++converged;
    std::cerr << "[4] seed " << seed << ": min planted mass " << min_mass
              << (hit ? " (converged)" : " (missed)") << "\n";
  }
  const double elapsed = seconds_since(start);
  std::cerr << "[4] " << converged << "/10 seeds converged in " << elapsed << " s\n";
  return converged >= 9 && elapsed < 120.0;
}

// ---------------------------------------------------------------------------
// 5. No-signal stability: entropy stays near its maximum.

bool criterion_entropy_stability() {
  const PlantedFixture fix = make_planted_fixture();
  PpoConfig ppo;  // 200 iterations, entropy coeff 1e-3
  RewardConfig reward;
  reward.lambda_fluency = 0.0;
  ConstantOracle oracle(-1.0);
  TrainResult result = train(ppo, reward, fix.vocab, fix.tasks, fix.train_data, oracle);
  const double h = entropy(result.policy);
  const double h_max = 4.0 * std::log(32.0);
  std::cerr << "[5] final entropy " << h << " vs max " << h_max << "\n";
  return h >= 0.95 * h_max;
}

// ---------------------------------------------------------------------------
// 6. Published-delta arithmetic.

bool criterion_metric_arithmetic() {
  TaskMetrics clean;
  clean.accuracy = 0.89;
  clean.calce = -8.60;
  clean.n = 100;
  clean.correct = 89;
  TaskMetrics attacked;
  attacked.accuracy = 0.75;
  attacked.calce = -8.05;
  attacked.n = 100;
  attacked.correct = 75;
  const DeltaMetrics d = delta(clean, attacked);
  const bool acc_ok = std::abs(d.delta_acc - (-0.14)) <= 1e-12;
  const bool calce_ok = std::abs(d.delta_calce - 0.55) <= 1e-12;
  const bool inverse_ok = std::abs((clean.accuracy + d.delta_acc) - 0.75) <= 1e-12 &&
                          std::abs((clean.calce + d.delta_calce) - (-8.05)) <= 1e-12;
  if (!(acc_ok && calce_ok && inverse_ok))
    std::cerr << "[6] dAcc " << d.delta_acc << " dCalCE " << d.delta_calce << "\n";
  return acc_ok && calce_ok && inverse_ok;
}

// ---------------------------------------------------------------------------
// 7. Prediction rule vs brute force, with shift invariance.

bool criterion_prediction_rule() {
  bool ok = true;
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_labels = 2 + rng.next_below(3);
    std::vector<std::string> labels;
    std::map<std::string, SurfaceSet> surfaces;
    std::map<std::string, double> table;
    std::vector<double> brute_scores;
    for (std::size_t l = 0; l < n_labels; ++l) {
      const std::string label = "l" + std::to_string(l);
      labels.push_back(label);
      const std::size_t n_surf = 1 + rng.next_below(2);
      std::vector<std::string> variants;
      std::vector<double> logps;
      for (std::size_t s = 0; s < n_surf; ++s) {
        const std::string surface = "s" + std::to_string(l) + "_" + std::to_string(s);
        double value = -8.0 * rng.next_double();
        if (trial % 11 == 0) value = -2.0;  // force exact ties across the board
        variants.push_back(surface);
        table[surface] = value;
        logps.push_back(value);
      }
      surfaces[label] = SurfaceSet{variants};
      // Independent reduction: naive log of summed exponentials.
      double sum = 0.0;
      for (double lp : logps) sum += std::exp(lp);
      brute_scores.push_back(std::log(sum));
    }
    TaskSpec task("t", labels, surfaces, WrapperStyle::raw, "\nThe answer is: ", "Pick.");
    TaskInstance inst{"case " + std::to_string(trial), labels[0]};
    SurfaceScriptOracle oracle(table);

    std::size_t best = 0;
    for (std::size_t l = 1; l < n_labels; ++l)
      if (brute_scores[l] > brute_scores[best]) best = l;
    const std::string got = predict(oracle, task, inst, "");
    if (got != labels[best]) {
      std::cerr << "[7] trial " << trial << ": predict " << got << " vs brute "
                << labels[best] << "\n";
      ok = false;
    }
    ShiftedOracle shifted(oracle, 3.75);
    if (predict(shifted, task, inst, "") != got) {
      std::cerr << "[7] trial " << trial << ": shift changed the prediction\n";
      ok = false;
    }
    if (!ok) break;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// 8. Bitwise-identical reruns, with and without the oracle cache.

RunConfig tiny_run_config(const fs::path& dir) {
  std::ofstream(dir / "vocab.txt") << "zq\nkx\nmm\nnn\n";
  std::ofstream(dir / "task.json")
      << R"({"name": "t", "labels": ["pos", "neg"],)"
      << R"( "surfaces": {"pos": ["yes"], "neg": ["no"]},)"
      << R"( "wrapper": "raw", "instruction": "Pick pos or neg.",)"
      << R"( "answer_prefix": "\nThe answer is: "})" << "\n";
  std::ofstream(dir / "data.jsonl")
      << "{\"text\": \"case pos one\", \"label\": \"pos\"}\n"
      << "{\"text\": \"pos case two\", \"label\": \"pos\"}\n"
      << "{\"text\": \"the pos third\", \"label\": \"pos\"}\n"
      << "{\"text\": \"last pos case\", \"label\": \"pos\"}\n";
  RunConfig cfg;
  cfg.ppo.k = 2;
  cfg.ppo.iterations = 20;
  cfg.ppo.batch_size = 4;
  cfg.ppo.samples_per_iteration = 4;
  cfg.ppo.seed = 12;
  cfg.reward.lambda_fluency = 0.0;
  cfg.oracle.synthetic.planted_tokens = std::vector<std::string>{"zq", "kx"};
  cfg.oracle.synthetic.planted_strength = 2.0;
  cfg.oracle.synthetic.context_weight = 1.0;
  cfg.vocab_path = "vocab.txt";
  cfg.task_paths = {"task.json"};
  cfg.dataset_paths = {"data.jsonl"};
  cfg.output_dir = "a";
  return cfg;
}

std::string slurp(const fs::path& path) { return read_text_file(path); }

bool criterion_determinism() {
  ScopedTempDir dir("accept8");
  RunConfig cfg = tiny_run_config(dir.path);
  cfg.output_dir = "a";
  run_train(cfg, dir.path);
  cfg.output_dir = "b";
  run_train(cfg, dir.path);
  cfg.output_dir = "c";
  cfg.oracle.cache = true;
  run_train(cfg, dir.path);

  bool ok = true;
  for (const char* name :
       {"history.jsonl", "policy.json", "best_suffix.txt", "best_suffix.json"}) {
    const std::string a = slurp(dir.path / "a" / name);
    if (a != slurp(dir.path / "b" / name)) {
      std::cerr << "[8] rerun differs in " << name << "\n";
      ok = false;
    }
    if (a != slurp(dir.path / "c" / name)) {
      std::cerr << "[8] cache changed " << name << "\n";
      ok = false;
    }
  }
  return ok;
}

// ---------------------------------------------------------------------------
// 9. NaN fault containment.

bool criterion_fault_containment() {
  bool ok = true;

  // Part A: theta equality across a skipped iteration. A clean 3-iteration
  // run must land on exactly the parameters a 4-iteration run reaches when
  // its final iteration is poisoned and skipped.
  {
    auto vocab = toy_vocab(4);
    TaskSpec task = make_binary_task("t", WrapperStyle::raw);
    std::vector<TaskSpec> tasks{task};
    std::vector<std::vector<TaskInstance>> datasets{{{"case pos one", "pos"},
                                                     {"pos case two", "pos"},
                                                     {"the pos third", "pos"},
                                                     {"last pos case", "pos"}}};
    SyntheticOracleConfig scfg;
    scfg.planted_tokens = std::vector<std::string>{"t0", "t1"};
    scfg.planted_strength = 2.0;
    scfg.context_weight = 1.0;
    SyntheticOracle synth(scfg, tasks);
    PpoConfig cfg;
    cfg.k = 2;
    cfg.batch_size = 4;
    cfg.samples_per_iteration = 4;
    cfg.seed = 5;
    RewardConfig reward;
    reward.lambda_fluency = 0.0;

    CountingOracle counter(synth);
    PpoConfig probe = cfg;
    probe.iterations = 1;
    (void)train(probe, reward, vocab, tasks, datasets, counter);
    const std::uint64_t per_iter = counter.calls();

    PpoConfig clean_cfg = cfg;
    clean_cfg.iterations = 3;
    TrainResult clean = train(clean_cfg, reward, vocab, tasks, datasets, synth);

    FaultInjectingOracle faulty(synth, FaultInjectingOracle::Mode::nan_score);
    faulty.set_window(3 * per_iter, 4 * per_iter);
    PpoConfig fault_cfg = cfg;
    fault_cfg.iterations = 4;
    TrainResult skipped = train(fault_cfg, reward, vocab, tasks, datasets, faulty);

    if (skipped.policy.logits().data != clean.policy.logits().data) {
      std::cerr << "[9] theta changed across a skipped iteration\n";
      ok = false;
    }
    if (skipped.history.records.size() != 4 ||
        !std::isnan(skipped.history.records[3].mean_reward) ||
        skipped.history.records[3].nan_incidents != 1) {
      std::cerr << "[9] the poisoned iteration was not recorded as skipped\n";
      ok = false;
    }
    for (int i = 0; i < 3; ++i)
      if (std::isnan(skipped.history.records[static_cast<std::size_t>(i)].mean_reward)) {
        std::cerr << "[9] clean iteration " << i << " was marked faulty\n";
        ok = false;
      }
  }

  // Part B: sporadic NaN faults on roughly 1% of calls; every incident is
  // counted and the parameters stay finite.
  {
    const PlantedFixture fix = make_planted_fixture();
    SyntheticOracle synth(fix.sensitive, fix.tasks);
    FaultInjectingOracle faulty(synth, FaultInjectingOracle::Mode::nan_score);
    faulty.set_modulus(100);
    PpoConfig ppo;
    ppo.iterations = 30;
    ppo.seed = 2;
    RewardConfig reward;
    reward.lambda_fluency = 0.0;
    TrainResult result = train(ppo, reward, fix.vocab, fix.tasks, fix.train_data, faulty);

    std::uint64_t last = 0;
    std::uint64_t nan_records = 0;
    for (const auto& rec : result.history.records) {
      if (rec.nan_incidents < last) {
        std::cerr << "[9] incident counter decreased\n";
        ok = false;
      }
      if (std::isnan(rec.mean_reward)) {
        ++nan_records;
        if (rec.nan_incidents != last + 1) {
          std::cerr << "[9] faulty iteration not counted\n";
          ok = false;
        }
      } else if (rec.nan_incidents != last) {
        std::cerr << "[9] clean iteration bumped the counter\n";
        ok = false;
      }
      last = rec.nan_incidents;
    }
    if (result.history.records.back().nan_incidents != nan_records) {
      std::cerr << "[9] final incident count " << result.history.records.back().nan_incidents
                << " != " << nan_records << " faulty records\n";
      ok = false;
    }
    if (faulty.faults() == 0) {
      std::cerr << "[9] fault injector never fired; fixture needs retuning\n";
      ok = false;
    }
    if (!all_finite(result.policy.logits().data)) {
      std::cerr << "[9] non-finite parameters after faulted training\n";
      ok = false;
    }
    std::cerr << "[9] " << faulty.faults() << " injected faults, " << nan_records
              << " skipped iterations over 30\n";
  }

  return ok;
}

// ---------------------------------------------------------------------------
// 10. Asymmetric transfer through the report pipeline.

bool criterion_transfer_fixture() {
  const auto start = clock_type::now();
  const PlantedFixture fix = make_planted_fixture();
  SyntheticOracle sensitive(fix.sensitive, fix.tasks);
  SyntheticOracle insensitive(fix.insensitive, fix.tasks);

  std::map<std::string, Suffix> suffixes;
  suffixes["planted"] = make_suffix(*fix.vocab, fix.planted_ids);
  std::vector<std::pair<std::string, const ScoringOracle*>> oracles{
      {"sensitive", &sensitive}, {"insensitive", &insensitive}};
  TransferReport report =
      transfer_matrix(suffixes, oracles, fix.tasks, fix.eval_data, {4});

  bool ok = true;
  const TransferCell& hot = report.grid.at(TransferKey{"planted", "sensitive", "planted", 4});
  const TransferCell& cold =
      report.grid.at(TransferKey{"planted", "insensitive", "planted", 4});
  if (hot.failed || cold.failed) {
    std::cerr << "[10] a fixture cell failed: " << hot.error << cold.error << "\n";
    ok = false;
  }
  if (!(hot.delta.delta_acc <= -0.2)) {
    std::cerr << "[10] sensitive dAcc " << hot.delta.delta_acc << " (need <= -0.2)\n";
    ok = false;
  }
  if (!(std::abs(cold.delta.delta_acc) <= 0.05)) {
    std::cerr << "[10] insensitive |dAcc| " << std::abs(cold.delta.delta_acc)
              << " (need <= 0.05)\n";
    ok = false;
  }

  // The full report path: JSON round trip plus both renderings.
  const std::string jtext = render_report_json(report);
  TransferReport back = report_from_json(jtext);
  if (render_report_json(back) != jtext) {
    std::cerr << "[10] report JSON round trip is not stable\n";
    ok = false;
  }
  if (render_report_md(report).find("# Transfer report") == std::string::npos ||
      render_report_csv(report).find("seen,target,task,k,") == std::string::npos) {
    std::cerr << "[10] report renderers produced unexpected output\n";
    ok = false;
  }

  const double elapsed = seconds_since(start);
  std::cerr << "[10] sensitive dAcc " << hot.delta.delta_acc << ", insensitive dAcc "
            << cold.delta.delta_acc << " in " << elapsed << " s\n";
  return ok && elapsed < 60.0;
}

}  // namespace

int main() {
  struct Entry {
    int number;
    bool (*fn)();
  };
  const Entry entries[] = {
      {1, criterion_gradient_fd},       {2, criterion_enumeration},
      {3, criterion_softmin},           {4, criterion_planted_convergence},
      {5, criterion_entropy_stability}, {6, criterion_metric_arithmetic},
      {7, criterion_prediction_rule},   {8, criterion_determinism},
      {9, criterion_fault_containment}, {10, criterion_transfer_fixture},
  };
  bool all_ok = true;
  for (const auto& entry : entries) {
    bool ok = false;
    try {
      ok = entry.fn();
    } catch (const std::exception& e) {
      std::cerr << "[" << entry.number << "] unexpected exception: " << e.what() << "\n";
      ok = false;
    }
    std::cout << "criterion " << entry.number << ": " << (ok ? "PASS" : "FAIL") << std::endl;
    if (!ok) all_ok = false;
  }
  return all_ok ? 0 : 1;
}
