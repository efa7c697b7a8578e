// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 if
// anything failed. Tolerances and budgets are fixed here on purpose.
//
// Set NSC_MUZHI_DIR to a directory holding the MuZhi corpus in the record
// format (train.jsonl, val.jsonl optional, test.jsonl) to enable the corpus
// criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "nsc/nsc.hpp"

using namespace nsc;

namespace {

constexpr std::size_t kGradSeeds = 100;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kLossTol = 1e-4;
constexpr std::size_t kOrderCases = 100;
constexpr std::size_t kOrdersPerCase = 5;

constexpr std::size_t kDeskDiseases = 20;
constexpr std::size_t kDeskSymptoms = 60;
constexpr std::size_t kDeskTrain = 20000;
constexpr std::size_t kDeskVal = 2000;
constexpr std::size_t kDeskTest = 2000;
constexpr std::uint64_t kDeskSeed = 2024;
constexpr double kDeskBudgetSeconds = 15 * 60.0;
constexpr double kBaselineGap = 0.05;
constexpr double kEntropyMargin = 0.05;
constexpr std::size_t kAblationFixedIters = 5;

constexpr double kMuzhiAcc1 = 0.70;
constexpr std::size_t kMuzhiTest = 142;
constexpr double kMuzhiBudgetSeconds = 30 * 60.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Tally {
  int failed = 0;
  void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS  " : "FAIL  ") << name << "  " << detail << std::endl;
    if (!pass) ++failed;
  }
  void skip(const std::string& name, const std::string& why) { std::cout << "SKIP  " << name << "  " << why << std::endl; }
};

std::filesystem::path desk_config_path() {
  return std::filesystem::path(NSC_SOURCE_DIR) / "configs" / "desk.json";
}

const std::size_t kK[] = {1, 3, 5};

// ---- gradients -----------------------------------------------------------

void gradient_correctness(Tally& t) {
  const auto t0 = Clock::now();
  nsc::testing::GradCheck all;
  for (std::size_t seed = 0; seed < kGradSeeds; ++seed) all.merge(nsc::testing::check_everything(seed));
  const double secs = seconds_since(t0);
  t.report("gradient_correctness", all.ok() && secs < kGradBudgetSeconds,
           "max_rel_err=" + fmt("%.3g", all.max_rel_error) + " checked=" + std::to_string(all.checked) +
               " skipped_kinks=" + std::to_string(all.skipped) + " seeds=" + std::to_string(kGradSeeds) +
               " time=" + fmt("%.1fs", secs));
}

// ---- loss oracles --------------------------------------------------------

double asl_single(double p, bool positive, const LossConfig& cfg) {
  const double prob[] = {p};
  const double target[] = {positive ? 1.0 : 0.0};
  return asymmetric_loss<double, double>(prob, target, cfg);
}

void loss_oracles(Tally& t) {
  struct Row {
    const char* what;
    double got, want;
  };
  LossConfig def;
  LossConfig clip = def;
  clip.margin = 0.2;
  const double onehot[] = {0.0, 1.0, 0.0};
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  const std::vector<Row> rows = {
      {"asl positive p=1", asl_single(1.0, true, def), 0.0},
      {"asl positive p=0.5", asl_single(0.5, true, def), 0.3466},
      {"asl positive p=0.5 (exact)", asl_single(0.5, true, def), 0.5 * -std::log(0.5)},
      {"asl negative p=0.1 m=0.2", asl_single(0.1, false, clip), 0.0},
      {"asl negative p=0.5", asl_single(0.5, false, def), 0.0245},
      {"asl negative p=0.5 (exact)", asl_single(0.5, false, def), std::pow(0.45, 4) * -std::log(0.55)},
      {"ce one-hot", diagnosis_loss<double>(onehot, 1), 0.0},
      {"ce uniform D=4", diagnosis_loss<double>(uniform, 2), 1.3863},
      {"ce clamped zero", diagnosis_loss<double>(onehot, 0), std::log(1e8)},
  };
  double worst = 0.0;
  std::string worst_name = "-";
  for (const auto& r : rows) {
    const double e = std::abs(r.got - r.want);
    if (e > worst) {
      worst = e;
      worst_name = r.what;
    }
  }
  t.report("loss_oracles", worst <= kLossTol,
           std::to_string(rows.size()) + " values, max_abs_err=" + fmt("%.2g", worst) + " (" + worst_name + ")");
}

// ---- order invariance ----------------------------------------------------

void order_invariance(Tally& t, const ModelBundle& bundle, const std::vector<EncodedCase>& cases) {
  numkit::Rng rng(77);
  const std::size_t S = bundle.num_symptoms();
  std::size_t mismatches = 0, checked = 0;
  for (std::size_t c = 0; c < kOrderCases && c < cases.size(); ++c) {
    const auto& ec = cases[c];
    std::vector<std::pair<std::size_t, bool>> findings;
    for (auto s : ec.explicit_ids) findings.emplace_back(s, true);
    for (auto [s, present] : ec.implicit_ids) findings.emplace_back(s, present);
    std::vector<float> reference;
    for (std::size_t o = 0; o < kOrdersPerCase; ++o) {
      rng.shuffle(std::span<std::pair<std::size_t, bool>>(findings));
      KnownState st(S);
      for (auto [s, present] : findings) st.reveal(s, present);
      const auto p = predict_diagnosis(bundle, st);
      if (o == 0) {
        reference = p;
      } else if (p.size() != reference.size() ||
                 std::memcmp(p.data(), reference.data(), p.size() * sizeof(float)) != 0) {
        ++mismatches;
      }
      ++checked;
    }
  }
  t.report("order_invariance", mismatches == 0 && checked == kOrderCases * kOrdersPerCase,
           std::to_string(checked) + " predictions, " + std::to_string(mismatches) + " not bitwise identical");
}

// ---- desk world ----------------------------------------------------------

struct DeskRun {
  DatasetSplit split;
  std::vector<EncodedCase> test;
  TrainConfig cfg;
  ModelBundle full;
  EvaluationResult full_eval;
};

DeskRun desk_end_to_end(Tally& t) {
  const auto t0 = Clock::now();
  DeskRun run;
  auto profiles = generate_profiles(kDeskDiseases, kDeskSymptoms, kDeskSeed);
  run.split = generate_dataset(profiles, kDeskTrain, kDeskVal, kDeskTest, kDeskSeed);
  run.test = encode_cases(run.split.test, run.split.vocab);
  run.cfg = load_train_config(desk_config_path());

  const auto ex = baseline_train_eval(run.split, run.cfg, false, kK);
  const auto exim = baseline_train_eval(run.split, run.cfg, true, kK);
  run.full = train_model(run.split, run.cfg).bundle;
  run.full_eval = evaluate_model(run.full, run.test, kK);
  const double secs = seconds_since(t0);

  const double a_ex = ex.report.acc(1), a_full = run.full_eval.report.acc(1), a_exim = exim.report.acc(1);
  const bool pass = a_full >= a_ex + kBaselineGap && a_exim >= a_full && secs < kDeskBudgetSeconds;
  t.report("desk_end_to_end", pass,
           "acc@1 ex=" + fmt("%.4f", a_ex) + " full=" + fmt("%.4f", a_full) + " ex&im=" + fmt("%.4f", a_exim) +
               " (need full-ex>=" + fmt("%.2f", kBaselineGap) + ", ex&im>=full) acc@3 full=" +
               fmt("%.4f", run.full_eval.report.acc(3)) + " mean_iters=" +
               fmt("%.2f", run.full_eval.report.mean_iterations) + " time=" + fmt("%.1fs", secs));
  return run;
}

void entropy_curve_shape(Tally& t, const DeskRun& run) {
  // Same population on both sides: episodes that asked at least once.
  double first = 0.0, last = 0.0;
  std::size_t n = 0;
  for (const auto& tr : run.full_eval.traces) {
    if (tr.steps.empty()) continue;
    first += tr.steps.front().uncertainty;
    last += tr.steps.back().uncertainty;
    ++n;
  }
  if (n == 0) {
    t.report("entropy_curve", false, "no episode asked a question");
    return;
  }
  first /= static_cast<double>(n);
  last /= static_cast<double>(n);
  const auto& curve = run.full_eval.report.entropy_curve;
  t.report("entropy_curve", first - last >= kEntropyMargin,
           "mean u at iteration 1=" + fmt("%.4f", first) + " at final iteration=" + fmt("%.4f", last) +
               " margin=" + fmt("%.4f", first - last) + " over " + std::to_string(n) +
               " episodes; curve length=" + std::to_string(curve.size()));
}

void ablations(Tally& t, const DeskRun& run) {
  auto variant = [&](TrainMode mode, std::size_t fixed) {
    TrainConfig cfg = run.cfg;
    cfg.mode = mode;
    cfg.fixed_iters = fixed;
    const auto bundle = train_model(run.split, cfg).bundle;
    return evaluate_model(bundle, run.test, kK).report;
  };
  const auto t0 = Clock::now();
  const auto two = variant(TrainMode::no_entropy_fixed_iters, kAblationFixedIters);
  const auto diag = variant(TrainMode::diag_loss_only, kAblationFixedIters);
  const double f_two = two.symptom_f1.value_or(-1.0), f_diag = diag.symptom_f1.value_or(-1.0);
  t.report("ablation_symptom_f1", f_two > f_diag,
           "fixed_iters=" + std::to_string(kAblationFixedIters) + " F1 two-losses=" + fmt("%.4f", f_two) +
               " diag-only=" + fmt("%.4f", f_diag) + " acc@1 " + fmt("%.4f", two.acc(1)) + "/" +
               fmt("%.4f", diag.acc(1)));

  const std::size_t q = run.cfg.max_attempts;
  const auto fixed_q = variant(TrainMode::no_entropy_fixed_iters, q);
  const double it_full = run.full_eval.report.mean_iterations;
  t.report("ablation_iterations", it_full < fixed_q.mean_iterations,
           "mean iterations with entropy=" + fmt("%.2f", it_full) + " without (fixed_iters=Q=" + std::to_string(q) +
               ")=" + fmt("%.2f", fixed_q.mean_iterations) + " acc@1 " +
               fmt("%.4f", run.full_eval.report.acc(1)) + "/" + fmt("%.4f", fixed_q.acc(1)) +
               " time=" + fmt("%.1fs", seconds_since(t0)));
}

// ---- determinism ---------------------------------------------------------

void determinism(Tally& t) {
  // A smaller world than the desk one keeps the doubled run cheap.
  TrainConfig cfg = load_train_config(desk_config_path());
  cfg.epochs = 2;
  auto once = [&] {
    auto profiles = generate_profiles(10, 40, 5);
    auto split = generate_dataset(profiles, 3000, 300, 300, 5);
    auto bundle = train_model(split, cfg).bundle;
    auto bytes = serialize_checkpoint(bundle);
    auto report = evaluate_model(bundle, encode_cases(split.test, split.vocab), kK).report;
    return std::make_pair(std::move(bytes), std::move(report));
  };
  const auto a = once();
  const auto b = once();
  const bool same_ckpt = a.first == b.first;
  const bool same_report = a.second == b.second && format_report(a.second) == format_report(b.second);
  t.report("determinism", same_ckpt && same_report,
           std::string("checkpoint ") + (same_ckpt ? "identical" : "differs") + " (" +
               std::to_string(a.first.size()) + " bytes, hash " + checkpoint_hash(a.first) + "), eval report " +
               (same_report ? "identical" : "differs"));
}

// ---- MuZhi ---------------------------------------------------------------

void muzhi(Tally& t) {
  const char* dir = std::getenv("NSC_MUZHI_DIR");
  if (!dir || !*dir) {
    t.skip("muzhi_corpus", "NSC_MUZHI_DIR not set");
    return;
  }
  const auto t0 = Clock::now();
  const auto split = load_cases(dir);
  const auto cfg = load_train_config(std::filesystem::path(NSC_SOURCE_DIR) / "configs" / "muzhi.json");
  const auto bundle = train_model(split, cfg).bundle;
  const auto rep = evaluate_model(bundle, encode_cases(split.test, split.vocab), kK).report;
  const double secs = seconds_since(t0);
  t.report("muzhi_corpus", split.test.size() == kMuzhiTest && rep.acc(1) >= kMuzhiAcc1 && secs < kMuzhiBudgetSeconds,
           "test cases=" + std::to_string(split.test.size()) + " acc@1=" + fmt("%.4f", rep.acc(1)) +
               " (need >= " + fmt("%.2f", kMuzhiAcc1) + ") time=" + fmt("%.1fs", secs));
}

}  // namespace

int main() {
  Tally t;
  auto guarded = [&](const char* name, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      t.report(name, false, std::string("threw: ") + e.what());
    }
  };
  guarded("gradient_correctness", [&] { gradient_correctness(t); });
  guarded("loss_oracles", [&] { loss_oracles(t); });
  guarded("desk_end_to_end", [&] {
    const auto run = desk_end_to_end(t);
    guarded("order_invariance", [&] { order_invariance(t, run.full, run.test); });
    guarded("entropy_curve", [&] { entropy_curve_shape(t, run); });
    guarded("ablations", [&] { ablations(t, run); });
  });
  guarded("determinism", [&] { determinism(t); });
  guarded("muzhi_corpus", [&] { muzhi(t); });
  std::cout << (t.failed == 0 ? "acceptance: all criteria met" : "acceptance: " + std::to_string(t.failed) + " failed")
            << std::endl;
  return t.failed == 0 ? 0 : 1;
}
