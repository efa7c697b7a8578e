#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsc/data/case.hpp"
#include "nsc/error.hpp"
#include "nsc/eval/metrics.hpp"
#include "nsc/inference/episode.hpp"

namespace nsc {

struct EvalReport {
  std::size_t cases = 0;
  std::vector<std::pair<std::size_t, double>> accuracy;  // (k, Acc@k)
  std::optional<double> symptom_f1;
  double mean_iterations = 0.0;
  /// Mean uncertainty of the explicit-only prediction, after the first
  /// answer (episodes with at least one question), and at the end.
  double mean_initial_uncertainty = 0.0;
  double mean_first_uncertainty = 0.0;
  double mean_final_uncertainty = 0.0;
  std::vector<double> entropy_curve;

  double acc(std::size_t k) const {
    for (auto [kk, v] : accuracy)
      if (kk == k) return v;
    throw Error("Acc@" + std::to_string(k) + " was not computed");
  }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct EvaluationResult {
  EvalReport report;
  std::vector<EpisodeTrace> traces;
};

/// Accuracy block of a report from final distributions.
inline std::vector<std::pair<std::size_t, double>> accuracy_table(const std::vector<std::vector<float>>& preds,
                                                                  std::span<const std::size_t> golds,
                                                                  std::span<const std::size_t> ks) {
  std::vector<std::pair<std::size_t, double>> out;
  for (auto k : ks) out.emplace_back(k, acc_at_k(preds, golds, k));
  return out;
}

/// Runs one gold-oracle episode per case and aggregates the metrics.
/// Symptom F1 compares the asked symptoms with the implicit-present ones.
inline EvaluationResult evaluate_model(const ModelBundle& bundle, std::span<const EncodedCase> cases,
                                       std::span<const std::size_t> ks, std::optional<StoppingConfig> stopping = {}) {
  if (cases.empty()) throw Error("evaluate_model: no cases");
  const StoppingConfig stop = stopping.value_or(bundle.stopping);
  EvaluationResult res;
  res.traces.reserve(cases.size());
  std::vector<std::vector<float>> finals;
  std::vector<std::size_t> golds;
  std::vector<std::vector<std::size_t>> asked, gold_sets;
  double iters = 0, u0 = 0, u1 = 0, uf = 0;
  std::size_t with_steps = 0;
  for (const auto& c : cases) {
    auto trace = run_episode(bundle, c, stop);
    finals.push_back(trace.final_diagnosis);
    golds.push_back(c.disease);
    asked.push_back(trace.asked());
    gold_sets.push_back(c.implicit_present());
    iters += static_cast<double>(trace.steps.size());
    u0 += trace.initial_uncertainty;
    uf += trace.final_uncertainty();
    if (!trace.steps.empty()) {
      u1 += trace.steps.front().uncertainty;
      ++with_steps;
    }
    res.traces.push_back(std::move(trace));
  }
  auto& r = res.report;
  const double n = static_cast<double>(cases.size());
  r.cases = cases.size();
  r.accuracy = accuracy_table(finals, golds, ks);
  try {
    r.symptom_f1 = symptom_f1(asked, gold_sets);
  } catch (const Error&) {
    r.symptom_f1.reset();
  }
  r.mean_iterations = iters / n;
  r.mean_initial_uncertainty = u0 / n;
  r.mean_first_uncertainty = with_steps ? u1 / static_cast<double>(with_steps) : 0.0;
  r.mean_final_uncertainty = uf / n;
  r.entropy_curve = with_steps ? entropy_curve(res.traces) : std::vector<double>{};
  return res;
}

namespace detail {
inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace detail

/// Line-delimited "metric<TAB>value" table.
inline std::string format_report(const EvalReport& r) {
  std::string out = "metric\tvalue\n";
  out += "cases\t" + std::to_string(r.cases) + "\n";
  for (auto [k, v] : r.accuracy) out += "acc@" + std::to_string(k) + "\t" + detail::fmt6(v) + "\n";
  out += "symptom_f1\t" + (r.symptom_f1 ? detail::fmt6(*r.symptom_f1) : std::string("nan")) + "\n";
  out += "mean_iterations\t" + detail::fmt6(r.mean_iterations) + "\n";
  out += "mean_initial_uncertainty\t" + detail::fmt6(r.mean_initial_uncertainty) + "\n";
  out += "mean_first_uncertainty\t" + detail::fmt6(r.mean_first_uncertainty) + "\n";
  out += "mean_final_uncertainty\t" + detail::fmt6(r.mean_final_uncertainty) + "\n";
  return out;
}

/// Two-column "iteration<TAB>mean_uncertainty" table, iterations 1-based.
inline std::string format_entropy_curve(std::span<const double> curve) {
  std::string out = "iteration\tmean_uncertainty\n";
  for (std::size_t i = 0; i < curve.size(); ++i) out += std::to_string(i + 1) + "\t" + detail::fmt6(curve[i]) + "\n";
  return out;
}

}  // namespace nsc
