#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsc/data/case.hpp"
#include "nsc/error.hpp"
#include "nsc/inference/uncertainty.hpp"
#include "nsc/model/bundle.hpp"
#include "nsc/model/coupling.hpp"

namespace nsc {

enum class StopReason { below_beta, exhausted_Q, no_candidates };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::below_beta: return "below_beta";
    case StopReason::exhausted_Q: return "exhausted_Q";
    case StopReason::no_candidates: return "no_candidates";
  }
  return "?";
}

struct EpisodeStep {
  std::size_t symptom = 0;
  bool present = false;
  std::vector<float> diagnosis;
  double uncertainty = 0.0;

  friend bool operator==(const EpisodeStep&, const EpisodeStep&) = default;
};

/// Everything that happened in one consultation. `initial_*` is the
/// prediction from the explicit symptoms alone, before any question.
struct EpisodeTrace {
  std::vector<float> initial_diagnosis;
  double initial_uncertainty = 0.0;
  std::vector<EpisodeStep> steps;
  std::vector<float> final_diagnosis;
  StopReason stop_reason = StopReason::below_beta;

  double final_uncertainty() const { return steps.empty() ? initial_uncertainty : steps.back().uncertainty; }
  std::vector<std::size_t> asked() const {
    std::vector<std::size_t> out;
    for (const auto& s : steps) out.push_back(s.symptom);
    return out;
  }

  friend bool operator==(const EpisodeTrace&, const EpisodeTrace&) = default;
};

/// Incremental clarification loop: suggest, receive an answer, re-diagnose,
/// check the stopping rule. The stopping rule is also checked on the
/// explicit-only prediction, so an episode may end before any question.
class Consultation {
 public:
  Consultation(const ModelBundle& bundle, KnownState initial, StoppingConfig stopping)
      : bundle_(&bundle), stopping_(stopping), state_(std::move(initial)) {
    stopping_.validate();
    if (state_.size() != bundle.num_symptoms()) throw Error("state size does not match vocabulary");
    trace_.initial_diagnosis = predict_diagnosis(bundle, state_);
    trace_.initial_uncertainty = uncertainty(std::span<const float>(trace_.initial_diagnosis), stopping_.normalize_entropy);
    trace_.final_diagnosis = trace_.initial_diagnosis;
    advance(trace_.initial_uncertainty);
  }

  bool concluded() const noexcept { return concluded_; }
  std::optional<std::size_t> question() const noexcept { return question_; }
  const KnownState& state() const noexcept { return state_; }
  const EpisodeTrace& trace() const noexcept { return trace_; }
  const ModelBundle& bundle() const noexcept { return *bundle_; }
  double current_uncertainty() const { return trace_.final_uncertainty(); }

  /// Answer to the pending question.
  void answer(bool present) {
    if (concluded_ || !question_) throw Error("consultation already concluded");
    const std::size_t sym = *question_;
    state_.reveal(sym, present);
    EpisodeStep step;
    step.symptom = sym;
    step.present = present;
    step.diagnosis = predict_diagnosis(*bundle_, state_);
    step.uncertainty = uncertainty(std::span<const float>(step.diagnosis), stopping_.normalize_entropy);
    trace_.final_diagnosis = step.diagnosis;
    const double u = step.uncertainty;
    trace_.steps.push_back(std::move(step));
    advance(u);
  }

 private:
  void advance(double u) {
    question_.reset();
    if (stopping_.use_entropy && u < stopping_.beta) return conclude(StopReason::below_beta);
    if (trace_.steps.size() >= stopping_.max_attempts) return conclude(StopReason::exhausted_Q);
    if (bundle_->mask_known && state_.unknown_count() == 0) return conclude(StopReason::no_candidates);
    const auto probs = suggest_symptom(*bundle_, state_, bundle_->mask_known);
    question_ = argmax(std::span<const float>(probs));
  }

  void conclude(StopReason r) {
    concluded_ = true;
    trace_.stop_reason = r;
  }

  const ModelBundle* bundle_;
  StoppingConfig stopping_;
  KnownState state_;
  EpisodeTrace trace_;
  std::optional<std::size_t> question_;
  bool concluded_ = false;
};

/// Answers "is this symptom present?" for a case.
using AnswerOracle = std::function<bool(std::size_t symptom)>;

/// Gold-standard answers: present for explicit and implicit-present
/// symptoms, absent for everything else (closed world).
inline AnswerOracle gold_oracle(const EncodedCase& c, std::size_t num_symptoms) {
  return [answers = c.answers(num_symptoms)](std::size_t id) { return answers.at(id) != 0; };
}

inline AnswerOracle gold_oracle(const CaseRecord& c, const Vocabulary& vocab) {
  return gold_oracle(encode_case(c, vocab), vocab.num_symptoms());
}

inline EpisodeTrace run_episode(const ModelBundle& bundle, std::span<const std::size_t> explicit_ids,
                                const AnswerOracle& oracle, const StoppingConfig& stopping) {
  KnownState st(bundle.num_symptoms());
  for (auto id : explicit_ids) st.reveal(id, true);
  Consultation c(bundle, std::move(st), stopping);
  while (!c.concluded()) c.answer(oracle(*c.question()));
  return c.trace();
}

inline EpisodeTrace run_episode(const ModelBundle& bundle, std::span<const std::string> explicit_names,
                                const AnswerOracle& oracle, const StoppingConfig& stopping) {
  std::vector<std::size_t> ids;
  for (const auto& n : explicit_names) ids.push_back(bundle.vocab.symptoms.id(n));
  return run_episode(bundle, std::span<const std::size_t>(ids), oracle, stopping);
}

inline EpisodeTrace run_episode(const ModelBundle& bundle, const EncodedCase& c, const StoppingConfig& stopping) {
  return run_episode(bundle, std::span<const std::size_t>(c.explicit_ids), gold_oracle(c, bundle.num_symptoms()),
                     stopping);
}

}  // namespace nsc
