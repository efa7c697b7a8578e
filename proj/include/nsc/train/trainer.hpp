#pragma once

// Joint training of the two submodels. Each case replays its clarification
// episode with gold answers. At every iteration the suggestion head is
// scored with the asymmetric loss against the gold-present symptoms still
// unknown, its argmax is fed to the diagnosis head as a straight-through
// one-hot, and the diagnosis head is scored with cross-entropy. Revealed
// history enters as constants; only the current selection carries gradient.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsc/data/case.hpp"
#include "nsc/error.hpp"
#include "nsc/eval/evaluate.hpp"
#include "nsc/inference/uncertainty.hpp"
#include "nsc/model/bundle.hpp"
#include "nsc/model/checkpoint.hpp"
#include "nsc/model/coupling.hpp"
#include "nsc/model/losses.hpp"
#include "nsc/numkit/optimizer.hpp"
#include "nsc/train/config.hpp"

namespace nsc {

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double joint_loss = 0.0;
  double symptom_loss = 0.0;
  double diagnosis_loss = 0.0;
  double mean_iterations = 0.0;
  std::optional<double> val_acc1;
  std::optional<double> val_symptom_f1;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
  std::size_t best_epoch = 0;
  std::string checkpoint_path;
};

struct TrainResult {
  ModelBundle bundle;
  TrainReport report;
};

/// Gradients and per-case loss sums for one batch.
struct BatchResult {
  numkit::Gradients<float> symptom_grads;
  numkit::Gradients<float> diagnosis_grads;
  double joint_loss = 0.0;  // summed over iterations, averaged over cases
  double symptom_loss = 0.0;
  double diagnosis_loss = 0.0;
  double mean_iterations = 0.0;
  std::size_t max_iterations = 0;
};

namespace detail {

inline numkit::Tensor2D<std::uint8_t> known_masks(std::span<const KnownState> states, std::span<const std::size_t> rows) {
  const std::size_t s = states.front().size();
  numkit::Tensor2D<std::uint8_t> m(rows.size(), s);
  for (std::size_t i = 0; i < rows.size(); ++i) known_mask(states[rows[i]], m.row(i));
  return m;
}

inline Tensor encode_rows(std::span<const KnownState> states, std::span<const std::size_t> rows) {
  const std::size_t s = states.front().size();
  Tensor x(rows.size(), 2 * s);
  for (std::size_t i = 0; i < rows.size(); ++i) encode_state(states[rows[i]], x.row(i));
  return x;
}

/// Smallest active subset that normalizes with its own batch moments.
/// Late iterations often keep only a handful of cases.
inline std::size_t min_statistics_rows(const TrainConfig& cfg) {
  return std::clamp<std::size_t>(cfg.batch_size / 4, 2, 16);
}

inline void check_finite(double v, std::uint64_t batch, std::size_t iteration, const char* what) {
  if (!std::isfinite(v))
    throw NonFiniteError(std::string("non-finite ") + what + " loss in batch " + std::to_string(batch) +
                         ", iteration " + std::to_string(iteration));
}

}  // namespace detail

/// Replays the episodes of one batch in training mode and accumulates the
/// gradients of sum_t (lambda * L_s + L_d), averaged over the batch.
/// Batchnorm running statistics of `bundle` are updated when
/// `update_statistics` is set; parameters are never touched.
inline BatchResult batch_gradients(ModelBundle& bundle, std::span<const EncodedCase* const> cases,
                                   const TrainConfig& cfg, std::uint64_t batch_seed, bool update_statistics = true,
                                   std::uint64_t batch_id = 0) {
  using numkit::ForwardOptions;
  using numkit::Mode;
  const std::size_t S = bundle.num_symptoms();
  const std::size_t B = cases.size();
  if (B == 0) throw Error("empty batch");
  const float inv_b = 1.0f / static_cast<float>(B);
  const double lambda = cfg.effective_lambda();
  const bool use_symptom_loss = cfg.mode != TrainMode::diag_loss_only;
  const StoppingConfig stop = cfg.stopping();
  const std::size_t min_rows = detail::min_statistics_rows(cfg);

  BatchResult res;
  res.symptom_grads = numkit::Gradients<float>::zeros_like(bundle.symptom_net);
  res.diagnosis_grads = numkit::Gradients<float>::zeros_like(bundle.diagnosis_net);

  std::vector<KnownState> states;
  std::vector<std::vector<std::uint8_t>> answers;
  states.reserve(B);
  answers.reserve(B);
  for (const auto* c : cases) {
    states.push_back(c->explicit_state(S));
    answers.push_back(c->answers(S));
  }
  std::vector<double> case_joint(B, 0.0), case_sym(B, 0.0), case_diag(B, 0.0);
  std::vector<std::size_t> case_iters(B, 0);

  std::vector<std::size_t> active;
  {
    // Iteration 0: diagnosis from the explicit symptoms alone.
    std::vector<std::size_t> all(B);
    for (std::size_t i = 0; i < B; ++i) all[i] = i;
    ForwardOptions opt{Mode::train, numkit::derive_seed(batch_seed, {0, 2})};
    opt.min_batch_statistics = min_rows;
    auto fwd = numkit::forward(bundle.diagnosis_net, detail::encode_rows(states, all), opt);
    Tensor up(B, bundle.num_diseases());
    for (std::size_t i = 0; i < B; ++i) {
      const double ld = diagnosis_loss<float>(fwd.output.row(i), cases[i]->disease, up.row(i));
      detail::check_finite(ld, batch_id, 0, "diagnosis");
      for (auto& g : up.row(i)) g *= inv_b;
      case_diag[i] += ld;
      case_joint[i] += ld;
      const double u = uncertainty(std::span<const float>(fwd.output.row(i)), stop.normalize_entropy);
      const bool done = (stop.use_entropy && u < stop.beta) || (cfg.mask_known && states[i].unknown_count() == 0);
      if (!done) active.push_back(i);
    }
    auto bwd = numkit::backward(bundle.diagnosis_net, fwd.tape, up, false);
    res.diagnosis_grads += bwd.grads;
    if (update_statistics) numkit::commit_batch_statistics(bundle.diagnosis_net, fwd.tape);
  }

  std::vector<float> target(S), sel(S), dsel(S), dq(S);
  for (std::size_t t = 1; t <= stop.max_attempts && !active.empty(); ++t) {
    const std::size_t n = active.size();
    const auto mask = detail::known_masks(states, active);
    ForwardOptions sopt{Mode::train, numkit::derive_seed(batch_seed, {t, 1}), cfg.mask_known ? &mask : nullptr};
    sopt.min_batch_statistics = min_rows;
    auto sfwd = numkit::forward(bundle.symptom_net, detail::encode_rows(states, active), sopt);

    Tensor sym_up(n, S);
    Tensor dx(n, 2 * S);
    std::vector<std::size_t> chosen(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = active[r];
      auto q = sfwd.output.row(r);
      for (std::size_t j = 0; j < S; ++j) target[j] = (answers[i][j] && !states[i].is_known(j)) ? 1.0f : 0.0f;
      const double ls = asymmetric_loss<float, float>(q, target, bundle.loss, dq);
      detail::check_finite(ls, batch_id, t, "symptom");
      case_sym[i] += ls;
      if (use_symptom_loss) {
        case_joint[i] += lambda * ls;
        const float scale = static_cast<float>(lambda) * inv_b;
        auto up = sym_up.row(r);
        for (std::size_t j = 0; j < S; ++j) up[j] = scale * dq[j];
      }
      sel = straight_through_select<float>(q);
      chosen[r] = argmax<float>(q);
      route_selection<float>(states[i].present(), states[i].absent(), sel, answers[i], dx.row(r));
    }

    ForwardOptions dopt{Mode::train, numkit::derive_seed(batch_seed, {t, 2})};
    dopt.min_batch_statistics = min_rows;
    auto dfwd = numkit::forward(bundle.diagnosis_net, dx, dopt);
    Tensor diag_up(n, bundle.num_diseases());
    std::vector<std::size_t> still;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = active[r];
      const double ld = diagnosis_loss<float>(dfwd.output.row(r), cases[i]->disease, diag_up.row(r));
      detail::check_finite(ld, batch_id, t, "diagnosis");
      for (auto& g : diag_up.row(r)) g *= inv_b;
      case_diag[i] += ld;
      case_joint[i] += ld;
      case_iters[i] = t;
      states[i].reveal(chosen[r], answers[i][chosen[r]] != 0);
      const double u = uncertainty(std::span<const float>(dfwd.output.row(r)), stop.normalize_entropy);
      const bool done = (stop.use_entropy && u < stop.beta) || t >= stop.max_attempts ||
                        (cfg.mask_known && states[i].unknown_count() == 0);
      if (!done) still.push_back(i);
    }
    auto dbwd = numkit::backward(bundle.diagnosis_net, dfwd.tape, diag_up, true);
    res.diagnosis_grads += dbwd.grads;

    // Straight-through: the gradient reaching the one-hot selection is
    // handed to the soft probabilities unchanged.
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = active[r];
      route_backward<float>(dbwd.input_grad.row(r), answers[i], dsel);
      const auto pass = straight_through_backward<float>(dsel);
      auto up = sym_up.row(r);
      for (std::size_t j = 0; j < S; ++j) up[j] += pass[j];
    }
    auto sbwd = numkit::backward(bundle.symptom_net, sfwd.tape, sym_up, false);
    res.symptom_grads += sbwd.grads;
    if (update_statistics) {
      numkit::commit_batch_statistics(bundle.symptom_net, sfwd.tape);
      numkit::commit_batch_statistics(bundle.diagnosis_net, dfwd.tape);
    }
    active = std::move(still);
  }

  for (std::size_t i = 0; i < B; ++i) {
    res.joint_loss += case_joint[i];
    res.symptom_loss += case_sym[i];
    res.diagnosis_loss += case_diag[i];
    res.mean_iterations += static_cast<double>(case_iters[i]);
    res.max_iterations = std::max(res.max_iterations, case_iters[i]);
  }
  const double b = static_cast<double>(B);
  res.joint_loss /= b;
  res.symptom_loss /= b;
  res.diagnosis_loss /= b;
  res.mean_iterations /= b;
  return res;
}

inline numkit::OptimizerConfig optimizer_config(const TrainConfig& cfg, std::size_t steps_per_epoch) {
  numkit::OptimizerConfig oc;
  oc.base_lr = cfg.learning_rate;
  oc.total_steps = cfg.epochs * steps_per_epoch;
  oc.warmup_steps = static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(oc.total_steps));
  if (oc.warmup_steps >= oc.total_steps) oc.warmup_steps = 0;
  oc.weight_decay = cfg.weight_decay;
  return oc;
}

/// Fresh bundle matching a training configuration.
inline ModelBundle initial_bundle(const Vocabulary& vocab, const TrainConfig& cfg) {
  auto b = make_bundle(vocab, cfg.layer_sizes, cfg.dropout, cfg.loss, cfg.stopping(), cfg.seed);
  b.mask_known = cfg.mask_known;
  return b;
}

using EpochCallback = std::function<void(const EpochReport&)>;

/// Full training run. Keeps the parameters of the epoch with the best
/// validation Acc@1 (the last epoch when there is no validation split).
/// Saves a checkpoint when `checkpoint` is given.
inline TrainResult train_model(const DatasetSplit& split, const TrainConfig& cfg,
                               const std::optional<std::filesystem::path>& checkpoint = std::nullopt,
                               const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (split.train.empty()) throw Error("training split is empty");
  const auto train = encode_cases(split.train, split.vocab);
  const auto val = encode_cases(split.validation, split.vocab);

  TrainResult out;
  out.bundle = initial_bundle(split.vocab, cfg);
  auto& bundle = out.bundle;
  const std::size_t steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  numkit::OptimizerState<float> sym_opt(optimizer_config(cfg, steps_per_epoch), bundle.symptom_net);
  numkit::OptimizerState<float> dia_opt(optimizer_config(cfg, steps_per_epoch), bundle.diagnosis_net);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::optional<ModelBundle> best;
  double best_acc = -1.0;
  const std::size_t k1[] = {1};

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    numkit::Rng(numkit::derive_seed(cfg.seed, {0x5EED, epoch})).shuffle(std::span<std::size_t>(order));
    EpochReport rep;
    rep.epoch = epoch;
    double weight = 0.0;
    std::vector<const EncodedCase*> batch;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      batch.clear();
      for (std::size_t i = b * cfg.batch_size; i < std::min(train.size(), (b + 1) * cfg.batch_size); ++i)
        batch.push_back(&train[order[i]]);
      const std::uint64_t batch_id = (epoch - 1) * steps_per_epoch + b;
      auto r = batch_gradients(bundle, batch, cfg, numkit::derive_seed(cfg.seed, {0xBA7C, epoch, b}), true, batch_id);
      numkit::optimizer_step(sym_opt, bundle.symptom_net, r.symptom_grads);
      numkit::optimizer_step(dia_opt, bundle.diagnosis_net, r.diagnosis_grads);
      const double w = static_cast<double>(batch.size());
      rep.joint_loss += r.joint_loss * w;
      rep.symptom_loss += r.symptom_loss * w;
      rep.diagnosis_loss += r.diagnosis_loss * w;
      rep.mean_iterations += r.mean_iterations * w;
      weight += w;
    }
    rep.joint_loss /= weight;
    rep.symptom_loss /= weight;
    rep.diagnosis_loss /= weight;
    rep.mean_iterations /= weight;
    if (!val.empty()) {
      auto ev = evaluate_model(bundle, val, k1);
      rep.val_acc1 = ev.report.acc(1);
      rep.val_symptom_f1 = ev.report.symptom_f1;
      if (*rep.val_acc1 >= best_acc) {  // ties go to the later, better fitted epoch
        best_acc = *rep.val_acc1;
        best = bundle;
        out.report.best_epoch = epoch;
      }
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report.epochs.push_back(rep);
    if (on_epoch) on_epoch(rep);
  }
  if (best) {
    bundle = std::move(*best);
  } else {
    out.report.best_epoch = cfg.epochs;
  }
  if (checkpoint) {
    save_checkpoint(bundle, *checkpoint);
    out.report.checkpoint_path = checkpoint->string();
  }
  return out;
}

}  // namespace nsc
