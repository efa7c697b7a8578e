#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "nsc/error.hpp"

namespace nsc {

inline constexpr double kProbFloor = 1e-8;

/// Weights of the joint objective lambda * L_s + L_d and the asymmetric
/// loss shape parameters.
struct LossConfig {
  double lambda = 1.0;
  double gamma_plus = 1.0;
  double gamma_minus = 4.0;
  double margin = 0.05;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(gamma_plus >= 0.0) || !(gamma_minus >= 0.0)) throw ConfigError("focusing exponents must be >= 0");
    if (!(margin >= 0.0 && margin < 1.0)) throw ConfigError("margin must lie in [0,1)");
  }

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct LossTerm {
  double value = 0.0;
  double grad = 0.0;  // d value / d p
};

/// Contribution of one class to the asymmetric loss, already negated so it is
/// non-negative. Positives: -(1-p)^g+ log p. Negatives: -p_m^g- log(1-p_m)
/// with p_m = max(p - m, 0).
inline LossTerm asymmetric_term(double p, bool positive, const LossConfig& cfg) {
  const bool clamped = p < kProbFloor || p > 1.0 - kProbFloor;
  p = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
  LossTerm t;
  if (positive) {
    const double q = 1.0 - p;
    const double lp = std::log(p);
    const double w = std::pow(q, cfg.gamma_plus);
    t.value = -w * lp;
    if (!clamped) {
      const double dw = cfg.gamma_plus == 0.0 ? 0.0 : -cfg.gamma_plus * std::pow(q, cfg.gamma_plus - 1.0);
      t.grad = -(dw * lp + w / p);
    }
  } else {
    const double pm = p - cfg.margin;
    if (pm <= 0.0) return t;
    const double lq = std::log(1.0 - pm);
    const double w = std::pow(pm, cfg.gamma_minus);
    t.value = -w * lq;
    if (!clamped) {
      const double dw = cfg.gamma_minus == 0.0 ? 0.0 : cfg.gamma_minus * std::pow(pm, cfg.gamma_minus - 1.0);
      t.grad = -(dw * lq - w / (1.0 - pm));
    }
  }
  return t;
}

/// Mean over classes of the asymmetric multi-label loss. `targets` is
/// multi-hot. When `grad` is non-empty it receives dLoss/dprobs.
template <typename T, typename U>
T asymmetric_loss(std::span<const T> probs, std::span<const U> targets, const LossConfig& cfg,
                  std::span<T> grad = {}) {
  if (probs.size() != targets.size() || probs.empty()) throw Error("asymmetric_loss: size mismatch");
  if (!grad.empty() && grad.size() != probs.size()) throw Error("asymmetric_loss: gradient size mismatch");
  const double inv_n = 1.0 / static_cast<double>(probs.size());
  double total = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const auto term = asymmetric_term(static_cast<double>(probs[j]), targets[j] != U{0}, cfg);
    total += term.value;
    if (!grad.empty()) grad[j] = static_cast<T>(term.grad * inv_n);
  }
  return static_cast<T>(total * inv_n);
}

/// Cross-entropy of a probability vector against the gold class, with the
/// probability clamped at 1e-8.
template <typename T>
T diagnosis_loss(std::span<const T> probs, std::size_t gold, std::span<T> grad = {}) {
  if (gold >= probs.size())
    throw Error("diagnosis_loss: gold id " + std::to_string(gold) + " out of range");
  if (!grad.empty()) {
    if (grad.size() != probs.size()) throw Error("diagnosis_loss: gradient size mismatch");
    std::fill(grad.begin(), grad.end(), T{0});
  }
  const double p = static_cast<double>(probs[gold]);
  if (p < kProbFloor) return static_cast<T>(-std::log(kProbFloor));
  if (!grad.empty()) grad[gold] = static_cast<T>(-1.0 / p);
  return static_cast<T>(-std::log(p));
}

/// lambda * symptom loss + diagnosis loss.
inline double joint_loss(double symptom_loss, double diagnosis_loss_value, const LossConfig& cfg) {
  if (!std::isfinite(symptom_loss) || !std::isfinite(diagnosis_loss_value))
    throw NonFiniteError("joint_loss: non-finite component");
  return cfg.lambda * symptom_loss + diagnosis_loss_value;
}

}  // namespace nsc
