#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "nsc/error.hpp"

namespace nsc {

/// When to stop asking: uncertainty below `beta`, or `max_attempts`
/// questions asked. With `use_entropy` off the episode always runs to
/// `max_attempts` (the fixed-iteration ablation).
struct StoppingConfig {
  double beta = 0.3;
  std::size_t max_attempts = 50;
  bool use_entropy = true;
  /// Divide entropy by ln(D) so it lies in [0,1].
  bool normalize_entropy = true;

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0,1)");
    if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  }

  friend bool operator==(const StoppingConfig&, const StoppingConfig&) = default;
};

/// Shannon entropy (natural log) of a distribution, optionally divided by
/// ln(D).
template <typename T>
double uncertainty(std::span<const T> probs, bool normalize = true) {
  if (probs.size() < 2) throw Error("uncertainty needs at least two classes");
  double h = 0.0;
  for (T p : probs) {
    const double v = static_cast<double>(p);
    if (v > 0.0) h -= v * std::log(v);
  }
  if (h < 0.0) h = 0.0;
  if (!normalize) return h;
  const double u = h / std::log(static_cast<double>(probs.size()));
  return u > 1.0 ? 1.0 : u;
}

}  // namespace nsc
