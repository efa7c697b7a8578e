#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nsc/error.hpp"
#include "nsc/numkit/layers.hpp"

namespace nsc::numkit {

struct OptimizerConfig {
  double base_lr = 1e-3;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(base_lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
    if (total_steps == 0) throw ConfigError("total_steps must be >= 1");
    if (warmup_steps >= total_steps && warmup_steps != 0)
      throw ConfigError("warmup_steps must be smaller than total_steps");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  }
};

/// Learning rate for the 1-based update `step`: linear warm-up to base_lr,
/// then linear decay reaching 0 at total_steps.
inline double scheduled_lr(const OptimizerConfig& cfg, std::size_t step) {
  if (step > cfg.total_steps) throw ConfigError("step beyond total_steps");
  const double t = static_cast<double>(step);
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
    return cfg.base_lr * t / static_cast<double>(cfg.warmup_steps);
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.base_lr * static_cast<double>(cfg.total_steps - step) / span;
}

/// Adam with bias correction and decoupled weight decay.
template <typename T>
struct OptimizerState {
  OptimizerConfig config;
  std::size_t step = 0;
  Gradients<T> first_moment;
  Gradients<T> second_moment;

  OptimizerState() = default;
  OptimizerState(const OptimizerConfig& cfg, const Network<T>& net)
      : config(cfg),
        first_moment(Gradients<T>::zeros_like(net)),
        second_moment(Gradients<T>::zeros_like(net)) {
    cfg.validate();
  }
};

namespace detail {

template <typename T>
void adam_update(Tensor2D<T>& param, const Tensor2D<T>& grad, Tensor2D<T>& m, Tensor2D<T>& v,
                 const OptimizerConfig& cfg, double lr, double bc1, double bc2) {
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T decay = static_cast<T>(lr * cfg.weight_decay);
  const T step_size = static_cast<T>(lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(cfg.eps);
  auto p = param.values();
  auto g = grad.values();
  auto mv = m.values();
  auto vv = v.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    mv[i] = b1 * mv[i] + (T{1} - b1) * g[i];
    vv[i] = b2 * vv[i] + (T{1} - b2) * g[i] * g[i];
    p[i] -= decay * p[i];
    p[i] -= step_size * mv[i] / (std::sqrt(vv[i] * inv_bc2) + eps);
  }
}

}  // namespace detail

/// One optimizer update. Returns the learning rate that was applied.
template <typename T>
double optimizer_step(OptimizerState<T>& state, Network<T>& net, const Gradients<T>& grads) {
  auto& layers = net.layers();
  if (grads.weight.size() != layers.size()) throw Error("optimizer: gradient/layer count mismatch");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    if (!grads.weight[li].all_finite())
      throw NonFiniteError("non-finite gradient in layer " + std::to_string(li) + " weight");
    if (!grads.bias[li].all_finite())
      throw NonFiniteError("non-finite gradient in layer " + std::to_string(li) + " bias");
  }
  const std::size_t t = state.step + 1;
  const double lr = scheduled_lr(state.config, t);
  state.step = t;
  const double bc1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(t));
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& l = layers[li];
    if (l.weight.empty()) continue;
    detail::adam_update(l.weight, grads.weight[li], state.first_moment.weight[li],
                        state.second_moment.weight[li], state.config, lr, bc1, bc2);
    detail::adam_update(l.bias, grads.bias[li], state.first_moment.bias[li],
                        state.second_moment.bias[li], state.config, lr, bc1, bc2);
  }
  return lr;
}

}  // namespace nsc::numkit
