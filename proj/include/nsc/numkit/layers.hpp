#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsc/error.hpp"
#include "nsc/numkit/random.hpp"
#include "nsc/numkit/tensor.hpp"

namespace nsc::numkit {

enum class LayerKind { dense, batchnorm, dropout, relu, softmax };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::dropout: return "dropout";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  for (auto k : {LayerKind::dense, LayerKind::batchnorm, LayerKind::dropout, LayerKind::relu,
                 LayerKind::softmax})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown layer kind '" + std::string(s) + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  double dropout_prob = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Checks the layer chain: matching dims, dense out_dim >= 1, dropout in
/// [0,1), softmax only in last position.
inline void validate_stack(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("empty layer stack");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.in_dim == 0 || s.out_dim == 0) throw DimensionError(i, "zero dimension");
    if (s.kind != LayerKind::dense && s.in_dim != s.out_dim)
      throw DimensionError(i, std::string(to_string(s.kind)) + " must preserve width");
    if (s.kind == LayerKind::dropout && !(s.dropout_prob >= 0.0 && s.dropout_prob < 1.0))
      throw ConfigError("layer " + std::to_string(i) + ": dropout probability outside [0,1)");
    if (s.kind == LayerKind::softmax && i + 1 != specs.size())
      throw ConfigError("layer " + std::to_string(i) + ": softmax must be the final layer");
    if (i > 0 && specs[i - 1].out_dim != s.in_dim)
      throw DimensionError(i, "expects " + std::to_string(s.in_dim) + " inputs, previous layer gives " +
                                  std::to_string(specs[i - 1].out_dim));
  }
}

/// Hidden blocks of dense -> batchnorm -> dropout -> relu, then a dense
/// head and a softmax.
inline std::vector<LayerSpec> mlp_specs(std::size_t in_dim, std::span<const std::size_t> hidden,
                                        std::size_t out_dim, double dropout_prob) {
  std::vector<LayerSpec> specs;
  std::size_t width = in_dim;
  for (std::size_t h : hidden) {
    specs.push_back({LayerKind::dense, width, h, 0.0});
    specs.push_back({LayerKind::batchnorm, h, h, 0.0});
    specs.push_back({LayerKind::dropout, h, h, dropout_prob});
    specs.push_back({LayerKind::relu, h, h, 0.0});
    width = h;
  }
  specs.push_back({LayerKind::dense, width, out_dim, 0.0});
  specs.push_back({LayerKind::softmax, out_dim, out_dim, 0.0});
  validate_stack(specs);
  return specs;
}

/// Trainable tensors of one layer. Dense: weight is in x out, bias 1 x out.
/// Batchnorm: weight/bias are gamma/beta (1 x d). Other kinds hold nothing.
template <typename T>
struct LayerParams {
  Tensor2D<T> weight;
  Tensor2D<T> bias;
  Tensor2D<T> running_mean;
  Tensor2D<T> running_var;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
class Network {
 public:
  Network() = default;

  /// He-uniform dense weights, zero biases, identity batchnorm.
  static Network init(std::vector<LayerSpec> specs, std::uint64_t seed) {
    validate_stack(specs);
    Network net;
    net.specs_ = std::move(specs);
    net.layers_.resize(net.specs_.size());
    for (std::size_t i = 0; i < net.specs_.size(); ++i) {
      const auto& s = net.specs_[i];
      auto& p = net.layers_[i];
      if (s.kind == LayerKind::dense) {
        Rng rng(derive_seed(seed, {0xD15E, i}));
        const double bound = std::sqrt(6.0 / static_cast<double>(s.in_dim));
        p.weight = Tensor2D<T>(s.in_dim, s.out_dim);
        for (auto& w : p.weight.values()) w = static_cast<T>(rng.uniform(-bound, bound));
        p.bias = Tensor2D<T>(1, s.out_dim);
      } else if (s.kind == LayerKind::batchnorm) {
        p.weight = Tensor2D<T>(1, s.out_dim, T{1});
        p.bias = Tensor2D<T>(1, s.out_dim);
        p.running_mean = Tensor2D<T>(1, s.out_dim);
        p.running_var = Tensor2D<T>(1, s.out_dim, T{1});
      }
    }
    return net;
  }

  /// Builds a network from explicit parameters (checkpoint loading).
  static Network from_parts(std::vector<LayerSpec> specs, std::vector<LayerParams<T>> layers) {
    validate_stack(specs);
    if (layers.size() != specs.size()) throw ConfigError("parameter/layer count mismatch");
    Network net;
    net.specs_ = std::move(specs);
    net.layers_ = std::move(layers);
    return net;
  }

  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
  std::vector<LayerParams<T>>& layers() noexcept { return layers_; }
  const std::vector<LayerParams<T>>& layers() const noexcept { return layers_; }
  std::size_t in_dim() const { return specs_.front().in_dim; }
  std::size_t out_dim() const { return specs_.back().out_dim; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  template <typename U>
  Network<U> cast() const {
    std::vector<LayerParams<U>> ls;
    for (const auto& l : layers_)
      ls.push_back({l.weight.template cast<U>(), l.bias.template cast<U>(),
                    l.running_mean.template cast<U>(), l.running_var.template cast<U>()});
    return Network<U>::from_parts(specs_, std::move(ls));
  }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<LayerParams<T>> layers_;
};

/// Per-layer gradients, shaped like the trainable part of LayerParams.
template <typename T>
struct Gradients {
  std::vector<Tensor2D<T>> weight;
  std::vector<Tensor2D<T>> bias;

  static Gradients zeros_like(const Network<T>& net) {
    Gradients g;
    for (const auto& l : net.layers()) {
      g.weight.emplace_back(l.weight.rows(), l.weight.cols());
      g.bias.emplace_back(l.bias.rows(), l.bias.cols());
    }
    return g;
  }

  Gradients& operator+=(const Gradients& o) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += o.weight[i];
      bias[i] += o.bias[i];
    }
    return *this;
  }

  bool all_zero() const {
    auto zero = [](const Tensor2D<T>& t) {
      return std::all_of(t.values().begin(), t.values().end(), [](T v) { return v == T{0}; });
    };
    return std::all_of(weight.begin(), weight.end(), zero) && std::all_of(bias.begin(), bias.end(), zero);
  }
};

enum class Mode { eval, train };

/// Per-layer cached state needed by backward.
template <typename T>
struct Tape {
  Mode mode = Mode::eval;
  std::vector<Tensor2D<T>> inputs;   // input of each layer
  std::vector<Tensor2D<T>> cache;    // bn: xhat, dropout: scaled mask, softmax: output
  std::vector<Tensor2D<T>> inv_std;  // bn: 1/sqrt(var+eps), one row
  std::vector<Tensor2D<T>> batch_mean;
  std::vector<Tensor2D<T>> batch_var;  // unbiased, for running statistics
  bool batch_statistics = false;       // bn normalized with the batch's own moments
  bool consumed = false;
};

template <typename T>
struct ForwardResult {
  Tensor2D<T> output;
  Tape<T> tape;
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  std::uint64_t rng_seed = 0;
  /// Nonzero entries mark softmax outputs forced to probability 0.
  const Tensor2D<std::uint8_t>* softmax_mask = nullptr;
  bool record_tape = true;
  /// Train-mode batches smaller than this normalize with the running
  /// statistics instead of their own, which are meaningless for one row.
  std::size_t min_batch_statistics = 2;
};

namespace detail {

template <typename T>
Tensor2D<T> dense_forward(const Tensor2D<T>& x, const LayerParams<T>& p) {
  const std::size_t n = x.rows(), in = x.cols(), out = p.weight.cols();
  Tensor2D<T> y(n, out);
  const auto bias = p.bias.row(0);
  for (std::size_t i = 0; i < n; ++i) {
    T* yr = y.row(i).data();
    std::copy(bias.begin(), bias.end(), yr);
    const T* xr = x.row(i).data();
    for (std::size_t k = 0; k < in; ++k) {
      const T xv = xr[k];
      if (xv == T{0}) continue;
      const T* wr = p.weight.row(k).data();
      for (std::size_t j = 0; j < out; ++j) yr[j] += xv * wr[j];
    }
  }
  return y;
}

template <typename T>
void softmax_rows(Tensor2D<T>& z, const Tensor2D<std::uint8_t>* mask, std::size_t layer) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    const std::uint8_t* m = mask ? mask->row(i).data() : nullptr;
    T mx = -std::numeric_limits<T>::infinity();
    std::size_t open = 0;
    for (std::size_t j = 0; j < r.size(); ++j)
      if (!m || !m[j]) {
        mx = std::max(mx, r[j]);
        ++open;
      }
    if (open == 0) throw DimensionError(layer, "softmax row has no unmasked entries");
    T sum{0};
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] = (m && m[j]) ? T{0} : std::exp(r[j] - mx);
      sum += r[j];
    }
    for (auto& v : r) v /= sum;
  }
}

}  // namespace detail

/// Runs the stack on a batch. In eval mode dropout is the identity and
/// batchnorm uses running statistics.
template <typename T>
ForwardResult<T> forward(const Network<T>& net, const Tensor2D<T>& input, const ForwardOptions& opt = {}) {
  const auto& specs = net.specs();
  if (input.cols() != specs.front().in_dim)
    throw DimensionError(0, "expects " + std::to_string(specs.front().in_dim) + " inputs, got " +
                                std::to_string(input.cols()));
  if (opt.softmax_mask && (opt.softmax_mask->rows() != input.rows() ||
                           opt.softmax_mask->cols() != specs.back().out_dim))
    throw DimensionError(specs.size() - 1, "softmax mask shape mismatch");

  ForwardResult<T> res;
  auto& tape = res.tape;
  const std::size_t L = specs.size();
  tape.mode = opt.mode;
  if (opt.record_tape) {
    tape.inputs.resize(L);
    tape.cache.resize(L);
    tape.inv_std.resize(L);
    tape.batch_mean.resize(L);
    tape.batch_var.resize(L);
  }
  Tensor2D<T> x = input;
  const std::size_t n = x.rows();
  const bool batch_stats = opt.mode == Mode::train && n >= std::max<std::size_t>(opt.min_batch_statistics, 1);
  tape.batch_statistics = batch_stats;

  for (std::size_t li = 0; li < L; ++li) {
    const auto& s = specs[li];
    const auto& p = net.layers()[li];
    Tensor2D<T> y;
    switch (s.kind) {
      case LayerKind::dense:
        y = detail::dense_forward(x, p);
        break;
      case LayerKind::batchnorm: {
        const std::size_t d = s.out_dim;
        Tensor2D<T> mean(1, d), var(1, d), inv(1, d);
        if (batch_stats) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean(0, j) += x(i, j);
          for (std::size_t j = 0; j < d; ++j) mean(0, j) /= static_cast<T>(n);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              const T c = x(i, j) - mean(0, j);
              var(0, j) += c * c;
            }
          Tensor2D<T> unbiased = var;
          for (std::size_t j = 0; j < d; ++j) {
            var(0, j) /= static_cast<T>(n);
            unbiased(0, j) = n > 1 ? unbiased(0, j) / static_cast<T>(n - 1) : T{0};
          }
          if (opt.record_tape) {
            tape.batch_mean[li] = mean;
            tape.batch_var[li] = std::move(unbiased);
          }
        } else {
          mean = p.running_mean;
          var = p.running_var;
        }
        for (std::size_t j = 0; j < d; ++j)
          inv(0, j) = T{1} / std::sqrt(var(0, j) + static_cast<T>(kBatchNormEps));
        Tensor2D<T> xhat(n, d);
        y = Tensor2D<T>(n, d);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) {
            xhat(i, j) = (x(i, j) - mean(0, j)) * inv(0, j);
            y(i, j) = p.weight(0, j) * xhat(i, j) + p.bias(0, j);
          }
        if (opt.record_tape) {
          tape.cache[li] = std::move(xhat);
          tape.inv_std[li] = std::move(inv);
        }
        break;
      }
      case LayerKind::dropout: {
        if (opt.mode != Mode::train || s.dropout_prob == 0.0) {
          y = x;
          if (opt.record_tape) tape.cache[li] = Tensor2D<T>(n, s.out_dim, T{1});
          break;
        }
        Rng rng(derive_seed(opt.rng_seed, {0xD209, li}));
        const T scale = static_cast<T>(1.0 / (1.0 - s.dropout_prob));
        Tensor2D<T> mask(n, s.out_dim);
        for (auto& m : mask.values()) m = rng.bernoulli(s.dropout_prob) ? T{0} : scale;
        y = x;
        for (std::size_t k = 0; k < y.size(); ++k) y.values()[k] *= mask.values()[k];
        if (opt.record_tape) tape.cache[li] = std::move(mask);
        break;
      }
      case LayerKind::relu:
        y = x;
        for (auto& v : y.values()) v = v < T{0} ? T{0} : v;  // keeps NaN visible
        break;
      case LayerKind::softmax:
        y = x;
        detail::softmax_rows(y, opt.softmax_mask, li);
        if (opt.record_tape) tape.cache[li] = y;
        break;
    }
    if (opt.record_tape) tape.inputs[li] = std::move(x);
    x = std::move(y);
  }
  res.output = std::move(x);
  if (!opt.record_tape) tape.consumed = true;
  return res;
}

/// Eval-mode forward without a tape.
template <typename T>
Tensor2D<T> infer(const Network<T>& net, const Tensor2D<T>& input,
                  const Tensor2D<std::uint8_t>* softmax_mask = nullptr) {
  ForwardOptions opt;
  opt.softmax_mask = softmax_mask;
  opt.record_tape = false;
  return forward(net, input, opt).output;
}

template <typename T>
struct BackwardResult {
  Gradients<T> grads;
  Tensor2D<T> input_grad;
};

/// Reverse pass over a tape. The tape is consumed; a second call throws.
/// `upstream` is dLoss/dOutput of the final layer.
template <typename T>
BackwardResult<T> backward(const Network<T>& net, Tape<T>& tape, const Tensor2D<T>& upstream,
                           bool want_input_grad = true) {
  if (tape.consumed) throw Error("backward: tape already consumed");
  tape.consumed = true;
  const auto& specs = net.specs();
  const std::size_t L = specs.size();
  if (tape.inputs.size() != L) throw Error("backward: tape does not belong to this network");
  const std::size_t n = tape.inputs.front().rows();
  if (upstream.rows() != n || upstream.cols() != specs.back().out_dim)
    throw DimensionError(L - 1, "upstream gradient shape mismatch");

  BackwardResult<T> res;
  res.grads = Gradients<T>::zeros_like(net);
  Tensor2D<T> g = upstream;

  for (std::size_t li = L; li-- > 0;) {
    const auto& s = specs[li];
    const auto& p = net.layers()[li];
    const auto& x = tape.inputs[li];
    Tensor2D<T> gx;
    switch (s.kind) {
      case LayerKind::dense: {
        const std::size_t in = s.in_dim, out = s.out_dim;
        auto& dw = res.grads.weight[li];
        auto& db = res.grads.bias[li];
        for (std::size_t i = 0; i < n; ++i) {
          const T* gr = g.row(i).data();
          T* dbr = db.row(0).data();
          for (std::size_t j = 0; j < out; ++j) dbr[j] += gr[j];
          const T* xr = x.row(i).data();
          for (std::size_t k = 0; k < in; ++k) {
            const T xv = xr[k];
            if (xv == T{0}) continue;
            T* dwr = dw.row(k).data();
            for (std::size_t j = 0; j < out; ++j) dwr[j] += xv * gr[j];
          }
        }
        if (li > 0 || want_input_grad) {
          gx = Tensor2D<T>(n, in);
          for (std::size_t i = 0; i < n; ++i) {
            const T* gr = g.row(i).data();
            T* gxr = gx.row(i).data();
            for (std::size_t k = 0; k < in; ++k) {
              const T* wr = p.weight.row(k).data();
              T acc{0};
              for (std::size_t j = 0; j < out; ++j) acc += wr[j] * gr[j];
              gxr[k] = acc;
            }
          }
        }
        break;
      }
      case LayerKind::batchnorm: {
        const std::size_t d = s.out_dim;
        const auto& xhat = tape.cache[li];
        const auto& inv = tape.inv_std[li];
        auto& dgamma = res.grads.weight[li];
        auto& dbeta = res.grads.bias[li];
        Tensor2D<T> sum_g(1, d), sum_gx(1, d);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) {
            dgamma(0, j) += g(i, j) * xhat(i, j);
            dbeta(0, j) += g(i, j);
            const T dxh = g(i, j) * p.weight(0, j);
            sum_g(0, j) += dxh;
            sum_gx(0, j) += dxh * xhat(i, j);
          }
        gx = Tensor2D<T>(n, d);
        if (tape.batch_statistics) {
          const T nn = static_cast<T>(n);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              const T dxh = g(i, j) * p.weight(0, j);
              gx(i, j) = inv(0, j) / nn * (nn * dxh - sum_g(0, j) - xhat(i, j) * sum_gx(0, j));
            }
        } else {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gx(i, j) = g(i, j) * p.weight(0, j) * inv(0, j);
        }
        break;
      }
      case LayerKind::dropout: {
        gx = g;
        const auto& mask = tape.cache[li];
        for (std::size_t k = 0; k < gx.size(); ++k) gx.values()[k] *= mask.values()[k];
        break;
      }
      case LayerKind::relu:
        gx = g;
        for (std::size_t k = 0; k < gx.size(); ++k)
          if (!(x.values()[k] > T{0})) gx.values()[k] = T{0};
        break;
      case LayerKind::softmax: {
        const auto& y = tape.cache[li];
        gx = Tensor2D<T>(n, s.out_dim);
        for (std::size_t i = 0; i < n; ++i) {
          auto yr = y.row(i);
          auto gr = g.row(i);
          T dot{0};
          for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
          auto out = gx.row(i);
          for (std::size_t j = 0; j < yr.size(); ++j) out[j] = yr[j] * (gr[j] - dot);
        }
        break;
      }
    }
    g = std::move(gx);
  }
  res.input_grad = std::move(g);
  return res;
}

/// Folds the batch statistics of a training-mode tape into the running
/// statistics (exponential moving average, momentum 0.1). Batches of one
/// sample carry no variance estimate and are skipped.
template <typename T>
void commit_batch_statistics(Network<T>& net, const Tape<T>& tape) {
  if (!tape.batch_statistics || tape.inputs.empty()) return;
  if (tape.inputs.front().rows() < 2) return;
  const T mom = static_cast<T>(kBatchNormMomentum);
  for (std::size_t li = 0; li < net.specs().size(); ++li) {
    if (net.specs()[li].kind != LayerKind::batchnorm) continue;
    auto& p = net.layers()[li];
    for (std::size_t j = 0; j < p.running_mean.cols(); ++j) {
      p.running_mean(0, j) = (T{1} - mom) * p.running_mean(0, j) + mom * tape.batch_mean[li](0, j);
      p.running_var(0, j) = (T{1} - mom) * p.running_var(0, j) + mom * tape.batch_var[li](0, j);
    }
  }
}

}  // namespace nsc::numkit
