#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nsc/error.hpp"
#include "nsc/inference/uncertainty.hpp"
#include "nsc/model/known_state.hpp"
#include "nsc/model/losses.hpp"
#include "nsc/model/vocabulary.hpp"
#include "nsc/numkit/layers.hpp"
#include "nsc/numkit/random.hpp"

namespace nsc {

using Tensor = numkit::Tensor2D<float>;
using Network = numkit::Network<float>;

/// Both submodels with everything needed to run a consultation. Immutable
/// once built; share it freely between threads for inference.
struct ModelBundle {
  Network symptom_net;    // 2S -> S
  Network diagnosis_net;  // 2S -> D
  Vocabulary vocab;
  LossConfig loss;
  StoppingConfig stopping;
  std::uint64_t seed = 0;
  bool mask_known = true;

  std::size_t num_symptoms() const noexcept { return vocab.num_symptoms(); }
  std::size_t num_diseases() const noexcept { return vocab.num_diseases(); }

  void validate() const {
    const std::size_t s = num_symptoms(), d = num_diseases();
    if (s < 1) throw ConfigError("vocabulary needs at least one symptom");
    if (d < 2) throw ConfigError("vocabulary needs at least two diseases");
    auto check = [&](const Network& net, std::size_t out, const char* what) {
      if (net.specs().empty() || net.in_dim() != 2 * s || net.out_dim() != out ||
          net.specs().back().kind != numkit::LayerKind::softmax)
        throw ConfigError(std::string(what) + " network does not match the vocabulary");
    };
    check(symptom_net, s, "symptom");
    check(diagnosis_net, d, "diagnosis");
    loss.validate();
    stopping.validate();
  }

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// Fresh bundle with both submodels sharing one hidden-layer recipe.
inline ModelBundle make_bundle(Vocabulary vocab, std::span<const std::size_t> hidden, double dropout,
                               const LossConfig& loss, const StoppingConfig& stopping, std::uint64_t seed) {
  ModelBundle b;
  const std::size_t s = vocab.num_symptoms(), d = vocab.num_diseases();
  b.vocab = std::move(vocab);
  b.loss = loss;
  b.stopping = stopping;
  b.seed = seed;
  b.symptom_net = Network::init(numkit::mlp_specs(2 * s, hidden, s, dropout), numkit::derive_seed(seed, {1}));
  b.diagnosis_net = Network::init(numkit::mlp_specs(2 * s, hidden, d, dropout), numkit::derive_seed(seed, {2}));
  b.validate();
  return b;
}

/// [present | absent] as a 2S float row.
inline void encode_state(const KnownState& state, std::span<float> out) {
  const std::size_t s = state.size();
  if (out.size() != 2 * s) throw Error("encode_state: size mismatch");
  for (std::size_t j = 0; j < s; ++j) {
    out[j] = state.present()[j];
    out[s + j] = state.absent()[j];
  }
}

inline Tensor encode_states(std::span<const KnownState> states, std::size_t num_symptoms) {
  Tensor x(states.size(), 2 * num_symptoms);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() != num_symptoms) throw DimensionError(0, "state size does not match vocabulary");
    encode_state(states[i], x.row(i));
  }
  return x;
}

/// Softmax mask row: 1 for every symptom already in present or absent.
inline void known_mask(const KnownState& state, std::span<std::uint8_t> out) {
  for (std::size_t j = 0; j < state.size(); ++j) out[j] = state.present()[j] | state.absent()[j];
}

/// Distribution over symptoms to ask next. With `mask_known`, symptoms
/// already answered get probability exactly 0.
inline std::vector<float> suggest_symptom(const ModelBundle& bundle, const KnownState& state, bool mask_known) {
  const std::size_t s = bundle.num_symptoms();
  if (state.size() != s) throw DimensionError(0, "state size does not match vocabulary");
  Tensor x(1, 2 * s);
  encode_state(state, x.row(0));
  if (!mask_known) {
    auto y = numkit::infer(bundle.symptom_net, x);
    return {y.row(0).begin(), y.row(0).end()};
  }
  if (state.unknown_count() == 0) throw NoCandidatesError();
  numkit::Tensor2D<std::uint8_t> mask(1, s);
  known_mask(state, mask.row(0));
  auto y = numkit::infer(bundle.symptom_net, x, &mask);
  return {y.row(0).begin(), y.row(0).end()};
}

/// Distribution over diseases. Depends on the state only through its two
/// multi-hot vectors.
inline std::vector<float> predict_diagnosis(const ModelBundle& bundle, const KnownState& state) {
  const std::size_t s = bundle.num_symptoms();
  if (state.size() != s) throw DimensionError(0, "state size does not match vocabulary");
  Tensor x(1, 2 * s);
  encode_state(state, x.row(0));
  auto y = numkit::infer(bundle.diagnosis_net, x);
  return {y.row(0).begin(), y.row(0).end()};
}

}  // namespace nsc
