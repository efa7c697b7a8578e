#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nsc/error.hpp"

namespace nsc {

/// Index of the largest entry; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> v) {
  if (v.empty()) throw Error("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Straight-through selection. The forward value is the one-hot argmax of
/// the suggestion distribution; the backward pass treats it as the identity
/// on the probabilities (see `straight_through_backward`).
template <typename T>
std::vector<T> straight_through_select(std::span<const T> probs) {
  std::vector<T> onehot(probs.size(), T{0});
  onehot[argmax(probs)] = T{1};
  return onehot;
}

/// Gradient w.r.t. the soft probabilities given the gradient w.r.t. the
/// hard selection.
template <typename T>
std::vector<T> straight_through_backward(std::span<const T> selection_grad) {
  return {selection_grad.begin(), selection_grad.end()};
}

/// Writes the diagnosis-model input row [present + r*sel, absent + (1-r)*sel]
/// where r is the per-symptom answer (1 present, 0 absent). The known
/// present/absent vectors enter as constants.
template <typename T>
void route_selection(std::span<const std::uint8_t> present, std::span<const std::uint8_t> absent,
                     std::span<const T> selection, std::span<const std::uint8_t> answers,
                     std::span<T> out) {
  const std::size_t s = present.size();
  if (absent.size() != s || selection.size() != s || answers.size() != s || out.size() != 2 * s)
    throw Error("route_selection: size mismatch");
  for (std::size_t j = 0; j < s; ++j) {
    out[j] = static_cast<T>(present[j]) + (answers[j] ? selection[j] : T{0});
    out[s + j] = static_cast<T>(absent[j]) + (answers[j] ? T{0} : selection[j]);
  }
}

/// Pulls the gradient of the diagnosis input back onto the selection vector.
/// The routing choice itself is not differentiated.
template <typename T>
void route_backward(std::span<const T> input_grad, std::span<const std::uint8_t> answers,
                    std::span<T> selection_grad) {
  const std::size_t s = answers.size();
  if (input_grad.size() != 2 * s || selection_grad.size() != s) throw Error("route_backward: size mismatch");
  for (std::size_t j = 0; j < s; ++j) selection_grad[j] = answers[j] ? input_grad[j] : input_grad[s + j];
}

}  // namespace nsc
