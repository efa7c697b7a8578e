#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "nsc/error.hpp"
#include "nsc/inference/episode.hpp"

namespace nsc {

/// True when `gold` ranks among the k most probable classes. Ranking is by
/// probability, ties broken toward the lower id.
template <typename T>
bool in_top_k(std::span<const T> probs, std::size_t gold, std::size_t k) {
  if (gold >= probs.size()) throw Error("gold id out of range");
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < probs.size(); ++j)
    if (probs[j] > probs[gold] || (probs[j] == probs[gold] && j < gold)) ++ahead;
  return ahead < k;
}

/// Fraction of cases whose gold class is in the top k.
template <typename T>
double acc_at_k(const std::vector<std::vector<T>>& predictions, std::span<const std::size_t> golds, std::size_t k) {
  if (k < 1) throw Error("k must be >= 1");
  if (predictions.empty()) throw Error("acc_at_k: no predictions");
  if (predictions.size() != golds.size()) throw Error("acc_at_k: predictions and golds are not aligned");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    hits += in_top_k(std::span<const T>(predictions[i]), golds[i], k);
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

/// Per-symptom F1 of suggested-vs-gold sets across cases, averaged with
/// weights equal to each symptom's gold support.
inline double symptom_f1(const std::vector<std::vector<std::size_t>>& suggested,
                         const std::vector<std::vector<std::size_t>>& golds) {
  if (suggested.size() != golds.size()) throw Error("symptom_f1: lists are not aligned");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::size_t, Counts> per;
  std::size_t support = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const std::set<std::size_t> g(golds[i].begin(), golds[i].end());
    const std::set<std::size_t> s(suggested[i].begin(), suggested[i].end());
    for (auto id : s) (g.count(id) ? per[id].tp : per[id].fp)++;
    for (auto id : g)
      if (!s.count(id)) per[id].fn++;
    support += g.size();
  }
  if (support == 0) throw Error("symptom_f1: no gold symptoms");
  double total = 0.0;
  for (const auto& [id, c] : per) {
    const std::size_t sup = c.tp + c.fn;
    if (sup == 0) continue;
    const double f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    total += f1 * static_cast<double>(sup);
  }
  return total / static_cast<double>(support);
}

/// Mean uncertainty at each question index (0 = after the first answer),
/// over the traces long enough to have that index.
inline std::vector<double> entropy_curve(std::span<const EpisodeTrace> traces) {
  if (traces.empty()) throw Error("entropy_curve: no traces");
  std::vector<double> sum;
  std::vector<std::size_t> count;
  for (const auto& t : traces)
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      if (sum.size() <= i) {
        sum.resize(i + 1, 0.0);
        count.resize(i + 1, 0);
      }
      sum[i] += t.steps[i].uncertainty;
      count[i] += 1;
    }
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= static_cast<double>(count[i]);
  return sum;
}

}  // namespace nsc
