#pragma once

// Single feed-forward diagnosis classifiers without any questioning:
// "baseline ex" sees the explicit symptoms only, "baseline ex&im" also sees
// every implicit finding.

#include <cstddef>
#include <span>
#include <vector>

#include "nsc/data/case.hpp"
#include "nsc/eval/evaluate.hpp"
#include "nsc/model/bundle.hpp"
#include "nsc/model/losses.hpp"
#include "nsc/numkit/optimizer.hpp"
#include "nsc/train/config.hpp"
#include "nsc/train/trainer.hpp"

namespace nsc {

inline KnownState baseline_input(const EncodedCase& c, std::size_t num_symptoms, bool use_implicit) {
  return use_implicit ? c.full_state(num_symptoms) : c.explicit_state(num_symptoms);
}

struct BaselineResult {
  Network network;
  EvalReport report;
};

/// Trains a classifier with the submodels' layer recipe and cross-entropy,
/// then reports Acc@k on the test split.
inline BaselineResult baseline_train_eval(const DatasetSplit& split, const TrainConfig& cfg, bool use_implicit,
                                          std::span<const std::size_t> ks = std::vector<std::size_t>{1, 3, 5}) {
  cfg.validate();
  const std::size_t S = split.vocab.num_symptoms(), D = split.vocab.num_diseases();
  const auto train = encode_cases(split.train, split.vocab);
  const auto test = encode_cases(split.test, split.vocab);
  if (train.empty() || test.empty()) throw Error("baseline needs non-empty train and test splits");

  auto encode = [&](const std::vector<EncodedCase>& cases) {
    std::vector<KnownState> st;
    for (const auto& c : cases) st.push_back(baseline_input(c, S, use_implicit));
    return encode_states(st, S);
  };
  const Tensor x_train = encode(train);
  const Tensor x_test = encode(test);

  Network net = Network::init(numkit::mlp_specs(2 * S, cfg.layer_sizes, D, cfg.dropout),
                              numkit::derive_seed(cfg.seed, {use_implicit ? 4u : 3u}));
  const std::size_t steps = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  numkit::OptimizerState<float> opt(optimizer_config(cfg, steps), net);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    numkit::Rng(numkit::derive_seed(cfg.seed, {0xBA5E, epoch})).shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b < steps; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(train.size(), lo + cfg.batch_size);
      std::span<const std::size_t> rows(order.data() + lo, hi - lo);
      const float inv_b = 1.0f / static_cast<float>(rows.size());
      numkit::ForwardOptions fo{numkit::Mode::train, numkit::derive_seed(cfg.seed, {0xBA5F, epoch, b})};
      auto fwd = numkit::forward(net, x_train.gather_rows(rows), fo);
      Tensor up(rows.size(), D);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        diagnosis_loss<float>(fwd.output.row(r), train[rows[r]].disease, up.row(r));
        for (auto& g : up.row(r)) g *= inv_b;
      }
      auto bwd = numkit::backward(net, fwd.tape, up, false);
      numkit::commit_batch_statistics(net, fwd.tape);
      numkit::optimizer_step(opt, net, bwd.grads);
    }
  }

  const Tensor probs = numkit::infer(net, x_test);
  std::vector<std::vector<float>> preds;
  std::vector<std::size_t> golds;
  for (std::size_t i = 0; i < test.size(); ++i) {
    preds.emplace_back(probs.row(i).begin(), probs.row(i).end());
    golds.push_back(test[i].disease);
  }
  BaselineResult res{std::move(net), {}};
  res.report.cases = test.size();
  res.report.accuracy = accuracy_table(preds, golds, ks);
  return res;
}

}  // namespace nsc
