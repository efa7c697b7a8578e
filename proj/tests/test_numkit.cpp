#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"
#include "nsc/numkit/layers.hpp"
#include "nsc/numkit/optimizer.hpp"
#include "nsc/numkit/random.hpp"

using namespace nsc;
using namespace nsc::numkit;
using nsc::testing::DNet;
using nsc::testing::DTensor;

namespace {

DNet identity_dense(std::size_t n) {
  LayerParams<double> p;
  p.weight = DTensor(n, n);
  for (std::size_t i = 0; i < n; ++i) p.weight(i, i) = 1.0;
  p.bias = DTensor(1, n);
  return DNet::from_parts({{LayerKind::dense, n, n, 0.0}}, {p});
}

}  // namespace

TEST(Random, DeriveSeedDependsOnPathOnly) {
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(Random, UniformAndBelowStayInRange) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
  }
}

TEST(Forward, IdentityDense) {
  auto y = forward(identity_dense(2), DTensor::from_rows({{1.0, 2.0}})).output;
  EXPECT_EQ(y(0, 0), 1.0);
  EXPECT_EQ(y(0, 1), 2.0);
}

TEST(Forward, Relu) {
  auto net = DNet::from_parts({{LayerKind::relu, 3, 3, 0.0}}, {LayerParams<double>{}});
  auto y = forward(net, DTensor::from_rows({{-1.0, 0.0, 3.0}})).output;
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 0.0);
  EXPECT_EQ(y(0, 2), 3.0);
}

TEST(Forward, SoftmaxOfEqualLogits) {
  auto net = DNet::from_parts({{LayerKind::softmax, 2, 2, 0.0}}, {LayerParams<double>{}});
  auto y = forward(net, DTensor::from_rows({{0.0, 0.0}})).output;
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.5);
}

TEST(Forward, SoftmaxMaskZeroesEntries) {
  auto net = DNet::from_parts({{LayerKind::softmax, 3, 3, 0.0}}, {LayerParams<double>{}});
  Tensor2D<std::uint8_t> mask(1, 3);
  mask(0, 1) = 1;
  ForwardOptions opt;
  opt.softmax_mask = &mask;
  auto y = forward(net, DTensor::from_rows({{1.0, 5.0, 1.0}}), opt).output;
  EXPECT_EQ(y(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  mask.fill(1);
  EXPECT_THROW(forward(net, DTensor::from_rows({{1.0, 5.0, 1.0}}), opt), DimensionError);
}

TEST(Forward, DimensionMismatchNamesLayer) {
  const std::size_t hidden[] = {4};
  auto net = DNet::init(mlp_specs(3, hidden, 2, 0.0), 1);
  try {
    forward(net, DTensor(1, 5));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.layer(), 0u);
  }
  EXPECT_THROW(validate_stack(std::vector<LayerSpec>{{LayerKind::dense, 3, 4, 0.0}, {LayerKind::relu, 5, 5, 0.0}}),
               DimensionError);
}

TEST(Forward, EvalModeIsDeterministicAndDropoutIsIdentity) {
  const std::size_t hidden[] = {8};
  auto net = DNet::init(mlp_specs(5, hidden, 3, 0.5), 11);
  Rng rng(1);
  auto x = nsc::testing::random_tensor(4, 5, rng);
  ForwardOptions a, b;
  a.rng_seed = 1;
  b.rng_seed = 2;
  EXPECT_EQ(forward(net, x, a).output, forward(net, x, b).output);
  a.mode = b.mode = Mode::train;
  EXPECT_NE(forward(net, x, a).output, forward(net, x, b).output);
}

TEST(Backward, DenseWeightGradientIsOuterProduct) {
  LayerParams<double> p;
  p.weight = DTensor::from_rows({{0.3, -0.2}, {0.5, 0.1}, {-0.4, 0.7}});
  p.bias = DTensor(1, 2);
  auto net = DNet::from_parts({{LayerKind::dense, 3, 2, 0.0}}, {p});
  const auto x = DTensor::from_rows({{1.0, 2.0, -3.0}});
  auto f = forward(net, x);
  auto b = backward(net, f.tape, DTensor(1, 2, 1.0));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(b.grads.weight[0](i, j), x(0, i));
  EXPECT_DOUBLE_EQ(b.grads.bias[0](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(b.input_grad(0, 0), 0.1);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const std::size_t hidden[] = {6};
  auto net = DNet::init(mlp_specs(4, hidden, 3, 0.2), 5);
  Rng rng(2);
  ForwardOptions opt{Mode::train, 9};
  auto f = forward(net, nsc::testing::random_tensor(5, 4, rng), opt);
  auto b = backward(net, f.tape, DTensor(5, 3));
  EXPECT_TRUE(b.grads.all_zero());
}

TEST(Backward, ConsumedTapeThrows) {
  auto net = identity_dense(2);
  auto f = forward(net, DTensor::from_rows({{1.0, 2.0}}));
  backward(net, f.tape, DTensor(1, 2, 1.0));
  EXPECT_THROW(backward(net, f.tape, DTensor(1, 2, 1.0)), Error);
}

TEST(Backward, FiniteDifferenceAgreementOnSeveralSeeds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto gc = nsc::testing::check_everything(seed);
    EXPECT_TRUE(gc.ok()) << "seed " << seed << " max rel error " << gc.max_rel_error;
    EXPECT_GT(gc.checked, 100u);
  }
}

TEST(BatchNorm, RunningStatisticsFollowMovingAverage) {
  auto net = DNet::init({{LayerKind::batchnorm, 1, 1, 0.0}}, 0);
  ForwardOptions opt{Mode::train, 0};
  auto f = forward(net, DTensor::from_rows({{1.0}, {3.0}}), opt);
  commit_batch_statistics(net, f.tape);
  // batch mean 2, unbiased variance 2
  EXPECT_NEAR(net.layers()[0].running_mean(0, 0), 0.2, 1e-12);
  EXPECT_NEAR(net.layers()[0].running_var(0, 0), 0.9 + 0.2, 1e-12);
  auto single = forward(net, DTensor::from_rows({{5.0}}), opt);
  commit_batch_statistics(net, single.tape);
  EXPECT_NEAR(net.layers()[0].running_mean(0, 0), 0.2, 1e-12);
}

TEST(Optimizer, WarmupInterpolatesLinearly) {
  OptimizerConfig cfg;
  cfg.base_lr = 1e-3;
  cfg.warmup_steps = 10;
  cfg.total_steps = 100;
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 5), 5e-4);
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 10), 1e-3);
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 55), 5e-4);
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 100), 0.0);
  EXPECT_THROW(scheduled_lr(cfg, 101), ConfigError);
}

TEST(Optimizer, FinalStepLeavesParamsUnchangedWithoutDecay) {
  auto net = identity_dense(1);
  OptimizerConfig cfg;
  cfg.total_steps = 1;
  OptimizerState<double> st(cfg, net);
  auto g = Gradients<double>::zeros_like(net);
  g.weight[0](0, 0) = 1.0;
  g.bias[0](0, 0) = 1.0;
  const auto before = net;
  EXPECT_EQ(optimizer_step(st, net, g), 0.0);
  EXPECT_EQ(net, before);
}

TEST(Optimizer, TwoStepsMatchHandSteppedAdam) {
  OptimizerConfig cfg;
  cfg.base_lr = 0.1;
  cfg.warmup_steps = 0;
  cfg.total_steps = 4;
  cfg.weight_decay = 0.05;
  auto net = identity_dense(1);
  net.layers()[0].bias(0, 0) = 0.5;
  OptimizerState<double> st(cfg, net);
  auto g = Gradients<double>::zeros_like(net);
  g.bias[0](0, 0) = 1.0;
  g.weight[0](0, 0) = 1.0;

  // Textbook recurrence, decoupled decay applied before the moment step.
  double p = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    const double lr = 0.1 * (4.0 - t) / 4.0;
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mhat = m / (1 - std::pow(0.9, t)), vhat = v / (1 - std::pow(0.999, t));
    p -= lr * 0.05 * p;
    p -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    optimizer_step(st, net, g);
  }
  EXPECT_NEAR(net.layers()[0].bias(0, 0), p, 1e-12);
  // Constant gradient: both bias-corrected ratios are 1, so by hand
  // 0.5 -> 0.498125 - 0.075 = 0.423125 -> 0.4220671875 - 0.05.
  EXPECT_NEAR(p, 0.3720671875, 1e-8);
}

TEST(Optimizer, NonFiniteGradientNamesParameter) {
  const std::size_t hidden[] = {2};
  auto net = DNet::init(mlp_specs(2, hidden, 2, 0.0), 0);
  OptimizerConfig cfg;
  cfg.total_steps = 10;
  OptimizerState<double> st(cfg, net);
  auto g = Gradients<double>::zeros_like(net);
  g.bias[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    optimizer_step(st, net, g);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1 bias"), std::string::npos);
  }
}
