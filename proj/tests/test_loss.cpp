#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "svdp/svdp.hpp"

using namespace svdp;

namespace {

PseudoLabel<double> seg_pseudo(const LabelMap& label, const Mask& valid) {
  PseudoLabel<double> pl;
  pl.task = Task::segmentation;
  pl.label = label;
  pl.valid = valid;
  pl.confidence = Grid<double>(label.height(), label.width(), 1.0);
  return pl;
}

PredictionOutput<double> seg_output(Tensor3<double> logits) {
  PredictionOutput<double> out;
  out.task = Task::segmentation;
  out.logits = std::move(logits);
  return out;
}

}  // namespace

TEST(ConsistencyLoss, HandValueLn2) {
  const auto out = seg_output(Tensor3<double>(2, 1, 1, 0.0));  // softmax = [0.5, 0.5]
  const auto r = consistency_loss(out, seg_pseudo(LabelMap(1, 1, 0), Mask(1, 1, 1)));
  EXPECT_NEAR(r.value, std::log(2.0), 1e-12);
  EXPECT_EQ(r.valid_pixel_count, 1u);
}

TEST(ConsistencyLoss, MatchingOneHotIsNearZero) {
  Tensor3<double> logits(3, 4, 4, -1e3);
  LabelMap label(4, 4);
  for (int i = 0; i < 16; ++i) {
    label[i] = i % 3;
    logits[static_cast<std::size_t>(i % 3) * 16 + i] = 1e3;
  }
  EXPECT_LE(consistency_loss(seg_output(logits), seg_pseudo(label, Mask(4, 4, 1))).value, 1e-9);
}

TEST(ConsistencyLoss, EmptyMaskIsZeroAndSkipsStep) {
  Network<double> net(NetworkSpec{});
  auto pair = ModelPair<double>::from_source(net.init_params(1));
  const auto img = oracle::random_tensor<double>(3, 8, 8, 2);
  const auto pl = generate(net, pair.teacher, img, {1.0}, 1.0);
  ASSERT_EQ(pl.valid_count(), 0u);
  EXPECT_EQ(consistency_loss(net.forward(pair.student, img, false, 0), pl).value, 0.0);
  Adam<double> adam;
  PromptState<double> prompts(8, 8, 0.1);
  const auto step = adapt_step(net, pair, prompts, img, pl, StepConfig{}, adam);
  EXPECT_TRUE(step.skipped);
  EXPECT_EQ(step.student, pair.student);
}

TEST(ConsistencyLoss, ResolutionMismatchRejected) {
  EXPECT_THROW(consistency_loss(seg_output(Tensor3<double>(2, 2, 2)), seg_pseudo(LabelMap(1, 1, 0), Mask(1, 1, 1))),
               StructuralError);
}

TEST(ConsistencyLoss, MatchesScalarLoopOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto logits = oracle::random_tensor<double>(5, 8, 8, seed, -4, 4);
    LabelMap label(8, 8);
    Mask valid(8, 8);
    for (std::size_t i = 0; i < 64; ++i) {
      label[i] = static_cast<int>(rng.below(5));
      valid[i] = rng.uniform() < 0.6;
    }
    const auto out = seg_output(logits);
    const auto pl = seg_pseudo(label, valid);
    EXPECT_NEAR(consistency_loss(out, pl, LossNorm::full).value, oracle::cross_entropy(logits, label, valid, true),
                1e-9);
    EXPECT_NEAR(consistency_loss(out, pl, LossNorm::valid).value,
                oracle::cross_entropy(logits, label, valid, false), 1e-9);
  }
}

TEST(ConsistencyLoss, MaskedPixelsGetZeroGradient) {
  const auto logits = oracle::random_tensor<double>(5, 8, 8, 3, -2, 2);
  LabelMap label(8, 8, 2);
  Mask valid(8, 8, 0);
  for (std::size_t i = 0; i < 64; i += 3) valid[i] = 1;
  const auto r = consistency_loss(seg_output(logits), seg_pseudo(label, valid));
  for (std::size_t i = 0; i < 64; ++i) {
    for (int c = 0; c < 5; ++c) {
      if (!valid[i]) {
        ASSERT_EQ(r.grad[c * 64 + i], 0.0);
      }
    }
  }
}

TEST(ConsistencyLoss, DepthMaskedL1) {
  PredictionOutput<double> out;
  out.task = Task::depth;
  out.logits = Tensor3<double>(1, 1, 2);
  out.depth = Tensor3<double>(1, 1, 2);
  out.depth[0] = 3.0;
  out.depth[1] = 100.0;
  PseudoLabel<double> pl;
  pl.task = Task::depth;
  pl.depth = Grid<double>(1, 2, 5.0);
  pl.valid = Mask(1, 2, 0);
  pl.valid[0] = 1;
  const auto r = consistency_loss(out, pl, LossNorm::valid);
  EXPECT_DOUBLE_EQ(r.value, 2.0);
  EXPECT_DOUBLE_EQ(r.grad[0], -1.0);
  EXPECT_DOUBLE_EQ(r.grad[1], 0.0);
}

TEST(AdaptStep, ZeroLearningRateChangesNothing) {
  Network<float> net(NetworkSpec{});
  const auto pair = ModelPair<float>::from_source(net.init_params(1));
  const auto img = oracle::random_tensor<float>(3, 16, 16, 2);
  PromptState<float> prompts(16, 16, 0.05);
  const auto pl = generate(net, pair.teacher, img, {0.5, 1.0}, 0.0);
  StepConfig cfg;
  cfg.lr = 0.0;
  cfg.prompt_lr = 0.0;
  Adam<float> adam;
  const auto step = adapt_step(net, pair, prompts, img, pl, cfg, adam);
  ASSERT_FALSE(step.skipped);
  EXPECT_EQ(step.student, pair.student);
  EXPECT_EQ(step.prompts.store(), prompts.store());
}

TEST(AdaptStep, AdamFirstStepMovesByLearningRate) {
  ParamSet<double> w, g;
  w.add("w", {1}, 3.0);
  g.add("w", {1}, 2.0 * 3.0);  // d/dw of w^2
  Adam<double> adam;
  adam.step(w, g, [](const std::string&) { return true; }, 0.01);
  EXPECT_NEAR(w.at("w").values[0], 3.0 - 0.01, 1e-9);
}

TEST(AdaptStep, NormScopeTouchesOnlyNormTensors) {
  Network<double> net(NetworkSpec{});
  const auto pair = ModelPair<double>::from_source(net.init_params(1));
  const auto img = oracle::random_tensor<double>(3, 16, 16, 2);
  const auto pl = generate(net, pair.teacher, img, {0.5, 1.0}, 0.0);
  StepConfig cfg;
  cfg.lr = 1e-2;
  cfg.scope = TrainScope::norm;
  Adam<double> adam;
  const auto step = adapt_step(net, pair, static_cast<const PromptState<double>*>(nullptr), img, pl, cfg, adam);
  for (const auto& [name, t] : step.student.tensors()) {
    EXPECT_EQ(t == pair.student.at(name), !is_norm_param(name)) << name;
  }
}

TEST(AdaptStep, DescendsOnTheSameSample) {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Network<float> net(NetworkSpec{});
    const auto pair = ModelPair<float>::from_source(net.init_params(seed));
    const auto img = oracle::random_tensor<float>(3, 16, 16, seed + 1000);
    PromptState<float> prompts(16, 16, 0.02, place_random(16, 16, 0.02, seed));
    const auto pl = generate(net, pair.teacher, img, {0.5, 1.0, 2.0}, 0.3);
    StepConfig cfg;
    cfg.lr = 1e-3;
    cfg.prompt_lr = 1e-3;
    Adam<float> adam;
    const auto step = adapt_step(net, pair, prompts, img, pl, cfg, adam);
    if (step.skipped) continue;
    const auto after = consistency_loss(net.forward(step.student, warp(img, step.prompts), false, 0), pl);
    improved += after.value <= step.loss.value;
  }
  EXPECT_GE(improved, 90);
}

TEST(EntropyLoss, GradientMatchesFiniteDifference) {
  const auto logits = oracle::random_tensor<double>(4, 2, 2, 8, -2, 2);
  const auto r = entropy_loss(seg_output(logits));
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto plus = logits, minus = logits;
    plus[i] += 1e-6;
    minus[i] -= 1e-6;
    const double num = (entropy_loss(seg_output(plus)).value - entropy_loss(seg_output(minus)).value) / 2e-6;
    EXPECT_NEAR(r.grad[i], num, 1e-7);
  }
}
