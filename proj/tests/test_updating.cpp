#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "svdp/svdp.hpp"

using namespace svdp;

namespace {

ParamSet<double> scalar_set(double v) {
  ParamSet<double> p;
  p.add("w", {1}, v);
  return p;
}

ParamSet<double> random_set(std::uint64_t seed) {
  Rng rng(seed);
  ParamSet<double> p;
  for (const char* name : {"a", "b", "c"}) {
    auto& t = p.add(name, {3, 5});
    for (auto& v : t.values) v = rng.uniform(-2, 2);
  }
  return p;
}

}  // namespace

TEST(TeacherEma, ScalarExamples) {
  ModelPair<double> pair{scalar_set(0.0), scalar_set(1.0), 0.999};
  ema_teacher(pair);
  EXPECT_DOUBLE_EQ(pair.teacher.at("w").values[0], 0.999);
  ModelPair<double> fixed{scalar_set(0.3), scalar_set(0.3), 0.9};
  ema_teacher(fixed);
  EXPECT_EQ(fixed.teacher.at("w").values[0], 0.3);
}

TEST(TeacherEma, MatchesElementwiseOracleAndLeavesStudent) {
  ModelPair<double> pair{random_set(1), random_set(2), 0.97};
  const auto student = pair.student;
  const auto teacher = pair.teacher;
  ema_teacher(pair);
  EXPECT_EQ(pair.student, student);
  for (const auto& [name, t] : pair.teacher.tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_NEAR(t.values[i], oracle::ema(teacher.at(name).values[i], student.at(name).values[i], 0.97), 1e-7);
    }
  }
}

TEST(TeacherEma, ShapeMismatchRejected) {
  ParamSet<double> other;
  other.add("w", {2});
  ModelPair<double> pair{scalar_set(1), other, 0.9};
  EXPECT_THROW(ema_teacher(pair), StructuralError);
}

TEST(Dpu, BetaExamples) {
  DpuConfig cfg;
  EXPECT_EQ(beta_for(0.0, cfg), 1.0);
  EXPECT_NEAR(beta_for(0.5, cfg), 0.995, 1e-15);
  EXPECT_EQ(beta_for(1000.0, cfg), 0.9);
  EXPECT_THROW(beta_for(-0.1, cfg), InvalidInput);
}

TEST(Dpu, BetaBoundedAndNonIncreasing) {
  DpuConfig cfg{0.05, 0.8};
  double prev = 1.0;
  for (double u = 0.0; u < 10.0; u += 0.01) {
    const double b = beta_for(u, cfg);
    ASSERT_GE(b, cfg.beta_floor);
    ASSERT_LE(b, 1.0);
    ASSERT_LE(b, prev);
    ASSERT_NEAR(b, oracle::beta(u, cfg.theta, cfg.beta_floor), 1e-15);
    prev = b;
  }
}

TEST(Dpu, BlendExamples) {
  Mask m(2, 2, 0);
  m[0] = 1;
  PromptState<double> old_p(2, 2, 0.25, m), new_p(2, 2, 0.25, m);
  old_p.set_entry(0, {1, 1, 1});
  new_p.set_entry(0, {0, 0, 0});
  EXPECT_NEAR(dpu_update(old_p, new_p, 0.995).entry(0)[0], 0.995, 1e-15);
  EXPECT_EQ(dpu_update(old_p, new_p, 1.0).entry(0), old_p.entry(0));
  EXPECT_EQ(dpu_update(old_p, new_p, 0.0).entry(0), new_p.entry(0));
}

TEST(Dpu, ConvexAndDormantInvariant) {
  Rng rng(5);
  PromptState<double> base(8, 8, 4.0 / 64);
  for (int idx : base.active_indices()) base.set_entry(idx, {rng.uniform(-1, 1), 0.5, -0.5});
  base = reseat(base, place_random(8, 8, 4.0 / 64, 11));  // leaves dormant values behind
  auto updated = base;
  for (int idx : updated.active_indices()) {
    updated.set_entry(idx, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  }
  for (double beta : {0.0, 0.3, 0.9, 0.999, 1.0}) {
    const auto out = dpu_update(base, updated, beta);
    for (const auto& [idx, v] : out.store()) {
      const auto o = base.entry(idx), u = updated.entry(idx);
      for (int c = 0; c < 3; ++c) {
        EXPECT_GE(v[c], std::min(o[c], u[c]) - 1e-15);
        EXPECT_LE(v[c], std::max(o[c], u[c]) + 1e-15);
      }
      if (!out.is_active(idx)) {
        EXPECT_EQ(v, o);
      }
    }
  }
}

TEST(Dpu, MaskMismatchRejected) {
  PromptState<double> a(8, 8, 4.0 / 64);
  const auto b = reseat(a, place_random(8, 8, 4.0 / 64, 3));
  EXPECT_THROW(dpu_update(a, b, 0.5), StructuralError);
}
