#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "support/oracles.hpp"
#include "svdp/svdp.hpp"

using namespace svdp;

namespace {

Tensor3<float> gray(int h, int w, float v) { return Tensor3<float>(3, h, w, v); }

Mask mask_of(int h, int w, std::initializer_list<int> idx) {
  Mask m(h, w, 0);
  for (int i : idx) m[static_cast<std::size_t>(i)] = 1;
  return m;
}

}  // namespace

TEST(Warp, ZeroPromptsAreIdentity) {
  const auto img = oracle::random_tensor<float>(3, 16, 16, 1);
  PromptState<float> p(16, 16, 0.05);
  EXPECT_EQ(warp(img, p), img);
}

TEST(Warp, SinglePointSupport) {
  PromptState<float> p(4, 4, 1.0 / 16, mask_of(4, 4, {1 * 4 + 1}));
  p.set_entry(5, {0.1f, 0.1f, 0.1f});
  const auto out = warp(gray(4, 4, 0.5f), p);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        EXPECT_FLOAT_EQ(out.at(c, y, x), (y == 1 && x == 1) ? 0.6f : 0.5f);
      }
    }
  }
}

TEST(Warp, ClampsToUnitRange) {
  PromptState<double> p(4, 4, 2.0 / 16, mask_of(4, 4, {0, 15}));
  p.set_entry(0, {0.8, -0.9, 0.1});
  p.set_entry(15, {-0.6, 0.6, 0.0});
  const Tensor3<double> img(3, 4, 4, 0.5);
  const auto out = warp(img, p);
  for (int idx : {0, 15}) {
    const auto e = p.entry(idx);
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(out[static_cast<std::size_t>(c) * 16 + idx], std::min(std::max(0.5 + e[c], 0.0), 1.0));
    }
  }
}

TEST(Warp, ResolutionMismatchRejected) {
  PromptState<float> p(8, 8, 0.1);
  EXPECT_THROW(warp(gray(4, 4, 0.5f), p), InvalidInput);
}

TEST(Warp, SupportBoundedByActiveCount) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PromptState<double> p(16, 16, 0.05, place_random(16, 16, 0.05, seed));
    Rng rng(seed);
    for (int idx : p.active_indices()) p.set_entry(idx, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const auto img = oracle::random_tensor<double>(3, 16, 16, seed + 100);
    const auto out = warp(img, p);
    std::size_t changed = 0;
    for (std::size_t j = 0; j < 256; ++j) {
      bool diff = false;
      for (int c = 0; c < 3; ++c) diff |= out[c * 256 + j] != img[c * 256 + j];
      changed += diff;
    }
    EXPECT_LE(changed, p.active_count());
  }
}

TEST(Reseat, SameMaskKeepsState) {
  PromptState<float> p(8, 8, 4.0 / 64);
  for (int idx : p.active_indices()) p.set_entry(idx, {0.1f * idx, 0.2f, 0.3f});
  EXPECT_EQ(reseat(p, p.active_mask()), p);
}

TEST(Reseat, DisjointMaskStartsAtZero) {
  PromptState<float> p(8, 8, 4.0 / 64);
  for (int idx : p.active_indices()) p.set_entry(idx, {1, 1, 1});
  const auto q = reseat(p, mask_of(8, 8, {60, 61, 62, 63}));
  for (int idx : q.active_indices()) EXPECT_EQ(q.entry(idx), (PromptState<float>::Offset{0, 0, 0}));
  // old values stay dormant and do not warp the image
  EXPECT_EQ(q.entry(0), (PromptState<float>::Offset{1, 1, 1}));
  const auto img = gray(8, 8, 0.5f);
  EXPECT_EQ(warp(img, q), img);
}

TEST(Reseat, WrongCardinalityRejected) {
  PromptState<float> p(8, 8, 4.0 / 64);
  EXPECT_THROW(reseat(p, mask_of(8, 8, {1, 2, 3})), InvalidInput);
}

TEST(Reseat, DormantValuesMatchDictionarySimulation) {
  constexpr int kH = 12, kW = 12;
  const double rho = 6.0 / (kH * kW);
  PromptState<double> p(kH, kW, rho);
  std::map<int, std::array<double, 3>> store;  // pixel -> value, never erased
  std::set<int> active;
  for (int idx : p.active_indices()) {
    store[idx] = {0, 0, 0};
    active.insert(idx);
  }
  Rng rng(3);
  for (int step = 0; step < 200; ++step) {
    // overlap-heavy placement: half of the time reuse most of the previous mask
    const auto mask = place_random(kH, kW, rho, 1000 + static_cast<std::uint64_t>(step % 7));
    p = reseat(p, mask);
    active = oracle::mask_set(mask);
    for (int idx : active) store.try_emplace(idx, std::array<double, 3>{0, 0, 0});
    for (int idx : active) {
      if (rng.uniform() < 0.5) {
        const std::array<double, 3> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        p.set_entry(idx, v);
        store[idx] = v;
      }
    }
    ASSERT_EQ(p.active_count(), p.budget());
    for (const auto& [idx, v] : store) ASSERT_EQ(p.entry(idx), v) << "step " << step << " pixel " << idx;
    ASSERT_EQ(oracle::mask_set(p.active_mask()), active);
  }
}

TEST(Reseat, SparsityInvariantUnderRandomSequences) {
  for (double rho : {1e-3, 5e-3, 0.02, 0.5, 1.0}) {
    PromptState<float> p(32, 32, rho);
    for (std::uint64_t s = 0; s < 30; ++s) {
      p = reseat(p, place_random(32, 32, rho, s));
      ASSERT_EQ(p.active_count(), prompt_budget(32, 32, rho));
    }
  }
}

TEST(TrainableFraction, Examples) {
  PromptState<float> p(64, 64, 1e-3);
  EXPECT_EQ(p.active_count(), 4u);
  ParamSet<float> model;
  model.add("w", {12000});
  EXPECT_DOUBLE_EQ(trainable_fraction(p, model), 1e-3);

  PromptState<float> full(8, 8, 1.0);
  ParamSet<float> small;
  small.add("w", {1000});
  EXPECT_DOUBLE_EQ(trainable_fraction(full, small), 3.0 * 64 / 1000);
}

TEST(TrainableFraction, ZeroActivePixels) {
  PromptState<float> p(4, 4, 0.01);  // round(0.16) = 0
  ParamSet<float> model;
  model.add("w", {100});
  EXPECT_EQ(p.active_count(), 0u);
  EXPECT_EQ(trainable_fraction(p, model), 0.0);
}

TEST(PromptFile, RoundTripKeepsDormantEntries) {
  PromptState<double> p(8, 8, 3.0 / 64);
  for (int idx : p.active_indices()) p.set_entry(idx, {0.125, -0.3333333333333333, 1e-7});
  p = reseat(p, mask_of(8, 8, {10, 20, 30}));
  p.set_entry(20, {0.5, 0.25, -0.75});
  p.set_step(17);
  const auto path = (std::filesystem::temp_directory_path() / "svdp_test_prompts.txt").string();
  save_prompts(p, path);
  EXPECT_EQ(load_prompts<double>(path), p);
  std::filesystem::remove(path);
  EXPECT_THROW(decode_prompts<double>("nonsense"), IoError);
}
