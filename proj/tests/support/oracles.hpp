#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. They are deliberately naive: plain loops, no shared code
// with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "svdp/svdp.hpp"

namespace oracle {

using svdp::Grid;
using svdp::LabelMap;
using svdp::Mask;
using svdp::Tensor3;

template <typename T>
Tensor3<T> random_tensor(int c, int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  svdp::Rng rng(seed);
  Tensor3<T> t(c, h, w);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Random per-pixel probability vectors (C channels summing to one).
inline Tensor3<double> random_probs(int c, int h, int w, std::uint64_t seed) {
  svdp::Rng rng(seed);
  Tensor3<double> t(c, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = 0; k < c; ++k) s += (t.at(k, y, x) = rng.uniform(0.01, 1.0));
      for (int k = 0; k < c; ++k) t.at(k, y, x) /= s;
    }
  }
  return t;
}

// sqrt(1/m sum_i ||p_i - mu||^2) per pixel.
inline double pixel_uncertainty_at(const std::vector<Tensor3<double>>& s, int y, int x) {
  const int c_n = s[0].channels();
  const double m = static_cast<double>(s.size());
  double acc = 0.0;
  for (const auto& si : s) {
    for (int c = 0; c < c_n; ++c) {
      double mu = 0.0;
      for (const auto& sj : s) mu += sj.at(c, y, x);
      mu /= m;
      const double d = si.at(c, y, x) - mu;
      acc += d * d;
    }
  }
  return std::sqrt(acc / m);
}

inline double mean_of(const Grid<double>& g) {
  double s = 0.0;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) s += g.at(y, x);
  }
  return s / (static_cast<double>(g.height()) * g.width());
}

inline double ema(double teacher, double student, double alpha) { return alpha * teacher + (1.0 - alpha) * student; }

inline double beta(double u, double theta, double floor) {
  double b = 1.0 - u * theta;
  if (b < floor) b = floor;
  if (b > 1.0) b = 1.0;
  return b;
}

// Mean over valid pixels (or all pixels) of -log softmax(logits)[label].
inline double cross_entropy(const Tensor3<double>& logits, const LabelMap& label, const Mask& valid, bool full) {
  const int c_n = logits.channels();
  double total = 0.0;
  std::size_t n_valid = 0;
  for (int y = 0; y < logits.height(); ++y) {
    for (int x = 0; x < logits.width(); ++x) {
      if (!valid.at(y, x)) continue;
      ++n_valid;
      double z = 0.0;
      for (int c = 0; c < c_n; ++c) z += std::exp(logits.at(c, y, x));
      const double p = std::exp(logits.at(label.at(y, x), y, x)) / z;
      total += -std::log(std::max(p, 1e-12));
    }
  }
  if (n_valid == 0) return 0.0;
  const double denom = full ? static_cast<double>(logits.height()) * logits.width() : static_cast<double>(n_valid);
  return total / denom;
}

struct SegScores {
  double miou, macc, pixel_accuracy;
};

inline SegScores seg_scores(const LabelMap& pred, const LabelMap& gt, int classes) {
  double iou_sum = 0.0, rec_sum = 0.0;
  int iou_n = 0, rec_n = 0;
  std::size_t correct = 0;
  for (int c = 0; c < classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && gt[i] == c) ++tp;
      if (pred[i] == c && gt[i] != c) ++fp;
      if (pred[i] != c && gt[i] == c) ++fn;
    }
    if (tp + fp + fn) {
      iou_sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
      ++iou_n;
    }
    if (tp + fn) {
      rec_sum += static_cast<double>(tp) / static_cast<double>(tp + fn);
      ++rec_n;
    }
  }
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == gt[i];
  return {iou_n ? iou_sum / iou_n : 0.0, rec_n ? rec_sum / rec_n : 0.0,
          static_cast<double>(correct) / static_cast<double>(pred.size())};
}

inline svdp::DepthMetrics depth_scores(const Grid<double>& pred, const Grid<double>& gt) {
  double d1 = 0, d2 = 0, rel = 0, sq = 0;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = std::max(pred[i] / gt[i], gt[i] / pred[i]);
    if (r < 1.25) d1 += 1;
    if (r < 1.5625) d2 += 1;
    rel += std::fabs(pred[i] - gt[i]) / gt[i];
    sq += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  }
  return {d1 / n, d2 / n, rel / n, std::sqrt(sq / n)};
}

// Full stable sort by (uncertainty desc, index asc); first k indices.
template <typename T>
std::set<int> top_k_by_sort(const Grid<T>& u, std::size_t k) {
  std::vector<int> idx(u.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return u[static_cast<std::size_t>(a)] > u[static_cast<std::size_t>(b)]; });
  return {idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k)};
}

inline std::set<int> mask_set(const Mask& m) {
  std::set<int> s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) s.insert(static_cast<int>(i));
  }
  return s;
}

// Random map with deliberate ties (values on a coarse lattice).
inline Grid<double> tied_map(int h, int w, std::uint64_t seed, int levels) {
  svdp::Rng rng(seed);
  Grid<double> g(h, w);
  for (auto& v : g.data()) v = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) / levels;
  return g;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t prompt_entries = 0;
  std::size_t weight_entries = 0;
  std::size_t kink_entries = 0;  // perturbation flipped a ReLU; not compared
};

inline double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / scale;
}

// Central-difference check of d L / d (active prompts, sampled weights) for one
// random instance. Segmentation uses the consistency loss against a random
// pseudo-label with a random valid mask; depth uses a fixed random linear
// functional of the predicted depth. Entries whose perturbation flips any ReLU
// sit on a kink where the difference quotient is meaningless; they are counted
// and left out.
inline GradCheck gradient_check(svdp::Task task, std::uint64_t seed, double weight_fraction = 0.1,
                                double h = 1e-4, int size = 16) {
  using namespace svdp;
  NetworkSpec spec;
  spec.task = task;
  Network<double> net(spec);
  auto params = net.init_params(seed);
  Rng rng(mix_seed(seed, 1));
  // perturb norm parameters away from their (1, 0) initialization
  for (auto& [name, t] : params.tensors()) {
    if (is_norm_param(name)) {
      for (auto& v : t.values) v += rng.uniform(-0.2, 0.2);
    }
  }
  const auto image = random_tensor<double>(3, size, size, mix_seed(seed, 2), 0.2, 0.8);
  PromptState<double> prompts(size, size, 0.05, place_random(size, size, 0.05, mix_seed(seed, 3)));
  for (int idx : prompts.active_indices()) {
    prompts.set_entry(idx, {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)});
  }

  PseudoLabel<double> pseudo;
  pseudo.task = task;
  pseudo.valid = Mask(size, size, 0);
  pseudo.confidence = Grid<double>(size, size, 1.0);
  pseudo.label = LabelMap(size, size, 0);
  for (std::size_t i = 0; i < pseudo.valid.size(); ++i) {
    pseudo.valid[i] = rng.uniform() < 0.7 ? 1 : 0;
    pseudo.label[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.classes)));
  }
  const auto functional = random_tensor<double>(1, size, size, mix_seed(seed, 4), -1.0, 1.0);

  // ReLU on/off pattern of a pass, to detect perturbations that cross a kink.
  auto pattern = [](const PromptedPass<double>& pass) {
    std::vector<bool> on;
    for (const auto& b : pass.trace.blocks) {
      for (double v : b.activation.data()) on.push_back(v > 0.0);
    }
    return on;
  };
  std::vector<bool> base_pattern;
  bool crossed = false;

  auto loss_and_grad = [&](const ParamSet<double>& p, const PromptState<double>& pr, Tensor3<double>* grad_out,
                           PromptedPass<double>* keep) {
    auto pass = forward_prompted(net, p, image, pr);
    double value = 0.0;
    if (task == Task::segmentation) {
      auto rep = consistency_loss(pass.output, pseudo, LossNorm::full);
      value = rep.value;
      if (grad_out) *grad_out = rep.grad;
    } else {
      for (std::size_t i = 0; i < functional.size(); ++i) value += functional[i] * pass.output.depth[i];
      if (grad_out) *grad_out = functional;
    }
    if (!base_pattern.empty() && pattern(pass) != base_pattern) crossed = true;
    if (keep) *keep = std::move(pass);
    return value;
  };

  Tensor3<double> gout;
  PromptedPass<double> pass;
  loss_and_grad(params, prompts, &gout, &pass);
  const auto grads = backward(net, params, pass, gout);
  base_pattern = pattern(pass);

  GradCheck out;
  for (std::size_t k = 0; k < grads.prompts.index.size(); ++k) {
    const int idx = grads.prompts.index[k];
    for (std::size_t c = 0; c < 3; ++c) {
      auto plus = prompts, minus = prompts;
      auto e = prompts.entry(idx);
      e[c] += h;
      plus.set_entry(idx, e);
      e[c] -= 2 * h;
      minus.set_entry(idx, e);
      crossed = false;
      const double num = (loss_and_grad(params, plus, nullptr, nullptr) -
                          loss_and_grad(params, minus, nullptr, nullptr)) / (2 * h);
      if (crossed) {
        ++out.kink_entries;
        continue;
      }
      out.max_rel_error = std::max(out.max_rel_error, rel_error(grads.prompts.grad[k][c], num));
      ++out.prompt_entries;
    }
  }
  for (auto& [name, t] : params.tensors()) {
    const auto& g = grads.params.at(name).values;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (rng.uniform() >= weight_fraction) continue;
      const double orig = t.values[i];
      crossed = false;
      t.values[i] = orig + h;
      const double lp = loss_and_grad(params, prompts, nullptr, nullptr);
      t.values[i] = orig - h;
      const double lm = loss_and_grad(params, prompts, nullptr, nullptr);
      t.values[i] = orig;
      if (crossed) {
        ++out.kink_entries;
        continue;
      }
      out.max_rel_error = std::max(out.max_rel_error, rel_error(g[i], (lp - lm) / (2 * h)));
      ++out.weight_entries;
    }
  }
  return out;
}

}  // namespace oracle
