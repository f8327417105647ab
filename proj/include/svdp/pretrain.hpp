#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "svdp/adaptation.hpp"
#include "svdp/benchmark.hpp"
#include "svdp/errors.hpp"
#include "svdp/metrics.hpp"
#include "svdp/model.hpp"
#include "svdp/optimizer.hpp"
#include "svdp/random.hpp"

namespace svdp {

struct PretrainOptions {
  int min_epochs = 6;
  int max_epochs = 40;
  double lr = 3e-3;
  double lr_decay = 0.93;  // per epoch
  std::uint64_t seed = 0;
  // Stop once the source split reaches this score: pixel accuracy for
  // segmentation, delta1 for depth.
  double target_score = 0.95;
  // Photometric jitter on training images: contrast in [1-j, 1+j] around 0.5 and
  // brightness offset in [-j/2, j/2]. 0 disables it.
  double jitter = 0.15;
};

struct PretrainReport {
  int epochs = 0;
  double score = 0.0;
  std::string score_name;
  bool reached_target = false;
  std::vector<double> epoch_loss;
};

namespace detail {

// Supervised loss against ground truth. Segmentation: mean cross-entropy.
// Depth: mean absolute log-depth error.
template <typename T>
double supervised_loss(const PredictionOutput<T>& out, const SyntheticScene<T>& scene,
                       Tensor3<T>& grad) {
  const std::size_t n = out.logits.plane_size();
  grad = Tensor3<T>(out.logits.channels(), out.height(), out.width());
  double total = 0.0;
  if (out.task == Task::segmentation) {
    const int c_n = out.logits.channels();
    std::vector<double> p(static_cast<std::size_t>(c_n));
    for (std::size_t j = 0; j < n; ++j) {
      double mx = out.logits[j];
      for (int c = 1; c < c_n; ++c) mx = std::max(mx, static_cast<double>(out.logits[c * n + j]));
      double sum = 0.0;
      for (int c = 0; c < c_n; ++c) sum += p[static_cast<std::size_t>(c)] = std::exp(out.logits[c * n + j] - mx);
      const int y = scene.labels[j];
      total -= out.logits[static_cast<std::size_t>(y) * n + j] - mx - std::log(sum);
      for (int c = 0; c < c_n; ++c) {
        grad[c * n + j] = static_cast<T>((p[static_cast<std::size_t>(c)] / sum - (c == y)) / n);
      }
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double pd = out.depth[j];
      const double d = std::log(pd) - std::log(static_cast<double>(scene.depth[j]));
      total += std::abs(d);
      grad[j] = static_cast<T>((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / (pd * n));
    }
  }
  return total / static_cast<double>(n);
}

template <typename T>
Tensor3<T> jitter_image(const Tensor3<T>& image, double j, Rng& rng) {
  if (j <= 0.0) return image;
  const double contrast = rng.uniform(1.0 - j, 1.0 + j);
  const double offset = rng.uniform(-0.5 * j, 0.5 * j);
  Tensor3<T> out = image;
  for (auto& v : out.data()) v = static_cast<T>(std::clamp(contrast * (v - 0.5) + 0.5 + offset, 0.0, 1.0));
  return out;
}

template <typename T>
double source_score(const Network<T>& net, const ParamSet<T>& params,
                    const std::vector<SyntheticScene<T>>& scenes) {
  CellAccumulator acc(net.task(), net.spec().classes);
  for (const auto& s : scenes) acc.add(net.forward(params, s.image, false, 0), GroundTruth<T>{s.labels, s.depth});
  const auto c = acc.result("source", 0);
  return net.task() == Task::segmentation ? c.values.at("pixel_accuracy") : c.values.at("delta1");
}

}  // namespace detail

/// Supervised training on the labelled source split with Adam, one scene per
/// step in a per-epoch shuffled order, until the target score or max_epochs.
template <typename T>
ParamSet<T> pretrain(const Network<T>& net, const std::vector<SyntheticScene<T>>& scenes,
                     const PretrainOptions& opt, PretrainReport* report = nullptr,
                     const std::function<void(int, double, double)>& on_epoch = {}) {
  if (scenes.empty()) throw InvalidInput("pretrain: source split is empty");
  if (opt.max_epochs < 1 || opt.min_epochs > opt.max_epochs) {
    throw ConfigError("pretrain: need 1 <= min_epochs <= max_epochs");
  }
  ParamSet<T> params = net.init_params(mix_seed(opt.seed, 1));
  Adam<T> adam;
  Rng rng(mix_seed(opt.seed, 2));
  std::vector<std::size_t> order(scenes.size());
  PretrainReport rep;
  rep.score_name = net.task() == Task::segmentation ? "pixel_accuracy" : "delta1";
  double lr = opt.lr;
  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t i : order) {
      ForwardTrace<T> trace;
      const auto out = net.forward(params, detail::jitter_image(scenes[i].image, opt.jitter, rng), false, 0, trace);
      Tensor3<T> grad;
      loss_sum += detail::supervised_loss(out, scenes[i], grad);
      const auto g = net.backward(params, trace, grad, false);
      adam.step(params, g.params, [](const std::string&) { return true; }, lr);
    }
    lr *= opt.lr_decay;
    rep.epochs = epoch + 1;
    rep.epoch_loss.push_back(loss_sum / static_cast<double>(scenes.size()));
    rep.score = detail::source_score(net, params, scenes);
    if (on_epoch) on_epoch(rep.epochs, rep.epoch_loss.back(), rep.score);
    if (rep.score >= opt.target_score && rep.epochs >= opt.min_epochs) {
      rep.reached_target = true;
      break;
    }
  }
  if (report) *report = rep;
  return params;
}

}  // namespace svdp
