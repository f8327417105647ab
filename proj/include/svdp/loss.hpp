#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/model.hpp"
#include "svdp/optimizer.hpp"
#include "svdp/prompts.hpp"
#include "svdp/pseudo_labels.hpp"
#include "svdp/updating.hpp"

namespace svdp {

/// Divisor of the summed pixel loss: every pixel (H*W) or the valid ones only.
enum class LossNorm { full, valid };

inline LossNorm parse_loss_norm(const std::string& s) {
  if (s == "full") return LossNorm::full;
  if (s == "valid") return LossNorm::valid;
  throw ConfigError("unknown loss_norm '" + s + "' (expected full|valid)");
}
inline const char* to_string(LossNorm n) { return n == LossNorm::full ? "full" : "valid"; }

/// Which student tensors the optimizer touches.
enum class TrainScope { all, norm, none };

inline TrainScope parse_train_scope(const std::string& s) {
  if (s == "all") return TrainScope::all;
  if (s == "norm") return TrainScope::norm;
  if (s == "none") return TrainScope::none;
  throw ConfigError("unknown train_scope '" + s + "' (expected all|norm|none)");
}
inline const char* to_string(TrainScope s) {
  return s == TrainScope::all ? "all" : s == TrainScope::norm ? "norm" : "none";
}

inline bool in_scope(TrainScope scope, const std::string& name) {
  switch (scope) {
    case TrainScope::all: return true;
    case TrainScope::norm: return is_norm_param(name);
    case TrainScope::none: return false;
  }
  return false;
}

template <typename T>
struct LossReport {
  double value = 0.0;
  std::size_t valid_pixel_count = 0;
  std::vector<double> per_class;  // summed contribution by pseudo class (segmentation)
  Tensor3<T> grad;                // d value / d logits (seg) or d value / d depth (depth)
};

inline constexpr double kLogClamp = 1e-12;

/// Pixel-wise cross-entropy against one-hot pseudo-labels on valid pixels
/// (segmentation), or masked L1 against pseudo-depth (depth).
template <typename T>
LossReport<T> consistency_loss(const PredictionOutput<T>& student, const PseudoLabel<T>& pseudo,
                               LossNorm norm = LossNorm::full) {
  const int h = student.height(), w = student.width();
  if (pseudo.valid.height() != h || pseudo.valid.width() != w) {
    throw StructuralError("consistency_loss: prediction and pseudo-label resolutions differ");
  }
  if (student.task != pseudo.task) throw StructuralError("consistency_loss: task mismatch");
  LossReport<T> r;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  r.valid_pixel_count = pseudo.valid_count();
  if (student.task == Task::segmentation) {
    r.grad = Tensor3<T>(student.logits.channels(), h, w);
    r.per_class.assign(static_cast<std::size_t>(student.logits.channels()), 0.0);
  } else {
    r.grad = Tensor3<T>(1, h, w);
  }
  if (r.valid_pixel_count == 0) return r;
  const double denom = norm == LossNorm::full ? static_cast<double>(n)
                                              : static_cast<double>(r.valid_pixel_count);
  const double log_floor = std::log(kLogClamp);
  double total = 0.0;
  if (student.task == Task::segmentation) {
    const int c_n = student.logits.channels();
    std::vector<double> p(static_cast<std::size_t>(c_n));
    for (std::size_t j = 0; j < n; ++j) {
      if (!pseudo.valid[j]) continue;
      double mx = student.logits[j];
      for (int c = 1; c < c_n; ++c) mx = std::max(mx, static_cast<double>(student.logits[c * n + j]));
      double sum = 0.0;
      for (int c = 0; c < c_n; ++c) {
        p[static_cast<std::size_t>(c)] = std::exp(student.logits[c * n + j] - mx);
        sum += p[static_cast<std::size_t>(c)];
      }
      const int y = pseudo.label[j];
      const double logp = student.logits[static_cast<std::size_t>(y) * n + j] - mx - std::log(sum);
      const double term = -std::max(logp, log_floor);
      total += term;
      r.per_class[static_cast<std::size_t>(y)] += term;
      if (logp > log_floor) {
        for (int c = 0; c < c_n; ++c) {
          const double g = p[static_cast<std::size_t>(c)] / sum - (c == y ? 1.0 : 0.0);
          r.grad[c * n + j] = static_cast<T>(g / denom);
        }
      }
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      if (!pseudo.valid[j]) continue;
      const double d = static_cast<double>(student.depth[j]) - pseudo.depth[j];
      total += std::abs(d);
      r.grad[j] = static_cast<T>((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / denom);
    }
  }
  r.value = total / denom;
  for (auto& v : r.per_class) v /= denom;
  return r;
}

/// Mean per-pixel prediction entropy and its gradient w.r.t. the logits.
template <typename T>
LossReport<T> entropy_loss(const PredictionOutput<T>& out) {
  if (out.task != Task::segmentation) throw ConfigError("entropy loss needs a segmentation head");
  const int c_n = out.logits.channels();
  const std::size_t n = out.logits.plane_size();
  const auto probs = softmax_channels(out.logits);
  LossReport<T> r;
  r.valid_pixel_count = n;
  r.grad = Tensor3<T>(c_n, out.height(), out.width());
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double ent = 0.0;
    for (int c = 0; c < c_n; ++c) {
      const double p = probs[c * n + j];
      ent -= p * std::log(std::max(p, kLogClamp));
    }
    total += ent;
    for (int c = 0; c < c_n; ++c) {
      const double p = probs[c * n + j];
      r.grad[c * n + j] = static_cast<T>(-p * (std::log(std::max(p, kLogClamp)) + ent) / n);
    }
  }
  r.value = total / static_cast<double>(n);
  return r;
}

struct StepConfig {
  double lr = 1e-4;
  double prompt_lr = 1e-4;
  TrainScope scope = TrainScope::all;
  LossNorm loss_norm = LossNorm::full;
  bool train_prompts = true;
};

template <typename T>
struct AdaptStepResult {
  ParamSet<T> student;
  PromptState<T> prompts;  // after the gradient step, before any EMA blend
  LossReport<T> loss;
  bool skipped = false;
  std::string skip_reason;
};

/// One Adam step over the in-scope student tensors and the active prompt entries,
/// on the consistency loss of the student's prediction for the warped input.
/// With `prompts == nullptr` the student sees the raw image and only weights train.
template <typename T>
AdaptStepResult<T> adapt_step(const Network<T>& net, const ModelPair<T>& pair,
                              const PromptState<T>* prompts, const Tensor3<T>& image,
                              const PseudoLabel<T>& pseudo, const StepConfig& cfg, Adam<T>& adam) {
  AdaptStepResult<T> res;
  res.student = pair.student;
  if (prompts) res.prompts = *prompts;
  std::optional<WarpedImage<T>> warped;
  if (prompts) warped = warp_traced(image, *prompts);
  ForwardTrace<T> trace;
  const auto out = net.forward(pair.student, warped ? warped->image : image, false, 0, trace);
  res.loss = consistency_loss(out, pseudo, cfg.loss_norm);
  if (!std::isfinite(res.loss.value)) {
    res.skipped = true;
    res.skip_reason = "non-finite loss";
    return res;
  }
  if (res.loss.valid_pixel_count == 0) {
    res.skipped = true;
    res.skip_reason = "no valid pseudo-label pixels";
    return res;
  }
  const bool prompt_grads = cfg.train_prompts && warped && !warped->active.empty();
  auto grads = net.backward(pair.student, trace, res.loss.grad, prompt_grads);
  if (!grads.params.all_finite() || (prompt_grads && !all_finite<T>(grads.input.data()))) {
    res.skipped = true;
    res.skip_reason = "non-finite gradient";
    return res;
  }
  const auto scope = cfg.scope;
  adam.step(res.student, grads.params, [scope](const std::string& n) { return in_scope(scope, n); },
            cfg.lr);
  if (prompt_grads) adam.step_prompts(res.prompts, prompt_gradient(*warped, grads.input), cfg.prompt_lr);
  if (prompts) res.prompts.set_step(prompts->step() + 1);
  return res;
}

template <typename T>
AdaptStepResult<T> adapt_step(const Network<T>& net, const ModelPair<T>& pair,
                              const PromptState<T>& prompts, const Tensor3<T>& image,
                              const PseudoLabel<T>& pseudo, const StepConfig& cfg, Adam<T>& adam) {
  return adapt_step(net, pair, &prompts, image, pseudo, cfg, adam);
}

}  // namespace svdp
