#pragma once

#include <algorithm>
#include <cmath>

#include "svdp/errors.hpp"
#include "svdp/params.hpp"
#include "svdp/prompts.hpp"

namespace svdp {

/// Student/teacher weights linked by an exponential moving average.
template <typename T>
struct ModelPair {
  ParamSet<T> student;
  ParamSet<T> teacher;
  double alpha = 0.999;

  /// Both sides start from the source checkpoint.
  static ModelPair from_source(const ParamSet<T>& source, double alpha = 0.999) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("EMA rate alpha must lie in (0,1]");
    return {source, source, alpha};
  }
};

struct DpuConfig {
  double theta = 0.01;
  double beta_floor = 0.9;

  void validate() const {
    if (!(theta > 0.0)) throw ConfigError("DPU theta must be positive");
    if (!(beta_floor >= 0.0 && beta_floor < 1.0)) throw ConfigError("DPU beta floor must lie in [0,1)");
  }
};

/// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
template <typename T>
void ema_teacher(ModelPair<T>& pair) {
  pair.teacher.require_same_structure(pair.student, "ema_teacher");
  const T a = static_cast<T>(pair.alpha);
  const T b = static_cast<T>(1.0 - pair.alpha);
  auto s = pair.student.tensors().begin();
  for (auto& [_, t] : pair.teacher.tensors()) {
    const auto& sv = s->second.values;
    for (std::size_t i = 0; i < t.size(); ++i) t.values[i] = a * t.values[i] + b * sv[i];
    ++s;
  }
}

/// Per-sample prompt EMA rate: clamp(1 - U * theta, beta_floor, 1).
inline double beta_for(double image_uncertainty, const DpuConfig& cfg) {
  if (image_uncertainty < 0.0 || !std::isfinite(image_uncertainty)) {
    throw InvalidInput("beta_for: image uncertainty must be finite and non-negative");
  }
  return std::clamp(1.0 - image_uncertainty * cfg.theta, cfg.beta_floor, 1.0);
}

/// Blends every active entry as beta * old + (1 - beta) * updated. Dormant
/// entries are carried over from `old_prompts` untouched.
template <typename T>
PromptState<T> dpu_update(const PromptState<T>& old_prompts, const PromptState<T>& updated,
                          double beta) {
  if (!old_prompts.same_layout(updated)) {
    throw StructuralError("dpu_update: prompt states differ in resolution or active mask");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("dpu_update: beta must lie in [0,1]");
  PromptState<T> out = old_prompts;
  const T b = static_cast<T>(beta);
  const T nb = static_cast<T>(1.0 - beta);
  for (int idx : old_prompts.active_indices()) {
    const auto o = old_prompts.entry(idx);
    const auto u = updated.entry(idx);
    out.set_entry(idx, {b * o[0] + nb * u[0], b * o[1] + nb * u[1], b * o[2] + nb * u[2]});
  }
  out.set_step(updated.step());
  return out;
}

}  // namespace svdp
