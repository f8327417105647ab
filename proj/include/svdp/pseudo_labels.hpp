#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/model.hpp"
#include "svdp/tensor.hpp"
#include "svdp/uncertainty.hpp"

namespace svdp {

template <typename T>
struct PseudoLabel {
  Task task = Task::segmentation;
  LabelMap label;           // segmentation
  Grid<T> depth;            // depth
  Grid<T> confidence;       // in [0,1]
  Mask valid;               // confidence >= tau
  Tensor3<T> mean_probs;    // scale-averaged distribution (segmentation)

  std::size_t valid_count() const { return count_set(valid); }
};

/// Builds a pseudo-label from already-resampled per-scale predictions
/// (probability maps or depth maps). Reduction runs in the given order.
template <typename T>
PseudoLabel<T> pseudo_label_from(Task task, const std::vector<Tensor3<T>>& preds, double tau) {
  if (preds.empty()) throw InvalidInput("pseudo label: no predictions to aggregate");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("pseudo label: tau must lie in [0,1]");
  const auto& first = preds.front();
  for (const auto& p : preds) {
    if (!p.same_shape(first)) throw InvalidInput("pseudo label: predictions differ in shape");
  }
  const int h = first.height(), w = first.width();
  const std::size_t n = first.plane_size();
  const double inv = 1.0 / static_cast<double>(preds.size());
  PseudoLabel<T> out;
  out.task = task;
  out.confidence = Grid<T>(h, w);
  out.valid = Mask(h, w, 0);
  if (task == Task::segmentation) {
    const int c_n = first.channels();
    out.mean_probs = Tensor3<T>(c_n, h, w);
    for (std::size_t i = 0; i < first.size(); ++i) {
      double s = 0.0;
      for (const auto& p : preds) s += p[i];
      out.mean_probs[i] = static_cast<T>(s * inv);
    }
    out.label = LabelMap(h, w, 0);
    for (std::size_t p = 0; p < n; ++p) {
      int best = 0;
      for (int c = 1; c < c_n; ++c) {
        if (out.mean_probs[c * n + p] > out.mean_probs[best * n + p]) best = c;
      }
      out.label[p] = best;
      out.confidence[p] = out.mean_probs[best * n + p];
    }
  } else {
    out.depth = Grid<T>(h, w);
    for (std::size_t p = 0; p < n; ++p) {
      double s = 0.0, s2 = 0.0;
      for (const auto& pr : preds) {
        s += pr[p];
        s2 += static_cast<double>(pr[p]) * pr[p];
      }
      const double mean = s * inv;
      const double var = std::max(0.0, s2 * inv - mean * mean);
      out.depth[p] = static_cast<T>(mean);
      // 1 - coefficient of variation across scales
      const double cv = mean > 0.0 ? std::sqrt(var) / mean : 1.0;
      out.confidence[p] = static_cast<T>(std::clamp(1.0 - cv, 0.0, 1.0));
    }
  }
  for (std::size_t p = 0; p < n; ++p) out.valid[p] = out.confidence[p] >= static_cast<T>(tau) ? 1 : 0;
  return out;
}

/// Teacher pseudo-label on the warped image: per-scale predictions are resampled
/// to the input size and averaged; label = argmax, confidence = max probability.
/// Scales are reduced in ascending order, so their listed order does not matter.
template <typename T>
PseudoLabel<T> generate(const Network<T>& net, const ParamSet<T>& teacher,
                        const Tensor3<T>& warped_image, std::vector<double> scales, double tau) {
  if (scales.empty()) throw InvalidInput("generate: at least one scale is required");
  std::sort(scales.begin(), scales.end());
  std::vector<Tensor3<T>> preds;
  preds.reserve(scales.size());
  for (double s : scales) {
    if (!(s > 0.0)) throw InvalidInput("generate: scales must be positive");
    preds.push_back(scaled_prediction(net, teacher, warped_image, s));
  }
  return pseudo_label_from(net.task(), preds, tau);
}

}  // namespace svdp
