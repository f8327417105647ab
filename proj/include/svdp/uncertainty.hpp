#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/model.hpp"
#include "svdp/random.hpp"
#include "svdp/resample.hpp"
#include "svdp/tensor.hpp"

namespace svdp {

enum class UncertaintyMethod { mc_dropout, resolution_aug };

inline const char* to_string(UncertaintyMethod m) {
  return m == UncertaintyMethod::mc_dropout ? "mc_dropout" : "resolution_aug";
}

inline UncertaintyMethod parse_uncertainty_method(const std::string& s) {
  if (s == "mc_dropout") return UncertaintyMethod::mc_dropout;
  if (s == "resolution_aug") return UncertaintyMethod::resolution_aug;
  throw ConfigError("unknown uncertainty method '" + s + "' (expected mc_dropout|resolution_aug)");
}

template <typename T>
struct UncertaintyReport {
  Grid<T> pixel_map;
  double image_value = 0.0;
  int m = 0;
  UncertaintyMethod method = UncertaintyMethod::mc_dropout;
};

/// Per-pixel spread of m predictive samples: sqrt(mean_i ||p_i - mu||^2), where
/// mu is the elementwise mean of the samples at that pixel.
template <typename T>
Grid<T> pixel_uncertainty(std::span<const Tensor3<T>> samples) {
  if (samples.size() < 2) throw InvalidInput("pixel_uncertainty: need at least 2 samples");
  const auto& first = samples.front();
  for (const auto& s : samples) {
    if (!s.same_shape(first)) throw InvalidInput("pixel_uncertainty: samples differ in shape");
    if (!all_finite<T>(s.data())) throw NumericalError("pixel_uncertainty: non-finite probabilities");
  }
  const int c_n = first.channels();
  const std::size_t n = first.plane_size();
  const double inv_m = 1.0 / static_cast<double>(samples.size());
  Grid<T> out(first.height(), first.width());
  std::vector<double> mu(static_cast<std::size_t>(c_n));
  // Deviations are taken relative to the first sample so identical samples
  // give exactly zero.
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < c_n; ++c) {
      const double ref = first[c * n + p];
      double s = 0.0;
      for (const auto& smp : samples) s += smp[c * n + p] - ref;
      mu[static_cast<std::size_t>(c)] = s * inv_m;
    }
    double acc = 0.0;
    for (const auto& smp : samples) {
      for (int c = 0; c < c_n; ++c) {
        const double d = (smp[c * n + p] - first[c * n + p]) - mu[static_cast<std::size_t>(c)];
        acc += d * d;
      }
    }
    out[p] = static_cast<T>(std::sqrt(acc * inv_m));
  }
  return out;
}

/// Mean of the pixel map.
template <typename T>
double image_level(const Grid<T>& pixel_map) {
  if (pixel_map.size() == 0) return 0.0;
  double s = 0.0;
  for (T v : pixel_map.data()) s += v;
  return s / static_cast<double>(pixel_map.size());
}

template <typename T>
double image_level(const UncertaintyReport<T>& report) {
  return image_level(report.pixel_map);
}

namespace detail {

template <typename T>
void normalize_depth_samples(std::vector<Tensor3<T>>& samples) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : samples) {
    for (T v : s.data()) total += v;
    count += s.size();
  }
  const double mean_depth = total / static_cast<double>(count);
  if (!(mean_depth > 0.0) || !std::isfinite(mean_depth)) {
    throw NumericalError("uncertainty: mean predicted depth is not positive");
  }
  for (auto& s : samples) {
    for (auto& v : s.data()) v = static_cast<T>(v / mean_depth);
  }
}

// Segmentation samples are softmax vectors; depth samples are depth maps divided
// by the mean depth of the across-sample average, which keeps U scale-free.
template <typename T>
std::vector<Tensor3<T>> to_uncertainty_samples(Task task, std::vector<PredictionOutput<T>>& outs) {
  std::vector<Tensor3<T>> samples;
  samples.reserve(outs.size());
  if (task == Task::segmentation) {
    for (auto& o : outs) samples.push_back(softmax_channels(o.logits));
    return samples;
  }
  for (auto& o : outs) samples.push_back(std::move(o.depth));
  normalize_depth_samples(samples);
  return samples;
}

template <typename T>
UncertaintyReport<T> make_report(std::vector<Tensor3<T>> samples, UncertaintyMethod method) {
  UncertaintyReport<T> r;
  r.pixel_map = pixel_uncertainty<T>(samples);
  r.image_value = image_level(r.pixel_map);
  r.m = static_cast<int>(samples.size());
  r.method = method;
  return r;
}

}  // namespace detail

/// MC-dropout uncertainty: m stochastic head passes over one trunk evaluation.
/// Pass i uses dropout seed mix_seed(seed, i).
template <typename T>
UncertaintyReport<T> estimate_pixel(const Network<T>& net, const ParamSet<T>& params,
                                    const Tensor3<T>& image, int m, std::uint64_t seed) {
  if (m < 2) throw InvalidInput("estimate_pixel: m must be at least 2, got " + std::to_string(m));
  const Tensor3<T> feats = net.features(params, image);
  std::vector<PredictionOutput<T>> outs;
  outs.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    outs.push_back(net.head(params, feats, true, mix_seed(seed, static_cast<std::uint64_t>(i))));
  }
  return detail::make_report(detail::to_uncertainty_samples(net.task(), outs),
                             UncertaintyMethod::mc_dropout);
}

/// Dense prediction of one deterministic forward at `scale`, resampled back to
/// the input size: per-pixel class probabilities (segmentation) or depth.
template <typename T>
Tensor3<T> scaled_prediction(const Network<T>& net, const ParamSet<T>& params,
                             const Tensor3<T>& image, double scale) {
  const int h = image.height(), w = image.width();
  auto out = net.forward(params,
                         resize_bilinear(image, scaled_extent(h, scale), scaled_extent(w, scale)),
                         false, 0);
  Tensor3<T> dense = net.task() == Task::segmentation ? softmax_channels(out.logits)
                                                      : std::move(out.depth);
  return resize_bilinear(dense, h, w);
}

/// Resolution-augmentation uncertainty: one deterministic pass per scale.
template <typename T>
UncertaintyReport<T> estimate_pixel_resaug(const Network<T>& net, const ParamSet<T>& params,
                                           const Tensor3<T>& image, const std::vector<double>& scales) {
  if (scales.size() < 2) throw InvalidInput("estimate_pixel_resaug: need at least 2 scales");
  std::vector<Tensor3<T>> samples;
  samples.reserve(scales.size());
  for (double s : scales) {
    if (!(s > 0.0)) throw InvalidInput("estimate_pixel_resaug: scales must be positive");
    samples.push_back(scaled_prediction(net, params, image, s));
  }
  if (net.task() == Task::depth) detail::normalize_depth_samples(samples);
  return detail::make_report(std::move(samples), UncertaintyMethod::resolution_aug);
}

}  // namespace svdp
