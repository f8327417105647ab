#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/tensor.hpp"

namespace svdp {

struct SegMetrics {
  std::vector<double> iou;     // NaN for classes absent from both prediction and truth
  std::vector<double> recall;  // NaN for classes absent from the truth
  double miou = 0.0;
  double macc = 0.0;
  double pixel_accuracy = 0.0;
};

/// Confusion matrix accumulated over any number of label maps.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes) : classes_(classes), counts_(static_cast<std::size_t>(classes * classes), 0) {
    if (classes < 1) throw InvalidInput("ConfusionMatrix: need at least one class");
  }

  int classes() const { return classes_; }

  void add(const LabelMap& pred, const LabelMap& truth) {
    if (!pred.same_shape(truth)) throw InvalidInput("confusion: prediction and truth shapes differ");
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const int p = pred[i], g = truth[i];
      if (p < 0 || p >= classes_ || g < 0 || g >= classes_) {
        throw InvalidInput("confusion: label out of range [0," + std::to_string(classes_) + ")");
      }
      ++counts_[static_cast<std::size_t>(g * classes_ + p)];
    }
  }

  std::uint64_t count(int truth, int pred) const {
    return counts_[static_cast<std::size_t>(truth * classes_ + pred)];
  }

  SegMetrics metrics() const {
    SegMetrics m;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.iou.assign(static_cast<std::size_t>(classes_), nan);
    m.recall.assign(static_cast<std::size_t>(classes_), nan);
    double iou_sum = 0.0, rec_sum = 0.0;
    int iou_n = 0, rec_n = 0;
    std::uint64_t correct = 0, total = 0;
    for (int c = 0; c < classes_; ++c) {
      std::uint64_t tp = count(c, c), fp = 0, fn = 0;
      for (int o = 0; o < classes_; ++o) {
        if (o == c) continue;
        fp += count(o, c);
        fn += count(c, o);
      }
      correct += tp;
      for (int o = 0; o < classes_; ++o) total += count(c, o);
      if (tp + fp + fn > 0) {
        m.iou[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        iou_sum += m.iou[static_cast<std::size_t>(c)];
        ++iou_n;
      }
      if (tp + fn > 0) {
        m.recall[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(tp + fn);
        rec_sum += m.recall[static_cast<std::size_t>(c)];
        ++rec_n;
      }
    }
    m.miou = iou_n ? iou_sum / iou_n : 0.0;
    m.macc = rec_n ? rec_sum / rec_n : 0.0;
    m.pixel_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return m;
  }

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

/// Per-class IoU, mIoU and mAcc (mean per-class recall) of a single map pair.
inline SegMetrics miou(const LabelMap& pred, const LabelMap& truth, int classes) {
  ConfusionMatrix cm(classes);
  cm.add(pred, truth);
  return cm.metrics();
}

struct DepthMetrics {
  double delta1 = 0.0;  // fraction with max(pred/gt, gt/pred) < 1.25
  double delta2 = 0.0;  // ... < 1.25^2
  double abs_rel = 0.0;
  double rmse = 0.0;
};

/// Running sums for depth metrics over many maps; averages are per pixel.
class DepthAccumulator {
 public:
  template <typename T>
  void add(const Grid<T>& pred, const Grid<T>& truth) {
    if (!pred.same_shape(truth)) throw InvalidInput("depth metrics: shapes differ");
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double p = pred[i], g = truth[i];
      if (!(p > 0.0) || !(g > 0.0)) throw InvalidInput("depth metrics: depths must be positive");
      const double ratio = std::max(p / g, g / p);
      d1_ += ratio < 1.25 ? 1 : 0;
      d2_ += ratio < 1.25 * 1.25 ? 1 : 0;
      abs_rel_ += std::abs(p - g) / g;
      sq_ += (p - g) * (p - g);
      ++n_;
    }
  }

  DepthMetrics metrics() const {
    if (n_ == 0) return {};
    const double n = static_cast<double>(n_);
    return {static_cast<double>(d1_) / n, static_cast<double>(d2_) / n, abs_rel_ / n, std::sqrt(sq_ / n)};
  }

 private:
  std::uint64_t d1_ = 0, d2_ = 0, n_ = 0;
  double abs_rel_ = 0.0, sq_ = 0.0;
};

template <typename T>
DepthMetrics depth_metrics(const Grid<T>& pred, const Grid<T>& truth) {
  DepthAccumulator acc;
  acc.add(pred, truth);
  return acc.metrics();
}

}  // namespace svdp
