#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "svdp/tensor.hpp"

namespace svdp {

namespace detail {

struct AxisTap {
  int lo;
  int hi;
  double w_hi;
};

// Half-pixel-centre sampling positions (align_corners = false).
inline std::vector<AxisTap> bilinear_taps(int in, int out) {
  std::vector<AxisTap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace detail

/// Bilinear resize of every channel. Same-size requests return an exact copy.
template <typename T>
Tensor3<T> resize_bilinear(const Tensor3<T>& in, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw InvalidInput("resize_bilinear: empty target size");
  if (in.height() == out_h && in.width() == out_w) return in;
  const auto ty = detail::bilinear_taps(in.height(), out_h);
  const auto tx = detail::bilinear_taps(in.width(), out_w);
  Tensor3<T> out(in.channels(), out_h, out_w);
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < out_h; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      for (int x = 0; x < out_w; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        const double top = in.at(c, a.lo, b.lo) * (1.0 - b.w_hi) + in.at(c, a.lo, b.hi) * b.w_hi;
        const double bot = in.at(c, a.hi, b.lo) * (1.0 - b.w_hi) + in.at(c, a.hi, b.hi) * b.w_hi;
        out.at(c, y, x) = static_cast<T>(top * (1.0 - a.w_hi) + bot * a.w_hi);
      }
    }
  }
  return out;
}

/// Nearest-neighbour resize for label maps.
inline LabelMap resize_nearest(const LabelMap& in, int out_h, int out_w) {
  LabelMap out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const int sy = std::min(in.height() - 1, static_cast<int>((y + 0.5) * in.height() / out_h));
    for (int x = 0; x < out_w; ++x) {
      const int sx = std::min(in.width() - 1, static_cast<int>((x + 0.5) * in.width() / out_w));
      out.at(y, x) = in.at(sy, sx);
    }
  }
  return out;
}

/// Spatial size used for a scaled forward pass: the network needs multiples of 4.
inline int scaled_extent(int extent, double scale) {
  const int v = static_cast<int>(std::lround(extent * scale / 4.0)) * 4;
  return std::max(4, v);
}

}  // namespace svdp
