#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svdp/errors.hpp"

namespace svdp {

/// Planar C x H x W buffer. Images are 3-channel instances with values in [0,1];
/// network activations and logits use the same layout.
template <typename T>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3() = default;
  Tensor3(int channels, int height, int width, T fill = T(0))
      : channels_(channels), height_(height), width_(width) {
    if (channels < 0 || height < 0 || width < 0) {
      throw InvalidInput("Tensor3: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const T> plane(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Tensor3& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  template <typename U>
  Tensor3<U> cast() const {
    Tensor3<U> out(channels_, height_, width_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Row-major H x W map (uncertainty maps, masks, label maps, depth maps).
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw InvalidInput("Grid: negative dimension");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;
using LabelMap = Grid<int>;

inline std::size_t count_set(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (const T& v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline std::string shape_string(int c, int h, int w) {
  return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace svdp
