#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/params.hpp"
#include "svdp/tensor.hpp"

namespace svdp {

/// Number of active prompt pixels for a density on an H x W image.
inline std::size_t prompt_budget(int height, int width, double density) {
  return static_cast<std::size_t>(std::llround(density * height * width));
}

/// Sparse, persistent per-pixel additive prompts at full image resolution.
///
/// The store keeps every pixel that has ever been active. Only pixels in the
/// active mask contribute to the warp and receive gradients; the rest are
/// dormant and come back with their old values when re-activated.
template <typename T>
class PromptState {
 public:
  using Offset = std::array<T, 3>;

  PromptState() = default;

  /// Zero prompts with the first `budget` pixels (row-major) active.
  PromptState(int height, int width, double density)
      : PromptState(height, width, density, default_mask(height, width, density)) {}

  PromptState(int height, int width, double density, const Mask& initial)
      : height_(height), width_(width), density_(density), mask_(initial) {
    if (height <= 0 || width <= 0) throw InvalidInput("PromptState: empty resolution");
    if (!(density > 0.0 && density <= 1.0)) throw InvalidInput("PromptState: density must lie in (0,1]");
    if (mask_.height() != height || mask_.width() != width) {
      throw InvalidInput("PromptState: mask resolution mismatch");
    }
    if (count_set(mask_) != budget()) {
      throw InvalidInput("PromptState: mask cardinality differs from round(density*H*W)");
    }
    for (std::size_t i = 0; i < mask_.size(); ++i) {
      if (mask_[i]) store_.emplace(static_cast<int>(i), Offset{});
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  double density() const { return density_; }
  std::size_t budget() const { return prompt_budget(height_, width_, density_); }
  std::size_t active_count() const { return count_set(mask_); }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t t) { step_ = t; }

  const Mask& active_mask() const { return mask_; }
  bool is_active(int index) const { return mask_[static_cast<std::size_t>(index)] != 0; }

  std::vector<int> active_indices() const {
    std::vector<int> idx;
    idx.reserve(budget());
    for (std::size_t i = 0; i < mask_.size(); ++i) {
      if (mask_[i]) idx.push_back(static_cast<int>(i));
    }
    return idx;
  }

  /// Stored offset of a pixel; zero for pixels never activated.
  Offset entry(int index) const {
    auto it = store_.find(index);
    return it == store_.end() ? Offset{} : it->second;
  }

  void set_entry(int index, const Offset& value) {
    if (!is_active(index)) throw InvalidInput("PromptState: cannot write a dormant pixel");
    for (T v : value) {
      if (!std::isfinite(v)) throw NumericalError("PromptState: non-finite prompt value");
    }
    store_[index] = value;
  }

  /// Every stored entry, active or dormant.
  const std::map<int, Offset>& store() const { return store_; }

  /// Restores a stored entry verbatim (file loading); marks nothing active.
  void restore_entry(int index, const Offset& value) { store_[index] = value; }

  /// L2 norm over active entries.
  double active_norm() const {
    double acc = 0.0;
    for (int i : active_indices()) {
      for (T v : entry(i)) acc += static_cast<double>(v) * v;
    }
    return std::sqrt(acc);
  }

  bool same_layout(const PromptState& other) const {
    return height_ == other.height_ && width_ == other.width_ && mask_ == other.mask_;
  }

  template <typename U>
  PromptState<U> cast() const {
    PromptState<U> out(height_, width_, density_, mask_);
    for (const auto& [i, v] : store_) {
      out.restore_entry(i, {static_cast<U>(v[0]), static_cast<U>(v[1]), static_cast<U>(v[2])});
    }
    out.set_step(step_);
    return out;
  }

  friend bool operator==(const PromptState& a, const PromptState& b) {
    return a.same_layout(b) && a.density_ == b.density_ && a.step_ == b.step_ && a.store_ == b.store_;
  }

 private:
  template <typename U>
  friend PromptState<U> reseat(const PromptState<U>&, const Mask&);

  static Mask default_mask(int height, int width, double density) {
    if (height <= 0 || width <= 0) throw InvalidInput("PromptState: empty resolution");
    Mask m(height, width, 0);
    const std::size_t k = std::min(prompt_budget(height, width, density), m.size());
    for (std::size_t i = 0; i < k; ++i) m[i] = 1;
    return m;
  }

  int height_ = 0;
  int width_ = 0;
  double density_ = 1e-3;
  std::uint64_t step_ = 0;
  Mask mask_;
  std::map<int, Offset> store_;
};

/// Moves the active set to `new_mask`. Pixels that stay active keep their values,
/// re-activated dormant pixels get their stored values back, and never-seen
/// pixels start at zero.
template <typename T>
PromptState<T> reseat(const PromptState<T>& prompts, const Mask& new_mask) {
  if (new_mask.height() != prompts.height() || new_mask.width() != prompts.width()) {
    throw InvalidInput("reseat: mask resolution mismatch");
  }
  if (count_set(new_mask) != prompts.budget()) {
    throw InvalidInput("reseat: mask selects " + std::to_string(count_set(new_mask)) +
                       " pixels, budget is " + std::to_string(prompts.budget()));
  }
  PromptState<T> out = prompts;
  out.mask_ = new_mask;
  for (std::size_t i = 0; i < new_mask.size(); ++i) {
    if (new_mask[i]) out.store_.try_emplace(static_cast<int>(i), typename PromptState<T>::Offset{});
  }
  return out;
}

/// Result of warping an image, with what the backward pass needs.
template <typename T>
struct WarpedImage {
  Tensor3<T> image;
  std::vector<int> active;
  // per active pixel and channel: true when the clamp was inactive
  std::vector<std::array<bool, 3>> passthrough;
};

template <typename T>
WarpedImage<T> warp_traced(const Tensor3<T>& image, const PromptState<T>& prompts) {
  if (image.channels() != 3) throw InvalidInput("warp: image must have 3 channels");
  if (image.height() != prompts.height() || image.width() != prompts.width()) {
    throw InvalidInput("warp: image is " + std::to_string(image.height()) + "x" +
                       std::to_string(image.width()) + ", prompts are " +
                       std::to_string(prompts.height()) + "x" + std::to_string(prompts.width()));
  }
  WarpedImage<T> out{image, prompts.active_indices(), {}};
  for (auto& v : out.image.data()) v = std::clamp(v, T(0), T(1));
  const std::size_t n = image.plane_size();
  out.passthrough.resize(out.active.size());
  for (std::size_t k = 0; k < out.active.size(); ++k) {
    const int idx = out.active[k];
    const auto off = prompts.entry(idx);
    for (int c = 0; c < 3; ++c) {
      const T raw = image[c * n + static_cast<std::size_t>(idx)] + off[static_cast<std::size_t>(c)];
      out.passthrough[k][static_cast<std::size_t>(c)] = raw >= T(0) && raw <= T(1);
      out.image[c * n + static_cast<std::size_t>(idx)] = std::clamp(raw, T(0), T(1));
    }
  }
  return out;
}

/// Reformulated input: image + prompt on active pixels, clamped to [0,1].
template <typename T>
Tensor3<T> warp(const Tensor3<T>& image, const PromptState<T>& prompts) {
  return warp_traced(image, prompts).image;
}

/// Gradient for each active prompt pixel, ordered by pixel index.
template <typename T>
struct PromptGradient {
  std::vector<int> index;
  std::vector<std::array<T, 3>> grad;
};

template <typename T>
PromptGradient<T> prompt_gradient(const WarpedImage<T>& warped, const Tensor3<T>& grad_input) {
  if (!grad_input.same_shape(warped.image)) {
    throw InvalidInput("prompt_gradient: gradient shape does not match the warped image");
  }
  PromptGradient<T> g;
  g.index = warped.active;
  g.grad.resize(warped.active.size());
  const std::size_t n = grad_input.plane_size();
  for (std::size_t k = 0; k < warped.active.size(); ++k) {
    for (int c = 0; c < 3; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      g.grad[k][cc] = warped.passthrough[k][cc]
                          ? grad_input[c * n + static_cast<std::size_t>(warped.active[k])]
                          : T(0);
    }
  }
  return g;
}

/// Active prompt scalars relative to the model's parameter count.
template <typename T>
double trainable_fraction(const PromptState<T>& prompts, const ParamSet<T>& model) {
  const auto total = model.parameter_count();
  if (total == 0) return 0.0;
  return static_cast<double>(3 * prompts.active_count()) / static_cast<double>(total);
}

// Prompt-state file:
//   svdp-prompts 1
//   H W density t
//   N
//   N lines of: h w active o0 o1 o2

template <typename T>
std::string encode_prompts(const PromptState<T>& p) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<T>::max_digits10);
  os << "svdp-prompts 1\n";
  os << p.height() << ' ' << p.width() << ' ' << std::setprecision(17) << p.density() << ' '
     << p.step() << '\n';
  os << std::setprecision(std::numeric_limits<T>::max_digits10);
  os << p.store().size() << '\n';
  for (const auto& [idx, off] : p.store()) {
    os << idx / p.width() << ' ' << idx % p.width() << ' ' << (p.is_active(idx) ? 1 : 0) << ' '
       << off[0] << ' ' << off[1] << ' ' << off[2] << '\n';
  }
  return os.str();
}

template <typename T>
PromptState<T> decode_prompts(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "svdp-prompts" || version != 1) throw IoError("not a prompt-state file");
  int h = 0, w = 0;
  double density = 0;
  std::uint64_t t = 0;
  std::size_t n = 0;
  is >> h >> w >> density >> t >> n;
  if (!is || h <= 0 || w <= 0) throw IoError("prompt-state header is malformed");
  struct Row {
    int idx;
    bool active;
    std::array<T, 3> off;
  };
  std::vector<Row> rows(n);
  Mask mask(h, w, 0);
  for (auto& r : rows) {
    int y = 0, x = 0, a = 0;
    is >> y >> x >> a >> r.off[0] >> r.off[1] >> r.off[2];
    if (!is || y < 0 || y >= h || x < 0 || x >= w) throw IoError("prompt-state record is malformed");
    r.idx = y * w + x;
    r.active = a != 0;
    if (r.active) mask[static_cast<std::size_t>(r.idx)] = 1;
  }
  PromptState<T> p(h, w, density, mask);
  for (const auto& r : rows) p.restore_entry(r.idx, r.off);
  p.set_step(t);
  return p;
}

template <typename T>
void save_prompts(const PromptState<T>& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << encode_prompts(p);
}

template <typename T>
PromptState<T> load_prompts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_prompts<T>(ss.str());
}

}  // namespace svdp
