#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/random.hpp"
#include "svdp/tensor.hpp"

namespace svdp {

inline constexpr int kSceneClasses = 5;
inline constexpr std::array<const char*, kSceneClasses> kClassNames = {"background", "circle", "square",
                                                                      "triangle", "stripe"};
inline constexpr double kMinDepth = 1.0;
inline constexpr double kMaxDepth = 80.0;

template <typename T>
struct SyntheticScene {
  Tensor3<T> image;  // 3 x H x W in [0,1]
  LabelMap labels;   // class per pixel
  Grid<T> depth;     // in [kMinDepth, kMaxDepth]
};

enum class CorruptionKind { fog, night, rain, snow };

inline constexpr std::array<CorruptionKind, 4> kDomainOrder = {CorruptionKind::fog, CorruptionKind::night,
                                                              CorruptionKind::rain, CorruptionKind::snow};

inline const char* to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::fog: return "fog";
    case CorruptionKind::night: return "night";
    case CorruptionKind::rain: return "rain";
    case CorruptionKind::snow: return "snow";
  }
  return "?";
}

inline CorruptionKind parse_corruption(const std::string& s) {
  for (auto k : kDomainOrder) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown domain '" + s + "' (expected fog|night|rain|snow)");
}

struct DomainCorruption {
  CorruptionKind kind = CorruptionKind::fog;
  double severity = 0.5;
};

namespace detail {

struct Rgb {
  double r, g, b;
};

inline constexpr std::array<Rgb, kSceneClasses> kClassColors = {{
    {0.0, 0.0, 0.0},  // background uses the vertical gradient
    {0.85, 0.22, 0.20},
    {0.22, 0.72, 0.25},
    {0.22, 0.30, 0.85},
    {0.88, 0.80, 0.22},
}};

inline Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Ground-plane depth: far at the top row, near at the bottom row.
inline double background_depth(int y, int height) {
  const double v = 1.0 - static_cast<double>(y) / std::max(1, height - 1);
  return 6.0 + 74.0 * v * v;
}

inline bool inside_triangle(double px, double py, double cx, double cy, double r) {
  // upward isosceles triangle with apex at (cx, cy - r)
  const double top = cy - r, bottom = cy + r;
  if (py < top || py > bottom) return false;
  const double half = r * (py - top) / (bottom - top);
  return std::abs(px - cx) <= half;
}

}  // namespace detail

/// One clean scene: a sky-to-ground gradient with depth falling towards the
/// bottom row, and 3-6 coloured objects painted far to near. Object colour
/// identifies the class; object brightness and size encode its depth.
template <typename T>
SyntheticScene<T> render_scene(int height, int width, std::uint64_t seed) {
  if (height <= 0 || width <= 0) throw InvalidInput("render_scene: empty size");
  Rng rng(seed);
  SyntheticScene<T> s{Tensor3<T>(3, height, width), LabelMap(height, width, 0), Grid<T>(height, width)};
  const detail::Rgb sky{0.55 + rng.uniform(-0.05, 0.05), 0.66 + rng.uniform(-0.05, 0.05), 0.82};
  const detail::Rgb ground{0.36 + rng.uniform(-0.04, 0.04), 0.33, 0.28 + rng.uniform(-0.04, 0.04)};
  std::vector<detail::Rgb> color(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const double t = static_cast<double>(y) / std::max(1, height - 1);
    const auto c = detail::lerp(sky, ground, t);
    for (int x = 0; x < width; ++x) {
      color[static_cast<std::size_t>(y) * width + x] = c;
      s.depth.at(y, x) = static_cast<T>(detail::background_depth(y, height));
    }
  }

  struct Object {
    int cls;
    double cx, cy, r, depth, angle;
    detail::Rgb rgb;
  };
  const int n_obj = rng.range(3, 6);
  std::vector<Object> objs;
  const double size_unit = std::min(height, width) / 64.0;
  for (int i = 0; i < n_obj; ++i) {
    Object o{};
    o.cls = 1 + static_cast<int>(rng.below(kSceneClasses - 1));
    o.depth = rng.uniform(4.0, 40.0);
    const double near = (40.0 - o.depth) / 36.0;  // 1 = nearest
    o.r = (4.5 + 7.5 * near + rng.uniform(-1.0, 1.0)) * size_unit;
    o.cx = rng.uniform(0.1, 0.9) * width;
    o.cy = rng.uniform(0.15, 0.9) * height;
    o.angle = rng.uniform(-0.6, 0.6);
    const auto base = detail::kClassColors[static_cast<std::size_t>(o.cls)];
    const double bright = 0.92 + 0.12 * near;
    o.rgb = {std::clamp(base.r * bright + rng.uniform(-0.04, 0.04), 0.0, 1.0),
             std::clamp(base.g * bright + rng.uniform(-0.04, 0.04), 0.0, 1.0),
             std::clamp(base.b * bright + rng.uniform(-0.04, 0.04), 0.0, 1.0)};
    objs.push_back(o);
  }
  std::sort(objs.begin(), objs.end(), [](const Object& a, const Object& b) { return a.depth > b.depth; });
  for (const auto& o : objs) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const double dx = px - o.cx, dy = py - o.cy;
        bool hit = false;
        switch (o.cls) {
          case 1: hit = dx * dx + dy * dy <= o.r * o.r; break;
          case 2: hit = std::abs(dx) <= o.r * 0.85 && std::abs(dy) <= o.r * 0.85; break;
          case 3: hit = detail::inside_triangle(px, py, o.cx, o.cy, o.r); break;
          case 4: {
            // rotated bar: long axis 2.6r, thickness 0.7r
            const double u = dx * std::cos(o.angle) + dy * std::sin(o.angle);
            const double v = -dx * std::sin(o.angle) + dy * std::cos(o.angle);
            hit = std::abs(u) <= 1.3 * o.r && std::abs(v) <= 0.35 * o.r + 0.5;
            break;
          }
          default: break;
        }
        if (!hit) continue;
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        color[i] = o.rgb;
        s.labels[i] = o.cls;
        s.depth[i] = static_cast<T>(o.depth);
      }
    }
  }
  const std::size_t n = color.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double noise[3] = {rng.normal() * 0.02, rng.normal() * 0.02, rng.normal() * 0.02};
    s.image[i] = static_cast<T>(std::clamp(color[i].r + noise[0], 0.0, 1.0));
    s.image[n + i] = static_cast<T>(std::clamp(color[i].g + noise[1], 0.0, 1.0));
    s.image[2 * n + i] = static_cast<T>(std::clamp(color[i].b + noise[2], 0.0, 1.0));
  }
  return s;
}

/// Label-preserving photometric corruption. Severity 0 returns the input unchanged.
template <typename T>
Tensor3<T> corrupt(const Tensor3<T>& image, const DomainCorruption& c, std::uint64_t seed) {
  if (!(c.severity >= 0.0 && c.severity <= 1.0)) throw InvalidInput("corrupt: severity must lie in [0,1]");
  if (image.channels() != 3) throw InvalidInput("corrupt: image must have 3 channels");
  if (c.severity == 0.0) return image;
  const double s = c.severity;
  const int h = image.height(), w = image.width();
  const std::size_t n = image.plane_size();
  Tensor3<T> out = image;
  Rng rng(seed);
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  switch (c.kind) {
    case CorruptionKind::fog:
      // white blend: (1 - s) x + s
      for (auto& v : out.data()) v = static_cast<T>((1.0 - s) * v + s * 1.0);
      break;
    case CorruptionKind::night: {
      // gamma darkening with a cool tint and sensor noise
      const double gamma = 1.0 + 2.0 * s;
      const double gain = 1.0 - 0.7 * s;
      const double tint[3] = {0.85, 0.95, 1.1};
      for (int ch = 0; ch < 3; ++ch) {
        for (std::size_t i = 0; i < n; ++i) {
          const double v = image[ch * n + i];
          const double dark = gain * std::pow(v, gamma) * (1.0 + (tint[ch] - 1.0) * s);
          out[ch * n + i] = static_cast<T>(clamp01(dark + rng.normal() * 0.25 * s));
        }
      }
      break;
    }
    case CorruptionKind::rain: {
      // slight darkening, sensor noise and bright diagonal streaks
      for (auto& v : out.data()) v = static_cast<T>(clamp01(v * (1.0 - 0.25 * s) + rng.normal() * 0.06 * s));
      const int streaks = static_cast<int>(std::lround(s * h * w / 45.0));
      for (int k = 0; k < streaks; ++k) {
        int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
        const int len = rng.range(5, 12);
        const double a = 0.55 * s + rng.uniform(0.0, 0.25);
        for (int step = 0; step < len && y < h && x >= 0; ++step, ++y, x -= (step % 3 == 0)) {
          for (int ch = 0; ch < 3; ++ch) {
            auto& v = out[ch * n + static_cast<std::size_t>(y) * w + x];
            v = static_cast<T>(clamp01(v * (1.0 - a) + 0.9 * a));
          }
        }
      }
      break;
    }
    case CorruptionKind::snow: {
      // brightening, multiplicative speckle and white blotches
      for (auto& v : out.data()) {
        v = static_cast<T>(clamp01(v * (1.0 + 0.35 * s * rng.normal()) * (1.0 - 0.2 * s) + 0.2 * s));
      }
      const int blotches = static_cast<int>(std::lround(s * h * w / 15.0));
      for (int k = 0; k < blotches; ++k) {
        const double cx = rng.uniform(0.0, w), cy = rng.uniform(0.0, h);
        const double r = rng.uniform(0.5, 0.9);
        for (int y = std::max(0, static_cast<int>(cy - r)); y <= std::min(h - 1, static_cast<int>(cy + r)); ++y) {
          for (int x = std::max(0, static_cast<int>(cx - r)); x <= std::min(w - 1, static_cast<int>(cx + r)); ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy > r * r) continue;
            for (int ch = 0; ch < 3; ++ch) out[ch * n + static_cast<std::size_t>(y) * w + x] = static_cast<T>(0.95);
          }
        }
      }
      break;
    }
  }
  return out;
}

/// Ground truth for one observation. Only the metrics code reads it.
template <typename T>
struct GroundTruth {
  LabelMap labels;
  Grid<T> depth;
};

/// One target-domain observation plus its held-out ground truth.
template <typename T>
struct StreamSample {
  Tensor3<T> image;
  std::string domain_tag;
  std::size_t index = 0;
  GroundTruth<T> truth;
};

struct CorpusOptions {
  int height = 64;
  int width = 64;
  int n_source = 200;
  int n_per_domain = 10;
  std::array<double, 4> severity = {0.3, 0.6, 1.0, 1.0};  // fog, night, rain, snow
};

template <typename T>
struct Corpus {
  std::uint64_t seed = 0;
  CorpusOptions options;
  std::vector<SyntheticScene<T>> source;
  std::vector<std::string> domains;
  std::vector<StreamSample<T>> target;  // domains contiguous, in kDomainOrder

  std::vector<StreamSample<T>> domain(const std::string& tag) const {
    std::vector<StreamSample<T>> out;
    for (const auto& s : target) {
      if (s.domain_tag == tag) out.push_back(s);
    }
    return out;
  }
};

/// Deterministic corpus: a labelled clean source split and four corrupted target
/// streams drawn from scenes disjoint from the source split.
template <typename T>
Corpus<T> generate_corpus(std::uint64_t seed, const CorpusOptions& opt) {
  if (opt.n_per_domain < 1) throw InvalidInput("generate_corpus: n_per_domain must be >= 1");
  if (opt.n_source < 0) throw InvalidInput("generate_corpus: n_source must be >= 0");
  Corpus<T> c;
  c.seed = seed;
  c.options = opt;
  for (int i = 0; i < opt.n_source; ++i) {
    c.source.push_back(render_scene<T>(opt.height, opt.width, mix_seed(seed, 1'000'000ULL + i)));
  }
  std::size_t index = 0;
  for (std::size_t d = 0; d < kDomainOrder.size(); ++d) {
    const auto kind = kDomainOrder[d];
    c.domains.emplace_back(to_string(kind));
    for (int i = 0; i < opt.n_per_domain; ++i) {
      const std::uint64_t scene_seed = mix_seed(seed, 2'000'000ULL + d * 100'000ULL + i);
      auto scene = render_scene<T>(opt.height, opt.width, scene_seed);
      StreamSample<T> s;
      s.image = corrupt(scene.image, {kind, opt.severity[d]}, mix_seed(scene_seed, 77));
      s.domain_tag = to_string(kind);
      s.index = index++;
      s.truth = {std::move(scene.labels), std::move(scene.depth)};
      c.target.push_back(std::move(s));
    }
  }
  return c;
}

template <typename T>
Corpus<T> generate_corpus(std::uint64_t seed, int n_per_domain, int size) {
  CorpusOptions opt;
  opt.height = opt.width = size;
  opt.n_per_domain = n_per_domain;
  return generate_corpus<T>(seed, opt);
}

}  // namespace svdp
