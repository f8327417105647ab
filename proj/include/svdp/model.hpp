#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/params.hpp"
#include "svdp/random.hpp"
#include "svdp/tensor.hpp"

namespace svdp {

enum class Task { segmentation, depth };

inline const char* to_string(Task t) { return t == Task::segmentation ? "seg" : "depth"; }

inline Task parse_task(const std::string& s) {
  if (s == "seg" || s == "segmentation") return Task::segmentation;
  if (s == "depth") return Task::depth;
  throw ConfigError("unknown task '" + s + "' (expected seg|depth)");
}

struct NetworkSpec {
  Task task = Task::segmentation;
  int classes = 5;
  double dropout_rate = 0.1;
  // Only the head projection carries dropout; the count is exposed so configs can
  // record it, but anything other than 1 is rejected.
  int dropout_layers = 1;
  // Depth head: depth = depth_scale * softplus(raw).
  double depth_scale = 10.0;

  int output_channels() const { return task == Task::segmentation ? classes : 1; }
};

/// Head output. `logits` is the raw projection (C channels for segmentation, one
/// for depth); `depth` is populated in depth mode only.
template <typename T>
struct PredictionOutput {
  Task task = Task::segmentation;
  Tensor3<T> logits;
  Tensor3<T> depth;

  int height() const { return logits.height(); }
  int width() const { return logits.width(); }
};

/// Per-pixel softmax over channels, computed in double for stability.
template <typename T>
Tensor3<T> softmax_channels(const Tensor3<T>& logits) {
  Tensor3<T> out(logits.channels(), logits.height(), logits.width());
  const int c_n = logits.channels();
  const std::size_t n = logits.plane_size();
  for (std::size_t p = 0; p < n; ++p) {
    double mx = logits[p];
    for (int c = 1; c < c_n; ++c) mx = std::max(mx, static_cast<double>(logits[c * n + p]));
    double sum = 0.0;
    for (int c = 0; c < c_n; ++c) sum += std::exp(static_cast<double>(logits[c * n + p]) - mx);
    for (int c = 0; c < c_n; ++c) {
      out[c * n + p] = static_cast<T>(std::exp(static_cast<double>(logits[c * n + p]) - mx) / sum);
    }
  }
  return out;
}

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

namespace layers {

inline constexpr int kWidth1 = 16;
inline constexpr int kWidth2 = 32;
inline constexpr int kWidth3 = 32;
inline constexpr int kWidth4 = 16;

template <typename T>
void conv3x3_forward(const Tensor3<T>& in, const std::vector<T>& w, int out_ch, Tensor3<T>& out) {
  const int in_ch = in.channels(), h = in.height(), wd = in.width();
  out = Tensor3<T>(out_ch, h, wd);
  for (int co = 0; co < out_ch; ++co) {
    T* o = out.plane(co).data();
    for (int ci = 0; ci < in_ch; ++ci) {
      const T* ip = in.plane(ci).data();
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
          const T wv = w[((static_cast<std::size_t>(co) * in_ch + ci) * 3 + ky) * 3 + kx];
          for (int y = y0; y < y1; ++y) {
            T* orow = o + static_cast<std::size_t>(y) * wd;
            const T* irow = ip + static_cast<std::ptrdiff_t>(y + dy) * wd + dx;
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
}

// Accumulates weight gradients into gw; writes the input gradient when gin != nullptr.
template <typename T>
void conv3x3_backward(const Tensor3<T>& in, const std::vector<T>& w, const Tensor3<T>& gout,
                      std::vector<T>& gw, Tensor3<T>* gin) {
  const int in_ch = in.channels(), h = in.height(), wd = in.width();
  const int out_ch = gout.channels();
  if (gin) *gin = Tensor3<T>(in_ch, h, wd);
  std::vector<T> lanes(static_cast<std::size_t>(wd));
  for (int co = 0; co < out_ch; ++co) {
    const T* g = gout.plane(co).data();
    for (int ci = 0; ci < in_ch; ++ci) {
      const T* ip = in.plane(ci).data();
      T* gi = gin ? gin->plane(ci).data() : nullptr;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
          const std::size_t widx = ((static_cast<std::size_t>(co) * in_ch + ci) * 3 + ky) * 3 + kx;
          const T wv = w[widx];
          // lane-wise partial sums keep the reduction vectorizable
          std::fill(lanes.begin(), lanes.end(), T(0));
          for (int y = y0; y < y1; ++y) {
            const T* grow = g + static_cast<std::size_t>(y) * wd;
            const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(y + dy) * wd + dx;
            const T* irow = ip + off;
            for (int x = x0; x < x1; ++x) lanes[static_cast<std::size_t>(x)] += grow[x] * irow[x];
            if (gi) {
              T* girow = gi + off;
              for (int x = x0; x < x1; ++x) girow[x] += wv * grow[x];
            }
          }
          T acc = 0;
          for (int x = x0; x < x1; ++x) acc += lanes[static_cast<std::size_t>(x)];
          gw[widx] += acc;
        }
      }
    }
  }
}

template <typename T>
Tensor3<T> avgpool2(const Tensor3<T>& in) {
  Tensor3<T> out(in.channels(), in.height() / 2, in.width() / 2);
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        out.at(c, y, x) = (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                           in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1)) *
                          T(0.25);
      }
    }
  }
  return out;
}

template <typename T>
void avgpool2_backward_add(const Tensor3<T>& gout, Tensor3<T>& gin) {
  for (int c = 0; c < gout.channels(); ++c) {
    for (int y = 0; y < gout.height(); ++y) {
      for (int x = 0; x < gout.width(); ++x) {
        const T g = gout.at(c, y, x) * T(0.25);
        gin.at(c, 2 * y, 2 * x) += g;
        gin.at(c, 2 * y, 2 * x + 1) += g;
        gin.at(c, 2 * y + 1, 2 * x) += g;
        gin.at(c, 2 * y + 1, 2 * x + 1) += g;
      }
    }
  }
}

// out = nearest_upsample2(low) + skip
template <typename T>
Tensor3<T> upsample2_add(const Tensor3<T>& low, const Tensor3<T>& skip) {
  Tensor3<T> out = skip;
  for (int c = 0; c < skip.channels(); ++c) {
    for (int y = 0; y < skip.height(); ++y) {
      for (int x = 0; x < skip.width(); ++x) out.at(c, y, x) += low.at(c, y / 2, x / 2);
    }
  }
  return out;
}

template <typename T>
Tensor3<T> upsample2_backward(const Tensor3<T>& gout) {
  Tensor3<T> g(gout.channels(), gout.height() / 2, gout.width() / 2);
  for (int c = 0; c < gout.channels(); ++c) {
    for (int y = 0; y < gout.height(); ++y) {
      for (int x = 0; x < gout.width(); ++x) g.at(c, y / 2, x / 2) += gout.at(c, y, x);
    }
  }
  return g;
}

}  // namespace layers

/// Activations retained by a traced forward pass for the backward pass.
template <typename T>
struct ForwardTrace {
  struct Block {
    Tensor3<T> input;
    Tensor3<T> pre_norm;
    Tensor3<T> activation;
  };
  std::array<Block, 4> blocks;
  Tensor3<T> features;    // head input before dropout
  std::vector<T> keep;    // per-entry dropout multiplier (empty = no dropout)
  Tensor3<T> raw;         // head output before the depth activation
};

template <typename T>
struct Gradients {
  ParamSet<T> params;
  Tensor3<T> input;  // d loss / d network input
};

/// Compact encoder-decoder for dense prediction:
///   conv(3->16) | pool | conv(16->32) | pool | conv(32->32) | up+skip |
///   conv(32->16) | up+skip | dropout | per-pixel linear head.
/// Every conv block is conv3x3 (no bias) -> per-channel affine norm -> ReLU.
template <typename T>
class Network {
 public:
  static constexpr std::array<const char*, 4> kBlocks = {"enc1", "enc2", "enc3", "dec4"};

  explicit Network(NetworkSpec spec) : spec_(spec) {
    if (spec_.task == Task::segmentation && spec_.classes < 2) {
      throw ConfigError("segmentation needs at least 2 classes");
    }
    if (spec_.dropout_rate < 0.0 || spec_.dropout_rate >= 1.0) {
      throw ConfigError("dropout rate must lie in [0,1)");
    }
    if (spec_.dropout_layers != 1) {
      throw ConfigError("only the head projection supports dropout (dropout_layers = 1)");
    }
  }

  const NetworkSpec& spec() const { return spec_; }
  Task task() const { return spec_.task; }

  static std::array<std::array<int, 2>, 4> block_channels() {
    using namespace layers;
    return {{{3, kWidth1}, {kWidth1, kWidth2}, {kWidth2, kWidth3}, {kWidth3, kWidth4}}};
  }

  ParamSet<T> init_params(std::uint64_t seed) const {
    Rng rng(seed);
    ParamSet<T> p;
    const auto ch = block_channels();
    for (std::size_t b = 0; b < 4; ++b) {
      const std::string name = kBlocks[b];
      auto& w = p.add(name + ".conv.weight", {ch[b][1], ch[b][0], 3, 3});
      const double stdv = std::sqrt(2.0 / (ch[b][0] * 9.0));
      for (auto& v : w.values) v = static_cast<T>(rng.normal() * stdv);
      p.add(name + ".norm.scale", {ch[b][1]}, T(1));
      p.add(name + ".norm.shift", {ch[b][1]}, T(0));
    }
    const int c_out = spec_.output_channels();
    auto& hw = p.add("head.weight", {c_out, layers::kWidth4});
    const double hstd = std::sqrt(1.0 / layers::kWidth4);
    for (auto& v : hw.values) v = static_cast<T>(rng.normal() * hstd);
    auto& hb = p.add("head.bias", {c_out});
    if (spec_.task == Task::depth) {
      // start near depth 20: softplus^-1(20 / depth_scale)
      const double target = 20.0 / spec_.depth_scale;
      hb.values[0] = static_cast<T>(std::log(std::expm1(target)));
    }
    return p;
  }

  std::size_t parameter_count() const { return init_params(0).parameter_count(); }

  void validate(const ParamSet<T>& params) const {
    if (!params.same_structure(init_params(0))) {
      throw StructuralError("parameter set does not match the network architecture");
    }
  }

  /// Pure forward pass. Deterministic in (params, image, dropout_on, seed).
  PredictionOutput<T> forward(const ParamSet<T>& params, const Tensor3<T>& image, bool dropout_on,
                              std::uint64_t seed) const {
    return run(params, image, dropout_on, seed, nullptr);
  }

  PredictionOutput<T> forward(const ParamSet<T>& params, const Tensor3<T>& image, bool dropout_on,
                              std::uint64_t seed, ForwardTrace<T>& trace) const {
    return run(params, image, dropout_on, seed, &trace);
  }

  /// Trunk features (head input) without running the head. Used to draw many
  /// MC-dropout head samples from a single trunk evaluation.
  Tensor3<T> features(const ParamSet<T>& params, const Tensor3<T>& image) const {
    ForwardTrace<T> local;
    trunk(params, image, local);
    return std::move(local.features);
  }

  /// Head applied to precomputed features.
  PredictionOutput<T> head(const ParamSet<T>& params, const Tensor3<T>& features, bool dropout_on,
                           std::uint64_t seed) const {
    ForwardTrace<T> local;
    local.features = features;
    return apply_head(params, dropout_on, seed, local);
  }

  /// Backpropagates `grad_output`, which is d loss / d logits in segmentation mode
  /// and d loss / d depth in depth mode. The input gradient is only formed when
  /// `want_input_grad` is set.
  Gradients<T> backward(const ParamSet<T>& params, const ForwardTrace<T>& trace,
                        const Tensor3<T>& grad_output, bool want_input_grad = true) const {
    if (!grad_output.same_shape(trace.raw)) {
      throw InvalidInput("backward: gradient shape does not match the traced output");
    }
    Gradients<T> g{params.zeros_like(), {}};
    const int c_out = spec_.output_channels();
    const std::size_t n = trace.raw.plane_size();

    Tensor3<T> graw = grad_output;
    if (spec_.task == Task::depth) {
      for (std::size_t i = 0; i < graw.size(); ++i) {
        graw[i] = static_cast<T>(graw[i] * spec_.depth_scale * sigmoid(trace.raw[i]));
      }
    }

    // head
    const auto& hw = params.at("head.weight").values;
    auto& ghw = g.params.at("head.weight").values;
    auto& ghb = g.params.at("head.bias").values;
    const int f_n = trace.features.channels();
    Tensor3<T> hidden = trace.features;
    if (!trace.keep.empty()) {
      for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] *= trace.keep[i];
    }
    Tensor3<T> gfeat(f_n, trace.features.height(), trace.features.width());
    for (int c = 0; c < c_out; ++c) {
      const T* gr = graw.plane(c).data();
      T bsum = 0;
      for (std::size_t p = 0; p < n; ++p) bsum += gr[p];
      ghb[c] += bsum;
      for (int f = 0; f < f_n; ++f) {
        const T* hp = hidden.plane(f).data();
        T* gf = gfeat.plane(f).data();
        const T wv = hw[static_cast<std::size_t>(c) * f_n + f];
        T acc = 0;
        for (std::size_t p = 0; p < n; ++p) {
          acc += gr[p] * hp[p];
          gf[p] += wv * gr[p];
        }
        ghw[static_cast<std::size_t>(c) * f_n + f] += acc;
      }
    }
    if (!trace.keep.empty()) {
      for (std::size_t i = 0; i < gfeat.size(); ++i) gfeat[i] *= trace.keep[i];
    }

    // features = up(a4) + a1
    Tensor3<T> ga1 = gfeat;
    Tensor3<T> ga4 = layers::upsample2_backward(gfeat);
    Tensor3<T> gu3;
    block_backward(params, trace, 3, ga4, g.params, &gu3);
    // u3 = up(a3) + a2
    Tensor3<T> ga2 = gu3;
    Tensor3<T> ga3 = layers::upsample2_backward(gu3);
    Tensor3<T> gp2;
    block_backward(params, trace, 2, ga3, g.params, &gp2);
    layers::avgpool2_backward_add(gp2, ga2);
    Tensor3<T> gp1;
    block_backward(params, trace, 1, ga2, g.params, &gp1);
    layers::avgpool2_backward_add(gp1, ga1);
    block_backward(params, trace, 0, ga1, g.params, want_input_grad ? &g.input : nullptr);
    return g;
  }

 private:
  void check_input(const Tensor3<T>& image) const {
    if (image.channels() != 3) {
      throw InvalidInput("network input must have 3 channels, got " + std::to_string(image.channels()));
    }
    if (image.height() < 4 || image.width() < 4 || image.height() % 4 != 0 || image.width() % 4 != 0) {
      throw InvalidInput("network input size must be a positive multiple of 4, got " +
                         shape_string(image.channels(), image.height(), image.width()));
    }
  }

  static void check_layer(const Tensor3<T>& t, const std::string& layer) {
    if (!all_finite<T>(t.data())) throw NumericalError("non-finite activation in layer " + layer);
  }

  void block_forward(const ParamSet<T>& params, std::size_t b, Tensor3<T> input,
                     ForwardTrace<T>& trace) const {
    const std::string name = kBlocks[b];
    auto& blk = trace.blocks[b];
    blk.input = std::move(input);
    const auto& w = params.at(name + ".conv.weight");
    layers::conv3x3_forward(blk.input, w.values, w.shape[0], blk.pre_norm);
    const auto& sc = params.at(name + ".norm.scale").values;
    const auto& sh = params.at(name + ".norm.shift").values;
    blk.activation = Tensor3<T>(blk.pre_norm.channels(), blk.pre_norm.height(), blk.pre_norm.width());
    for (int c = 0; c < blk.pre_norm.channels(); ++c) {
      const T* z = blk.pre_norm.plane(c).data();
      T* a = blk.activation.plane(c).data();
      for (std::size_t i = 0; i < blk.pre_norm.plane_size(); ++i) {
        const T v = sc[c] * z[i] + sh[c];
        a[i] = v > T(0) ? v : T(0);
      }
    }
    check_layer(blk.activation, name);
  }

  void block_backward(const ParamSet<T>& params, const ForwardTrace<T>& trace, std::size_t b,
                      const Tensor3<T>& gact, ParamSet<T>& grads, Tensor3<T>* gin) const {
    const std::string name = kBlocks[b];
    const auto& blk = trace.blocks[b];
    const auto& sc = params.at(name + ".norm.scale").values;
    auto& gsc = grads.at(name + ".norm.scale").values;
    auto& gsh = grads.at(name + ".norm.shift").values;
    Tensor3<T> gz(blk.pre_norm.channels(), blk.pre_norm.height(), blk.pre_norm.width());
    for (int c = 0; c < gz.channels(); ++c) {
      const T* z = blk.pre_norm.plane(c).data();
      const T* a = blk.activation.plane(c).data();
      const T* ga = gact.plane(c).data();
      T* g = gz.plane(c).data();
      T s_acc = 0, b_acc = 0;
      for (std::size_t i = 0; i < gz.plane_size(); ++i) {
        const T gn = a[i] > T(0) ? ga[i] : T(0);
        s_acc += gn * z[i];
        b_acc += gn;
        g[i] = gn * sc[c];
      }
      gsc[c] += s_acc;
      gsh[c] += b_acc;
    }
    layers::conv3x3_backward(blk.input, params.at(name + ".conv.weight").values, gz,
                             grads.at(name + ".conv.weight").values, gin);
  }

  void trunk(const ParamSet<T>& params, const Tensor3<T>& image, ForwardTrace<T>& tr) const {
    check_input(image);
    block_forward(params, 0, image, tr);
    block_forward(params, 1, layers::avgpool2(tr.blocks[0].activation), tr);
    block_forward(params, 2, layers::avgpool2(tr.blocks[1].activation), tr);
    block_forward(params, 3, layers::upsample2_add(tr.blocks[2].activation, tr.blocks[1].activation), tr);
    tr.features = layers::upsample2_add(tr.blocks[3].activation, tr.blocks[0].activation);
  }

  PredictionOutput<T> apply_head(const ParamSet<T>& params, bool dropout_on, std::uint64_t seed,
                                 ForwardTrace<T>& tr) const {
    const auto& feat = tr.features;
    const int f_n = feat.channels();
    const std::size_t n = feat.plane_size();
    const double rate = spec_.dropout_rate;
    Tensor3<T> hidden = feat;
    tr.keep.clear();
    if (dropout_on && rate > 0.0) {
      tr.keep.assign(feat.size(), T(0));
      const T scale = static_cast<T>(1.0 / (1.0 - rate));
      for (std::size_t i = 0; i < feat.size(); ++i) {
        if (hashed_uniform(seed, i) >= rate) tr.keep[i] = scale;
        hidden[i] *= tr.keep[i];
      }
    }
    const auto& hw = params.at("head.weight").values;
    const auto& hb = params.at("head.bias").values;
    const int c_out = spec_.output_channels();
    PredictionOutput<T> out;
    out.task = spec_.task;
    out.logits = Tensor3<T>(c_out, feat.height(), feat.width());
    for (int c = 0; c < c_out; ++c) {
      T* o = out.logits.plane(c).data();
      std::fill(o, o + n, hb[c]);
      for (int f = 0; f < f_n; ++f) {
        const T wv = hw[static_cast<std::size_t>(c) * f_n + f];
        const T* hp = hidden.plane(f).data();
        for (std::size_t p = 0; p < n; ++p) o[p] += wv * hp[p];
      }
    }
    check_layer(out.logits, "head");
    if (spec_.task == Task::depth) {
      out.depth = Tensor3<T>(1, feat.height(), feat.width());
      for (std::size_t i = 0; i < n; ++i) {
        out.depth[i] = static_cast<T>(spec_.depth_scale * softplus(out.logits[i]));
      }
    }
    tr.raw = out.logits;
    return out;
  }

  PredictionOutput<T> run(const ParamSet<T>& params, const Tensor3<T>& image, bool dropout_on,
                          std::uint64_t seed, ForwardTrace<T>* trace) const {
    ForwardTrace<T> local;
    ForwardTrace<T>& tr = trace ? *trace : local;
    trunk(params, image, tr);
    return apply_head(params, dropout_on, seed, tr);
  }

  NetworkSpec spec_;
};

/// Names of the per-channel affine normalization parameters.
inline bool is_norm_param(const std::string& name) {
  return name.ends_with(".norm.scale") || name.ends_with(".norm.shift");
}

}  // namespace svdp
