#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/params.hpp"
#include "svdp/prompts.hpp"

namespace svdp {

struct AdamSettings {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with moments that persist across samples. Model tensors share one step
/// counter; prompt pixels keep their own counters, since a pixel may sit dormant
/// for many steps and its bias correction should follow its own update count.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamSettings settings = {}) : s_(settings) {}

  const AdamSettings& settings() const { return s_; }
  std::uint64_t steps() const { return t_; }

  /// One update of every tensor accepted by `trainable`.
  void step(ParamSet<T>& params, const ParamSet<T>& grads,
            const std::function<bool(const std::string&)>& trainable, double lr) {
    params.require_same_structure(grads, "Adam::step");
    ++t_;
    const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    auto g = grads.tensors().begin();
    for (auto& [name, t] : params.tensors()) {
      const auto& gv = g->second.values;
      ++g;
      if (!trainable(name)) continue;
      auto& m = m_[name];
      auto& v = v_[name];
      if (m.empty()) {
        m.assign(t.size(), 0.0);
        v.assign(t.size(), 0.0);
      }
      for (std::size_t i = 0; i < t.size(); ++i) {
        m[i] = s_.beta1 * m[i] + (1.0 - s_.beta1) * gv[i];
        v[i] = s_.beta2 * v[i] + (1.0 - s_.beta2) * gv[i] * gv[i];
        const double upd = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s_.eps);
        t.values[i] = static_cast<T>(t.values[i] - upd);
      }
    }
  }

  /// One update of the active prompt entries listed in `grad`.
  void step_prompts(PromptState<T>& prompts, const PromptGradient<T>& grad, double lr) {
    for (std::size_t k = 0; k < grad.index.size(); ++k) {
      const int idx = grad.index[k];
      auto& st = prompt_state_[idx];
      ++st.t;
      const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(st.t));
      const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(st.t));
      auto value = prompts.entry(idx);
      for (std::size_t c = 0; c < 3; ++c) {
        const double g = grad.grad[k][c];
        st.m[c] = s_.beta1 * st.m[c] + (1.0 - s_.beta1) * g;
        st.v[c] = s_.beta2 * st.v[c] + (1.0 - s_.beta2) * g * g;
        value[c] = static_cast<T>(value[c] - lr * (st.m[c] / c1) / (std::sqrt(st.v[c] / c2) + s_.eps));
      }
      prompts.set_entry(idx, value);
    }
  }

 private:
  struct PromptMoments {
    std::array<double, 3> m{};
    std::array<double, 3> v{};
    std::uint64_t t = 0;
  };

  AdamSettings s_;
  std::uint64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
  std::map<int, PromptMoments> prompt_state_;
};

}  // namespace svdp
