#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "svdp/adaptation.hpp"
#include "svdp/errors.hpp"

namespace svdp {

/// Worker count: SVDP_THREADS if set (>= 1), else hardware concurrency.
inline unsigned worker_limit() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SVDP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("SVDP_THREADS must be a positive integer");
    n = static_cast<unsigned>(v);
  }
  return n;
}

/// Runs jobs[i]() on up to `threads` workers; results keep job order. The first
/// exception is rethrown after all workers stop.
template <typename R>
std::vector<R> parallel_map(const std::vector<std::function<R()>>& jobs, unsigned threads) {
  std::vector<R> out(jobs.size());
  std::size_t next = 0;
  std::mutex mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= jobs.size() || error) return;
        i = next++;
      }
      try {
        out[i] = jobs[i]();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// One row of the component ablation grid.
struct AblationRow {
  std::string name;
  std::string components;
  bool adapt = true;  // false = frozen source
  bool prompts = false;
  bool dpp = false;
  bool dpu = false;
};

inline const std::vector<AblationRow>& ablation_grid() {
  static const std::vector<AblationRow> rows = {
      {"Ex1", "source", false, false, false, false},
      {"Ex2", "TS", true, false, false, false},
      {"Ex3", "TS+SVDP", true, true, false, false},
      {"Ex4", "TS+SVDP+DPP", true, true, true, false},
      {"Ex5", "TS+SVDP+DPU", true, true, false, true},
      {"Ex6", "TS+SVDP+DPP+DPU", true, true, true, true},
  };
  return rows;
}

inline AdaptationConfig ablation_config(const AdaptationConfig& base, const AblationRow& row) {
  AdaptationConfig c = base;
  c.teacher_student = true;
  c.prompts = row.prompts;
  c.dpp = row.dpp;
  c.dpu = row.dpu;
  c.fixed_beta.reset();
  c.patch_prompt = false;
  return c;
}

template <typename T>
RunResult run_ablation_row(const AblationRow& row, const ParamSet<T>& source,
                           const std::vector<StreamSample<T>>& stream, const AdaptationConfig& base) {
  if (!row.adapt) {
    auto r = run_baseline("source", source, stream, base);
    r.method = row.name;
    return r;
  }
  return run(source, stream, ablation_config(base, row), row.name);
}

inline const std::vector<double> kDensityGrid = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 1e-1};
inline const std::vector<double> kFixedBetas = {0.9, 0.99, 0.999, 0.9999};

/// One-sided sign test: P(at least `wins` successes out of the non-tied trials)
/// under a fair coin. Ties (differences of exactly zero) are dropped.
inline double sign_test_p(const std::vector<double>& differences) {
  int wins = 0, n = 0;
  for (double d : differences) {
    if (d == 0.0) continue;
    ++n;
    if (d > 0.0) ++wins;
  }
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace svdp
