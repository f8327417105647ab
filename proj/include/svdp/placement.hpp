#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "svdp/errors.hpp"
#include "svdp/prompts.hpp"
#include "svdp/random.hpp"
#include "svdp/tensor.hpp"

namespace svdp {

template <typename T>
struct PlacementMask {
  Mask mask;
  std::size_t k = 0;
  T threshold_value = T(0);  // k-th largest uncertainty
};

namespace detail {

inline std::size_t checked_budget(int height, int width, double density) {
  if (!(density > 0.0 && density <= 1.0)) {
    throw InvalidInput("placement: density must lie in (0,1]");
  }
  const std::size_t k = prompt_budget(height, width, density);
  if (k == 0) throw ConfigError("placement: density selects zero pixels at this resolution");
  return k;
}

}  // namespace detail

/// Top-k pixels by uncertainty, k = round(density*H*W). Ties go to the smaller
/// row-major index. Uses a k-th order statistic; the selected set equals the
/// first k entries of a full descending sort under the same order.
template <typename T>
PlacementMask<T> place(const Grid<T>& uncertainty, double density) {
  const std::size_t k = detail::checked_budget(uncertainty.height(), uncertainty.width(), density);
  const auto& u = uncertainty.data();
  std::vector<int> order(u.size());
  std::iota(order.begin(), order.end(), 0);
  auto before = [&u](int a, int b) {
    const T ua = u[static_cast<std::size_t>(a)], ub = u[static_cast<std::size_t>(b)];
    return ua > ub || (ua == ub && a < b);
  };
  if (k < order.size()) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                     before);
  }
  PlacementMask<T> out{Mask(uncertainty.height(), uncertainty.width(), 0), k, T(0)};
  out.threshold_value = u[static_cast<std::size_t>(order[k - 1])];
  // after nth_element, [0, k-1) precede element k-1 in the order
  for (std::size_t i = 0; i < k; ++i) out.mask[static_cast<std::size_t>(order[i])] = 1;
  return out;
}

/// Uniformly random placement of the same budget (placement ablation).
inline Mask place_random(int height, int width, double density, std::uint64_t seed) {
  const std::size_t k = detail::checked_budget(height, width, density);
  std::vector<int> idx(static_cast<std::size_t>(height) * width);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  Mask m(height, width, 0);
  for (std::size_t i = 0; i < k; ++i) m[static_cast<std::size_t>(idx[i])] = 1;
  return m;
}

/// Contiguous near-square block of exactly k pixels centred in the image: a
/// side x side square filled row by row (dense-prompt baseline).
inline Mask place_patch(int height, int width, double density) {
  const std::size_t k = detail::checked_budget(height, width, density);
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
  const int rows = static_cast<int>((k + static_cast<std::size_t>(side) - 1) / static_cast<std::size_t>(side));
  if (side > width || rows > height) throw ConfigError("place_patch: patch does not fit the image");
  const int y0 = (height - rows) / 2, x0 = (width - side) / 2;
  Mask m(height, width, 0);
  std::size_t placed = 0;
  for (int y = y0; y < y0 + rows && placed < k; ++y) {
    for (int x = x0; x < x0 + side && placed < k; ++x, ++placed) m.at(y, x) = 1;
  }
  return m;
}

}  // namespace svdp
