#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "svdp/errors.hpp"

namespace svdp {

template <typename T>
struct ParamTensor {
  std::vector<int> shape;
  std::vector<T> values;

  std::size_t size() const { return values.size(); }

  friend bool operator==(const ParamTensor& a, const ParamTensor& b) {
    return a.shape == b.shape && a.values == b.values;
  }
};

inline std::size_t shape_volume(const std::vector<int>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

/// Named real-valued tensors of one architecture. Iteration order is the key
/// order, so every traversal (serialization, optimizers, norms) is deterministic.
template <typename T>
class ParamSet {
 public:
  using Map = std::map<std::string, ParamTensor<T>>;

  ParamTensor<T>& add(const std::string& name, std::vector<int> shape, T fill = T(0)) {
    if (tensors_.contains(name)) throw StructuralError("ParamSet: duplicate tensor '" + name + "'");
    ParamTensor<T> t;
    t.values.assign(shape_volume(shape), fill);
    t.shape = std::move(shape);
    return tensors_.emplace(name, std::move(t)).first->second;
  }

  bool contains(const std::string& name) const { return tensors_.contains(name); }

  ParamTensor<T>& at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw StructuralError("ParamSet: missing tensor '" + name + "'");
    return it->second;
  }
  const ParamTensor<T>& at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw StructuralError("ParamSet: missing tensor '" + name + "'");
    return it->second;
  }

  const Map& tensors() const { return tensors_; }
  Map& tensors() { return tensors_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.size();
    return n;
  }

  bool same_structure(const ParamSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    auto it = other.tensors_.begin();
    for (const auto& [name, t] : tensors_) {
      if (name != it->first || t.shape != it->second.shape) return false;
      ++it;
    }
    return true;
  }

  void require_same_structure(const ParamSet& other, const char* what) const {
    if (!same_structure(other)) {
      throw StructuralError(std::string(what) + ": parameter sets differ in keys or shapes");
    }
  }

  bool all_finite() const {
    for (const auto& [_, t] : tensors_) {
      for (T v : t.values) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& [name, t] : tensors_) out.add(name, t.shape);
    return out;
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [name, t] : tensors_) {
      auto& dst = out.add(name, t.shape);
      for (std::size_t i = 0; i < t.size(); ++i) dst.values[i] = static_cast<U>(t.values[i]);
    }
    return out;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.tensors_ == b.tensors_; }

 private:
  Map tensors_;
};

/// L2 distance over all entries of two structurally identical sets.
template <typename T>
double l2_distance(const ParamSet<T>& a, const ParamSet<T>& b) {
  a.require_same_structure(b, "l2_distance");
  double acc = 0.0;
  auto it = b.tensors().begin();
  for (const auto& [_, t] : a.tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = static_cast<double>(t.values[i]) - it->second.values[i];
      acc += d * d;
    }
    ++it;
  }
  return std::sqrt(acc);
}

}  // namespace svdp
