#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grab/rng.hpp"

namespace grab {

using Vector = std::vector<double>;

enum class Norm { L2, Linf };

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2_sq(std::span<const double> v) { return dot(v, v); }

inline double norm2(std::span<const double> v) { return std::sqrt(norm2_sq(v)); }

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double vector_norm(std::span<const double> v, Norm norm) {
  return norm == Norm::L2 ? norm2(v) : norm_inf(v);
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// A set of n vectors sharing dimension d, stored row-major.
class VectorSet {
 public:
  VectorSet(std::size_t n, std::size_t d) : n_(n), d_(d), data_(n * d, 0.0) {
    if (n == 0 || d == 0) throw std::invalid_argument("VectorSet: n and d must be positive");
  }

  static VectorSet from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) throw std::invalid_argument("VectorSet: need at least one vector");
    VectorSet set(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != set.d_) throw std::invalid_argument("VectorSet: dimension mismatch");
      if (!all_finite(rows[i])) throw std::invalid_argument("VectorSet: non-finite entry");
      std::copy(rows[i].begin(), rows[i].end(), set.row_mut(i).begin());
    }
    return set;
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  std::span<double> row_mut(std::size_t i) { return {data_.data() + i * d_, d_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  void check_finite() const {
    if (!all_finite(data_)) throw std::invalid_argument("VectorSet: non-finite entry");
  }

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<double> data_;
};

// Bijection on {0, ..., n-1}. Indices are 0-based throughout.
class Permutation {
 public:
  explicit Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
    std::vector<bool> seen(map_.size(), false);
    for (std::size_t v : map_) {
      if (v >= map_.size() || seen[v]) throw std::invalid_argument("Permutation: not a bijection");
      seen[v] = true;
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = i;
    return Permutation(std::move(m), unchecked_tag{});
  }

  // Fisher-Yates with an explicit generator; uniform over all n! orders.
  static Permutation random(std::size_t n, SplitMix64& g) {
    std::vector<std::size_t> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::swap(m[i - 1], m[uniform_index(g, i)]);
    }
    return Permutation(std::move(m), unchecked_tag{});
  }

  static Permutation random(std::size_t n, std::uint64_t seed) {
    SplitMix64 g(seed);
    return random(n, g);
  }

  std::size_t size() const { return map_.size(); }
  std::size_t operator[](std::size_t i) const { return map_[i]; }
  const std::vector<std::size_t>& indices() const { return map_; }

  Permutation inverse() const {
    std::vector<std::size_t> inv(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
    return Permutation(std::move(inv), unchecked_tag{});
  }

  Permutation reversed() const {
    std::vector<std::size_t> rev(map_.rbegin(), map_.rend());
    return Permutation(std::move(rev), unchecked_tag{});
  }

  // (this o other)(i) = this[other[i]]
  Permutation compose(const Permutation& other) const {
    if (other.size() != size()) throw std::invalid_argument("Permutation: size mismatch");
    std::vector<std::size_t> m(size());
    for (std::size_t i = 0; i < size(); ++i) m[i] = map_[other[i]];
    return Permutation(std::move(m), unchecked_tag{});
  }

  bool operator==(const Permutation& other) const { return map_ == other.map_; }

 private:
  struct unchecked_tag {};
  Permutation(std::vector<std::size_t> map, unchecked_tag) : map_(std::move(map)) {}

  std::vector<std::size_t> map_;
};

// Signs in {-1, +1}, one per vector of the sequence they were produced for.
using SignSequence = std::vector<int>;

inline void validate_signs(const SignSequence& signs, std::size_t n) {
  if (signs.size() != n) throw std::invalid_argument("SignSequence: length mismatch");
  for (int s : signs) {
    if (s != 1 && s != -1) throw std::invalid_argument("SignSequence: values must be +1 or -1");
  }
}

}  // namespace grab
