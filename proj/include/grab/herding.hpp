#pragma once

#include <vector>

#include "grab/vec.hpp"

namespace grab {

inline Vector mean_vector(const VectorSet& set) {
  Vector mean(set.dim(), 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) axpy(1.0, set.row(i), mean);
  for (double& x : mean) x /= static_cast<double>(set.size());
  return mean;
}

// Subtracts the mean from every vector; the centered set sums to zero up to
// accumulation error (n*d*1e-12 absolute is the tolerance tests pin).
inline VectorSet center(const VectorSet& set) {
  set.check_finite();
  const Vector mean = mean_vector(set);
  VectorSet out(set.size(), set.dim());
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto src = set.row(i);
    auto dst = out.row_mut(i);
    for (std::size_t j = 0; j < set.dim(); ++j) dst[j] = src[j] - mean[j];
  }
  return out;
}

// Partial sums of the permuted vectors: out[k] = sum_{t<=k} set[perm(t)].
// No centering happens here; feed a centered set if that is what you mean.
inline std::vector<Vector> prefix_sums(const VectorSet& set, const Permutation& perm) {
  if (perm.size() != set.size()) throw std::invalid_argument("prefix_sums: length mismatch");
  std::vector<Vector> out;
  out.reserve(set.size());
  Vector acc(set.dim(), 0.0);
  for (std::size_t t = 0; t < set.size(); ++t) {
    axpy(1.0, set.row(perm[t]), acc);
    out.push_back(acc);
  }
  return out;
}

// max_k || sum_{t<=k} (z_{perm(t)} - mean) || in the requested norm.
// Centering is built in, so the value is invariant under adding a constant
// vector to the whole set. Streams in O(d) extra space.
inline double herding_objective(const VectorSet& set, const Permutation& perm, Norm norm) {
  if (perm.size() != set.size()) throw std::invalid_argument("herding_objective: length mismatch");
  const Vector mean = mean_vector(set);
  Vector acc(set.dim(), 0.0);
  double best = 0.0;
  for (std::size_t t = 0; t < set.size(); ++t) {
    auto z = set.row(perm[t]);
    for (std::size_t j = 0; j < set.dim(); ++j) acc[j] += z[j] - mean[j];
    best = std::max(best, vector_norm(acc, norm));
  }
  return best;
}

}  // namespace grab
