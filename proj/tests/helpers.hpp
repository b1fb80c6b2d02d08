#pragma once

// Shared oracles for the test suite. These are deliberately independent
// re-implementations (plain loops over vector<vector<double>>) so library
// results are checked against something that cannot share their bugs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "grab/problems.hpp"
#include "grab/rng.hpp"
#include "grab/vec.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const grab::VectorSet& set) {
  Rows rows(set.size(), std::vector<double>(set.dim()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto r = set.row(i);
    std::copy(r.begin(), r.end(), rows[i].begin());
  }
  return rows;
}

// Herding objective recomputed from scratch: center, permute, scan prefixes.
inline double objective(const Rows& rows, const std::vector<std::size_t>& perm, bool linf) {
  const std::size_t n = rows.size();
  const std::size_t d = rows[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<double> acc(d, 0.0);
  double best = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double norm_sq = 0.0, norm_inf = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      acc[j] += rows[perm[t]][j] - mean[j];
      norm_sq += acc[j] * acc[j];
      norm_inf = std::max(norm_inf, std::abs(acc[j]));
    }
    best = std::max(best, linf ? norm_inf : std::sqrt(norm_sq));
  }
  return best;
}

// Exhaustive minimum over all n! permutations (keep n <= 8).
inline double brute_force_min_objective(const Rows& rows, bool linf) {
  std::vector<std::size_t> perm(rows.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = objective(rows, perm, linf);
  while (std::next_permutation(perm.begin(), perm.end())) {
    best = std::min(best, objective(rows, perm, linf));
  }
  return best;
}

// Central finite differences, one coordinate at a time.
template <grab::FiniteSumProblem P>
grab::Vector fd_gradient(const P& p, const grab::Vector& w, std::size_t i, double h = 1e-6) {
  grab::Vector g(w.size());
  grab::Vector probe = w;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double save = probe[j];
    probe[j] = save + h;
    const double up = p.example_loss(probe, i);
    probe[j] = save - h;
    const double down = p.example_loss(probe, i);
    probe[j] = save;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_vec_err(const grab::Vector& got, const grab::Vector& want) {
  double diff_sq = 0.0, want_sq = 0.0;
  for (std::size_t j = 0; j < got.size(); ++j) {
    const double d = got[j] - want[j];
    diff_sq += d * d;
    want_sq += want[j] * want[j];
  }
  return std::sqrt(diff_sq) / std::max(std::sqrt(want_sq), 1.0);
}

// Uniform [-1,1] entries.
inline grab::VectorSet random_set(std::size_t n, std::size_t d, std::uint64_t seed) {
  grab::VectorSet set(n, d);
  grab::SplitMix64 g(seed);
  for (auto& v : set.data()) v = 2.0 * grab::uniform01(g) - 1.0;
  return set;
}

// Centered with max L2 row norm exactly 1 (the halving-theorem setting).
inline grab::VectorSet centered_unit_set(std::size_t n, std::size_t d, std::uint64_t seed) {
  grab::VectorSet set = random_set(n, d, seed);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = set.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = set.row_mut(i);
    for (std::size_t j = 0; j < d; ++j) r[j] -= mean[j];
    max_norm = std::max(max_norm, grab::norm2(r));
  }
  if (max_norm > 0.0) {
    for (auto& v : set.data()) v /= max_norm;
  }
  return set;
}

// i.i.d. random directions on the unit sphere.
inline grab::VectorSet unit_vectors(std::size_t n, std::size_t d, std::uint64_t seed) {
  grab::VectorSet set(n, d);
  grab::SplitMix64 g(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = set.row_mut(i);
    double norm = 0.0;
    do {
      for (auto& v : r) v = grab::normal01(g);
      norm = grab::norm2(r);
    } while (norm < 1e-9);
    for (auto& v : r) v /= norm;
  }
  return set;
}

}  // namespace oracle
