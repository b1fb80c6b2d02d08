#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "grab/balancing.hpp"
#include "grab/herding.hpp"
#include "grab/vec.hpp"

namespace grab {

// One unit = one O(d) pass over a vector (a dot product, an axpy, a norm).
// Lets callers compare ordering strategies by work rather than wall time.
struct OpCounter {
  std::uint64_t vector_ops = 0;
  void add(std::uint64_t k = 1) { vector_ops += k; }
};

// Greedy herding: repeatedly append the unused vector minimizing ||s + z||_2.
// Centers the input first unless center_first is false. Ties go to the
// lowest original index. O(n^2) dot products.
inline Permutation greedy_order(const VectorSet& set, bool center_first = true,
                                OpCounter* counter = nullptr) {
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  const VectorSet centered = center_first ? center(set) : set;

  // ||s + z_j||^2 = ||s||^2 + 2<s,z_j> + ||z_j||^2; ||s||^2 is shared, so
  // compare 2<s,z_j> + ||z_j||^2. Cache the self-terms once.
  std::vector<double> self_sq(n);
  for (std::size_t j = 0; j < n; ++j) {
    self_sq[j] = norm2_sq(centered.row(j));
    if (counter) counter->add();
  }

  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<bool> used(n, false);
  Vector s(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t best = n;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double val = 2.0 * dot(s, centered.row(j)) + self_sq[j];
      if (counter) counter->add();
      if (val < best_val) {
        best_val = val;
        best = j;
      }
    }
    used[best] = true;
    order.push_back(best);
    axpy(1.0, centered.row(best), s);
    if (counter) counter->add();
  }
  return Permutation(std::move(order));
}

// Hard instance for uncentered greedy herding: n/2 copies of (1,1) followed
// by n/2 copies of (4,-2), interleaved so visit order carries no hint. The
// greedy rule keeps choosing (1,1) for the first n/2 picks, driving the
// running sum to (n/2, n/2), while a random order stays O(sqrt(n)).
inline VectorSet adversarial_set(std::size_t n) {
  if (n == 0 || n % 2 != 0) throw std::invalid_argument("adversarial_set: n must be positive and even");
  VectorSet set(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = set.row_mut(i);
    if (i % 2 == 0) {
      row[0] = 1.0;
      row[1] = 1.0;
    } else {
      row[0] = 4.0;
      row[1] = -2.0;
    }
  }
  return set;
}

// New order from a signed pass: +1 entries keep their visit order at the
// front, -1 entries go to the back in reverse visit order.
inline Permutation reorder_from_signs(const Permutation& order, const SignSequence& signs) {
  const std::size_t n = order.size();
  validate_signs(signs, n);
  std::vector<std::size_t> out(n);
  std::size_t l = 0, r = n;
  for (std::size_t t = 0; t < n; ++t) {
    if (signs[t] == +1) {
      out[l++] = order[t];
    } else {
      out[--r] = order[t];
    }
  }
  return Permutation(std::move(out));
}

struct HerdResult {
  Permutation best = Permutation::identity(1);
  // L-inf herding objective after each round, on the centered original-scale
  // vectors; entry 0 is the starting permutation's objective.
  std::vector<double> objective_history;
  // The permutation produced by each round, in order.
  std::vector<Permutation> round_orders;
  // Realized L-inf balancing bound of each round's signing pass, rescaled to
  // the original vectors (the measured A that the halving property combines
  // with the previous objective H).
  std::vector<double> realized_bounds;
  int restarts = 0;
};

// Iterated balance-then-reorder. Centers once, prescales so the balancer
// sees ||z||_2 <= 1, and keeps the best permutation seen (including the
// start). Objectives are reported in the original scale.
inline HerdResult offline_herd(const VectorSet& set, const BalancerConfig& config, int rounds,
                               const Permutation* start = nullptr) {
  if (rounds < 0) throw std::invalid_argument("offline_herd: rounds must be >= 0");
  const std::size_t n = set.size();
  const VectorSet centered = center(set);

  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_norm = std::max(max_norm, norm2(centered.row(i)));

  BalancerConfig cfg = config;
  cfg.prescale = max_norm > 0.0 ? max_norm : 1.0;

  HerdResult result;
  result.best = start ? *start : Permutation::identity(n);
  if (result.best.size() != n) throw std::invalid_argument("offline_herd: start permutation length mismatch");

  Permutation current = result.best;
  double best_obj = herding_objective(centered, current, Norm::Linf);
  result.objective_history.push_back(best_obj);

  for (int r = 0; r < rounds; ++r) {
    SignResult signed_pass = sign_sequence(centered, current, cfg, static_cast<std::uint64_t>(r));
    result.restarts += signed_pass.restarts;
    result.realized_bounds.push_back(signed_pass.realized_bound * cfg.prescale);
    current = reorder_from_signs(current, signed_pass.signs);
    const double obj = herding_objective(centered, current, Norm::Linf);
    result.objective_history.push_back(obj);
    result.round_orders.push_back(current);
    if (obj < best_obj) {
      best_obj = obj;
      result.best = current;
    }
  }
  return result;
}

}  // namespace grab
