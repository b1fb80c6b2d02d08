#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "grab/rng.hpp"
#include "grab/vec.hpp"

namespace grab {

enum class BalancerKind { Naive, Walk };

// What to do when the probabilistic balancer trips its guard.
enum class FailurePolicy { Abort, RestartEpoch };

struct BalancerConfig {
  BalancerKind kind = BalancerKind::Naive;
  // Walk bound parameter; values <= 0 select walk_c(n, d, 0.01) at run time.
  double c = 0.0;
  FailurePolicy failure_policy = FailurePolicy::RestartEpoch;
  int max_restarts = 16;
  std::uint64_t rng_seed = 0;
  // Vectors are divided by this before signing (the walk balancer wants
  // ||z|| <= 1; the naive balancer is scale-invariant). Must be positive.
  double prescale = 1.0;
};

// c = 30 log(n d / delta), natural log. The constant comes with the
// high-probability bound on the walk balancer's signed prefix sums.
inline double walk_c(std::size_t n, std::size_t d, double delta) {
  return 30.0 * std::log(static_cast<double>(n) * static_cast<double>(d) / delta);
}

class BalancerFailure : public std::runtime_error {
 public:
  explicit BalancerFailure(const std::string& what) : std::runtime_error(what) {}
};

// Running signed sum plus the generator owned by one signing pass.
class BalancerState {
 public:
  BalancerState(std::size_t dim, std::uint64_t stream_seed)
      : sum_(dim, 0.0), rng_(stream_seed) {}

  const Vector& running_sum() const { return sum_; }
  std::size_t step_count() const { return steps_; }
  SplitMix64& rng() { return rng_; }

  void accumulate(int sign, std::span<const double> v) {
    if (v.size() != sum_.size()) throw std::invalid_argument("BalancerState: dimension mismatch");
    axpy(static_cast<double>(sign), v, sum_);
    ++steps_;
  }

  void reset_sum() {
    std::fill(sum_.begin(), sum_.end(), 0.0);
  }

  void reseed(std::uint64_t stream_seed) { rng_ = SplitMix64(stream_seed); }

 private:
  Vector sum_;
  std::size_t steps_ = 0;
  SplitMix64 rng_;
};

// +1 only when ||s+v|| < ||s-v|| strictly; ties fall through to -1.
// The norm comparison reduces to the sign of <s,v> since
// ||s+v||^2 - ||s-v||^2 = 4 <s,v>.
inline int naive_sign(const BalancerState& state, std::span<const double> v) {
  return dot(state.running_sum(), v) < 0.0 ? +1 : -1;
}

inline double walk_plus_probability(std::span<const double> s, std::span<const double> z, double c) {
  return 0.5 - dot(s, z) / (2.0 * c);
}

// Probabilistic balancer step: guard first, then draw +1 with probability
// 1/2 - <s,z>/(2c). Returns nullopt when the guard trips.
inline std::optional<int> walk_sign(BalancerState& state, std::span<const double> z, double c) {
  if (c <= 0.0) throw std::invalid_argument("walk_sign: c must be positive");
  const Vector& s = state.running_sum();
  if (std::abs(dot(s, z)) > c || norm_inf(s) > c) return std::nullopt;
  const double p_plus = walk_plus_probability(s, z, c);
  return uniform01(state.rng()) < p_plus ? +1 : -1;
}

struct SignResult {
  SignSequence signs;
  // max_k ||sum_{i<=k} eps_i v_i||_inf, measured on the (prescaled) vectors
  // that were actually signed.
  double realized_bound = 0.0;
  int restarts = 0;
};

// Signs the whole sequence in the given order. The walk balancer may fail;
// RestartEpoch reruns the pass with a fresh substream up to max_restarts
// times, Abort propagates immediately. stream_tag keeps distinct passes
// (e.g. rounds or epochs) on distinct streams for one rng_seed.
inline SignResult sign_sequence(const VectorSet& set, const Permutation& order,
                                const BalancerConfig& config, std::uint64_t stream_tag = 0) {
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  if (order.size() != n) throw std::invalid_argument("sign_sequence: length mismatch");
  if (config.prescale <= 0.0) throw std::invalid_argument("sign_sequence: prescale must be positive");

  const bool walk = config.kind == BalancerKind::Walk;
  const double c = walk && config.c <= 0.0 ? walk_c(n, d, 0.01) : config.c;
  if (walk && c <= 0.0) throw std::invalid_argument("sign_sequence: walk balancer needs c > 0");

  const double inv_scale = 1.0 / config.prescale;
  Vector scaled(d);

  const int attempts = config.failure_policy == FailurePolicy::RestartEpoch
                           ? config.max_restarts + 1
                           : 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    BalancerState state(d, substream(config.rng_seed, stream_tag, static_cast<std::uint64_t>(attempt)));
    SignResult result;
    result.signs.resize(n);
    result.restarts = attempt;
    bool failed = false;
    for (std::size_t t = 0; t < n && !failed; ++t) {
      auto raw = set.row(order[t]);
      std::span<const double> v = raw;
      if (inv_scale != 1.0) {
        for (std::size_t j = 0; j < d; ++j) scaled[j] = raw[j] * inv_scale;
        v = scaled;
      }
      int sign;
      if (walk) {
        auto drawn = walk_sign(state, v, c);
        if (!drawn) {
          failed = true;
          break;
        }
        sign = *drawn;
      } else {
        sign = naive_sign(state, v);
      }
      state.accumulate(sign, v);
      result.signs[t] = sign;
      result.realized_bound = std::max(result.realized_bound, norm_inf(state.running_sum()));
    }
    if (!failed) return result;
  }
  throw BalancerFailure("walk balancer failed after " + std::to_string(attempts) + " attempt(s)");
}

}  // namespace grab
