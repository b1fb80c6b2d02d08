#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grab/balancing.hpp"
#include "grab/herding.hpp"
#include "grab/ordering.hpp"
#include "grab/problems.hpp"
#include "grab/rng.hpp"
#include "grab/vec.hpp"

namespace grab {

enum class Strategy {
  RR,           // fresh random permutation every epoch
  ShuffleOnce,  // one random permutation, reused forever
  FlipFlop,     // random, then its exact reverse, alternating
  GreedyStale,  // greedy herding over the stored epoch gradients (O(nd) memory)
  OfflineHerd,  // balance-then-reorder rounds over the stored epoch gradients
  GraB,         // online balancing with two placement pointers (O(d) memory)
  OneStepGraB,  // GraB during epoch 1 only, then that order fixed
  FixedOrder,   // caller-supplied permutation, never changed
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::RR: return "rr";
    case Strategy::ShuffleOnce: return "so";
    case Strategy::FlipFlop: return "flipflop";
    case Strategy::GreedyStale: return "greedy";
    case Strategy::OfflineHerd: return "herd";
    case Strategy::GraB: return "grab";
    case Strategy::OneStepGraB: return "grab1";
    case Strategy::FixedOrder: return "fixed";
  }
  return "?";
}

struct TrainConfig {
  // alpha = 0 is allowed: it freezes the iterates, which is how the
  // ordering dynamics are studied in isolation.
  double alpha = 0.1;
  int epochs = 1;
  Strategy strategy = Strategy::RR;
  double momentum = 0.0;  // heavy-ball on the raw gradient; 0 disables
  BalancerConfig balancer;
  std::uint64_t seed = 0;

  std::optional<Permutation> fixed_order;  // FixedOrder only
  int herd_rounds = 1;                     // OfflineHerd only
  // Stale-gradient strategies need an n x d buffer; refuse beyond this.
  std::size_t stale_cap_bytes = std::size_t{1} << 30;
  // Per-epoch herding diagnostic over the epoch's recorded gradients. Costs
  // an n x d buffer; disable for memory-focused runs.
  bool record_herding = true;
  std::optional<Vector> init_weights;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class AllocationRefused : public std::runtime_error {
 public:
  AllocationRefused(std::size_t bytes, const std::string& what)
      : std::runtime_error(what), bytes_(bytes) {}
  std::size_t required_bytes() const { return bytes_; }

 private:
  std::size_t bytes_;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double grad_norm = 0.0;
  // Herding objective (L2) of the epoch's visit order on that epoch's
  // gradients; NaN when recording is disabled.
  double herding_obj = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> balance_bound;  // GraB-family epochs only
  double wall_ms = 0.0;
  std::uint64_t ordering_ops = 0;  // O(d) vector passes spent choosing the next order
};

struct TrainTrace {
  Strategy strategy = Strategy::RR;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> records;
  std::vector<Permutation> epoch_orders;  // order used during each epoch
  Permutation final_order = Permutation::identity(1);  // order produced for epoch K+1
  Vector final_weights;
};

// Online ordering state for GraB: the two stale-mean vectors, the signed
// running sum, and the permutation under construction. Persistent footprint
// beyond the model/gradient buffers is exactly these three d-vectors and two
// index arrays.
class GrabState {
 public:
  GrabState(Permutation initial, std::size_t d, BalancerConfig balancer, std::uint64_t seed)
      : current_(std::move(initial)),
        next_build_(current_.size(), 0),
        stale_mean_(d, 0.0),
        next_mean_(d, 0.0),
        running_sum_(d, 0.0),
        balancer_(balancer),
        seed_(seed),
        right_(current_.size() - 1),
        rng_(substream(seed, kWalkTag, 1)) {
    if (balancer_.kind == BalancerKind::Walk && balancer_.c <= 0.0) {
      balancer_.c = walk_c(current_.size(), d, 0.01);
    }
  }

  const Permutation& current_order() const { return current_; }
  std::size_t size() const { return current_.size(); }
  std::size_t dim() const { return stale_mean_.size(); }
  const Vector& stale_mean() const { return stale_mean_; }
  const Vector& running_sum() const { return running_sum_; }
  std::size_t left() const { return left_; }
  std::size_t right() const { return right_; }
  double epoch_bound() const { return epoch_bound_; }
  int restarts() const { return restarts_; }
  std::uint64_t ordering_ops() const { return ops_; }

  // Live sizes of the persistent ordering state, for structural checks.
  std::size_t persistent_value_count() const {
    return stale_mean_.size() + next_mean_.size() + running_sum_.size();
  }
  std::size_t persistent_index_count() const { return current_.size() + next_build_.size(); }

  // One ordering step: sign the stale-mean-centered gradient, fold it into
  // the running sum, place the example with the l/r pointers, and fold the
  // raw gradient into the next stale mean. The caller's optimizer step uses
  // the raw gradient untouched.
  int observe(std::span<const double> raw_grad) {
    const std::size_t d = stale_mean_.size();
    if (raw_grad.size() != d) throw std::invalid_argument("GrabState: gradient dimension mismatch");
    if (step_ >= size()) throw std::logic_error("GrabState: epoch already complete");

    // All centered-gradient quantities are computed fused against the stale
    // mean so no n- or d-sized temporary is ever materialized.
    const double s_dot_g = dot(running_sum_, raw_grad) - dot(running_sum_, stale_mean_);
    ops_ += 2;
    int sign;
    if (balancer_.kind == BalancerKind::Naive) {
      sign = s_dot_g < 0.0 ? +1 : -1;
    } else {
      sign = walk_observe(raw_grad, s_dot_g);
    }

    double sum_inf = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      running_sum_[j] += sign * (raw_grad[j] - stale_mean_[j]);
      sum_inf = std::max(sum_inf, std::abs(running_sum_[j]));
      next_mean_[j] += raw_grad[j] / static_cast<double>(size());
    }
    ops_ += 2;
    const double scale = balancer_.kind == BalancerKind::Walk && walk_scale_ > 0.0 ? walk_scale_ : 1.0;
    epoch_bound_ = std::max(epoch_bound_, sum_inf / scale);

    record_sign(sign);
    return sign;
  }

  // Pointer update only (Alg.-style two-sided placement); exposed so the
  // permutation construction can be tested without gradients.
  void record_sign(int sign) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("GrabState: sign must be +/-1");
    if (step_ >= size()) throw std::logic_error("GrabState: epoch already complete");
    if (sign == +1) {
      next_build_[left_++] = current_[step_];
    } else {
      next_build_[right_--] = current_[step_];
    }
    ++step_;
  }

  // Epoch boundary: the accumulated mean becomes the stale mean, the built
  // permutation becomes current (the validating constructor enforces that a
  // complete bijection was assembled), and the per-epoch state resets.
  void finish_epoch() {
    if (step_ != size()) throw std::logic_error("GrabState: epoch incomplete");
    if (left_ != right_ + 1) throw std::logic_error("GrabState: placement pointers did not meet");
    stale_mean_ = next_mean_;
    std::fill(next_mean_.begin(), next_mean_.end(), 0.0);
    current_ = Permutation(next_build_);
    std::fill(running_sum_.begin(), running_sum_.end(), 0.0);
    left_ = 0;
    right_ = size() - 1;
    step_ = 0;
    epoch_bound_ = 0.0;
    ++epoch_;
    rng_ = SplitMix64(substream(seed_, kWalkTag, static_cast<std::uint64_t>(epoch_) + 1));
  }

 private:
  static constexpr std::uint64_t kWalkTag = 0x6772616277616C6Bu;

  // Walk balancing on the centered gradient, normalized by the running max
  // centered-gradient norm so the <= 1 precondition holds. Gradients cannot
  // be replayed online, so RestartEpoch here resets the running sum and
  // re-signs from the current step with a fresh stream.
  int walk_observe(std::span<const double> raw_grad, double s_dot_g) {
    const std::size_t d = stale_mean_.size();
    const double g_sq = norm2_sq(raw_grad) - 2.0 * dot(raw_grad, stale_mean_) + norm2_sq(stale_mean_);
    ops_ += 3;
    walk_scale_ = std::max(walk_scale_, std::sqrt(std::max(g_sq, 0.0)));
    const double scale = walk_scale_ > 0.0 ? walk_scale_ : 1.0;
    const double c = balancer_.c;
    for (;;) {
      const double s_dot_z = s_dot_g / (scale * scale);
      double s_inf = 0.0;
      for (std::size_t j = 0; j < d; ++j) s_inf = std::max(s_inf, std::abs(running_sum_[j]));
      ops_ += 1;
      if (std::abs(s_dot_z) <= c && s_inf / scale <= c) {
        const double p_plus = 0.5 - s_dot_z / (2.0 * c);
        return uniform01(rng_) < p_plus ? +1 : -1;
      }
      if (balancer_.failure_policy == FailurePolicy::Abort || restarts_ >= balancer_.max_restarts) {
        throw BalancerFailure("walk balancer failed at epoch " + std::to_string(epoch_ + 1) +
                              ", step " + std::to_string(step_));
      }
      ++restarts_;
      std::fill(running_sum_.begin(), running_sum_.end(), 0.0);
      s_dot_g = 0.0;
      rng_ = SplitMix64(substream(seed_, kWalkTag + static_cast<std::uint64_t>(restarts_),
                                  static_cast<std::uint64_t>(epoch_) + 1));
    }
  }

  Permutation current_;
  std::vector<std::size_t> next_build_;
  Vector stale_mean_, next_mean_, running_sum_;
  BalancerConfig balancer_;
  std::uint64_t seed_ = 0;
  std::size_t left_ = 0, right_ = 0, step_ = 0;
  int epoch_ = 0;
  double epoch_bound_ = 0.0;
  double walk_scale_ = 0.0;
  int restarts_ = 0;
  std::uint64_t ops_ = 0;
  SplitMix64 rng_;
};

namespace detail {
constexpr std::uint64_t kOrderTag = 0x6F72646572u;   // per-epoch permutation streams
constexpr std::uint64_t kWinitTag = 0x77696E6974u;   // weight init stream
constexpr std::uint64_t kHerdTag = 0x68657264u;      // offline-herd balancer streams
}  // namespace detail

// Everything a strategy may consult when producing the next epoch's order.
struct EpochState {
  Strategy strategy = Strategy::RR;
  std::uint64_t seed = 0;
  int epoch = 0;                         // 1-based index of the epoch just completed
  const Permutation* current = nullptr;  // order used during that epoch
  const Permutation* sigma1 = nullptr;   // the shared initial order
  const VectorSet* bank = nullptr;       // epoch gradients in visit order (stale strategies)
  GrabState* grab = nullptr;             // GraB family
  const BalancerConfig* balancer = nullptr;
  int herd_rounds = 1;
  OpCounter* ops = nullptr;
};

// Order for epoch (st.epoch + 1). Internal dispatch, exposed for tests.
inline Permutation strategy_next_order(const EpochState& st) {
  if (!st.current) throw std::invalid_argument("strategy_next_order: missing current order");
  const std::size_t n = st.current->size();
  switch (st.strategy) {
    case Strategy::RR:
      return Permutation::random(n, substream(st.seed, detail::kOrderTag,
                                              static_cast<std::uint64_t>(st.epoch) + 1));
    case Strategy::ShuffleOnce:
      return st.sigma1 ? *st.sigma1 : *st.current;
    case Strategy::FlipFlop:
      // Odd epochs draw fresh, even epochs replay the previous epoch
      // backwards, so each random order is followed by its exact reverse.
      if (st.epoch % 2 == 1) return st.current->reversed();
      return Permutation::random(n, substream(st.seed, detail::kOrderTag,
                                              static_cast<std::uint64_t>(st.epoch) + 1));
    case Strategy::GreedyStale: {
      if (!st.bank) throw std::invalid_argument("strategy_next_order: greedy needs stored gradients");
      const Permutation visit = greedy_order(*st.bank, true, st.ops);
      return st.current->compose(visit);
    }
    case Strategy::OfflineHerd: {
      if (!st.bank || !st.balancer) throw std::invalid_argument("strategy_next_order: herd needs gradients and a balancer");
      BalancerConfig cfg = *st.balancer;
      cfg.rng_seed = substream(st.seed, detail::kHerdTag, static_cast<std::uint64_t>(st.epoch));
      const HerdResult herd = offline_herd(*st.bank, cfg, st.herd_rounds);
      if (st.ops) st.ops->add(static_cast<std::uint64_t>(st.herd_rounds) * 3 * n);
      return st.current->compose(herd.round_orders.empty() ? herd.best : herd.round_orders.back());
    }
    case Strategy::GraB:
      if (!st.grab) throw std::invalid_argument("strategy_next_order: missing GraB state");
      st.grab->finish_epoch();
      return st.grab->current_order();
    case Strategy::OneStepGraB:
      if (st.epoch == 1) {
        if (!st.grab) throw std::invalid_argument("strategy_next_order: missing GraB state");
        st.grab->finish_epoch();
        return st.grab->current_order();
      }
      return *st.current;
    case Strategy::FixedOrder:
      return *st.current;
  }
  throw std::logic_error("strategy_next_order: unknown strategy");
}

namespace detail {

inline void validate_config(const TrainConfig& cfg, std::size_t n) {
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) throw std::invalid_argument("TrainConfig: alpha must be finite and >= 0");
  if (cfg.epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
  if (cfg.strategy == Strategy::FixedOrder) {
    if (!cfg.fixed_order) throw std::invalid_argument("TrainConfig: FixedOrder needs fixed_order");
    if (cfg.fixed_order->size() != n) throw std::invalid_argument("TrainConfig: fixed_order length mismatch");
  }
  if (cfg.herd_rounds < 1) throw std::invalid_argument("TrainConfig: herd_rounds must be >= 1");
}

}  // namespace detail

// Permutation-based SGD: w <- w - alpha * grad(example), one epoch visits
// every example once in the strategy's order. Deterministic given (p, cfg).
template <FiniteSumProblem P>
TrainTrace train(const P& p, const TrainConfig& cfg) {
  const std::size_t n = p.size();
  const std::size_t d = p.dim();
  detail::validate_config(cfg, n);

  Vector w;
  if (cfg.init_weights) {
    if (cfg.init_weights->size() != d) throw std::invalid_argument("TrainConfig: init_weights dimension mismatch");
    w = *cfg.init_weights;
  } else {
    w.assign(d, 0.0);
    SplitMix64 g(substream(cfg.seed, detail::kWinitTag));
    for (auto& v : w) v = 0.1 * normal01(g);
  }
  Vector velocity;
  if (cfg.momentum > 0.0) velocity.assign(d, 0.0);

  // sigma_1 is one shared seeded draw so strategies are compared from the
  // same start.
  const Permutation sigma1 = cfg.strategy == Strategy::FixedOrder
                                 ? *cfg.fixed_order
                                 : Permutation::random(n, substream(cfg.seed, detail::kOrderTag, 1));
  Permutation order = sigma1;

  const bool stale_strategy =
      cfg.strategy == Strategy::GreedyStale || cfg.strategy == Strategy::OfflineHerd;
  if (stale_strategy) {
    const std::size_t bytes = n * d * sizeof(double);
    if (bytes > cfg.stale_cap_bytes) {
      throw AllocationRefused(bytes, std::string(strategy_name(cfg.strategy)) +
                                         " needs " + std::to_string(bytes) +
                                         " bytes of gradient storage (cap " +
                                         std::to_string(cfg.stale_cap_bytes) + ")");
    }
  }
  const bool keep_bank = stale_strategy || cfg.record_herding;
  std::optional<VectorSet> bank;
  if (keep_bank) bank.emplace(n, d);

  const bool grab_family = cfg.strategy == Strategy::GraB || cfg.strategy == Strategy::OneStepGraB;
  std::optional<GrabState> grab;
  if (grab_family) grab.emplace(order, d, cfg.balancer, cfg.seed);

  TrainTrace trace;
  trace.strategy = cfg.strategy;
  trace.seed = cfg.seed;
  trace.records.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool grab_live = cfg.strategy == Strategy::GraB ||
                           (cfg.strategy == Strategy::OneStepGraB && epoch == 1);
    const std::uint64_t grab_ops_before = grab ? grab->ordering_ops() : 0;

    for (std::size_t t = 0; t < n; ++t) {
      const Vector g = p.example_grad(w, order[t]);
      if (!all_finite(g)) {
        throw DivergenceError(epoch, "non-finite gradient at epoch " + std::to_string(epoch) +
                                         ", step " + std::to_string(t));
      }
      if (grab_live) grab->observe(g);
      if (bank) {
        auto row = bank->row_mut(t);
        std::copy(g.begin(), g.end(), row.begin());
      }
      if (cfg.momentum > 0.0) {
        for (std::size_t j = 0; j < d; ++j) {
          velocity[j] = cfg.momentum * velocity[j] + g[j];
          w[j] -= cfg.alpha * velocity[j];
        }
      } else if (cfg.alpha != 0.0) {
        axpy(-cfg.alpha, g, w);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = full_loss(p, w);
    if (!std::isfinite(rec.loss)) {
      throw DivergenceError(epoch, "non-finite loss at epoch " + std::to_string(epoch));
    }
    rec.grad_norm = norm2(full_grad(p, w));
    if (cfg.record_herding) rec.herding_obj = herding_objective(*bank, Permutation::identity(n), Norm::L2);
    if (grab_live) rec.balance_bound = grab->epoch_bound();
    trace.epoch_orders.push_back(order);

    OpCounter epoch_ops;
    EpochState st;
    st.strategy = cfg.strategy;
    st.seed = cfg.seed;
    st.epoch = epoch;
    st.current = &order;
    st.sigma1 = &sigma1;
    st.bank = bank ? &*bank : nullptr;
    st.grab = grab ? &*grab : nullptr;
    st.balancer = &cfg.balancer;
    st.herd_rounds = cfg.herd_rounds;
    st.ops = &epoch_ops;
    Permutation next = strategy_next_order(st);

    rec.ordering_ops = epoch_ops.vector_ops + (grab ? grab->ordering_ops() - grab_ops_before : 0);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    trace.records.push_back(std::move(rec));
    order = std::move(next);
  }

  trace.final_order = order;
  trace.final_weights = std::move(w);
  return trace;
}

// The retrain ablation: take an order produced by a previous run and train
// from scratch with it held fixed.
template <FiniteSumProblem P>
TrainTrace retrain_fixed(const P& p, const Permutation& donor_order, TrainConfig cfg) {
  if (donor_order.size() != p.size()) throw std::invalid_argument("retrain_fixed: donor order length mismatch");
  cfg.strategy = Strategy::FixedOrder;
  cfg.fixed_order = donor_order;
  return train(p, cfg);
}

}  // namespace grab
