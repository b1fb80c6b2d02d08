#pragma once

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "grab/balancing.hpp"
#include "grab/herding.hpp"
#include "grab/io.hpp"
#include "grab/ordering.hpp"
#include "grab/problems.hpp"
#include "grab/rng.hpp"
#include "grab/trainer.hpp"
#include "grab/vec.hpp"

namespace grab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitBalancerFailure = 4;
inline constexpr int kExitAllocation = 5;

namespace detail {

constexpr std::uint64_t kDemoDataTag = 0x64656D6Fu;
constexpr std::uint64_t kDemoBaseTag = 0x62617365u;
constexpr std::uint64_t kDemoBalTag = 0x62616Cu;
constexpr std::uint64_t kAdversarialSeed = 0x61647673656564u;

// Sweep fan-out: hardware concurrency, overridable (and cappable) via the
// GRAB_THREADS environment variable, never more than the number of cells.
inline unsigned sweep_thread_cap(std::size_t cells) {
  unsigned cap = std::thread::hardware_concurrency();
  if (cap == 0) cap = 1;
  if (const char* env = std::getenv("GRAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) cap = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(cap, cells ? cells : 1));
}

template <typename Fn>
void parallel_cells(std::size_t cells, Fn&& fn) {
  const unsigned workers = sweep_thread_cap(cells);
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([t, workers, cells, &fn] {
      for (std::size_t i = t; i < cells; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// --- balance-demo ------------------------------------------------------------

struct BalanceDemoOptions {
  std::size_t n = 2000;
  std::size_t d = 64;
  int rounds = 5;
  BalancerKind balancer = BalancerKind::Naive;
  double c = 0.0;  // <= 0 selects the walk default
  std::uint64_t seed = 0;
  std::string out;    // CSV path (required)
  std::string input;  // optional vector-set file; overrides n/d
};

// Uniform-[0,1] vectors (or a supplied set), one random baseline order, then
// `rounds` balance-reorder rounds. Emits long-format CSV: the baseline's
// per-k centered prefix L2 norms, the per-round Linf objective history, and
// the best order's per-k prefix norms.
inline int cmd_balance_demo(const BalanceDemoOptions& opt) {
  if (opt.out.empty()) {
    std::cerr << "balance-demo: --out is required\n";
    return kExitUsage;
  }
  if (opt.rounds < 0) {
    std::cerr << "balance-demo: --rounds must be >= 0\n";
    return kExitUsage;
  }
  try {
    VectorSet set = [&] {
      if (!opt.input.empty()) return load_vector_set(opt.input);
      if (opt.n == 0 || opt.d == 0) throw std::runtime_error("--n and --d must be positive");
      VectorSet s(opt.n, opt.d);
      SplitMix64 g(substream(opt.seed, detail::kDemoDataTag));
      for (auto& v : s.data()) v = uniform01(g);
      return s;
    }();
    const std::size_t n = set.size();

    const Permutation baseline = Permutation::random(n, substream(opt.seed, detail::kDemoBaseTag));
    const VectorSet centered = center(set);

    BalancerConfig cfg;
    cfg.kind = opt.balancer;
    cfg.c = opt.c;
    cfg.rng_seed = substream(opt.seed, detail::kDemoBalTag);
    const HerdResult herd = offline_herd(set, cfg, opt.rounds, &baseline);

    auto out = detail::open_out(opt.out);
    out << "# schema=1\n";
    out << "kind,index,value\n";
    auto emit_prefix = [&](const char* kind, const Permutation& perm) {
      Vector acc(set.dim(), 0.0);
      for (std::size_t t = 0; t < n; ++t) {
        axpy(1.0, centered.row(perm[t]), acc);
        out << kind << ',' << (t + 1) << ',' << fmt_double(norm2(acc)) << '\n';
      }
    };
    emit_prefix("prefix_random", baseline);
    for (std::size_t r = 0; r < herd.objective_history.size(); ++r) {
      out << "round," << r << ',' << fmt_double(herd.objective_history[r]) << '\n';
    }
    if (opt.rounds > 0) emit_prefix("prefix_final", herd.best);
    if (!out) throw std::runtime_error("write failed: " + opt.out);
  } catch (const BalancerFailure& e) {
    std::cerr << "balance-demo: " << e.what() << '\n';
    return kExitBalancerFailure;
  } catch (const std::exception& e) {
    std::cerr << "balance-demo: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainOptions {
  std::string problem = "quad";  // quad | logreg | mlp | csv:<path>
  std::size_t n = 64;
  std::size_t d = 16;  // parameter dim (quad/logreg) or input dim (mlp)
  int epochs = 10;
  double lr = 0.1;
  std::string strategy = "rr";  // rr|so|flipflop|greedy|grab|grab1|fixed:<path>
  double momentum = 0.0;
  std::uint64_t seed = 0;
  std::string out;  // trace CSV path; a .json mirror is written alongside
  double l2 = 0.0;
  std::string order_out;  // optional: write the final order here
  std::size_t stale_cap_bytes = std::size_t{1} << 30;
  BalancerKind balancer = BalancerKind::Naive;
  double c = 0.0;
};

namespace detail {

inline bool parse_strategy(const std::string& text, TrainConfig& cfg, std::string& error) {
  if (text == "rr") {
    cfg.strategy = Strategy::RR;
  } else if (text == "so") {
    cfg.strategy = Strategy::ShuffleOnce;
  } else if (text == "flipflop") {
    cfg.strategy = Strategy::FlipFlop;
  } else if (text == "greedy") {
    cfg.strategy = Strategy::GreedyStale;
  } else if (text == "grab") {
    cfg.strategy = Strategy::GraB;
  } else if (text == "grab1") {
    cfg.strategy = Strategy::OneStepGraB;
  } else if (text.rfind("fixed:", 0) == 0) {
    cfg.strategy = Strategy::FixedOrder;
    cfg.fixed_order = load_permutation(text.substr(6));
  } else {
    error = "unknown strategy '" + text + "'";
    return false;
  }
  return true;
}

template <FiniteSumProblem P>
int run_train(const P& p, const TrainConfig& cfg, const TrainOptions& opt) {
  const TrainTrace trace = train(p, cfg);
  if (!opt.out.empty()) {
    save_trace_csv(trace, opt.out);
    save_trace_json(trace, cfg, opt.out + ".json");
  }
  if (!opt.order_out.empty()) save_permutation(trace.final_order, opt.order_out);
  std::cout << "final_loss=" << fmt_double(trace.records.back().loss)
            << " grad_norm=" << fmt_double(trace.records.back().grad_norm) << '\n';
  return kExitOk;
}

}  // namespace detail

inline int cmd_train(const TrainOptions& opt) {
  try {
    TrainConfig cfg;
    cfg.alpha = opt.lr;
    cfg.epochs = opt.epochs;
    cfg.momentum = opt.momentum;
    cfg.seed = opt.seed;
    cfg.stale_cap_bytes = opt.stale_cap_bytes;
    cfg.balancer.kind = opt.balancer;
    cfg.balancer.c = opt.c;
    cfg.balancer.rng_seed = substream(opt.seed, detail::kDemoBalTag);
    std::string error;
    if (!detail::parse_strategy(opt.strategy, cfg, error)) {
      std::cerr << "train: " << error << '\n';
      return kExitUsage;
    }

    if (opt.problem == "quad") {
      return detail::run_train(QuadraticSum::random(opt.n, opt.d, opt.seed, opt.l2), cfg, opt);
    }
    if (opt.problem == "logreg") {
      return detail::run_train(LogisticRegression::random(opt.n, opt.d, opt.seed, opt.l2), cfg, opt);
    }
    if (opt.problem == "mlp") {
      return detail::run_train(TinyMlp::teacher(opt.n, opt.seed, opt.d, 8, opt.l2), cfg, opt);
    }
    if (opt.problem.rfind("csv:", 0) == 0) {
      return detail::run_train(load_logreg_csv(opt.problem.substr(4), opt.l2), cfg, opt);
    }
    std::cerr << "train: unknown problem '" << opt.problem << "'\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "train: diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const BalancerFailure& e) {
    std::cerr << "train: " << e.what() << '\n';
    return kExitBalancerFailure;
  } catch (const AllocationRefused& e) {
    std::cerr << "train: allocation refused: " << e.what() << '\n';
    return kExitAllocation;
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << '\n';
    return kExitUsage;
  }
}

// --- adversarial ---------------------------------------------------------------

struct AdversarialOptions {
  std::vector<std::size_t> n_list = {40, 100, 400};
  int seeds = 200;
  std::string out;  // required
};

// For each n: the hard construction's uncentered-greedy herding objective
// (L2) against the mean/stddev over random permutations. The data seed is a
// fixed internal constant so runs are comparable across machines.
inline int cmd_adversarial(const AdversarialOptions& opt) {
  if (opt.out.empty()) {
    std::cerr << "adversarial: --out is required\n";
    return kExitUsage;
  }
  if (opt.n_list.empty() || opt.seeds < 1) {
    std::cerr << "adversarial: need a nonempty --n-list and --seeds >= 1\n";
    return kExitUsage;
  }
  for (std::size_t n : opt.n_list) {
    if (n == 0 || n % 2 != 0) {
      std::cerr << "adversarial: n must be positive and even, got " << n << '\n';
      return kExitUsage;
    }
  }
  try {
    struct Row {
      double greedy = 0.0, mean = 0.0, stddev = 0.0;
    };
    std::vector<Row> rows(opt.n_list.size());
    detail::parallel_cells(opt.n_list.size(), [&](std::size_t cell) {
      const std::size_t n = opt.n_list[cell];
      const VectorSet set = adversarial_set(n);
      Row row;
      row.greedy = herding_objective(set, greedy_order(set, /*center_first=*/false), Norm::L2);
      double sum = 0.0, sum_sq = 0.0;
      for (int s = 0; s < opt.seeds; ++s) {
        const Permutation perm = Permutation::random(
            n, substream(detail::kAdversarialSeed, n, static_cast<std::uint64_t>(s)));
        const double obj = herding_objective(set, perm, Norm::L2);
        sum += obj;
        sum_sq += obj * obj;
      }
      row.mean = sum / opt.seeds;
      const double var = std::max(0.0, sum_sq / opt.seeds - row.mean * row.mean);
      row.stddev = std::sqrt(var);
      rows[cell] = row;
    });

    auto out = detail::open_out(opt.out);
    out << "# schema=1\n";
    out << "n,greedy_obj,random_mean,random_std,seeds\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out << opt.n_list[i] << ',' << fmt_double(rows[i].greedy) << ','
          << fmt_double(rows[i].mean) << ',' << fmt_double(rows[i].stddev) << ',' << opt.seeds
          << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + opt.out);
  } catch (const std::exception& e) {
    std::cerr << "adversarial: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace grab
