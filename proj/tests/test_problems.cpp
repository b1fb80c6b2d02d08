#include <catch2/catch_amalgamated.hpp>

#include "grab/problems.hpp"
#include "helpers.hpp"

using namespace grab;

namespace {

Vector random_weights(std::size_t d, std::uint64_t seed, double scale = 1.0) {
  Vector w(d);
  SplitMix64 g(seed);
  for (auto& v : w) v = scale * normal01(g);
  return w;
}

}  // namespace

TEST_CASE("isotropic quadratic basics") {
  const QuadraticSum p = QuadraticSum::targets({{1.0, 2.0}, {-1.0, -2.0}});
  CHECK(p.size() == 2);
  CHECK(p.dim() == 2);

  // at w = x_i the example is exactly flat
  CHECK(p.example_loss({1.0, 2.0}, 0) == 0.0);
  CHECK(p.example_grad({1.0, 2.0}, 0) == Vector{0.0, 0.0});

  // mirrored targets put the optimum at the origin
  CHECK(p.minimizer() == Vector{0.0, 0.0});
  CHECK(full_grad(p, {0.0, 0.0}) == Vector{0.0, 0.0});

  CHECK_THROWS_AS(p.example_grad({1.0, 2.0}, 2), std::out_of_range);
  CHECK_THROWS_AS(p.example_grad({1.0}, 0), std::invalid_argument);
}

TEST_CASE("general quadratic minimizer zeroes the full gradient") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const QuadraticSum p = QuadraticSum::random(12, 6, seed, seed % 2 ? 0.05 : 0.0);
    const Vector w_star = p.minimizer();
    const Vector g = full_grad(p, w_star);
    CHECK(norm2(g) <= 1e-10);

    // and nearby points are strictly worse
    const double best = full_loss(p, w_star);
    Vector nudged = w_star;
    nudged[0] += 0.05;
    CHECK(full_loss(p, nudged) > best);
  }
}

TEST_CASE("full_grad is the mean of example gradients") {
  const QuadraticSum p = QuadraticSum::random(9, 4, 77);
  const Vector w = random_weights(4, 3);
  Vector mean(4, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) axpy(1.0, p.example_grad(w, i), mean);
  for (auto& v : mean) v /= 9.0;
  const Vector fg = full_grad(p, w);
  CHECK(oracle::rel_vec_err(fg, mean) < 1e-14);
}

TEST_CASE("tiny descent step decreases convex losses") {
  const QuadraticSum quad = QuadraticSum::random(8, 5, 11);
  const LogisticRegression lr = LogisticRegression::random(16, 5, 12, 1e-2);
  const Vector w = random_weights(5, 21);

  auto check_descent = [&](const auto& p) {
    const Vector g = full_grad(p, w);
    if (norm2(g) < 1e-9) return;
    Vector stepped = w;
    axpy(-1e-4, g, stepped);
    CHECK(full_loss(p, stepped) < full_loss(p, w));
  };
  check_descent(quad);
  check_descent(lr);
}

TEST_CASE("logistic regression validates inputs") {
  CHECK_THROWS_AS(LogisticRegression({{1.0}}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(LogisticRegression({{1.0}, {2.0}}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(LogisticRegression({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(LogisticRegression({{1.0}}, {1.0}, -0.5), std::invalid_argument);
}

TEST_CASE("mirrored logreg gradients cancel at the origin") {
  const LogisticRegression p = LogisticRegression::mirrored(16, 5, 99);
  Vector sum(5, 0.0);
  const Vector origin(5, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) axpy(1.0, p.example_grad(origin, i), sum);
  for (double v : sum) CHECK(std::abs(v) <= 1e-15);
  CHECK_THROWS_AS(LogisticRegression::mirrored(6, 5, 99), std::invalid_argument);
}

TEST_CASE("finite differences confirm every gradient implementation") {
  const QuadraticSum quad = QuadraticSum::random(6, 5, 31);
  const LogisticRegression lr = LogisticRegression::random(8, 6, 32, 1e-2);
  const TinyMlp mlp = TinyMlp::teacher(5, 33);
  CHECK(mlp.dim() == 81);

  auto check_fd = [](const auto& p, std::uint64_t seed) {
    SplitMix64 g(seed);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector w = random_weights(p.dim(), g(), 0.7);
      const std::size_t i = static_cast<std::size_t>(g() % p.size());
      const Vector analytic = p.example_grad(w, i);
      const Vector numeric = oracle::fd_gradient(p, w, i);
      INFO("trial " << trial << " example " << i);
      CHECK(oracle::rel_vec_err(analytic, numeric) <= 1e-5);
    }
  };
  check_fd(quad, 601);
  check_fd(lr, 602);
  check_fd(mlp, 603);
}

TEST_CASE("estimate_varsigma measures gradient spread") {
  // all identical examples: zero spread no matter where we look
  const QuadraticSum same = QuadraticSum::targets({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
  CHECK(estimate_varsigma(same, {random_weights(2, 5), random_weights(2, 6)}) == 0.0);

  // isotropic quadratic: spread equals max_i ||x_i - mean(x)||, for any w
  const std::vector<Vector> points = {{1.0, 0.0}, {0.0, 2.0}, {-3.0, 1.0}, {0.5, -0.5}};
  const QuadraticSum iso = QuadraticSum::targets(points);
  Vector mean(2, 0.0);
  for (const auto& x : points) axpy(1.0, x, mean);
  for (auto& v : mean) v /= 4.0;
  double want = 0.0;
  for (const auto& x : points) {
    Vector diff = x;
    axpy(-1.0, mean, diff);
    want = std::max(want, norm2(diff));
  }
  const double at_zero = estimate_varsigma(iso, {Vector(2, 0.0)});
  const double elsewhere = estimate_varsigma(iso, {random_weights(2, 8, 3.0)});
  CHECK(at_zero == Catch::Approx(want).margin(1e-9));
  CHECK(elsewhere == Catch::Approx(want).margin(1e-9));

  // monotone in the sample set
  const LogisticRegression lr = LogisticRegression::random(12, 4, 3);
  const Vector w1 = random_weights(4, 41), w2 = random_weights(4, 42);
  CHECK(estimate_varsigma(lr, {w1}) <= estimate_varsigma(lr, {w1, w2}) + 1e-15);
  CHECK_THROWS_AS(estimate_varsigma(lr, {}), std::invalid_argument);
}

TEST_CASE("problem generators are deterministic") {
  const TinyMlp a = TinyMlp::teacher(6, 77);
  const TinyMlp b = TinyMlp::teacher(6, 77);
  const Vector w = random_weights(a.dim(), 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.example_loss(w, i) == b.example_loss(w, i));
  }
  const LogisticRegression c = LogisticRegression::random(10, 3, 5);
  const LogisticRegression d2 = LogisticRegression::random(10, 3, 5);
  const Vector w2 = random_weights(3, 10);
  CHECK(full_loss(c, w2) == full_loss(d2, w2));
}

TEST_CASE("linear solver oracle check") {
  SplitMix64 g(2718);
  const std::size_t d = 7;
  std::vector<double> a(d * d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t cidx = 0; cidx < d; ++cidx) a[r * d + cidx] = normal01(g);
    a[r * d + r] += 6.0;  // diagonally dominant, comfortably nonsingular
  }
  Vector x_true(d);
  for (auto& v : x_true) v = normal01(g);
  Vector b(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t cidx = 0; cidx < d; ++cidx) b[r] += a[r * d + cidx] * x_true[cidx];
  }
  const Vector x = grab::detail::solve_linear(a, b);
  CHECK(oracle::rel_vec_err(x, x_true) < 1e-10);

  std::vector<double> singular(4, 1.0);  // 2x2 all-ones
  CHECK_THROWS_AS(grab::detail::solve_linear(singular, {1.0, 2.0}), std::runtime_error);
}
