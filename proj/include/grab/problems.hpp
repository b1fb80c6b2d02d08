#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grab/rng.hpp"
#include "grab/vec.hpp"

namespace grab {

// A finite-sum objective f(w) = (1/n) sum_i f_i(w) with exact per-example
// gradients. The l2 term, when present, lives inside every f_i so the
// average recovers it once.
template <typename P>
concept FiniteSumProblem = requires(const P& p, const Vector& w, std::size_t i) {
  { p.size() } -> std::convertible_to<std::size_t>;
  { p.dim() } -> std::convertible_to<std::size_t>;
  { p.example_loss(w, i) } -> std::convertible_to<double>;
  { p.example_grad(w, i) } -> std::convertible_to<Vector>;
};

namespace detail {

inline void check_example_args(std::size_t n, std::size_t d, const Vector& w, std::size_t i) {
  if (i >= n) throw std::out_of_range("example index " + std::to_string(i) + " out of range");
  if (w.size() != d) throw std::invalid_argument("weight dimension mismatch");
}

// Dense d x d solve by Gaussian elimination with partial pivoting. Small
// systems only (closed-form minimizers); throws on (near-)singular input.
inline Vector solve_linear(std::vector<double> a, Vector b) {
  const std::size_t d = b.size();
  if (a.size() != d * d) throw std::invalid_argument("solve_linear: matrix shape mismatch");
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < d; ++r) {
      if (std::abs(a[r * d + col]) > std::abs(a[pivot * d + col])) pivot = r;
    }
    if (std::abs(a[pivot * d + col]) < 1e-12) throw std::runtime_error("solve_linear: singular system");
    if (pivot != col) {
      for (std::size_t j = 0; j < d; ++j) std::swap(a[col * d + j], a[pivot * d + j]);
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / a[col * d + col];
    for (std::size_t r = col + 1; r < d; ++r) {
      const double factor = a[r * d + col] * inv;
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < d; ++j) a[r * d + j] -= factor * a[col * d + j];
      b[r] -= factor * b[col];
    }
  }
  Vector x(d, 0.0);
  for (std::size_t ri = d; ri-- > 0;) {
    double acc = b[ri];
    for (std::size_t j = ri + 1; j < d; ++j) acc -= a[ri * d + j] * x[j];
    x[ri] = acc / a[ri * d + ri];
  }
  return x;
}

}  // namespace detail

// f_i(w) = 1/2 ||B_i w - y_i||^2 + (l2/2) ||w||^2, with an isotropic special
// case B_i = I (then y_i is just a target point x_i). The closed-form
// minimizer solves the normal equations.
class QuadraticSum {
 public:
  // f_i(w) = 1/2 ||w - x_i||^2 + (l2/2) ||w||^2.
  static QuadraticSum targets(std::vector<Vector> points, double l2 = 0.0) {
    QuadraticSum p;
    p.init_common(points.size(), points.empty() ? 0 : points[0].size(), l2);
    p.y_ = std::move(points);
    for (const auto& y : p.y_) {
      if (y.size() != p.d_) throw std::invalid_argument("QuadraticSum: ragged targets");
      if (!all_finite(y)) throw std::invalid_argument("QuadraticSum: non-finite target");
    }
    return p;
  }

  // General B_i (each d x d, row-major) and targets y_i.
  static QuadraticSum general(std::vector<std::vector<double>> mats, std::vector<Vector> ys,
                              double l2 = 0.0) {
    QuadraticSum p;
    if (mats.size() != ys.size()) throw std::invalid_argument("QuadraticSum: n mismatch");
    p.init_common(ys.size(), ys.empty() ? 0 : ys[0].size(), l2);
    for (const auto& m : mats) {
      if (m.size() != p.d_ * p.d_) throw std::invalid_argument("QuadraticSum: matrix shape mismatch");
    }
    p.b_ = std::move(mats);
    p.y_ = std::move(ys);
    return p;
  }

  // Seeded random instance: B_i = I + 0.3 G_i / sqrt(d) with standard normal
  // G_i, y_i standard normal.
  static QuadraticSum random(std::size_t n, std::size_t d, std::uint64_t seed, double l2 = 0.0) {
    SplitMix64 g(substream(seed, 0x71414Du));
    std::vector<std::vector<double>> mats(n, std::vector<double>(d * d, 0.0));
    std::vector<Vector> ys(n, Vector(d, 0.0));
    const double scale = 0.3 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
          mats[i][r * d + c] = (r == c ? 1.0 : 0.0) + scale * normal01(g);
        }
      }
      for (std::size_t j = 0; j < d; ++j) ys[i][j] = normal01(g);
    }
    return general(std::move(mats), std::move(ys), l2);
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  double l2_reg() const { return l2_; }
  bool isotropic() const { return b_.empty(); }
  const Vector& target(std::size_t i) const { return y_[i]; }

  double example_loss(const Vector& w, std::size_t i) const {
    detail::check_example_args(n_, d_, w, i);
    double loss = 0.0;
    if (isotropic()) {
      for (std::size_t j = 0; j < d_; ++j) {
        const double r = w[j] - y_[i][j];
        loss += r * r;
      }
    } else {
      Vector r = residual(w, i);
      loss = norm2_sq(r);
    }
    return 0.5 * loss + 0.5 * l2_ * norm2_sq(w);
  }

  Vector example_grad(const Vector& w, std::size_t i) const {
    detail::check_example_args(n_, d_, w, i);
    Vector g(d_, 0.0);
    if (isotropic()) {
      for (std::size_t j = 0; j < d_; ++j) g[j] = w[j] - y_[i][j];
    } else {
      const Vector r = residual(w, i);  // B_i w - y_i
      const auto& m = b_[i];
      for (std::size_t row = 0; row < d_; ++row) {
        const double rv = r[row];
        if (rv == 0.0) continue;
        for (std::size_t col = 0; col < d_; ++col) g[col] += m[row * d_ + col] * rv;  // B^T r
      }
    }
    if (l2_ != 0.0) axpy(l2_, w, g);
    return g;
  }

  // Solves ((1/n) sum B_i^T B_i + l2 I) w = (1/n) sum B_i^T y_i; for the
  // isotropic case that is mean(x) / (1 + l2).
  Vector minimizer() const {
    if (isotropic()) {
      Vector w(d_, 0.0);
      for (const auto& y : y_) axpy(1.0, y, w);
      const double f = 1.0 / (static_cast<double>(n_) * (1.0 + l2_));
      for (auto& v : w) v *= f;
      return w;
    }
    std::vector<double> a(d_ * d_, 0.0);
    Vector rhs(d_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& m = b_[i];
      for (std::size_t r = 0; r < d_; ++r) {
        for (std::size_t c1 = 0; c1 < d_; ++c1) {
          const double mrc1 = m[r * d_ + c1];
          if (mrc1 == 0.0) continue;
          for (std::size_t c2 = 0; c2 < d_; ++c2) a[c1 * d_ + c2] += mrc1 * m[r * d_ + c2];
          rhs[c1] += mrc1 * y_[i][r];
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (auto& v : a) v *= inv_n;
    for (auto& v : rhs) v *= inv_n;
    for (std::size_t j = 0; j < d_; ++j) a[j * d_ + j] += l2_;
    return detail::solve_linear(std::move(a), std::move(rhs));
  }

 private:
  void init_common(std::size_t n, std::size_t d, double l2) {
    if (n == 0 || d == 0) throw std::invalid_argument("QuadraticSum: empty problem");
    if (!(l2 >= 0.0)) throw std::invalid_argument("QuadraticSum: l2_reg must be >= 0");
    n_ = n;
    d_ = d;
    l2_ = l2;
  }

  Vector residual(const Vector& w, std::size_t i) const {
    const auto& m = b_[i];
    Vector r(d_, 0.0);
    for (std::size_t row = 0; row < d_; ++row) {
      double acc = -y_[i][row];
      for (std::size_t col = 0; col < d_; ++col) acc += m[row * d_ + col] * w[col];
      r[row] = acc;
    }
    return r;
  }

  std::size_t n_ = 0, d_ = 0;
  double l2_ = 0.0;
  std::vector<std::vector<double>> b_;  // empty => isotropic (B_i = I)
  std::vector<Vector> y_;
};

// Binary logistic regression with labels in {-1,+1}:
// f_i(w) = log(1 + exp(-y_i <x_i, w>)) + (l2/2) ||w||^2.
class LogisticRegression {
 public:
  LogisticRegression(std::vector<Vector> features, std::vector<double> labels, double l2 = 0.0)
      : x_(std::move(features)), y_(std::move(labels)), l2_(l2) {
    if (x_.empty() || x_.size() != y_.size()) throw std::invalid_argument("LogisticRegression: bad sizes");
    if (!(l2 >= 0.0)) throw std::invalid_argument("LogisticRegression: l2_reg must be >= 0");
    d_ = x_[0].size();
    for (const auto& x : x_) {
      if (x.size() != d_) throw std::invalid_argument("LogisticRegression: ragged features");
      if (!all_finite(x)) throw std::invalid_argument("LogisticRegression: non-finite feature");
    }
    for (double label : y_) {
      if (label != 1.0 && label != -1.0) throw std::invalid_argument("LogisticRegression: labels must be +/-1");
    }
  }

  // Seeded separable-ish instance: standard normal features, labels from a
  // random ground-truth direction with 10% flips.
  static LogisticRegression random(std::size_t n, std::size_t d, std::uint64_t seed, double l2 = 0.0) {
    SplitMix64 g(substream(seed, 0x10617Eu));
    Vector truth(d);
    for (auto& v : truth) v = normal01(g);
    std::vector<Vector> xs(n, Vector(d, 0.0));
    std::vector<double> ys(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) xs[i][j] = normal01(g);
      const double margin = dot(xs[i], truth);
      double label = margin >= 0.0 ? 1.0 : -1.0;
      if (uniform01(g) < 0.1) label = -label;
      ys[i] = label;
    }
    return LogisticRegression(std::move(xs), std::move(ys), l2);
  }

  // Mirror-symmetric instance: for each random base x, the four examples
  // (x,+1), (-x,+1), (x,-1), (-x,-1). Per-example gradients at w = 0 sum to
  // the zero vector exactly. n must be a multiple of 4.
  static LogisticRegression mirrored(std::size_t n, std::size_t d, std::uint64_t seed,
                                     double l2 = 0.0) {
    if (n == 0 || n % 4 != 0) throw std::invalid_argument("LogisticRegression::mirrored: n must be a multiple of 4");
    SplitMix64 g(substream(seed, 0x312220u));
    std::vector<Vector> xs;
    std::vector<double> ys;
    xs.reserve(n);
    ys.reserve(n);
    for (std::size_t b = 0; b < n / 4; ++b) {
      Vector x(d);
      for (auto& v : x) v = normal01(g);
      Vector neg(d);
      for (std::size_t j = 0; j < d; ++j) neg[j] = -x[j];
      xs.push_back(x);
      ys.push_back(1.0);
      xs.push_back(neg);
      ys.push_back(1.0);
      xs.push_back(x);
      ys.push_back(-1.0);
      xs.push_back(neg);
      ys.push_back(-1.0);
    }
    return LogisticRegression(std::move(xs), std::move(ys), l2);
  }

  std::size_t size() const { return x_.size(); }
  std::size_t dim() const { return d_; }
  double l2_reg() const { return l2_; }

  double example_loss(const Vector& w, std::size_t i) const {
    detail::check_example_args(size(), d_, w, i);
    const double m = y_[i] * dot(x_[i], w);
    // softplus(-m) = log(1 + exp(-m)), computed without overflow
    const double sp = m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    return sp + 0.5 * l2_ * norm2_sq(w);
  }

  Vector example_grad(const Vector& w, std::size_t i) const {
    detail::check_example_args(size(), d_, w, i);
    const double m = y_[i] * dot(x_[i], w);
    const double sigma = 1.0 / (1.0 + std::exp(m));  // sigmoid(-m)
    Vector g(d_, 0.0);
    axpy(-y_[i] * sigma, x_[i], g);
    if (l2_ != 0.0) axpy(l2_, w, g);
    return g;
  }

 private:
  std::vector<Vector> x_;
  std::vector<double> y_;
  double l2_ = 0.0;
  std::size_t d_ = 0;
};

// One-hidden-layer regression net: out = W2 tanh(W1 x + b1) + b2, squared
// loss, analytic backprop. Parameters are packed [W1 | b1 | W2 | b2] into a
// single flat vector; the default 8-8-1 net has 81 parameters.
class TinyMlp {
 public:
  // Labels come from a hidden teacher net of the same shape.
  static TinyMlp teacher(std::size_t n, std::uint64_t seed, std::size_t d_in = 8,
                         std::size_t hidden = 8, double l2 = 0.0) {
    TinyMlp p(d_in, hidden, l2);
    SplitMix64 g(substream(seed, 0x317B4Du));
    Vector teacher_params(p.dim());
    for (auto& v : teacher_params) v = normal01(g);
    p.x_.assign(n, Vector(d_in, 0.0));
    p.y_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : p.x_[i]) v = normal01(g);
      p.y_[i] = p.forward(teacher_params, p.x_[i]);
    }
    return p;
  }

  std::size_t size() const { return x_.size(); }
  std::size_t dim() const { return (d_in_ + 2) * h_ + 1; }
  std::size_t input_dim() const { return d_in_; }
  double l2_reg() const { return l2_; }

  double example_loss(const Vector& w, std::size_t i) const {
    detail::check_example_args(size(), dim(), w, i);
    const double r = forward(w, x_[i]) - y_[i];
    return 0.5 * r * r + 0.5 * l2_ * norm2_sq(w);
  }

  Vector example_grad(const Vector& w, std::size_t i) const {
    detail::check_example_args(size(), dim(), w, i);
    const Vector& x = x_[i];
    // forward, keeping activations
    Vector ha(h_);
    double out = w[off_b2()];
    for (std::size_t u = 0; u < h_; ++u) {
      double pre = w[off_b1() + u];
      for (std::size_t j = 0; j < d_in_; ++j) pre += w[off_w1() + u * d_in_ + j] * x[j];
      ha[u] = std::tanh(pre);
      out += w[off_w2() + u] * ha[u];
    }
    // backward
    const double dout = out - y_[i];
    Vector g(dim(), 0.0);
    g[off_b2()] = dout;
    for (std::size_t u = 0; u < h_; ++u) {
      g[off_w2() + u] = dout * ha[u];
      const double dpre = dout * w[off_w2() + u] * (1.0 - ha[u] * ha[u]);
      g[off_b1() + u] = dpre;
      for (std::size_t j = 0; j < d_in_; ++j) g[off_w1() + u * d_in_ + j] = dpre * x[j];
    }
    if (l2_ != 0.0) axpy(l2_, w, g);
    return g;
  }

 private:
  TinyMlp(std::size_t d_in, std::size_t hidden, double l2) : d_in_(d_in), h_(hidden), l2_(l2) {
    if (d_in == 0 || hidden == 0) throw std::invalid_argument("TinyMlp: empty layer");
    if (!(l2 >= 0.0)) throw std::invalid_argument("TinyMlp: l2_reg must be >= 0");
  }

  std::size_t off_w1() const { return 0; }
  std::size_t off_b1() const { return h_ * d_in_; }
  std::size_t off_w2() const { return h_ * d_in_ + h_; }
  std::size_t off_b2() const { return h_ * d_in_ + 2 * h_; }

  double forward(const Vector& w, const Vector& x) const {
    double out = w[off_b2()];
    for (std::size_t u = 0; u < h_; ++u) {
      double pre = w[off_b1() + u];
      for (std::size_t j = 0; j < d_in_; ++j) pre += w[off_w1() + u * d_in_ + j] * x[j];
      out += w[off_w2() + u] * std::tanh(pre);
    }
    return out;
  }

  std::size_t d_in_, h_;
  double l2_ = 0.0;
  std::vector<Vector> x_;
  std::vector<double> y_;
};

template <FiniteSumProblem P>
double full_loss(const P& p, const Vector& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += p.example_loss(w, i);
  return acc / static_cast<double>(p.size());
}

template <FiniteSumProblem P>
Vector full_grad(const P& p, const Vector& w) {
  Vector acc(p.dim(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) axpy(1.0, p.example_grad(w, i), acc);
  const double inv_n = 1.0 / static_cast<double>(p.size());
  for (auto& v : acc) v *= inv_n;
  return acc;
}

// Measured lower bound on the gradient-error constant: the largest distance
// between any per-example gradient and the full gradient over the sampled
// weight vectors.
template <FiniteSumProblem P>
double estimate_varsigma(const P& p, const std::vector<Vector>& w_samples) {
  if (w_samples.empty()) throw std::invalid_argument("estimate_varsigma: need at least one sample point");
  double worst = 0.0;
  for (const auto& w : w_samples) {
    const Vector mean = full_grad(p, w);
    for (std::size_t i = 0; i < p.size(); ++i) {
      Vector g = p.example_grad(w, i);
      axpy(-1.0, mean, g);
      worst = std::max(worst, norm2(g));
    }
  }
  return worst;
}

}  // namespace grab
