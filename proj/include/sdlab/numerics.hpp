#pragma once

// Small numerical kernels shared across modules: banded solves, periodic
// cubic interpolation, Gauss rules and the counter-based random generator.

#include "sdlab/core.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace sdlab {

/// Thomas algorithm for a (non-cyclic) tridiagonal system. `sub[0]` and
/// `super[n-1]` are ignored.
inline std::vector<double> solve_tridiagonal(std::span<const double> sub,
                                             std::span<const double> diag,
                                             std::span<const double> super,
                                             std::span<const double> rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n), d(n), x(n);
  double beta = diag[0];
  if (beta == 0.0) throw Error(ErrorKind::SingularSystem, "numerics", "zero pivot");
  c[0] = super[0] / beta;
  d[0] = rhs[0] / beta;
  for (std::size_t i = 1; i < n; ++i) {
    beta = diag[i] - sub[i] * c[i - 1];
    if (beta == 0.0) throw Error(ErrorKind::SingularSystem, "numerics", "zero pivot");
    c[i] = i + 1 < n ? super[i] / beta : 0.0;
    d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

/// Cyclic tridiagonal system: row i reads
///   sub[i] x[i-1] + diag[i] x[i] + super[i] x[i+1] = rhs[i]   (indices mod n).
/// The corner couplings are peeled off as a rank-one correction
/// (Sherman-Morrison) around a plain Thomas solve.
class CyclicTridiagonal {
 public:
  CyclicTridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> super)
      : sub_(std::move(sub)), diag_(std::move(diag)), super_(std::move(super)) {
    const std::size_t n = diag_.size();
    if (n < 3) throw Error(ErrorKind::SingularSystem, "numerics", "cyclic system needs n >= 3");
    gamma_ = -diag_[0];
    mod_diag_ = diag_;
    mod_diag_[0] -= gamma_;
    mod_diag_[n - 1] -= sub_[0] * super_[n - 1] / gamma_;
    corner_u_.assign(n, 0.0);
    corner_u_[0] = gamma_;
    corner_u_[n - 1] = super_[n - 1];
    corner_v_.assign(n, 0.0);
    corner_v_[0] = 1.0;
    corner_v_[n - 1] = sub_[0] / gamma_;
  }

  std::size_t size() const { return diag_.size(); }

  /// Solve with the reduced (corner-free) matrix T', so that the full matrix
  /// is T' + u v^T.
  std::vector<double> solve_reduced(std::span<const double> rhs) const {
    return solve_tridiagonal(sub_, mod_diag_, super_, rhs);
  }
  const std::vector<double>& corner_u() const { return corner_u_; }
  const std::vector<double>& corner_v() const { return corner_v_; }

  std::vector<double> solve(std::span<const double> rhs) const {
    auto y = solve_reduced(rhs);
    auto z = solve_reduced(corner_u_);
    const double vy = dot(corner_v_, y);
    const double vz = dot(corner_v_, z);
    const double denom = 1.0 + vz;
    if (std::abs(denom) < 1e-300)
      throw Error(ErrorKind::SingularSystem, "numerics", "cyclic system is singular");
    const double f = vy / denom;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= f * z[i];
    return y;
  }

  std::vector<double> apply(std::span<const double> x) const {
    const std::size_t n = diag_.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = sub_[i] * x[(i + n - 1) % n] + diag_[i] * x[i] + super_[i] * x[(i + 1) % n];
    return out;
  }

  static double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }

 private:
  std::vector<double> sub_, diag_, super_, mod_diag_, corner_u_, corner_v_;
  double gamma_ = 0.0;
};

/// Periodic C2 cubic spline through (knots[i], values[i]) with period
/// `period`; knots strictly increasing in [0, period).
class PeriodicCubic {
 public:
  PeriodicCubic() = default;
  PeriodicCubic(std::vector<double> knots, std::vector<double> values, double period)
      : knots_(std::move(knots)), values_(std::move(values)), period_(period) {
    const std::size_t n = knots_.size();
    h_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double next = i + 1 < n ? knots_[i + 1] : knots_[0] + period_;
      h_[i] = next - knots_[i];
    }
    std::vector<double> sub(n), diag(n), super(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
      sub[i] = h_[im];
      diag[i] = 2.0 * (h_[im] + h_[i]);
      super[i] = h_[i];
      rhs[i] = 6.0 * ((values_[ip] - values_[i]) / h_[i] - (values_[i] - values_[im]) / h_[im]);
    }
    second_ = CyclicTridiagonal(sub, diag, super).solve(rhs);
  }

  std::size_t size() const { return knots_.size(); }
  double period() const { return period_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Wrap `u` into [knots[0], knots[0] + period).
  double wrap(double u) const {
    double w = std::fmod(u - knots_[0], period_);
    if (w < 0) w += period_;
    return knots_[0] + w;
  }

  /// Index of the piece containing (wrapped) parameter u.
  std::size_t piece(double u) const {
    u = wrap(u);
    auto it = std::upper_bound(knots_.begin(), knots_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    return i == 0 ? 0 : i - 1;
  }

  /// Value and first two derivatives at u, evaluated on piece i (u may lie
  /// slightly outside the piece; the cubic is extended polynomially).
  std::array<double, 3> eval_on_piece(std::size_t i, double u) const {
    const std::size_t n = knots_.size();
    const std::size_t ip = (i + 1) % n;
    const double h = h_[i];
    const double a = (knots_[i] + h - u) / h;
    const double b = (u - knots_[i]) / h;
    const double y0 = values_[i], y1 = values_[ip];
    const double m0 = second_[i], m1 = second_[ip];
    const double val = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
    const double d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h / 6.0 * m0 +
                      (3.0 * b * b - 1.0) * h / 6.0 * m1;
    const double d2 = a * m0 + b * m1;
    return {val, d1, d2};
  }

  std::array<double, 3> eval(double u) const {
    const double w = wrap(u);
    return eval_on_piece(piece(w), w);
  }

  double operator()(double u) const { return eval(u)[0]; }

 private:
  std::vector<double> knots_, values_, h_, second_;
  double period_ = 1.0;
};

/// Gauss-Legendre nodes/weights on [0, 1].
template <int N>
constexpr std::array<std::pair<double, double>, N> gauss_unit();

template <>
constexpr std::array<std::pair<double, double>, 2> gauss_unit<2>() {
  constexpr double d = 0.28867513459481288225;  // 1/(2 sqrt 3)
  return {{{0.5 - d, 0.5}, {0.5 + d, 0.5}}};
}

template <>
constexpr std::array<std::pair<double, double>, 3> gauss_unit<3>() {
  constexpr double d = 0.38729833462074168852;  // sqrt(3/5)/2
  return {{{0.5 - d, 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 + d, 5.0 / 18.0}}};
}

/// Counter-based generator: the i-th draw is splitmix64(seed + i * golden),
/// so any draw can be reproduced from (seed, counter) alone.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  /// Independent stream for a sub-task, derived from this seed.
  CounterRng fork(std::uint64_t stream) const { return CounterRng(mix(seed_ ^ mix(stream + 1))); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace sdlab
