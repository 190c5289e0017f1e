#pragma once

// Zero-average Poisson problems d_s^2 phi = f - <f> on closed polygonal
// components, H^-1 norms, and potentials of normal velocities.
//
// Discretisation: P1 stiffness K (K u)_i = (u_i - u_{i-1})/h_{i-1} + (u_i - u_{i+1})/h_i
// with lumped mass m_i, so the discrete d_s^2 is -m^{-1} K.

#include "sdlab/geometry.hpp"

#include <Eigen/LU>

#include <array>
#include <functional>

namespace sdlab {

struct PotentialSolve {
  VertexField rhs;
  VertexField solution;
  double residual_norm = 0.0;
  double mean_removed = 0.0;
};

inline Eigen::VectorXd stiffness_apply(const GeometryCache& g, const Eigen::VectorXd& u) {
  Eigen::VectorXd out(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const int im = g.prev(i), ip = g.next(i);
    out[i] = (u[i] - u[im]) / g.edge_length[im] + (u[i] - u[ip]) / g.edge_length[i];
  }
  return out;
}

/// Discrete Laplace-Beltrami -m^{-1} K u.
inline Eigen::VectorXd laplacian_apply(const GeometryCache& g, const Eigen::VectorXd& u) {
  Eigen::VectorXd k = stiffness_apply(g, u);
  for (int i = 0; i < g.size(); ++i) k[i] = -k[i] / g.dual_length[i];
  return k;
}

/// Solves K phi = r (r summing to zero) with the constant mode fixed through
/// the bordered matrix K + alpha 1 1^T, applied as a rank-two Woodbury update
/// of the corner-free tridiagonal factor.
class ZeroMeanSolver {
 public:
  explicit ZeroMeanSolver(const GeometryCache& g) : n_(g.size()) {
    if (n_ < kMinVertices)
      throw Error(ErrorKind::SingularSystem, "poisson",
                  "component has " + std::to_string(n_) + " vertices, need at least 8");
    std::vector<double> sub(n_), diag(n_), super(n_);
    double trace = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double a = 1.0 / g.edge_length[g.prev(i)], b = 1.0 / g.edge_length[i];
      sub[i] = -a;
      diag[i] = a + b;
      super[i] = -b;
      trace += a + b;
    }
    alpha_ = trace / n_ / n_;
    tri_.emplace(sub, diag, super);
    const double sa = std::sqrt(alpha_);
    std::vector<double> ones(n_, sa);
    u_[0] = tri_->corner_u();
    u_[1] = ones;
    v_[0] = tri_->corner_v();
    v_[1] = ones;
    for (int k = 0; k < 2; ++k) z_[k] = tri_->solve_reduced(u_[k]);
    Eigen::Matrix2d cap;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) cap(a, b) = (a == b ? 1.0 : 0.0) + CyclicTridiagonal::dot(v_[a], z_[b]);
    cap_ = cap.fullPivLu();
    if (!cap_.isInvertible()) throw Error(ErrorKind::SingularSystem, "poisson", "capacitance matrix is singular");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
    std::vector<double> rhs(r.data(), r.data() + n_);
    auto y = tri_->solve_reduced(rhs);
    const Eigen::Vector2d w(CyclicTridiagonal::dot(v_[0], y), CyclicTridiagonal::dot(v_[1], y));
    const Eigen::Vector2d c = cap_.solve(w);
    Eigen::VectorXd out(n_);
    for (int i = 0; i < n_; ++i) out[i] = y[i] - c[0] * z_[0][i] - c[1] * z_[1][i];
    return out;
  }

 private:
  int n_;
  double alpha_ = 0.0;
  std::optional<CyclicTridiagonal> tri_;
  std::array<std::vector<double>, 2> u_, v_, z_;
  Eigen::FullPivLU<Eigen::Matrix2d> cap_;
};

/// phi with d_s^2 phi = f - <f> and <phi> = 0 (mass-lumped mean).
inline PotentialSolve solve_zero_average(const GeometryCache& g, const Eigen::VectorXd& f) {
  if (f.size() != g.size()) throw Error(ErrorKind::InvalidCurve, "poisson", "field size does not match component");
  const ZeroMeanSolver solver(g);
  PotentialSolve out;
  out.rhs = {g.component, f};
  out.mean_removed = weighted_mean(g, f);
  Eigen::VectorXd r(g.size());
  for (int i = 0; i < g.size(); ++i) r[i] = -g.dual_length[i] * (f[i] - out.mean_removed);
  Eigen::VectorXd phi = solver.solve(r);
  phi.array() -= weighted_mean(g, phi);
  const Eigen::VectorXd lap = laplacian_apply(g, phi);
  const Eigen::VectorXd centred = f.array() - out.mean_removed;
  out.residual_norm = (lap - centred).lpNorm<Eigen::Infinity>();
  const double scale = f.lpNorm<Eigen::Infinity>();
  if (out.residual_norm > 1e-9 * scale)
    throw Error(ErrorKind::SingularSystem, "poisson",
                "residual " + std::to_string(out.residual_norm) + " exceeds tolerance");
  out.solution = {g.component, std::move(phi)};
  return out;
}

inline double mean_tolerance(const GeometryCache& g, const Eigen::VectorXd& v) {
  return 1e-8 * std::max(integrate(g, v.cwiseAbs()) / g.length, 1e-300);
}

/// phi_V with d_s^2 phi_V = V; V must have (numerically) zero mean.
inline VertexField velocity_potential(const GeometryCache& g, const Eigen::VectorXd& v) {
  const double mean = weighted_mean(g, v);
  if (std::abs(mean) > mean_tolerance(g, v) && std::abs(mean) > 1e-14)
    throw Error(ErrorKind::NonZeroMean, "poisson",
                "velocity mean " + std::to_string(mean) + " on component " + std::to_string(g.component));
  return solve_zero_average(g, v).solution;
}

inline double h_minus1_norm_sq(const GeometryCache& g, const Eigen::VectorXd& v) {
  return grad_norm_sq(g, velocity_potential(g, v).values);
}

inline double h_minus1_norm_sq(const std::vector<GeometryCache>& caches, const std::vector<Eigen::VectorXd>& vs) {
  double s = 0.0;
  for (std::size_t c = 0; c < caches.size(); ++c) s += h_minus1_norm_sq(caches[c], vs[c]);
  return s;
}

using VectorFieldFn = std::function<Vec2(const Vec2&)>;

/// Potential of nu.B with the component mean removed.
inline VertexField nu_dot_B_potential(const GeometryCache& g, const VectorFieldFn& B) {
  Eigen::VectorXd f(g.size());
  for (int i = 0; i < g.size(); ++i) f[i] = g.nu[i].dot(B(g.x[i]));
  return solve_zero_average(g, f).solution;
}

}  // namespace sdlab
