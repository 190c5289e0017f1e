#pragma once

// Extension field B with nu*.B = V* on the reference curve and div B = 0 in
// the 2 delta tube, the trivial extension Bbar, reference potentials, and the
// closedness residual of B wedge xi.
//
// B = chi(s) grad phi where phi is a sum of logarithmic point sources placed
// 3 delta outside the reference region, fitted in the least-squares sense to
// the Neumann data, and chi is a C2 cutoff equal to 1 for s <= 2 delta and 0
// for s >= 2.5 delta.

#include "sdlab/calibration.hpp"
#include "sdlab/poisson.hpp"

#include <Eigen/Dense>

namespace sdlab {

struct BFieldOptions {
  double source_offset = 3.0;   // in units of delta
  double min_source_sdist = 2.6;
  int max_sources = 256;
  int max_collocation = 1024;
  double max_fit_residual = 1e-3;  // relative least-squares residual
  double regularization = 1e-6;    // Tikhonov weight relative to the largest column norm
};

class BField {
 public:
  BField() = default;

  BField(std::shared_ptr<const ReferenceCurve> ref, const std::vector<Eigen::VectorXd>& v_star, double delta,
         const BFieldOptions& opt = {})
      : ref_(std::move(ref)), delta_(delta) {
    const auto& curve = ref_->curve();
    if (v_star.size() != curve.size())
      throw Error(ErrorKind::InvalidCurve, "extension", "one velocity field per reference component required");
    const auto caches = build_geometry(curve, false);
    double l1 = 0.0;
    for (std::size_t c = 0; c < caches.size(); ++c) {
      const double integral = integrate(caches[c], v_star[c]);
      const double abs_integral = integrate(caches[c], v_star[c].cwiseAbs());
      l1 += abs_integral;
      if (std::abs(integral) > 1e-8 * abs_integral && std::abs(integral) > 1e-300)
        throw Error(ErrorKind::NonZeroMean, "extension",
                    "reference velocity has nonzero mean on component " + std::to_string(curve[c].id));
    }
    center_ = Vec2::Zero();
    int count = 0;
    for (const auto& comp : curve.components)
      for (const auto& p : comp.vertices) center_ += p, ++count;
    center_ /= count;
    double rmax = 0.0;
    for (const auto& comp : curve.components)
      for (const auto& p : comp.vertices) rmax = std::max(rmax, (p - center_).norm());
    radius_ = rmax + 2.5 * delta_;
    if (l1 == 0.0) return;  // stationary reference: B = 0

    // Collocation on the reference vertices, sources offset along nu*.
    std::vector<Vec2> col_x, col_n;
    std::vector<double> col_v;
    int total = 0;
    for (const auto& comp : curve.components) total += static_cast<int>(comp.vertices.size());
    const int cstride = std::max(1, (total + opt.max_collocation - 1) / opt.max_collocation);
    const int nsrc = std::min(opt.max_sources, std::max(8, total / 2));
    for (std::size_t c = 0; c < curve.size(); ++c) {
      const auto& knots = ref_->splines()[c].x.knots();
      const int n = static_cast<int>(knots.size());
      for (int i = 0; i < n; i += cstride) {
        col_x.push_back(curve[c].vertices[i]);
        col_n.push_back(ref_->normal(static_cast<int>(c), knots[i]));
        col_v.push_back(v_star[c][i]);
      }
      const double period = ref_->splines()[c].x.period();
      const int ns = std::max(8, static_cast<int>(std::lround(nsrc * caches[c].length / total_length(caches))));
      for (int k = 0; k < ns; ++k) {
        const double u = knots[0] + period * (k + 0.5) / ns;
        const Vec2 y = ref_->point(static_cast<int>(c), u) + opt.source_offset * delta_ * ref_->normal(static_cast<int>(c), u);
        const DistanceQuery q = ref_->query(y);
        if (q.s >= opt.min_source_sdist * delta_) sources_.push_back(y);
      }
    }
    const int m = static_cast<int>(col_x.size()), k = static_cast<int>(sources_.size());
    Eigen::MatrixXd A(m, k);
    Eigen::VectorXd rhs(m);
    for (int i = 0; i < m; ++i) {
      rhs[i] = col_v[i];
      for (int j = 0; j < k; ++j) {
        const Vec2 r = col_x[i] - sources_[j];
        A(i, j) = col_n[i].dot(r) / r.squaredNorm();
      }
    }
    const double lambda = opt.regularization * A.colwise().norm().maxCoeff();
    Eigen::MatrixXd Aug(m + k, k);
    Aug << A, lambda * Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd rhs_aug = Eigen::VectorXd::Zero(m + k);
    rhs_aug.head(m) = rhs;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Aug);
    weights_ = qr.solve(rhs_aug);
    fit_residual_ = (A * weights_ - rhs).norm() / std::max(rhs.norm(), 1e-300);
    if (!std::isfinite(fit_residual_) || fit_residual_ > opt.max_fit_residual)
      throw Error(ErrorKind::RankDeficient, "extension",
                  "Neumann fit residual " + std::to_string(fit_residual_) + " too large");
    boundary_error_ = 0.0;
    for (std::size_t c = 0; c < curve.size(); ++c) {
      const auto& knots = ref_->splines()[c].x.knots();
      for (int i = 0; i < static_cast<int>(knots.size()); ++i) {
        const Vec2 n = ref_->normal(static_cast<int>(c), knots[i]);
        boundary_error_ = std::max(boundary_error_, std::abs(n.dot(grad_phi(curve[c].vertices[i])) - v_star[c][i]));
      }
    }
  }

  bool zero() const { return sources_.empty(); }
  double delta() const { return delta_; }
  double support_radius() const { return radius_; }
  Vec2 center() const { return center_; }
  double fit_residual() const { return fit_residual_; }
  /// max over reference vertices of |nu* . B - V*|
  double boundary_error() const { return boundary_error_; }
  const std::vector<Vec2>& sources() const { return sources_; }

  Vec2 grad_phi(const Vec2& x) const {
    Vec2 g = Vec2::Zero();
    for (std::size_t j = 0; j < sources_.size(); ++j) {
      const Vec2 r = x - sources_[j];
      g += weights_[j] * r / r.squaredNorm();
    }
    return g;
  }

  Eigen::Matrix2d hess_phi(const Vec2& x) const {
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (std::size_t j = 0; j < sources_.size(); ++j) {
      const Vec2 r = x - sources_[j];
      const double r2 = r.squaredNorm();
      h += weights_[j] * (Eigen::Matrix2d::Identity() / r2 - 2.0 * r * r.transpose() / (r2 * r2));
    }
    return h;
  }

  /// Cutoff in the signed distance: 1 for s <= 2 delta, 0 for s >= 2.5 delta.
  std::array<double, 2> chi(double s) const {
    const double a = 2.0 * delta_, w = 0.5 * delta_;
    if (s <= a) return {1.0, 0.0};
    if (s >= a + w) return {0.0, 0.0};
    const auto r = hermite5(s - a, w, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    return {r[0], r[1]};
  }

  Vec2 operator()(const Vec2& x) const {
    if (zero() || (x - center_).norm() >= radius_) return Vec2::Zero();
    const DistanceQuery q = ref_->query(x, 2.5 * delta_);
    if (q.s >= 2.5 * delta_) return Vec2::Zero();
    return chi(q.s)[0] * grad_phi(x);
  }

  /// Jacobian dB_i/dx_j, analytic.
  Eigen::Matrix2d jacobian(const Vec2& x) const {
    if (zero() || (x - center_).norm() >= radius_) return Eigen::Matrix2d::Zero();
    const DistanceQuery q = ref_->query(x, 2.5 * delta_);
    if (q.s >= 2.5 * delta_) return Eigen::Matrix2d::Zero();
    const auto c = chi(q.s);
    Eigen::Matrix2d j = c[0] * hess_phi(x);
    if (c[1] != 0.0) j += c[1] * grad_phi(x) * q.grad.transpose();
    return j;
  }

  double divergence(const Vec2& x) const { return jacobian(x).trace(); }

  /// Central-difference divergence with step h.
  double divergence_fd(const Vec2& x, double h) const {
    const Vec2 ex(h, 0.0), ey(0.0, h);
    return ((*this)(x + ex).x() - (*this)(x - ex).x() + (*this)(x + ey).y() - (*this)(x - ey).y()) / (2.0 * h);
  }

  /// Sampled sup norms of B and div B on a grid over the support disc.
  std::pair<double, double> sup_norms(int grid = 200) const {
    if (zero()) return {0.0, 0.0};
    double bmax = 0.0, dmax = 0.0;
    for (int i = 0; i <= grid; ++i)
      for (int j = 0; j <= grid; ++j) {
        const Vec2 x = center_ + radius_ * Vec2(-1.0 + 2.0 * i / grid, -1.0 + 2.0 * j / grid);
        bmax = std::max(bmax, (*this)(x).norm());
        dmax = std::max(dmax, std::abs(divergence(x)));
      }
    // The cutoff shell carries the divergence; scan it densely along normals.
    for (std::size_t c = 0; c < ref_->splines().size(); ++c) {
      const auto& knots = ref_->splines()[c].x.knots();
      for (std::size_t i = 0; i < knots.size(); ++i) {
        const Vec2 p = ref_->point(static_cast<int>(c), knots[i]);
        const Vec2 n = ref_->normal(static_cast<int>(c), knots[i]);
        for (int k = 0; k <= 20; ++k) {
          const Vec2 x = p + (2.0 + 0.5 * k / 20.0) * delta_ * n;
          dmax = std::max(dmax, std::abs(divergence(x)));
        }
        bmax = std::max(bmax, (*this)(p).norm());
      }
    }
    return {bmax, dmax};
  }

  /// Sampled Lipschitz constant of B (difference quotients on a grid).
  double lipschitz_estimate(int grid = 100) const {
    if (zero()) return 0.0;
    double lip = 0.0;
    const double h = 2.0 * radius_ / grid;
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j) {
        const Vec2 x = center_ + Vec2(-radius_ + i * h, -radius_ + j * h);
        const Vec2 b = (*this)(x);
        lip = std::max(lip, ((*this)(Vec2(x + Vec2(h, 0))) - b).norm() / h);
        lip = std::max(lip, ((*this)(Vec2(x + Vec2(0, h))) - b).norm() / h);
      }
    return lip;
  }

 private:
  static double total_length(const std::vector<GeometryCache>& caches) {
    double l = 0.0;
    for (const auto& g : caches) l += g.length;
    return l;
  }

  std::shared_ptr<const ReferenceCurve> ref_;
  double delta_ = 0.25;
  std::vector<Vec2> sources_;
  Eigen::VectorXd weights_;
  Vec2 center_ = Vec2::Zero();
  double radius_ = 0.0;
  double fit_residual_ = 0.0;
  double boundary_error_ = 0.0;
};

inline BField build_B(std::shared_ptr<const ReferenceCurve> ref, const std::vector<Eigen::VectorXd>& v_star,
                      double delta, const BFieldOptions& opt = {}) {
  return BField(std::move(ref), v_star, delta, opt);
}

struct DivergenceProfile {
  double slope = 0.0;          // least-squares C in |div B| ~ C dist
  double max_ratio = 0.0;      // max |div B| / dist over the outward samples
  double linear_deviation = 0.0;  // max relative deviation of the per-distance means from the fit
  double interior_max = 0.0;   // max |div B| at depth >= delta/4 inside the reference region
};

inline DivergenceProfile divergence_decay_profile(const BField& B, const ReferenceCurve& ref) {
  DivergenceProfile p;
  if (B.zero()) return p;
  const double d = B.delta();
  const double h = 1e-4 * d;
  const std::array<double, 3> dists = {d / 8, d / 4, d / 2};
  std::array<double, 3> mean = {0, 0, 0};
  int count = 0;
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < ref.splines().size(); ++c) {
    const auto& knots = ref.splines()[c].x.knots();
    const int stride = std::max<int>(1, static_cast<int>(knots.size()) / 64);
    for (std::size_t i = 0; i < knots.size(); i += stride) {
      const Vec2 x0 = ref.point(static_cast<int>(c), knots[i]);
      const Vec2 n = ref.normal(static_cast<int>(c), knots[i]);
      for (int k = 0; k < 3; ++k) {
        const double v = std::abs(B.divergence_fd(x0 + dists[k] * n, h));
        mean[k] += v;
        num += dists[k] * v;
        den += dists[k] * dists[k];
        p.max_ratio = std::max(p.max_ratio, v / dists[k]);
      }
      for (double depth : {d / 4, d / 2, d})
        p.interior_max = std::max(p.interior_max, std::abs(B.divergence_fd(x0 - depth * n, h)));
      ++count;
    }
  }
  p.slope = num / den;
  for (int k = 0; k < 3; ++k) {
    mean[k] /= count;
    const double fit = p.slope * dists[k];
    if (fit > 0.0) p.linear_deviation = std::max(p.linear_deviation, std::abs(mean[k] - fit) / fit);
  }
  return p;
}

/// Bbar(x) = eta(s(x)) B(pi*(x)).
inline Vec2 trivial_extension_Bbar(const Calibration& calib, const BField& B, const Vec2& x) {
  const CalibrationPoint p = calib.at(x);
  if (!p.in_tube) return Vec2::Zero();
  return calib.profile().eta(p.s) * B(p.proj);
}

struct StarPotential {
  std::vector<VertexField> phi;  // per reference component, on its vertices
  std::vector<PeriodicCubic> interp;
  std::shared_ptr<const ReferenceCurve> ref;
  double residual = 0.0;  // max |d_s^2 phi* - V*|

  /// phi*(pi*(x)) zeta(s(x)).
  double extension(const Calibration& calib, const Vec2& x) const {
    const CalibrationPoint p = calib.at(x);
    if (p.dist.far || p.zeta == 0.0) return 0.0;
    return interp[p.dist.component](p.dist.param) * p.zeta;
  }

  /// Arc-length derivative of phi* at the foot point of x.
  double foot_derivative(const CalibrationPoint& p) const {
    const int c = p.dist.component;
    const double du = interp[c].eval(p.dist.param)[1];
    return du / ref->jet(c, p.dist.param)[1].norm();
  }
};

inline StarPotential star_potentials(std::shared_ptr<const ReferenceCurve> ref, const std::vector<Eigen::VectorXd>& v_star) {
  StarPotential sp;
  sp.ref = ref;
  const auto caches = build_geometry(ref->curve(), false);
  for (std::size_t c = 0; c < caches.size(); ++c) {
    VertexField phi = velocity_potential(caches[c], v_star[c]);
    const Eigen::VectorXd lap = laplacian_apply(caches[c], phi.values);
    sp.residual = std::max(sp.residual, (lap - v_star[c]).lpNorm<Eigen::Infinity>());
    const auto& knots = ref->splines()[c].x.knots();
    std::vector<double> vals(phi.values.data(), phi.values.data() + phi.values.size());
    sp.interp.emplace_back(knots, vals, ref->splines()[c].x.period());
    sp.phi.push_back(std::move(phi));
  }
  return sp;
}

struct ChainRuleReport {
  int samples = 0;
  double max_residual = 0.0;         // |d_{s*} phi*_{xi.B} - zeta (1 - s kappa*) (d_s phi*) o pi*|
  double max_residual_plus = 0.0;    // same with the factor (1 + s kappa*)
  double scale = 0.0;                // max |d_{s*} phi*_{xi.B}|
};

/// Chain rule for the extended potential, checked at points on normal rays
/// through the reference vertices at the given signed offsets.
inline ChainRuleReport chain_rule_check(const Calibration& calib, const StarPotential& sp,
                                        const std::vector<double>& offsets, int stride = 1) {
  ChainRuleReport r;
  const auto& ref = calib.reference();
  for (std::size_t c = 0; c < ref.splines().size(); ++c) {
    const auto& knots = ref.splines()[c].x.knots();
    for (std::size_t i = 0; i < knots.size(); i += std::max(1, stride)) {
      const Vec2 p0 = ref.point(static_cast<int>(c), knots[i]);
      const Vec2 n = ref.normal(static_cast<int>(c), knots[i]);
      for (double off : offsets) {
        const Vec2 x = p0 + off * n;
        const CalibrationPoint p = calib.at(x);
        const double lhs = calib.d_sstar([&](const Vec2& y) { return sp.extension(calib, y); }, x);
        const double base = p.zeta * sp.foot_derivative(p);
        const double rhs = base * (1.0 - p.s * p.kappa_star);
        const double rhs_plus = base * (1.0 + p.s * p.kappa_star);
        r.max_residual = std::max(r.max_residual, std::abs(lhs - rhs));
        r.max_residual_plus = std::max(r.max_residual_plus, std::abs(lhs - rhs_plus));
        r.scale = std::max(r.scale, std::abs(lhs));
        ++r.samples;
      }
    }
  }
  return r;
}

/// Quadrature of (div xi) nu.B + nu.(xi.grad)B - (div B) nu.xi - nu.(B.grad)xi
/// over the curve, derivatives by central differences. The exact value is 0.
inline double gauss_wedge_residual(const PolyCurve& curve, const VectorFieldFn& B,
                                   const std::function<Vec2(const Vec2&)>& xi, double h) {
  auto jac = [&](const std::function<Vec2(const Vec2&)>& f, const Vec2& x) {
    Eigen::Matrix2d j;
    const Vec2 ex(h, 0.0), ey(0.0, h);
    j.col(0) = (f(x + ex) - f(x - ex)) / (2.0 * h);
    j.col(1) = (f(x + ey) - f(x - ey)) / (2.0 * h);
    return j;
  };
  double total = 0.0;
  for (const auto& g : build_geometry(curve, false)) {
    for (int i = 0; i < g.size(); ++i) {
      const Vec2& x = g.x[i];
      const Vec2& nu = g.nu[i];
      const Vec2 b = B(x), z = xi(x);
      const Eigen::Matrix2d jb = jac(B, x), jz = jac(xi, x);
      const double integrand = jz.trace() * nu.dot(b) + nu.dot(jb * z) - jb.trace() * nu.dot(z) - nu.dot(jz * b);
      total += g.dual_length[i] * integrand;
    }
  }
  return std::abs(total);
}

inline double gauss_wedge_residual(const PolyCurve& curve, const BField& B, const Calibration& calib) {
  if (B.zero()) return 0.0;
  return gauss_wedge_residual(
      curve, [&](const Vec2& x) { return B(x); }, [&](const Vec2& x) { return calib.xi(x); }, 1e-4 * calib.delta());
}

}  // namespace sdlab
