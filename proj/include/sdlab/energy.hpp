#pragma once

// Relative energy, bulk error, dissipation functionals and the inequality
// checkers built on them.

#include "sdlab/extension.hpp"

#include <future>
#include <map>

namespace sdlab {

/// int (1 - nu . xi) over all components, vertex trapezoid rule.
inline double relative_energy(const std::vector<GeometryCache>& caches, const Calibration& calib) {
  double e = 0.0;
  for (const auto& g : caches)
    for (int i = 0; i < g.size(); ++i) e += g.dual_length[i] * std::max(0.0, 1.0 - g.nu[i].dot(calib.xi(g.x[i])));
  return e;
}

inline double relative_energy(const PolyCurve& curve, const Calibration& calib) {
  return relative_energy(build_geometry(curve, false), calib);
}

// ---------------------------------------------------------------------------
// Bulk error

/// Area of the convex polygon `poly` clipped by the half-plane a + g.(x - c) <= 0
/// (keep_negative) or >= 0; returns area and centroid.
inline std::pair<double, Vec2> clip_halfplane(const std::vector<Vec2>& poly, double a, const Vec2& g, const Vec2& c,
                                              bool keep_negative, std::vector<Vec2>* out = nullptr) {
  std::vector<Vec2> res;
  const int n = static_cast<int>(poly.size());
  auto val = [&](const Vec2& p) {
    const double v = a + g.dot(p - c);
    return keep_negative ? v : -v;
  };
  for (int i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    const double vp = val(p), vq = val(q);
    if (vp <= 0) res.push_back(p);
    if ((vp < 0) != (vq < 0) && vp != vq) {
      const double t = vp / (vp - vq);
      if (t > 0.0 && t < 1.0) res.push_back(p + t * (q - p));
    }
  }
  double area = 0.0;
  Vec2 cen = Vec2::Zero();
  for (std::size_t i = 0; i < res.size(); ++i) {
    const Vec2& p = res[i];
    const Vec2& q = res[(i + 1) % res.size()];
    const double cr = cross(p, q);
    area += cr;
    cen += (p + q) * cr;
  }
  area *= 0.5;
  if (std::abs(area) > 0.0) cen /= (6.0 * area);
  if (out) *out = std::move(res);
  return {std::abs(area), cen};
}

struct BulkErrorOptions {
  int min_depth = 6;
  int max_depth = 12;
  double rel_change = 1e-4;
  double abs_change = 0.0;
};

struct BulkErrorResult {
  double F = 0.0;
  int depth = 0;
  double last_change = 0.0;
};

/// F = int |chi_Omega - chi_Omega*| |vartheta| by quadtree quadrature.
class BulkErrorIntegrator {
 public:
  BulkErrorIntegrator(const PolyCurve& curve, const Calibration& calib)
      : calib_(calib), segs_(curve.segments()), grid_(segs_), parity_(segs_) {
    Vec2 lo = curve[0].vertices[0], hi = lo;
    auto grow = [&](const PolyCurve& c) {
      for (const auto& comp : c.components)
        for (const auto& p : comp.vertices) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
    };
    grow(curve);
    grow(calib.reference().curve());
    const Vec2 mid = 0.5 * (lo + hi);
    half_ = 0.5 * (hi - lo).maxCoeff() + 2.0 * calib.delta();
    origin_ = mid - Vec2::Constant(half_);
    deviation_margin_ = 2.0 * calib.reference().deviation();
  }

  double box_area() const { return 4.0 * half_ * half_; }
  Vec2 box_origin() const { return origin_; }
  double box_side() const { return 2.0 * half_; }

  bool in_weak(const Vec2& x) const { return parity_.contains(x); }

  /// |vartheta| at x if x lies in exactly one of the two regions, else 0.
  double integrand(const Vec2& x) const {
    const DistanceQuery q = calib_.reference().query(x, calib_.delta());
    const bool in_ref = q.s < 0.0;
    if (in_ref == in_weak(x)) return 0.0;
    return std::abs(calib_.profile().theta(q.s));
  }

  BulkErrorResult integrate(const BulkErrorOptions& opt = {}) const {
    BulkErrorResult r;
    double prev = -1.0;
    for (int depth = opt.min_depth; depth <= opt.max_depth; ++depth) {
      const double f = cell(origin_, 2.0 * half_, 0, depth);
      r.F = f;
      r.depth = depth;
      if (prev >= 0.0) {
        r.last_change = std::abs(f - prev);
        if (r.last_change <= std::max(opt.rel_change * f, opt.abs_change) || f == 0.0) break;
      }
      prev = f;
    }
    return r;
  }

 private:
  double cell(const Vec2& lo, double size, int depth, int max_depth) const {
    const Vec2 c = lo + Vec2::Constant(0.5 * size);
    const double hd = 0.70710678118654752 * size;
    const NearestSegment nw = grid_.nearest(c);
    const DistanceQuery qr = calib_.reference().query(c, hd + deviation_margin_);
    const bool weak_clear = nw.distance > hd;
    const bool ref_clear = std::abs(qr.s) > hd + deviation_margin_;
    const double d = calib_.delta();
    if (weak_clear && ref_clear) {
      const bool iw = in_weak(c), ir = qr.s < 0.0;
      if (iw == ir) return 0.0;
      const double a = qr.far ? std::abs(qr.s) - deviation_margin_ : std::abs(qr.s);
      if (a - hd >= d) return d * size * size;
      if (size > d / 8.0 && depth < max_depth) return split(lo, size, depth, max_depth);
      double sum = 0.0;
      for (auto [ux, wx] : gauss_unit<3>())
        for (auto [uy, wy] : gauss_unit<3>()) {
          const Vec2 p = lo + size * Vec2(ux, uy);
          sum += wx * wy * std::abs(calib_.profile().theta(calib_.reference().query(p, d).s));
        }
      return sum * size * size;
    }
    if (depth < max_depth) return split(lo, size, depth, max_depth);
    return leaf(lo, size, c, nw, qr);
  }

  double split(const Vec2& lo, double size, int depth, int max_depth) const {
    const double h = 0.5 * size;
    return cell(lo, h, depth + 1, max_depth) + cell(lo + Vec2(h, 0), h, depth + 1, max_depth) +
           cell(lo + Vec2(0, h), h, depth + 1, max_depth) + cell(lo + Vec2(h, h), h, depth + 1, max_depth);
  }

  /// Both boundaries replaced by half-planes through the cell; centroid rule.
  double leaf(const Vec2& lo, double size, const Vec2& c, const NearestSegment& nw, const DistanceQuery& qr) const {
    const std::vector<Vec2> sq = {lo, lo + Vec2(size, 0), lo + Vec2(size, size), lo + Vec2(0, size)};
    // Weak: signed distance to the nearest edge, negative inside.
    const Segment& sg = segs_[nw.segment];
    const Vec2 en = rotate_cw((sg.b - sg.a).normalized());
    double aw = en.dot(c - sg.a);
    Vec2 gw = en;
    if (nw.param <= 0.0 || nw.param >= 1.0) {
      // Closest to a vertex: use the vertex direction with the region sign.
      const Vec2 dir = c - nw.point;
      const double dn = dir.norm();
      const double sgn = in_weak(c) ? -1.0 : 1.0;
      if (dn > 0.0) {
        gw = sgn * dir / dn;
        aw = sgn * dn;
      }
    }
    Vec2 gr = qr.grad;
    double ar = qr.s;
    if (qr.far || gr.squaredNorm() == 0.0) {
      gr = Vec2(1.0, 0.0);
      ar = qr.s;
    }
    double total = 0.0;
    std::vector<Vec2> part;
    for (int pass = 0; pass < 2; ++pass) {
      // pass 0: inside weak, outside reference; pass 1: inside reference, outside weak
      const bool weak_neg = pass == 0;
      clip_halfplane(sq, aw, gw, c, weak_neg, &part);
      if (part.size() < 3) continue;
      const auto [area, cen] = clip_halfplane(part, ar, gr, c, pass == 1);
      if (area <= 0.0) continue;
      const double s = ar + gr.dot(cen - c);
      total += area * std::abs(calib_.profile().theta(s));
    }
    return total;
  }

  const Calibration& calib_;
  std::vector<Segment> segs_;
  SegmentGrid grid_;
  EvenOddIndex parity_;
  Vec2 origin_ = Vec2::Zero();
  double half_ = 1.0;
  double deviation_margin_ = 0.0;
};

inline BulkErrorResult bulk_error(const PolyCurve& curve, const Calibration& calib, const BulkErrorOptions& opt = {}) {
  return BulkErrorIntegrator(curve, calib).integrate(opt);
}

struct MonteCarloEstimate {
  double F = 0.0;
  double standard_error = 0.0;   // sample standard error
  double effective_error = 0.0;  // max(standard error, box area * delta / samples)
  long samples = 0;
};

inline MonteCarloEstimate bulk_error_monte_carlo(const PolyCurve& curve, const Calibration& calib, long samples,
                                                 std::uint64_t seed) {
  const BulkErrorIntegrator integ(curve, calib);
  CounterRng rng(seed);
  double sum = 0.0, sum2 = 0.0;
  const Vec2 o = integ.box_origin();
  const double side = integ.box_side();
  for (long k = 0; k < samples; ++k) {
    const Vec2 p = o + side * Vec2(rng.uniform(), rng.uniform());
    const double v = integ.integrand(p);
    sum += v;
    sum2 += v * v;
  }
  MonteCarloEstimate m;
  m.samples = samples;
  const double mean = sum / samples;
  const double var = std::max(0.0, sum2 / samples - mean * mean);
  m.F = integ.box_area() * mean;
  m.standard_error = integ.box_area() * std::sqrt(var / samples);
  m.effective_error = std::max(m.standard_error, integ.box_area() * calib.delta() / samples);
  return m;
}

// ---------------------------------------------------------------------------
// Dissipation functionals

struct VerdictRecord {
  std::string name;
  bool pass = true;
  double slack = 0.0;  // measured rhs - lhs (worst case)
  std::map<std::string, double> constants;
};

struct EnergyReport {
  double t = 0.0;
  double E = 0.0;
  double F = 0.0;
  double L = 0.0;
  double A = 0.0;
  double D_H = 0.0;     // int |d_s kappa|^2
  double D_V = 0.0;     // int |d_s phi_V|^2
  double cross1 = 0.0;  // int |d_s phi_V - d_s div xi|^2
  double cross2 = 0.0;  // int |d_s div xi|^2
  double cross3 = 0.0;  // int |d_s kappa - d_s phi_{nu.B}|^2
  std::vector<VerdictRecord> verdicts;

  bool all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const VerdictRecord& v) { return v.pass; });
  }
};

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Edge-based int |d_s (a - b)|^2.
inline double grad_diff_sq(const GeometryCache& g, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return grad_norm_sq(g, a - b);
}

/// Instantaneous normal velocity d_s^2 kappa per component.
inline std::vector<Eigen::VectorXd> instantaneous_velocity(const std::vector<GeometryCache>& caches) {
  std::vector<Eigen::VectorXd> v;
  for (const auto& g : caches) v.push_back(laplacian_apply(g, to_vector(g.kappa)));
  return v;
}

inline EnergyReport dissipation_report(const PolyCurve& curve, const Calibration& calib, const BField* B, double t,
                                       const std::vector<Eigen::VectorXd>& V, double F = -1.0) {
  const auto caches = build_geometry(curve, false);
  EnergyReport r;
  r.t = t;
  r.E = relative_energy(caches, calib);
  r.F = F >= 0.0 ? F : bulk_error(curve, calib).F;
  r.A = curve.signed_area();
  for (std::size_t c = 0; c < caches.size(); ++c) {
    const auto& g = caches[c];
    r.L += g.length;
    const Eigen::VectorXd kappa = to_vector(g.kappa);
    r.D_H += grad_norm_sq(g, kappa);
    const Eigen::VectorXd phi_v = velocity_potential(g, V[c]).values;
    r.D_V += grad_norm_sq(g, phi_v);
    Eigen::VectorXd div_xi(g.size());
    for (int i = 0; i < g.size(); ++i) div_xi[i] = calib.div_xi(g.x[i]);
    r.cross1 += grad_diff_sq(g, phi_v, div_xi);
    r.cross2 += grad_norm_sq(g, div_xi);
    Eigen::VectorXd phi_b = Eigen::VectorXd::Zero(g.size());
    if (B && !B->zero()) phi_b = nu_dot_B_potential(g, [&](const Vec2& x) { return (*B)(x); }).values;
    r.cross3 += grad_diff_sq(g, kappa, phi_b);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gronwall fit

struct GronwallVerdict {
  double C_fit = std::numeric_limits<double>::infinity();
  bool pass = false;
  bool at_floor = false;  // E+F stayed at the quadrature floor (identical data)
  double exp_slack = 0.0;
  double integral_slack = 0.0;
};

/// Smallest C in [0, 1e3] with y(t) <= e^{Ct} y(0) and y(t) - y(0) <= C int_0^t y
/// at every sample, up to `floor`.
inline GronwallVerdict gronwall_verdict(const std::vector<double>& t, const std::vector<double>& y, double floor) {
  if (t.size() < 10 || t.size() != y.size())
    throw Error(ErrorKind::Config, "energy", "Gronwall fit needs at least 10 samples");
  GronwallVerdict v;
  const double y0 = y.front();
  if (y0 <= floor) {
    const double worst = *std::max_element(y.begin(), y.end());
    if (worst > floor)
      throw Error(ErrorKind::DegenerateInitialData, "energy",
                  "E+F grew from the floor to " + std::to_string(worst) + " with identical initial data");
    v.C_fit = 0.0;
    v.pass = true;
    v.at_floor = true;
    v.exp_slack = floor - worst;
    v.integral_slack = v.exp_slack;
    return v;
  }
  std::vector<double> integral(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k) integral[k] = integral[k - 1] + 0.5 * (y[k] + y[k - 1]) * (t[k] - t[k - 1]);
  auto slacks = [&](double C) {
    double se = std::numeric_limits<double>::infinity(), si = se;
    for (std::size_t k = 0; k < t.size(); ++k) {
      se = std::min(se, std::exp(C * (t[k] - t[0])) * y0 + floor - y[k]);
      si = std::min(si, C * integral[k] + floor - (y[k] - y0));
    }
    return std::pair<double, double>(se, si);
  };
  auto ok = [&](double C) {
    const auto [se, si] = slacks(C);
    return se >= 0.0 && si >= 0.0;
  };
  double lo = 0.0, hi = 1e3;
  if (!ok(hi)) {
    std::tie(v.exp_slack, v.integral_slack) = slacks(hi);
    return v;
  }
  if (ok(lo)) {
    hi = 0.0;
  } else {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? hi : lo) = mid;
    }
  }
  v.C_fit = hi;
  v.pass = true;
  std::tie(v.exp_slack, v.integral_slack) = slacks(hi);
  return v;
}

// ---------------------------------------------------------------------------
// Small components against a calibration field

/// Bound on |grad xi| in the tube: max(|zeta'|, zeta |Laplacian s|) from the
/// profile and reference curvature, and a sampled finite-difference estimate.
inline double xi_gradient_bound(const Calibration& calib) {
  const double d = calib.delta();
  double b = 0.0;
  for (int k = 0; k <= 2000; ++k) b = std::max(b, std::abs(calib.profile().zeta_prime(d * k / 2000.0)));
  const auto& ref = calib.reference();
  for (std::size_t c = 0; c < ref.splines().size(); ++c) {
    const auto& knots = ref.splines()[c].x.knots();
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const double kf = ref.curvature(static_cast<int>(c), knots[i]);
      const Vec2 p = ref.point(static_cast<int>(c), knots[i]);
      const Vec2 n = ref.normal(static_cast<int>(c), knots[i]);
      for (int k = -20; k <= 20; ++k) {
        const double s = d * k / 20.0;
        const double den = 1.0 + s * kf;
        if (den > 0.0) b = std::max(b, calib.profile().zeta(s) * std::abs(kf / den));
        if (i % 8 == 0 && std::abs(k) < 20) {
          const Vec2 x = p + s * n;
          const double h = 1e-4 * d;
          Eigen::Matrix2d j;
          j.col(0) = (calib.xi(x + Vec2(h, 0)) - calib.xi(x - Vec2(h, 0))) / (2 * h);
          j.col(1) = (calib.xi(x + Vec2(0, h)) - calib.xi(x - Vec2(0, h))) / (2 * h);
          b = std::max(b, Eigen::JacobiSVD<Eigen::Matrix2d>(j).singularValues()[0]);
        }
      }
    }
  }
  return b;
}

struct BubbleCheck {
  int component = 0;
  bool eligible = false;  // diameter <= 1 / (2 |grad xi|)
  double length = 0.0;
  double tilt = 0.0;      // int (1 - xi . nu)
  double slack = 0.0;     // 34 tilt - length
  bool pass = true;
};

inline std::vector<BubbleCheck> bubble_lemma_check(const PolyCurve& curve, const std::function<Vec2(const Vec2&)>& xi,
                                                   double grad_xi_bound) {
  std::vector<BubbleCheck> out;
  const auto caches = build_geometry(curve, false);
  for (std::size_t c = 0; c < caches.size(); ++c) {
    const auto& g = caches[c];
    BubbleCheck b;
    b.component = static_cast<int>(c);
    b.length = g.length;
    b.eligible = grad_xi_bound <= 0.0 || g.diameter <= 1.0 / (2.0 * grad_xi_bound);
    for (int i = 0; i < g.size(); ++i) b.tilt += g.dual_length[i] * (1.0 - xi(g.x[i]).dot(g.nu[i]));
    b.slack = 34.0 * b.tilt - b.length;
    b.pass = !b.eligible || b.slack >= -kRoundoff * b.length;
    out.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flux sums of B over Jordan components

struct NuDotBSums {
  std::vector<double> flux;  // int_{Sigma_i} nu . B per component
  double sum_abs = 0.0;      // sum |int nu.B|
  double sum_scaled = 0.0;   // sum |int nu.B| / L_i
  double bound_first = 0.0;  // (2R/delta) |div B|_inf F
  double bound_second = 0.0; // |B|_inf (2R/delta) |div B|_inf F + 34 |div B|_inf E
  double sup_B = 0.0;
  double sup_div_B = 0.0;
  double tolerance = 0.0;    // quadrature allowance
  bool pass_first = true;
  bool pass_second = true;
};

/// Edge-wise Gauss quadrature of nu . B (exact polygon flux for smooth B).
inline double polygon_flux(const GeometryCache& g, const VectorFieldFn& B) {
  double f = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const Vec2 a = g.x[i], b = g.x[g.next(i)];
    const Vec2 n = g.edge_normal(i);
    for (auto [u, w] : gauss_unit<3>()) f += w * g.edge_length[i] * n.dot(B(a + u * (b - a)));
  }
  return f;
}

inline NuDotBSums nu_dot_B_sums(const PolyCurve& curve, const BField& B, double E, double F) {
  NuDotBSums r;
  if (B.zero()) return r;
  const auto caches = build_geometry(curve, false);
  std::tie(r.sup_B, r.sup_div_B) = B.sup_norms();
  const double c1 = 2.0 * B.support_radius() / B.delta() * r.sup_div_B;
  double total_length = 0.0;
  for (const auto& g : caches) {
    const double flux = polygon_flux(g, [&](const Vec2& x) { return B(x); });
    r.flux.push_back(flux);
    r.sum_abs += std::abs(flux);
    r.sum_scaled += std::abs(flux) / g.length;
    total_length += g.length;
  }
  r.bound_first = c1 * F;
  r.bound_second = r.sup_B * c1 * F + 34.0 * r.sup_div_B * E;
  r.tolerance = 1e-9 * r.sup_B * total_length;
  r.pass_first = r.sum_abs <= r.bound_first + r.tolerance;
  double scaled_tol = 0.0;
  for (const auto& g : caches) scaled_tol += 1e-9 * r.sup_B;
  r.pass_second = r.sum_scaled <= r.bound_second + scaled_tol;
  return r;
}

// ---------------------------------------------------------------------------
// Stationary reference: int |d_s div xi|^2 against E

struct CurvatureRatioResult {
  double lhs = 0.0;
  double E = 0.0;
  double ratio = 0.0;
};

inline CurvatureRatioResult curvature_ratio_check(const PolyCurve& curve, const Calibration& calib) {
  const auto& ref = calib.reference();
  for (std::size_t c = 0; c < ref.splines().size(); ++c) {
    const auto& knots = ref.splines()[c].x.knots();
    double kmin = std::numeric_limits<double>::infinity(), kmax = -kmin;
    for (double u : knots) {
      const double k = ref.curvature(static_cast<int>(c), u);
      kmin = std::min(kmin, k);
      kmax = std::max(kmax, k);
    }
    if (kmax - kmin > 1e-3 * std::max(std::abs(kmax), std::abs(kmin)))
      throw Error(ErrorKind::NonStationaryReference, "energy", "reference curvature is not constant");
  }
  CurvatureRatioResult r;
  const auto caches = build_geometry(curve, false);
  for (const auto& g : caches) {
    Eigen::VectorXd d(g.size());
    for (int i = 0; i < g.size(); ++i) d[i] = calib.div_xi(g.x[i]);
    r.lhs += grad_norm_sq(g, d);
  }
  r.E = relative_energy(caches, calib);
  r.ratio = r.E > 0.0 ? r.lhs / r.E : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Weak against strong comparison over a time series

/// Discretisation floor of E + F for a polygon sitting on its own spline
/// reference: width of the polygon-spline gap squared times length.
inline double quadrature_floor(const ReferenceCurve& ref) {
  const double dev = ref.deviation();
  return ref.curve().length() * dev * dev + 1e-13 * ref.diameter();
}

struct CompareOptions {
  double delta = 0.0;       // 0 selects admissible_delta of the reference
  int jobs = 1;
  bool extension = true;    // build B from the reference velocity
  bool lemma_checks = true;
  long monte_carlo = 0;     // samples for the F cross-check at the first time (0 disables)
  std::uint64_t seed = 1;
  int max_samples = 0;      // evenly thinned weak samples (0 keeps all)
};

struct SampleVerdicts {
  long bubble_checked = 0;
  long bubble_violations = 0;
  double bubble_min_slack = std::numeric_limits<double>::infinity();
  bool nu_b_first = true;
  bool nu_b_second = true;
  double nu_b_first_slack = std::numeric_limits<double>::infinity();
  double nu_b_second_slack = std::numeric_limits<double>::infinity();
  double nu_b_constant = 0.0;
  long pointwise_violations = 0;
  double pointwise_min_slack = std::numeric_limits<double>::infinity();
  bool monte_carlo_ok = true;
  double monte_carlo_sigma = 0.0;  // |F_quadtree - F_mc| / effective error
};

struct CompareResult {
  double delta = 0.0;
  double floor = 0.0;
  std::vector<EnergyReport> reports;
  std::vector<SampleVerdicts> sample_verdicts;
  GronwallVerdict gronwall;
  std::string gronwall_error;
  bool monotone = true;  // E+F nonincreasing up to the floor

  bool pass() const {
    if (!gronwall.pass) return false;
    for (const auto& v : sample_verdicts)
      if (v.bubble_violations || !v.nu_b_first || !v.nu_b_second || v.pointwise_violations || !v.monte_carlo_ok)
        return false;
    return true;
  }
};

namespace detail {

inline std::pair<EnergyReport, SampleVerdicts> compare_sample(const TrajectorySample& weak, const ReferenceTrack& track,
                                                              const CutoffProfile& profile, const CompareOptions& opt,
                                                              double floor, std::size_t index) {
  const auto ref = track.stationary() ? track.at(track.trajectory().t0()) : std::make_shared<const ReferenceCurve>(track.trajectory().at(weak.t));
  const Calibration calib(ref, profile);
  BulkErrorOptions bo;
  bo.abs_change = 0.1 * floor;
  const double F = bulk_error(weak.curve, calib, bo).F;
  BField B;
  if (opt.extension) {
    const TrajectorySample rs = sample_of(weak.t, ref->curve());
    B = BField(ref, rs.velocity, profile.delta());
  }
  EnergyReport rep = dissipation_report(weak.curve, calib, opt.extension ? &B : nullptr, weak.t, weak.velocity, F);
  SampleVerdicts sv;
  if (opt.lemma_checks) {
    const double gb = xi_gradient_bound(calib);
    for (const auto& b : bubble_lemma_check(weak.curve, [&](const Vec2& x) { return calib.xi(x); }, gb)) {
      if (!b.eligible) continue;
      ++sv.bubble_checked;
      sv.bubble_min_slack = std::min(sv.bubble_min_slack, b.slack);
      if (!b.pass) ++sv.bubble_violations;
    }
    if (opt.extension && !B.zero()) {
      const NuDotBSums nb = nu_dot_B_sums(weak.curve, B, rep.E, rep.F);
      sv.nu_b_first = nb.pass_first;
      sv.nu_b_second = nb.pass_second;
      sv.nu_b_first_slack = nb.bound_first - nb.sum_abs;
      sv.nu_b_second_slack = nb.bound_second - nb.sum_scaled;
      sv.nu_b_constant = 2.0 * B.support_radius() / B.delta() * nb.sup_div_B;
    }
    const PointwiseReport lr = pointwise_calibration_check(calib, weak.curve);
    sv.pointwise_violations = lr.violations;
    sv.pointwise_min_slack = std::min({lr.min_slack_normal, lr.min_slack_tangent, lr.min_slack_tilt});
  }
  if (opt.monte_carlo > 0 && index == 0) {
    const MonteCarloEstimate mc = bulk_error_monte_carlo(weak.curve, calib, opt.monte_carlo, CounterRng(opt.seed).fork(index).next_u64());
    sv.monte_carlo_sigma = std::abs(F - mc.F) / mc.effective_error;
    sv.monte_carlo_ok = sv.monte_carlo_sigma <= 3.0;
  }
  VerdictRecord bubble{"bubble", sv.bubble_violations == 0, sv.bubble_min_slack, {{"factor", 34.0}}};
  VerdictRecord nb1{"nu_dot_B_first", sv.nu_b_first, sv.nu_b_first_slack, {{"C", sv.nu_b_constant}}};
  VerdictRecord nb2{"nu_dot_B_second", sv.nu_b_second, sv.nu_b_second_slack, {{"C", sv.nu_b_constant}, {"factor", 34.0}}};
  VerdictRecord pw{"pointwise", sv.pointwise_violations == 0, sv.pointwise_min_slack, {}};
  rep.verdicts = {bubble, nb1, nb2, pw};
  if (opt.monte_carlo > 0)
    rep.verdicts.push_back({"monte_carlo", sv.monte_carlo_ok, 3.0 - sv.monte_carlo_sigma, {{"samples", double(opt.monte_carlo)}}});
  return {std::move(rep), sv};
}

}  // namespace detail

/// Evaluates E, F and the dissipation terms of `weak` against the reference
/// track at every weak sample time, then fits the Gronwall constant.
inline CompareResult compare_trajectories(const Trajectory& weak, const ReferenceTrack& track,
                                          const CompareOptions& opt = {}) {
  if (weak.empty()) throw Error(ErrorKind::InvalidCurve, "energy", "empty weak trajectory");
  CompareResult res;
  std::vector<const TrajectorySample*> picks;
  const std::size_t n = weak.samples.size();
  if (opt.max_samples > 1 && n > static_cast<std::size_t>(opt.max_samples)) {
    for (int k = 0; k < opt.max_samples; ++k)
      picks.push_back(&weak.samples[(n - 1) * k / (opt.max_samples - 1)]);
  } else {
    for (const auto& s : weak.samples) picks.push_back(&s);
  }
  std::vector<double> times;
  for (auto* p : picks) times.push_back(p->t);
  res.delta = opt.delta > 0.0 ? opt.delta : admissible_delta(track, times).delta_max;
  const CutoffProfile profile(res.delta);
  res.floor = quadrature_floor(*track.at(times.front()));
  res.reports.resize(picks.size());
  res.sample_verdicts.resize(picks.size());
  const int jobs = std::max(1, opt.jobs);
  for (std::size_t start = 0; start < picks.size(); start += jobs) {
    std::vector<std::future<std::pair<EnergyReport, SampleVerdicts>>> fut;
    for (std::size_t k = start; k < std::min(picks.size(), start + jobs); ++k)
      fut.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, detail::compare_sample,
                               std::cref(*picks[k]), std::cref(track), std::cref(profile), std::cref(opt), res.floor, k));
    for (std::size_t k = start; k < std::min(picks.size(), start + jobs); ++k)
      std::tie(res.reports[k], res.sample_verdicts[k]) = fut[k - start].get();
  }
  std::vector<double> t, y;
  for (const auto& r : res.reports) {
    t.push_back(r.t);
    y.push_back(r.E + r.F);
  }
  for (std::size_t k = 1; k < y.size(); ++k)
    if (y[k] > y[k - 1] + res.floor) res.monotone = false;
  if (t.size() >= 10) {
    try {
      res.gronwall = gronwall_verdict(t, y, res.floor);
    } catch (const Error& e) {
      res.gronwall_error = e.what();
    }
  } else {
    res.gronwall_error = "fewer than 10 samples";
  }
  for (auto& r : res.reports)
    r.verdicts.push_back({"gronwall", res.gronwall.pass, std::min(res.gronwall.exp_slack, res.gronwall.integral_slack),
                          {{"C_fit", res.gronwall.C_fit}}});
  return res;
}

}  // namespace sdlab
