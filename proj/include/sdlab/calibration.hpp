#pragma once

// Calibration fields around a reference curve: cutoff profiles, xi, vartheta,
// the projection pi*, extended normal and curvature, d_{s*}, div xi, the
// admissible tube width, and the pointwise calibration inequalities.

#include "sdlab/reference.hpp"

namespace sdlab {

/// Quintic Hermite interpolant on [0, h] with value/slope/second derivative
/// (v0, d0, c0) at 0 and (v1, d1, c1) at h. Returns value and two derivatives.
inline std::array<double, 3> hermite5(double x, double h, double v0, double d0, double c0, double v1, double d1,
                                      double c1) {
  const double t = x / h;
  // Basis values and t-derivatives.
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const std::array<std::array<double, 6>, 6> coef = {{
      {1, 0, 0, -10, 15, -6},       // H0 (v0)
      {0, 1, 0, -6, 8, -3},         // H1 (h d0)
      {0, 0, 0.5, -1.5, 1.5, -0.5}, // H2 (h^2 c0)
      {0, 0, 0, 0.5, -1, 0.5},      // H3 (h^2 c1)
      {0, 0, 0, -4, 7, -3},         // H4 (h d1)
      {0, 0, 0, 10, -15, 6},        // H5 (v1)
  }};
  const std::array<double, 6> w = {v0, h * d0, h * h * c0, h * h * c1, h * d1, v1};
  double p = 0.0, dp = 0.0, ddp = 0.0;
  const std::array<double, 6> pw = {1, t, t2, t3, t4, t5};
  for (int b = 0; b < 6; ++b) {
    for (int k = 0; k < 6; ++k) {
      p += w[b] * coef[b][k] * pw[k];
      if (k >= 1) dp += w[b] * coef[b][k] * k * pw[k - 1];
      if (k >= 2) ddp += w[b] * coef[b][k] * k * (k - 1) * pw[k - 2];
    }
  }
  return {p, dp / h, ddp / (h * h)};
}

/// zeta, theta and eta profiles for a tube of width delta.
class CutoffProfile {
 public:
  CutoffProfile() = default;
  explicit CutoffProfile(double delta) : delta_(delta) {
    if (!(delta > 0.0)) throw Error(ErrorKind::Config, "calibration", "delta must be positive");
  }
  double delta() const { return delta_; }

  /// zeta and its first two derivatives.
  std::array<double, 3> zeta_jet(double s) const {
    const double a = std::abs(s), sg = s < 0 ? -1.0 : 1.0;
    const double h = 0.5 * delta_;
    if (a <= h) return {1.0 - s * s, -2.0 * s, -2.0};
    if (a >= delta_) return {0.0, 0.0, 0.0};
    const auto r = hermite5(a - h, h, 1.0 - h * h, -2.0 * h, -2.0, 0.0, 0.0, 0.0);
    return {r[0], sg * r[1], r[2]};
  }
  double zeta(double s) const { return zeta_jet(s)[0]; }
  double zeta_prime(double s) const { return zeta_jet(s)[1]; }

  std::array<double, 3> theta_jet(double s) const {
    const double a = std::abs(s), sg = s < 0 ? -1.0 : 1.0;
    const double h = 0.5 * delta_;
    if (a <= h) return {s, 1.0, 0.0};
    if (a >= delta_) return {sg * delta_, 0.0, 0.0};
    const auto r = hermite5(a - h, h, h, 1.0, 0.0, delta_, 0.0, 0.0);
    return {sg * r[0], r[1], sg * r[2]};
  }
  double theta(double s) const { return theta_jet(s)[0]; }
  double theta_prime(double s) const { return theta_jet(s)[1]; }

  std::array<double, 3> eta_jet(double s) const {
    const double a = std::abs(s), sg = s < 0 ? -1.0 : 1.0;
    if (a <= delta_) return {1.0, 0.0, 0.0};
    if (a >= 2.0 * delta_) return {0.0, 0.0, 0.0};
    const auto r = hermite5(a - delta_, delta_, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    return {r[0], sg * r[1], r[2]};
  }
  double eta(double s) const { return eta_jet(s)[0]; }

  struct ProfileCheck {
    bool zeta_monotone = true;
    bool zeta_bounds = true;
    bool zeta_tilt = true;  // 1 - zeta(s) >= s^2 on the support
    bool theta_monotone = true;
    bool eta_bounds = true;
    double max_c2_jump = 0.0;  // largest jump of a second derivative across a breakpoint
    bool ok() const { return zeta_monotone && zeta_bounds && zeta_tilt && theta_monotone && eta_bounds; }
  };

  /// Dense scan of the transition regions.
  ProfileCheck check(int samples = 20000) const {
    ProfileCheck c;
    double prev_z = zeta(0.0), prev_t = theta(0.0);
    for (int k = 1; k <= samples; ++k) {
      const double s = 2.5 * delta_ * k / samples;
      const double z = zeta(s), t = theta(s), e = eta(s);
      if (z > prev_z + 1e-15) c.zeta_monotone = false;
      if (z < -1e-15 || z > 1.0 + 1e-15) c.zeta_bounds = false;
      if (z > 0.0 && 1.0 - z < s * s - 1e-15) c.zeta_tilt = false;
      if (t < prev_t - 1e-15) c.theta_monotone = false;
      if (e < -1e-15 || e > 1.0 + 1e-15) c.eta_bounds = false;
      prev_z = z;
      prev_t = t;
    }
    const double eps = 1e-9 * delta_;
    for (double b : {0.5 * delta_, delta_}) {
      c.max_c2_jump = std::max(c.max_c2_jump, std::abs(zeta_jet(b + eps)[2] - zeta_jet(b - eps)[2]));
      c.max_c2_jump = std::max(c.max_c2_jump, std::abs(theta_jet(b + eps)[2] - theta_jet(b - eps)[2]));
    }
    for (double b : {delta_, 2.0 * delta_})
      c.max_c2_jump = std::max(c.max_c2_jump, std::abs(eta_jet(b + eps)[2] - eta_jet(b - eps)[2]));
    return c;
  }

 private:
  double delta_ = 0.25;
};

struct CalibrationPoint {
  DistanceQuery dist;
  double s = 0.0;
  Vec2 grad = Vec2::Zero();
  Vec2 xi = Vec2::Zero();
  double vartheta = 0.0;
  Vec2 proj = Vec2::Zero();  // x - s grad s
  Vec2 nu_star = Vec2::Zero();
  Vec2 tau_star = Vec2::Zero();
  double level_kappa = 0.0;  // Laplacian of s: kappa_f / (1 + s kappa_f)
  double kappa_star = 0.0;
  double div_xi = 0.0;
  double zeta = 0.0;
  double zeta_prime = 0.0;
  bool in_tube = false;  // |s| < 2 delta
};

/// Calibration around a fixed-time reference curve.
class Calibration {
 public:
  Calibration(std::shared_ptr<const ReferenceCurve> ref, CutoffProfile profile)
      : ref_(std::move(ref)), profile_(profile) {}

  const ReferenceCurve& reference() const { return *ref_; }
  std::shared_ptr<const ReferenceCurve> reference_ptr() const { return ref_; }
  const CutoffProfile& profile() const { return profile_; }
  double delta() const { return profile_.delta(); }

  CalibrationPoint at(const Vec2& x) const {
    CalibrationPoint p;
    const double d = profile_.delta();
    p.dist = ref_->query(x, 2.0 * d);
    p.s = p.dist.s;
    p.vartheta = profile_.theta(p.s);
    if (p.dist.far) {
      p.proj = x;
      return p;
    }
    p.in_tube = std::abs(p.s) < 2.0 * d;
    p.grad = p.dist.grad;
    p.proj = x - p.s * p.grad;
    const auto zj = profile_.zeta_jet(p.s);
    p.zeta = zj[0];
    p.zeta_prime = zj[1];
    p.xi = p.zeta * p.grad;
    const double denom = 1.0 + p.s * p.dist.foot_kappa;
    p.level_kappa = denom > 0.0 ? p.dist.foot_kappa / denom : 0.0;
    const double e = profile_.eta(p.s);
    p.nu_star = e * p.grad;
    p.tau_star = rotate_ccw(p.nu_star);
    p.kappa_star = e * p.level_kappa;
    p.div_xi = std::abs(p.s) < d ? p.zeta_prime + p.zeta * p.level_kappa : 0.0;
    return p;
  }

  double sdist(const Vec2& x) const { return ref_->query(x, 2.0 * delta()).s; }
  Vec2 xi(const Vec2& x) const { return at(x).xi; }
  double vartheta(const Vec2& x) const { return at(x).vartheta; }
  Vec2 proj(const Vec2& x) const { return at(x).proj; }
  double div_xi(const Vec2& x) const { return at(x).div_xi; }

  /// tau* . grad f by centred differences with step 1e-5 delta.
  template <class F>
  auto d_sstar(const F& f, const Vec2& x) const {
    const Vec2 t = at(x).tau_star;
    const double h = 1e-5 * delta();
    return (f(Vec2(x + h * t)) - f(Vec2(x - h * t))) / (2.0 * h);
  }

 private:
  std::shared_ptr<const ReferenceCurve> ref_;
  CutoffProfile profile_;
};

/// Time-dependent calibration: one Calibration per queried time.
class CalibrationTrack {
 public:
  CalibrationTrack(ReferenceTrack track, CutoffProfile profile) : track_(std::move(track)), profile_(profile) {}
  Calibration at(double t) const { return Calibration(track_.at(t), profile_); }
  const ReferenceTrack& track() const { return track_; }
  const CutoffProfile& profile() const { return profile_; }

 private:
  ReferenceTrack track_;
  CutoffProfile profile_;
};

// ---------------------------------------------------------------------------
// Admissible tube width

struct AdmissibleDelta {
  double delta_max = 0.0;
  double reach = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();
  double max_kappa = 0.0;
  double bottleneck = std::numeric_limits<double>::infinity();
};

/// Smallest distance from vertex i to the part of the curve left after
/// discarding the arcs on which the distance from x_i grows monotonically.
inline double bottleneck_distance(const std::vector<Vec2>& v) {
  const int n = static_cast<int>(v.size());
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    int f = 1;
    while (f < n && (v[(i + f + 1) % n] - v[i]).norm() > (v[(i + f) % n] - v[i]).norm()) ++f;
    int b = 1;
    while (b < n && (v[(i - b - 1 + 2 * n) % n] - v[i]).norm() > (v[(i - b + n) % n] - v[i]).norm()) ++b;
    // Remaining arc: offsets f .. n - b.
    for (int k = f; k <= n - b; ++k) best = std::min(best, (v[(i + k) % n] - v[i]).norm());
  }
  return best;
}

inline AdmissibleDelta admissible_delta(const ReferenceCurve& ref) {
  AdmissibleDelta a;
  const auto& curve = ref.curve();
  for (int c = 0; c < static_cast<int>(ref.splines().size()); ++c) {
    const auto& knots = ref.splines()[c].x.knots();
    const double period = ref.splines()[c].x.period();
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const double next = i + 1 < knots.size() ? knots[i + 1] : period;
      for (double f : {0.0, 0.5}) a.max_kappa = std::max(a.max_kappa, std::abs(ref.curvature(c, knots[i] + f * (next - knots[i]))));
    }
    a.bottleneck = std::min(a.bottleneck, bottleneck_distance(curve[c].vertices));
  }
  for (std::size_t c = 0; c < curve.size(); ++c)
    for (std::size_t d = c + 1; d < curve.size(); ++d) {
      const auto& p = curve[c].vertices;
      const auto& q = curve[d].vertices;
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
          a.min_gap = std::min(a.min_gap, segment_segment_distance(p[i], p[(i + 1) % p.size()], q[j], q[(j + 1) % q.size()]));
    }
  if (a.min_gap <= 1e-10 * ref.diameter())
    throw Error(ErrorKind::ZeroReach, "calibration", "reference components touch");
  a.reach = std::min(a.max_kappa > 0.0 ? 1.0 / a.max_kappa : std::numeric_limits<double>::infinity(),
                     0.5 * a.bottleneck);
  if (!(a.reach > 0.0)) throw Error(ErrorKind::ZeroReach, "calibration", "reference has zero reach");
  a.delta_max = std::min(a.min_gap / 4.0, a.reach / 4.0);
  return a;
}

/// Minimum over the given sample times of the reference track.
inline AdmissibleDelta admissible_delta(const ReferenceTrack& track, const std::vector<double>& times) {
  AdmissibleDelta worst;
  worst.delta_max = std::numeric_limits<double>::infinity();
  for (double t : times) {
    const auto a = admissible_delta(*track.at(t));
    if (a.delta_max < worst.delta_max) worst = a;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Pointwise calibration inequalities

struct ScalarTestFunction {
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;
};

struct PointwiseReport {
  long checked = 0;
  long skipped = 0;
  long violations = 0;
  double min_slack_normal = std::numeric_limits<double>::infinity();   // 2(1 - nu.xi) - zeta |nu - nu*|^2
  double min_slack_tangent = std::numeric_limits<double>::infinity();  // 2(1 - nu.xi) - |tau . grad s|^2
  double min_slack_derivative = std::numeric_limits<double>::infinity();
  double min_slack_tilt = std::numeric_limits<double>::infinity();     // zeta(1 - zeta) - xi.(nu - xi)
  bool ok() const { return violations == 0; }
};

inline constexpr double kRoundoff = 1e-12;

inline PointwiseReport pointwise_calibration_check(const Calibration& calib, const PolyCurve& curve,
                                             const std::vector<ScalarTestFunction>& tests = {}) {
  PointwiseReport r;
  for (const auto& g : build_geometry(curve, false)) {
    for (int i = 0; i < g.size(); ++i) {
      const CalibrationPoint p = calib.at(g.x[i]);
      if (!p.in_tube) {
        ++r.skipped;
        continue;
      }
      ++r.checked;
      const Vec2& nu = g.nu[i];
      const Vec2& tau = g.tau[i];
      const double tilt = 2.0 * (1.0 - nu.dot(p.xi));
      const double s1 = tilt - p.zeta * (nu - p.nu_star).squaredNorm();
      const double tg = tau.dot(p.grad);
      const double s2 = tilt - tg * tg;
      const double s4 = p.zeta * (1.0 - p.zeta) - p.xi.dot(nu - p.xi);
      r.min_slack_normal = std::min(r.min_slack_normal, s1);
      r.min_slack_tangent = std::min(r.min_slack_tangent, s2);
      r.min_slack_tilt = std::min(r.min_slack_tilt, s4);
      bool bad = s1 < -kRoundoff || s2 < -kRoundoff || s4 < -kRoundoff;
      for (const auto& u : tests) {
        const Vec2 gu = u.gradient(g.x[i]);
        const double diff = tau.dot(gu) - p.tau_star.dot(gu);
        const double s3 = gu.squaredNorm() * p.zeta * (tau - p.tau_star).squaredNorm() - p.zeta * diff * diff;
        r.min_slack_derivative = std::min(r.min_slack_derivative, s3);
        if (s3 < -kRoundoff) bad = true;
      }
      if (bad) ++r.violations;
    }
  }
  return r;
}

}  // namespace sdlab
