#pragma once

// Named invariant suites run without a flow (used by `sdlab verify`).

#include "sdlab/energy.hpp"

#include <sstream>

namespace sdlab {

struct SuiteCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
};

struct SuiteResult {
  std::string suite;
  std::vector<SuiteCheck> checks;
  bool pass() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.pass; });
  }
};

namespace suites {

inline SuiteCheck below(std::string name, double value, double limit) { return {std::move(name), value <= limit, value, limit}; }

inline SuiteCheck throws_kind(std::string name, ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return {std::move(name), e.kind() == kind, 0.0, 0.0};
  }
  return {std::move(name), false, 0.0, 0.0};
}

/// Discrete L2 error of the zero-average solve for f = -m^2 cos(m t) on the
/// unit circle (exact potential cos(m t)).
inline double manufactured_poisson_error(int n, int mode = 3) {
  const auto g = build_component_geometry(make_circle(1.0, n));
  Eigen::VectorXd f(n), exact(n);
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * i / n;
    f[i] = -mode * mode * std::cos(mode * t);
    exact[i] = std::cos(mode * t);
  }
  const Eigen::VectorXd phi = solve_zero_average(g, f).solution.values;
  double e = 0.0;
  for (int i = 0; i < n; ++i) e += g.dual_length[i] * std::pow(phi[i] - exact[i], 2);
  return std::sqrt(e);
}

inline SuiteResult geometry() {
  SuiteResult r{"geometry", {}};
  double gb = 0.0;
  for (const auto& c : {PolyCurve({make_circle(1.0, 256)}), PolyCurve({make_ellipse(2.0, 1.0, 512)}),
                        PolyCurve({make_circle(2.0, 256), make_circle(1.0, 256, Vec2::Zero(), -1)})})
    for (const auto& g : build_geometry(c)) gb = std::max(gb, gauss_bonnet_residual(g));
  r.checks.push_back(below("gauss_bonnet", gb, 1e-3));
  const int n = 256;
  const double exact_area = 0.5 * n * std::sin(kTwoPi / n);
  r.checks.push_back(below("circle_area", std::abs(PolyCurve({make_circle(1.0, n)}).signed_area() - exact_area), 1e-12));
  const auto g = build_component_geometry(make_circle(1.0, n));
  double kerr = 0.0;
  for (double k : g.kappa) kerr = std::max(kerr, std::abs(k - 1.0));
  r.checks.push_back(below("circle_curvature", kerr, 1e-3));
  const auto forest = jordan_decompose(PolyCurve({make_circle(2.0, 64), make_circle(1.0, 64, Vec2::Zero(), -1)}));
  r.checks.push_back({"annulus_nesting", forest.regions.size() == 1 && forest.regions[0].holes.size() == 1, 0.0, 0.0});
  r.checks.push_back(throws_kind("self_intersection", ErrorKind::SelfIntersection, [] {
    Component c;
    for (int i = 0; i < 16; ++i) {
      const double t = kTwoPi * i / 16;
      c.vertices.emplace_back(std::sin(t), std::sin(t) * std::cos(t));
    }
    PolyCurve({c}).validate();
  }));
  r.checks.push_back(throws_kind("too_few_vertices", ErrorKind::InvalidCurve, [] { PolyCurve({make_circle(1.0, 6)}).validate(); }));
  std::stringstream io;
  const PolyCurve ann({make_circle(2.0, 32), make_circle(1.0, 32, Vec2::Zero(), -1, 0.0, 1)});
  write_curve(io, ann);
  const PolyCurve back = parse_curve(io);
  double rt = 0.0;
  for (std::size_t c = 0; c < ann.size(); ++c)
    for (std::size_t i = 0; i < ann[c].vertices.size(); ++i) rt = std::max(rt, (ann[c].vertices[i] - back[c].vertices[i]).norm());
  r.checks.push_back(below("curve_io_roundtrip", rt, 0.0));
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = std::cos(kTwoPi * i / n);
  r.checks.push_back(below("poincare_cos", std::abs(poincare_ratio(g, u, 2.0) - 0.25), 1e-3));
  return r;
}

inline SuiteResult poisson() {
  SuiteResult r{"poisson", {}};
  r.checks.push_back(below("manufactured_l2", manufactured_poisson_error(256), 1e-3));
  const auto g = build_component_geometry(make_circle(1.0, 128));
  Eigen::VectorXd f(128);
  for (int i = 0; i < 128; ++i) f[i] = std::sin(kTwoPi * i / 128) + 0.3;
  const auto sol = solve_zero_average(g, f);
  r.checks.push_back(below("zero_mean", std::abs(weighted_mean(g, sol.solution.values)), 1e-12));
  r.checks.push_back(below("residual", sol.residual_norm, 1e-9 * f.cwiseAbs().maxCoeff()));
  r.checks.push_back(throws_kind("nonzero_mean", ErrorKind::NonZeroMean, [&] { velocity_potential(g, f); }));
  return r;
}

inline SuiteResult poisson_convergence() {
  SuiteResult r{"poisson-convergence", {}};
  double prev = manufactured_poisson_error(32);
  for (int n = 64; n <= 512; n *= 2) {
    const double e = manufactured_poisson_error(n);
    const double ratio = prev / e;
    r.checks.push_back({"ratio_N" + std::to_string(n), ratio >= 3.2 && ratio <= 4.8, ratio, 4.0});
    prev = e;
  }
  return r;
}

inline SuiteResult calibration() {
  SuiteResult r{"calibration", {}};
  const CutoffProfile prof(0.25);
  const auto pc = prof.check();
  r.checks.push_back({"profile", pc.ok(), pc.max_c2_jump, 0.0});
  auto ref = std::make_shared<const ReferenceCurve>(PolyCurve({make_circle(1.0, 256)}));
  const Calibration calib(ref, prof);
  r.checks.push_back(below("sdist_outside", std::abs(calib.sdist(Vec2(1.2, 0.0)) - 0.2), 1e-6));
  r.checks.push_back(below("sdist_inside", std::abs(calib.sdist(Vec2(0.0, -0.9)) + 0.1), 1e-6));
  r.checks.push_back(below("xi_on_reference", (calib.xi(Vec2(1.0, 0.0)) - Vec2(1.0, 0.0)).norm(), 1e-9));
  const auto ad = admissible_delta(*ref);
  r.checks.push_back(below("admissible_delta", std::abs(ad.delta_max - 0.25), 1e-3));
  const PolyCurve pert({make_polar([](double t) { return 1.0 + 0.05 * std::cos(3 * t); }, 256)});
  std::vector<ScalarTestFunction> tests = {
      {[](const Vec2& x) { return x.x(); }, [](const Vec2&) { return Vec2(1.0, 0.0); }},
      {[](const Vec2& x) { return x.x() * x.y(); }, [](const Vec2& x) { return Vec2(x.y(), x.x()); }}};
  const auto lr = pointwise_calibration_check(calib, pert, tests);
  r.checks.push_back({"pointwise_inequalities", lr.ok() && lr.checked > 0, double(lr.violations), 0.0});
  return r;
}

inline SuiteResult extension() {
  SuiteResult r{"extension", {}};
  auto ref = std::make_shared<const ReferenceCurve>(PolyCurve({make_circle(1.0, 128)}));
  Eigen::VectorXd v(128);
  for (int i = 0; i < 128; ++i) v[i] = std::cos(kTwoPi * i / 128);
  const double delta = admissible_delta(*ref).delta_max;
  const BField B(ref, {v}, delta);
  r.checks.push_back(below("boundary_error", B.boundary_error(), 1e-2));
  const auto prof = divergence_decay_profile(B, *ref);
  r.checks.push_back(below("interior_divergence", prof.interior_max, 1e-6));
  r.checks.push_back({"normal_ray_ratio", std::isfinite(prof.max_ratio), prof.max_ratio, 0.0});
  r.checks.push_back(throws_kind("nonzero_mean", ErrorKind::NonZeroMean, [&] {
    BField(ref, {Eigen::VectorXd::Ones(128)}, delta);
  }));
  return r;
}

inline SuiteResult energy() {
  SuiteResult r{"energy", {}};
  auto ref = std::make_shared<const ReferenceCurve>(PolyCurve({make_circle(1.0, 1024)}));
  const Calibration calib(ref, CutoffProfile(0.25));
  const double eps = 0.05;
  const double exact = kTwoPi * (eps * eps / 2 + eps * eps * eps / 3);
  const double F = bulk_error(PolyCurve({make_circle(1.0 + eps, 4096)}), calib).F;
  r.checks.push_back(below("annulus_F", std::abs(F - exact) / exact, 1e-4));
  r.checks.push_back(below("E_on_reference", relative_energy(ref->curve(), calib), 1e-3));
  const double rb = 0.05;
  const PolyCurve with_bubble({make_circle(1.0, 1024), make_circle(rb, 64, Vec2(3.0, 0.0), 1, 0.0, 1)});
  const double dE = relative_energy(with_bubble, calib) - relative_energy(ref->curve(), calib);
  r.checks.push_back(below("far_bubble_E", std::abs(dE - polygon_length(with_bubble[1].vertices)), 1e-12));
  const auto bubbles = bubble_lemma_check(with_bubble, [&](const Vec2& x) { return calib.xi(x); }, xi_gradient_bound(calib));
  r.checks.push_back({"bubble_lemma", std::all_of(bubbles.begin(), bubbles.end(), [](const BubbleCheck& b) { return b.pass; }), 0.0, 0.0});
  return r;
}

}  // namespace suites

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"geometry", "poisson", "poisson-convergence", "calibration", "extension", "energy"};
  return names;
}

inline SuiteResult run_suite(const std::string& name) {
  if (name == "geometry") return suites::geometry();
  if (name == "poisson") return suites::poisson();
  if (name == "poisson-convergence") return suites::poisson_convergence();
  if (name == "calibration") return suites::calibration();
  if (name == "extension") return suites::extension();
  if (name == "energy") return suites::energy();
  throw Error(ErrorKind::Usage, "cli", "unknown suite '" + name + "'");
}

}  // namespace sdlab
