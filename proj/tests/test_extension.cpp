#include "sdlab/extension.hpp"

#include <gtest/gtest.h>

using namespace sdlab;

namespace {

std::shared_ptr<const ReferenceCurve> circle_ref(int n) {
  return std::make_shared<const ReferenceCurve>(PolyCurve({make_circle(1.0, n)}));
}

Eigen::VectorXd mode(int n, int k) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = std::cos(k * kTwoPi * i / n);
  return v;
}

PolyCurve asymmetric(int n) {
  return PolyCurve({make_polar([](double t) { return 1 + 0.05 * std::cos(3 * t + 0.7) + 0.03 * std::sin(2 * t + 0.3); }, n,
                               0.0, Vec2(0.02, -0.01))});
}

}  // namespace

TEST(Extension, DiskCosTheta) {
  const auto ref = circle_ref(128);
  const BField B(ref, {mode(128, 1)}, 0.25);
  EXPECT_LE(B.boundary_error(), 1e-2);
  const auto g = build_component_geometry(ref->curve()[0]);
  double err = 0.0;
  for (int i = 0; i < g.size(); ++i) err = std::max(err, std::abs(g.nu[i].dot(B(g.x[i])) - std::cos(kTwoPi * i / 128)));
  EXPECT_LE(err, 1e-2);
  for (const Vec2 x : {Vec2(0.0, 0.0), Vec2(0.3, 0.2), Vec2(-0.5, 0.6)}) EXPECT_LE((B(x) - Vec2(1.0, 0.0)).norm(), 1e-2);
}

TEST(Extension, DiskCosTwoTheta) {
  const BField B(circle_ref(256), {mode(256, 2)}, 0.25);
  // phi = rho^2 cos(2 theta) / 2 = (x^2 - y^2) / 2, grad phi = (x, -y).
  for (const Vec2 x : {Vec2(0.1, 0.2), Vec2(-0.4, 0.5), Vec2(0.6, -0.3), Vec2(0.0, -0.8)})
    EXPECT_LE((B(x) - Vec2(x.x(), -x.y())).norm(), 1e-2) << x.transpose();
}

TEST(Extension, ZeroDataGivesZeroField) {
  const auto ref = circle_ref(64);
  const BField B(ref, {Eigen::VectorXd::Zero(64)}, 0.25);
  EXPECT_TRUE(B.zero());
  EXPECT_EQ(B(Vec2(0.3, 0.1)).norm(), 0.0);
  const auto prof = divergence_decay_profile(B, *ref);
  EXPECT_EQ(prof.slope, 0.0);
  EXPECT_EQ(B.sup_norms().first, 0.0);
  const Calibration calib(ref, CutoffProfile(0.25));
  EXPECT_EQ(gauss_wedge_residual(asymmetric(128), B, calib), 0.0);
  const auto sp = star_potentials(ref, {Eigen::VectorXd::Zero(64)});
  EXPECT_EQ(sp.phi[0].values.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sp.extension(calib, Vec2(1.05, 0.0)), 0.0);
}

TEST(Extension, NonZeroMeanRejected) {
  try {
    BField(circle_ref(64), {Eigen::VectorXd::Ones(64)}, 0.25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonZeroMean);
  }
  EXPECT_THROW(BField(circle_ref(64), {mode(64, 1), mode(64, 1)}, 0.25), Error);
}

TEST(Extension, DivergenceProfile) {
  const auto ref = circle_ref(128);
  const BField B(ref, {mode(128, 1)}, 0.25);
  const auto prof = divergence_decay_profile(B, *ref);
  EXPECT_LE(prof.interior_max, 1e-6);
  EXPECT_TRUE(std::isfinite(prof.max_ratio));
  EXPECT_LE(prof.max_ratio, std::max(prof.slope, 1e-6) * 10);
  // Analytic divergence agrees with central differences away from the cutoff shell.
  for (const Vec2 x : {Vec2(0.2, 0.3), Vec2(1.1, 0.0), Vec2(0.0, -1.3)})
    EXPECT_NEAR(B.divergence(x), B.divergence_fd(x, 1e-5), 1e-5);
  EXPECT_EQ(B(Vec2(1.0 + 2.6 * 0.25, 0.0)).norm(), 0.0);
}

TEST(Extension, TrivialExtension) {
  const auto ref = circle_ref(256);
  const BField B(ref, {mode(256, 1)}, 0.25);
  const Calibration calib(ref, CutoffProfile(0.25));
  const Vec2 on = ref->point(0, ref->splines()[0].x.knots()[17]);
  EXPECT_LE((trivial_extension_Bbar(calib, B, on) - B(on)).norm(), 1e-9);
  EXPECT_EQ(trivial_extension_Bbar(calib, B, Vec2(1.6, 0.0)).norm(), 0.0);
  // Bbar . grad s = V* o pi* inside the tube.
  for (double s : {-0.2, 0.1}) {
    const Vec2 x = (1.0 + s) * Vec2(std::cos(0.9), std::sin(0.9));
    const auto p = calib.at(x);
    EXPECT_NEAR(trivial_extension_Bbar(calib, B, x).dot(p.grad), std::cos(0.9), 1e-2);
  }
}

TEST(Extension, StarPotentialAndChainRule) {
  const auto ref = circle_ref(256);
  const auto sp = star_potentials(ref, {mode(256, 2)});
  for (int i = 0; i < 256; i += 16) EXPECT_NEAR(sp.phi[0].values[i], -0.25 * std::cos(2 * kTwoPi * i / 256), 1e-4);
  EXPECT_LE(sp.residual, 1e-9);
  const Calibration calib(ref, CutoffProfile(0.25));
  const auto cr = chain_rule_check(calib, sp, {-0.1, -0.05, 0.05, 0.1}, 8);
  EXPECT_GT(cr.samples, 0);
  EXPECT_LE(cr.max_residual, 1e-4 * cr.scale);
  EXPECT_GT(cr.max_residual_plus, 10 * cr.max_residual);
}

TEST(Extension, ChainRuleConvergesUnderRefinement) {
  auto residual = [](int n) {
    const auto ref = std::make_shared<const ReferenceCurve>(
        PolyCurve({make_polar([](double t) { return 1.0 + 0.1 * std::cos(2 * t); }, n)}));
    const auto g = build_component_geometry(ref->curve()[0]);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = std::cos(3 * kTwoPi * i / n);
    v.array() -= weighted_mean(g, v);
    const Calibration calib(ref, CutoffProfile(0.2));
    return chain_rule_check(calib, star_potentials(ref, {v}), {-0.08, 0.08}, n / 32).max_residual;
  };
  const double r1 = residual(64), r2 = residual(128);
  EXPECT_LT(r2, r1);
}

TEST(Extension, WedgeIdentity) {
  const auto curve = asymmetric(256);
  const double h = 1e-4;
  const auto zero = [](const Vec2&) { return Vec2(0.0, 0.0); };
  const auto konst = [](const Vec2&) { return Vec2(0.3, -1.2); };
  EXPECT_EQ(gauss_wedge_residual(curve, zero, konst, h), 0.0);
  EXPECT_LE(gauss_wedge_residual(curve, konst, [](const Vec2&) { return Vec2(0.7, 0.1); }, h), 1e-12);

  const auto ref = circle_ref(2048);
  const Eigen::VectorXd v = mode(2048, 1);
  const BField B(ref, {v}, 0.25);
  const Calibration calib(ref, CutoffProfile(0.25));
  const double r256 = gauss_wedge_residual(asymmetric(256), B, calib);
  const double r512 = gauss_wedge_residual(asymmetric(512), B, calib);
  EXPECT_LE(r512, 1e-2);
  EXPECT_NEAR(std::log2(r256 / r512), 2.0, 0.5);
}
