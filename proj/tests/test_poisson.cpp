#include "sdlab/poisson.hpp"

#include <gtest/gtest.h>

using namespace sdlab;

namespace {

Eigen::VectorXd on_circle(int n, const std::function<double(double)>& f) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = f(kTwoPi * i / n);
  return v;
}

double l2(const GeometryCache& g, const Eigen::VectorXd& e) {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i) s += g.dual_length[i] * e[i] * e[i];
  return std::sqrt(s);
}

}  // namespace

TEST(Poisson, CosThreeTheta) {
  const int n = 256;
  const auto g = build_component_geometry(make_circle(1.0, n));
  const auto sol = solve_zero_average(g, on_circle(n, [](double t) { return std::cos(3 * t); }));
  const Eigen::VectorXd exact = on_circle(n, [](double t) { return -std::cos(3 * t) / 9.0; });
  EXPECT_LE(l2(g, sol.solution.values - exact), 1e-3);
  EXPECT_NEAR(weighted_mean(g, sol.solution.values), 0.0, 1e-14);
}

TEST(Poisson, ZeroData) {
  const auto g = build_component_geometry(make_circle(1.0, 64));
  const auto sol = solve_zero_average(g, Eigen::VectorXd::Zero(64));
  EXPECT_EQ(sol.solution.values.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(velocity_potential(g, Eigen::VectorXd::Zero(64)).values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Poisson, RadiusScaling) {
  const int n = 512;
  for (double R : {0.5, 3.0})
    for (int k : {1, 4}) {
      const auto g = build_component_geometry(make_circle(R, n));
      const auto sol = solve_zero_average(g, on_circle(n, [k](double t) { return std::cos(k * t); }));
      const Eigen::VectorXd exact = on_circle(n, [=](double t) { return -R * R / (k * k) * std::cos(k * t); });
      EXPECT_LE((sol.solution.values - exact).cwiseAbs().maxCoeff(), 1e-3 * R * R) << "R=" << R << " k=" << k;
    }
}

TEST(Poisson, SecondOrderConvergence) {
  double prev = 0.0;
  for (int n : {32, 64, 128, 256}) {
    const auto g = build_component_geometry(make_circle(1.0, n));
    const auto sol = solve_zero_average(g, on_circle(n, [](double t) { return std::cos(3 * t); }));
    const double e = l2(g, sol.solution.values - on_circle(n, [](double t) { return -std::cos(3 * t) / 9.0; }));
    if (prev > 0.0) EXPECT_NEAR(std::log2(prev / e), 2.0, 0.4);
    prev = e;
  }
}

TEST(Poisson, VelocityPotential) {
  const int n = 256;
  const auto g = build_component_geometry(make_circle(1.0, n));
  const auto phi = velocity_potential(g, on_circle(n, [](double t) { return std::cos(t); }));
  EXPECT_LE((phi.values - on_circle(n, [](double t) { return -std::cos(t); })).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_THROW(velocity_potential(g, Eigen::VectorXd::Ones(n)), Error);
  try {
    velocity_potential(g, Eigen::VectorXd::Ones(n));
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonZeroMean);
  }
}

TEST(Poisson, DoubleSolveIdentity) {
  // V = d_s^2 kappa on a near circle: phi_V equals kappa - <kappa>.
  const auto g = build_component_geometry(make_polar([](double t) { return 1.0 + 0.02 * std::cos(4 * t); }, 400));
  const Eigen::VectorXd kappa = Eigen::Map<const Eigen::VectorXd>(g.kappa.data(), g.size());
  const Eigen::VectorXd V = laplacian_apply(g, kappa);
  const Eigen::VectorXd phi = velocity_potential(g, V).values;
  const Eigen::VectorXd expect = kappa.array() - weighted_mean(g, kappa);
  EXPECT_LE((phi - expect).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Poisson, HMinusOneNorm) {
  const int n = 1024;
  const auto g = build_component_geometry(make_circle(1.0, n));
  for (int k : {1, 2, 3}) {
    const Eigen::VectorXd V = on_circle(n, [k](double t) { return std::cos(k * t); });
    EXPECT_NEAR(h_minus1_norm_sq(g, V), kPi / (k * k), 1e-3);
    EXPECT_NEAR(h_minus1_norm_sq(g, 2.0 * V), 4.0 * h_minus1_norm_sq(g, V), 1e-12);
  }
  EXPECT_EQ(h_minus1_norm_sq(g, Eigen::VectorXd::Zero(n)), 0.0);
}

TEST(Poisson, NuDotBPotential) {
  const int n = 256;
  const auto g = build_component_geometry(make_circle(1.0, n));
  const auto e1 = nu_dot_B_potential(g, [](const Vec2&) { return Vec2(1.0, 0.0); });
  EXPECT_LE((e1.values - on_circle(n, [](double t) { return -std::cos(t); })).cwiseAbs().maxCoeff(), 1e-3);
  const auto id = nu_dot_B_potential(g, [](const Vec2& x) { return x; });
  EXPECT_LE(id.values.cwiseAbs().maxCoeff(), 1e-12);
  const auto ell = build_component_geometry(make_ellipse(2.0, 1.0, 300));
  const auto c = solve_zero_average(ell, [&] {
    Eigen::VectorXd f(ell.size());
    for (int i = 0; i < ell.size(); ++i) f[i] = ell.nu[i].dot(Vec2(0.3, -0.7));
    return f;
  }());
  EXPECT_NEAR(c.mean_removed, 0.0, 1e-12);
}

TEST(Poisson, StiffnessSymmetricAndResidual) {
  const auto g = build_component_geometry(make_ellipse(1.5, 1.0, 100));
  Eigen::VectorXd a(100), b(100);
  for (int i = 0; i < 100; ++i) a[i] = std::sin(0.3 * i), b[i] = std::cos(0.17 * i * i);
  EXPECT_NEAR(a.dot(stiffness_apply(g, b)), b.dot(stiffness_apply(g, a)), 1e-12);
  EXPECT_NEAR(stiffness_apply(g, Eigen::VectorXd::Ones(100)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  const auto sol = solve_zero_average(g, b);
  EXPECT_LE(sol.residual_norm, 1e-9 * b.cwiseAbs().maxCoeff());
}
