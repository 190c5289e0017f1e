#include "sdlab/flow.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace sdlab;

namespace {

double max_radius_error(const Component& c, const Vec2& centre, double R) {
  double e = 0.0;
  for (const auto& v : c.vertices) e = std::max(e, std::abs((v - centre).norm() - R));
  return e;
}

FlowConfig fixed_dt(double dt, double end) {
  FlowConfig cfg;
  cfg.dt = dt;
  cfg.end_time = end;
  return cfg;
}

}  // namespace

TEST(Flow, CircleIsStationary) {
  const Component c = make_circle(1.0, 256);
  const double start = max_radius_error(c, Vec2::Zero(), 1.0);
  const auto res = run_flow(PolyCurve({c}), fixed_dt(1e-3, 0.1));
  EXPECT_EQ(res.accepted, 100);
  EXPECT_LE(max_radius_error(res.final_state.curve[0], Vec2::Zero(), 1.0) - start, 1e-6);
  EXPECT_LE(volume_drift(res.trajectory), 1e-12);
}

TEST(Flow, CircleAnyRadiusAnyResolution) {
  for (double R : {0.3, 2.5})
    for (int n : {32, 100}) {
      const Component c = make_circle(R, n, Vec2(0.7, -1.1));
      const auto res = run_flow(PolyCurve({c}), fixed_dt(1e-3, 0.05));
      for (std::size_t i = 0; i < c.vertices.size(); ++i)
        EXPECT_LE((res.final_state.curve[0].vertices[i] - c.vertices[i]).norm(), 1e-8 * R * 0.05 + 1e-12);
    }
}

TEST(Flow, TwoCirclesEvolveIndependently) {
  const PolyCurve two({make_circle(1.0, 128), make_circle(0.5, 128, Vec2(4.0, 0.0), 1, 0.0, 1)});
  const auto res = run_flow(two, fixed_dt(1e-3, 0.05));
  EXPECT_LE(max_radius_error(res.final_state.curve[0], Vec2::Zero(), 1.0), 1e-3);
  EXPECT_LE(max_radius_error(res.final_state.curve[1], Vec2(4.0, 0.0), 0.5), 1e-3);
  for (std::size_t c = 0; c < 2; ++c)
    EXPECT_NEAR(shoelace_area(res.final_state.curve[c].vertices), shoelace_area(two[c].vertices), 1e-10);
}

TEST(Flow, EllipseRelaxesMonotonically) {
  const PolyCurve ell({make_ellipse(2.0, 1.0, 128)});
  FlowConfig cfg = fixed_dt(1e-4, 0.2);
  cfg.max_dt_growth = 1.1;
  cfg.dt_max = 2e-3;
  double prev_iso = 1e9;
  bool iso_monotone = true;
  RunOptions opts;
  opts.on_step = [&](const FlowState&, const FlowState& after) {
    const double iso = after.isoperimetric_ratio();
    if (iso > prev_iso + 1e-14) iso_monotone = false;
    prev_iso = iso;
  };
  const auto res = run_flow(ell, cfg, opts);
  EXPECT_TRUE(res.length_monotone);
  EXPECT_TRUE(iso_monotone);
  EXPECT_LT(res.final_state.isoperimetric_ratio(), PolyCurve(ell).length() * ell.length() / (4 * kPi * ell.signed_area()));
  EXPECT_LE(res.max_area_drift, 1e-4);
}

TEST(Flow, DissipationResidual) {
  const auto circle = FlowState::from_curve(PolyCurve({make_circle(1.0, 128)}));
  FlowConfig cfg;
  const auto r = dissipation_identity_residual(circle, step(circle, cfg, 1e-3));
  EXPECT_LE(r.full, 1e-8);
  EXPECT_LE(r.half, 1e-8);

  cfg.dt = 1e-4;
  cfg.end_time = 0.02;
  const auto s = run_flow(PolyCurve({make_ellipse(2.0, 1.0, 256)}), cfg).final_state;
  const double coarse = dissipation_identity_residual(s, step(s, cfg, 2e-3)).full;
  const double fine = dissipation_identity_residual(s, step(s, cfg, 1e-3)).full;
  EXPECT_NEAR(coarse / fine, 2.0, 0.6);
  EXPECT_LE(step(s, cfg, 1e-3).length(), s.length());
}

TEST(Flow, TopologyAndConfigErrors) {
  FlowConfig bad;
  bad.max_dt_growth = 1.5;
  EXPECT_THROW(bad.validate(), Error);
  bad = FlowConfig{};
  bad.dt = 0.0;
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Flow, RigidMotionCommutes) {
  const Component base = make_polar([](double t) { return 1.0 + 0.1 * std::cos(3 * t); }, 128);
  Component moved = base;
  Eigen::Matrix2d rot;
  rot << std::cos(0.4), -std::sin(0.4), std::sin(0.4), std::cos(0.4);
  const Vec2 shift(3.0, -2.0);
  for (auto& v : moved.vertices) v = rot * v + shift;
  FlowConfig cfg;
  const auto a = step(FlowState::from_curve(PolyCurve({base})), cfg, 1e-3);
  const auto b = step(FlowState::from_curve(PolyCurve({moved})), cfg, 1e-3);
  for (std::size_t i = 0; i < base.vertices.size(); ++i)
    EXPECT_LE((rot * a.curve[0].vertices[i] + shift - b.curve[0].vertices[i]).norm(), 1e-10);
}

TEST(Flow, TrajectoryExportLoadAndInterpolation) {
  RunOptions opts;
  opts.sample_interval = 0.01;
  const auto res = run_flow(PolyCurve({make_ellipse(1.5, 1.0, 64)}), fixed_dt(1e-3, 0.05), opts);
  const auto dir = std::filesystem::temp_directory_path() / "sdlab_traj_test";
  std::filesystem::remove_all(dir);
  res.trajectory.export_to(dir);
  const auto back = Trajectory::load(dir);
  ASSERT_EQ(back.samples.size(), res.trajectory.samples.size());
  for (std::size_t k = 0; k < back.samples.size(); ++k) {
    EXPECT_DOUBLE_EQ(back.samples[k].t, res.trajectory.samples[k].t);
    EXPECT_EQ(back.samples[k].curve[0].vertices[5], res.trajectory.samples[k].curve[0].vertices[5]);
  }
  std::filesystem::remove_all(dir);
  EXPECT_THROW(Trajectory::load(dir), Error);

  const PolyCurve mid = res.trajectory.at(0.5 * (res.trajectory.samples[2].t + res.trajectory.samples[3].t));
  const double a2 = res.trajectory.samples[2].curve.length(), a3 = res.trajectory.samples[3].curve.length();
  EXPECT_LE(mid.length(), std::max(a2, a3) + 1e-6);
  EXPECT_GE(mid.length(), std::min(a2, a3) - 1e-6);
}

TEST(Flow, ReferenceRefinesAndDecreases) {
  const auto circle = make_reference(fixed_dt(1e-3, 0.02), PolyCurve({make_circle(1.0, 32)}), 4);
  EXPECT_EQ(circle.samples.front().curve[0].vertices.size(), 128u);
  for (const auto& s : circle.samples) EXPECT_NEAR(s.curve.length(), circle.samples.front().curve.length(), 1e-8);

  const auto ell = make_reference(fixed_dt(1e-3, 0.05), PolyCurve({make_ellipse(2.0, 1.0, 32)}), 4, 0.01);
  for (std::size_t k = 1; k < ell.samples.size(); ++k)
    EXPECT_LT(ell.samples[k].curve.length(), ell.samples[k - 1].curve.length());
  for (const auto& s : ell.samples) {
    ASSERT_EQ(s.velocity.size(), 1u);
    EXPECT_NEAR(weighted_mean(build_component_geometry(s.curve[0]), s.velocity[0]), 0.0, 1e-9);
  }
  EXPECT_THROW(make_reference(FlowConfig{}, PolyCurve({make_circle(1.0, 32)}), 0), Error);
}

TEST(Flow, InterpolationErrorIsSecondOrder) {
  RunOptions opts;
  opts.sample_interval = 0.0;
  const PolyCurve start = run_flow(PolyCurve({make_ellipse(2.0, 1.0, 128)}), fixed_dt(5e-4, 0.02)).final_state.curve;
  const auto fine = run_flow(start, fixed_dt(5e-4, 0.04), opts).trajectory;
  auto stride_error = [&](int stride) {
    double err = 0.0;
    for (std::size_t k = 0; k + stride < fine.samples.size(); k += stride) {
      Trajectory coarse;
      coarse.push(fine.samples[k]);
      coarse.push(fine.samples[k + stride]);
      const std::size_t m = k + stride / 2;
      const PolyCurve p = coarse.at(fine.samples[m].t);
      const auto g = build_component_geometry(fine.samples[m].curve[0]);
      for (const auto& v : p[0].vertices) {
        double d = 1e300;
        for (int i = 0; i < g.size(); ++i) {
          const Vec2 a = g.x[i], e = g.x[g.next(i)] - a;
          const double u = std::clamp((v - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
          d = std::min(d, (a + u * e - v).norm());
        }
        err = std::max(err, d);
      }
    }
    return err;
  };
  const double e4 = stride_error(4), e8 = stride_error(8);
  EXPECT_NEAR(e8 / e4, 4.0, 1.0);
}
