// Acceptance run: one PASS/FAIL line per criterion. Usage: acceptance <scenario-dir>

#include "sdlab/scenario.hpp"
#include "sdlab/suites.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>

using namespace sdlab;

namespace {

int failures = 0;

void line(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s %2d %-34s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
void guarded(int id, const std::string& name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    line(id, name, false, std::string("error: ") + e.what());
  }
}

void circle_stationarity() {
  const auto t0 = std::chrono::steady_clock::now();
  FlowConfig cfg;
  cfg.dt = 1e-3;
  cfg.end_time = 0.1;
  const auto res = run_flow(PolyCurve({make_circle(1.0, 256)}), cfg);
  const double secs = seconds_since(t0);
  double dev = 0.0;
  for (const auto& v : res.final_state.curve[0].vertices) dev = std::max(dev, std::abs(v.norm() - 1.0));
  line(1, "circle stationarity", res.accepted == 100 && dev <= 1e-6 && secs < 5.0,
       fmt("steps %ld, max deviation %.2e (<= 1e-6), %.2f s (< 5 s)", res.accepted, dev, secs));
}

void conservation_laws() {
  FlowConfig cfg;
  cfg.dt = 1e-4;
  cfg.max_dt_growth = 1.1;
  cfg.dt_max = 1e-3;
  cfg.end_time = 10.0;
  RunOptions opts;
  opts.sample_interval = 0.01;
  opts.stop = [](const FlowState& s) { return s.isoperimetric_ratio() <= 1.001; };
  const auto res = run_flow(PolyCurve({make_ellipse(2.0, 1.0, 512)}), cfg, opts);
  const double iso = res.final_state.isoperimetric_ratio();
  line(2, "conservation laws", iso <= 1.001 && res.max_area_drift <= 1e-4 && res.length_monotone,
       fmt("t=%.3f iso %.5f, area drift %.2e (<= 1e-4), length monotone %s over %ld steps", res.final_state.time, iso,
           res.max_area_drift, res.length_monotone ? "yes" : "no", res.accepted));
}

void dissipation_convergence() {
  FlowConfig cfg;
  cfg.dt = 1e-4;
  cfg.end_time = 0.05;
  const FlowState s = run_flow(PolyCurve({make_ellipse(2.0, 1.0, 512)}), cfg).final_state;
  std::vector<double> r;
  for (double dt : {4e-3, 2e-3, 1e-3}) r.push_back(dissipation_identity_residual(s, step(s, cfg, dt)).full);
  bool ok = true;
  std::string detail = fmt("residuals %.3e %.3e %.3e, halving factors", r[0], r[1], r[2]);
  for (int k = 0; k + 1 < 3; ++k) {
    const double q = r[k + 1] / r[k];
    ok = ok && q >= 0.5 * 0.7 && q <= 0.5 * 1.3;
    detail += fmt(" %.3f", q);
  }
  line(3, "dissipation identity convergence", ok, detail + " (0.5 +- 30%)");
}

void gauss_bonnet(const std::vector<ScenarioResult>& runs) {
  double worst = 0.0;
  for (const auto& r : runs) worst = std::max(worst, r.gauss_bonnet_max);
  line(4, "Gauss-Bonnet", !runs.empty() && worst <= 1e-3,
       fmt("max |sum kappa ds -+ 2pi| %.2e over %zu scenarios (<= 1e-3)", worst, runs.size()));
}

void poisson_solver() {
  const double e256 = suites::manufactured_poisson_error(256);
  bool ok = e256 <= 1e-3;
  std::string orders;
  double prev = suites::manufactured_poisson_error(32);
  for (int n = 64; n <= 512; n *= 2) {
    const double e = suites::manufactured_poisson_error(n);
    const double p = std::log2(prev / e);
    ok = ok && std::abs(p - 2.0) <= 0.4;
    orders += fmt(" %.3f", p);
    prev = e;
  }
  line(5, "Poisson solver", ok, fmt("L2 error %.2e at N=256 (<= 1e-3), orders", e256) + orders);
}

void extension_field() {
  auto ref = std::make_shared<const ReferenceCurve>(PolyCurve({make_circle(1.0, 128)}));
  Eigen::VectorXd v(128);
  for (int i = 0; i < 128; ++i) v[i] = std::cos(kTwoPi * i / 128);
  const BField B(ref, {v}, 0.25);
  const auto g = build_component_geometry(ref->curve()[0]);
  double err = 0.0;
  for (int i = 0; i < g.size(); ++i) err = std::max(err, std::abs(g.nu[i].dot(B(g.x[i])) - v[i]));
  const auto prof = divergence_decay_profile(B, *ref);
  const bool ok = err <= 1e-2 && prof.interior_max <= 1e-6 && std::isfinite(prof.max_ratio);
  line(6, "extension field", ok,
       fmt("sup|nu.B - V*| %.2e (<= 1e-2), interior |div B| %.2e (<= 1e-6), ray ratio %.2e, fitted slope %.2e", err,
           prof.interior_max, prof.max_ratio, prof.slope));
}

void bubble_lemma() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long checked = 0, violations = 0;
  double min_ratio = std::numeric_limits<double>::infinity();
  const std::vector<PolyCurve> refs = {PolyCurve({make_circle(1.0, 512)}), PolyCurve({make_ellipse(2.0, 1.0, 512)})};
  for (const auto& rc : refs) {
    auto ref = std::make_shared<const ReferenceCurve>(rc);
    const Calibration calib(ref, CutoffProfile(admissible_delta(*ref).delta_max));
    const double bound = xi_gradient_bound(calib);
    const auto xi = [&](const Vec2& x) { return calib.xi(x); };
    const auto g = build_component_geometry(rc[0]);
    for (int k = 0; k < 500; ++k) {
      const int i = static_cast<int>(u(rng) * g.size()) % g.size();
      const double s = (2.0 * u(rng) - 1.0) * 1.5 * calib.delta();
      const double r = 1.0 / (4.0 * bound) * (0.02 + 0.98 * u(rng));
      const Component c = make_circle(r, 24, g.x[i] + s * g.nu[i], 1, kTwoPi * u(rng));
      for (const auto& b : bubble_lemma_check(PolyCurve({c}), xi, bound)) {
        if (!b.eligible) continue;
        ++checked;
        if (!b.pass) ++violations;
        min_ratio = std::min(min_ratio, 34.0 * b.tilt / b.length);
      }
    }
  }
  line(7, "bubble lemma", checked == 1000 && violations == 0,
       fmt("%ld eligible components, %ld violations, min 34*tilt/length %.3f", checked, violations, min_ratio));
}

void pointwise_inequalities(const std::vector<ScenarioResult>& runs) {
  long violations = 0, samples = 0;
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& r : runs)
    for (const auto& v : r.comparison.sample_verdicts) {
      violations += v.pointwise_violations;
      slack = std::min(slack, v.pointwise_min_slack);
      ++samples;
    }
  line(8, "pointwise calibration inequalities", !runs.empty() && violations == 0,
       fmt("%ld violations over %ld samples in %zu scenarios, min slack %.2e", violations, samples, runs.size(), slack));
}

void stationary_stability(const ScenarioResult* run) {
  if (!run) {
    line(9, "stationary stability", false, "scenario stationary-circle-perturbed missing");
    return;
  }
  const auto& c = run->comparison;
  const double y0 = c.reports.front().E + c.reports.front().F;
  const double yT = c.reports.back().E + c.reports.back().F;
  const double iso = run->weak_run.final_state.isoperimetric_ratio();

  Scenario same;
  same.name = "identical";
  same.reference.kind = "circle";
  same.reference.resolution = 256;
  same.reference_evolves = false;
  same.delta = 0.25;
  same.flow.dt = 1e-3;
  same.flow.end_time = 0.05;
  same.sample_interval = 0.005;
  const auto id = run_scenario(same);
  double worst = 0.0;
  for (const auto& r : id.comparison.reports) worst = std::max(worst, r.E + r.F);
  const double floor = id.comparison.floor;

  const bool ok = c.gronwall.pass && std::isfinite(c.gronwall.C_fit) && iso <= 1.0001 && yT <= y0 && worst <= 10.0 * floor;
  line(9, "stationary stability", ok,
       fmt("C_fit %.3g, iso %.6f at T=%.3f, E+F %.3e -> %.3e; identical data max E+F %.2e (<= 10 x floor %.2e)",
           c.gronwall.C_fit, iso, run->weak_run.final_state.time, y0, yT, worst, 10.0 * floor));
}

void weak_strong(const ScenarioResult& coarse, const ScenarioResult& fine, const Scenario& base) {
  const double c1 = coarse.comparison.gronwall.C_fit, c2 = fine.comparison.gronwall.C_fit;
  const bool finite = coarse.comparison.gronwall.pass && fine.comparison.gronwall.pass && std::isfinite(c1) && std::isfinite(c2);
  const double hi = std::max(c1, c2), lo = std::min(c1, c2);
  const bool stable = finite && (hi <= 1e-12 || hi <= 2.0 * lo);

  // Initial E+F against the bubble count.
  const ScenarioData d0 = initial_data(base);
  auto ref = std::make_shared<const ReferenceCurve>(d0.reference);
  const Calibration calib(ref, CutoffProfile(coarse.comparison.delta));
  auto initial = [&](int count) {
    Scenario sc = base;
    sc.random_bubbles = count;
    const ScenarioData d = initial_data(sc);
    double radii = 0.0;
    for (const auto& b : d.bubbles) radii += b.radius;
    return std::pair<double, double>(relative_energy(d.weak, calib) + bulk_error(d.weak, calib).F, radii);
  };
  const auto [y0, r0] = initial(0);
  bool scaling = true;
  std::string sweep;
  for (int k : {0, 2, 4, 8}) {
    const auto [y, radii] = initial(k);
    const double q = y / (y0 + kTwoPi * radii);
    scaling = scaling && q >= 0.5 && q <= 2.0;
    sweep += fmt(" k=%d:%.4g(%.3f)", k, y, q);
  }
  line(10, "weak-strong comparison", stable && scaling,
       fmt("C_fit %.3g (dt) / %.3g (dt/2); E0+F0 sweep", c1, c2) + sweep);
}

void nu_dot_b(const std::vector<ScenarioResult>& runs) {
  int with_b = 0;
  long samples = 0;
  bool ok = true;
  double s1 = std::numeric_limits<double>::infinity(), s2 = s1;
  for (const auto& r : runs) {
    if (!r.scenario.reference_evolves) continue;
    ++with_b;
    for (const auto& v : r.comparison.sample_verdicts) {
      ok = ok && v.nu_b_first && v.nu_b_second;
      s1 = std::min(s1, v.nu_b_first_slack);
      s2 = std::min(s2, v.nu_b_second_slack);
      ++samples;
    }
  }
  line(11, "nu.B flux sums", with_b > 0 && ok,
       fmt("%d scenarios with nonzero B, %ld samples, min slack first %.3e second %.3e", with_b, samples, s1, s2));
}

void wedge_identity() {
  const int nref = 2048;
  auto ref = std::make_shared<const ReferenceCurve>(PolyCurve({make_circle(1.0, nref)}));
  Eigen::VectorXd v(nref);
  for (int i = 0; i < nref; ++i) v[i] = std::cos(kTwoPi * i / nref);
  const BField B(ref, {v}, 0.25);
  const Calibration calib(ref, CutoffProfile(0.25));
  auto curve = [](int n) {
    return PolyCurve({make_polar([](double t) { return 1 + 0.05 * std::cos(3 * t + 0.7) + 0.03 * std::sin(2 * t + 0.3); },
                                 n, 0.0, Vec2(0.02, -0.01))});
  };
  const double r256 = gauss_wedge_residual(curve(256), B, calib);
  const double r512 = gauss_wedge_residual(curve(512), B, calib);
  const double order = std::log2(r256 / r512);
  line(12, "B-wedge-xi closedness", r512 <= 1e-2 && std::abs(order - 2.0) <= 0.5,
       fmt("residual %.3e at N=256, %.3e at N=512 (<= 1e-2), order %.2f", r256, r512, order));
}

/// Largest discrete Rayleigh quotient of the Poincare ratio over all fields on g.
double sharp_poincare_constant(const GeometryCache& g) {
  const int n = g.size();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int j = g.next(i);
    const double w = 1.0 / g.edge_length[i];
    K(i, i) += w;
    K(j, j) += w;
    K(i, j) -= w;
    K(j, i) -= w;
  }
  Eigen::VectorXd m(n);
  for (int i = 0; i < n; ++i) m[i] = g.dual_length[i];
  const Eigen::VectorXd is = m.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd S = is.asDiagonal() * K * is.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return 1.0 / (g.diameter * g.diameter * es.eigenvalues()[1]);
}

void poincare(const std::vector<ScenarioResult>& runs) {
  std::vector<Component> comps;
  for (const auto& r : runs) {
    for (const auto& c : r.data.reference.components) comps.push_back(c);
    for (const auto& c : r.data.weak.components) comps.push_back(c);
  }
  CounterRng rng(14);
  long fields = 0, exceed = 0;
  double worst = 0.0;
  for (const auto& c : comps) {
    const auto g = build_component_geometry(c);
    const double C = sharp_poincare_constant(g);
    for (int f = 0; f < 200; ++f) {
      const int degree = 1 + static_cast<int>(rng.uniform() * 8);
      Eigen::VectorXd u = Eigen::VectorXd::Constant(g.size(), rng.normal());
      std::vector<std::pair<double, double>> coef;
      for (int k = 1; k <= degree; ++k) coef.emplace_back(rng.normal(), rng.normal());
      for (int i = 0; i < g.size(); ++i) {
        const double th = kTwoPi * g.arc_positions[i] / g.length;
        for (int k = 1; k <= degree; ++k) u[i] += coef[k - 1].first * std::cos(k * th) + coef[k - 1].second * std::sin(k * th);
      }
      const double ratio = poincare_ratio(g, u, 2.0);
      worst = std::max(worst, ratio / C);
      if (ratio > 1.05 * C) ++exceed;
      ++fields;
    }
  }
  const int n = 1024;
  const auto circle = build_component_geometry(make_circle(1.0, n));
  Eigen::VectorXd cs(n);
  for (int i = 0; i < n; ++i) cs[i] = std::cos(kTwoPi * i / n);
  const double cos_ratio = poincare_ratio(circle, cs, 2.0);
  line(13, "Poincare constant", exceed == 0 && std::abs(cos_ratio - 0.25) <= 1e-3 && fields > 0,
       fmt("%ld fields on %zu components, max ratio/constant %.4f (<= 1.05), cos on unit circle %.6f", fields,
           comps.size(), worst, cos_ratio));
}

void bulk_oracles(const std::vector<ScenarioResult>& runs) {
  auto ref = std::make_shared<const ReferenceCurve>(PolyCurve({make_circle(1.0, 1024)}));
  const Calibration calib(ref, CutoffProfile(0.25));
  const double eps = 0.05;
  const double exact = kTwoPi * (eps * eps / 2 + eps * eps * eps / 3);
  const double F = bulk_error(PolyCurve({make_circle(1.0 + eps, 4096)}), calib).F;
  const double rel = std::abs(F - exact) / exact;
  bool mc = !runs.empty();
  double worst = 0.0;
  for (const auto& r : runs) {
    const auto& v = r.comparison.sample_verdicts.front();
    mc = mc && v.monte_carlo_ok && r.scenario.monte_carlo > 0;
    worst = std::max(worst, v.monte_carlo_sigma);
  }
  line(14, "bulk error oracles", rel <= 1e-4 && mc,
       fmt("annulus relative error %.2e (<= 1e-4); Monte Carlo max deviation %.2f sigma (<= 3) over %zu scenarios", rel,
           worst, runs.size()));
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "scenarios";
  guarded(1, "circle stationarity", circle_stationarity);

  std::vector<Scenario> scenarios;
  try {
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".yaml") scenarios.push_back(load_scenario(e.path()));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load scenarios: %s\n", e.what());
  }
  std::sort(scenarios.begin(), scenarios.end(), [](const Scenario& a, const Scenario& b) { return a.name < b.name; });
  for (auto& sc : scenarios) sc.monte_carlo = std::max<long>(sc.monte_carlo, 1000000);

  guarded(2, "conservation laws", conservation_laws);
  guarded(3, "dissipation identity convergence", dissipation_convergence);
  guarded(5, "Poisson solver", poisson_solver);
  guarded(6, "extension field", extension_field);
  guarded(7, "bubble lemma", bubble_lemma);
  guarded(12, "B-wedge-xi closedness", wedge_identity);

  std::vector<ScenarioResult> runs;
  for (const auto& sc : scenarios) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      runs.push_back(run_scenario(sc));
      std::fprintf(stderr, "scenario %s done in %.1f s\n", sc.name.c_str(), seconds_since(t0));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "scenario %s failed: %s\n", sc.name.c_str(), e.what());
    }
  }
  const bool all_ran = runs.size() == scenarios.size() && !scenarios.empty();
  if (!all_ran) std::fprintf(stderr, "only %zu of %zu scenarios completed\n", runs.size(), scenarios.size());

  guarded(4, "Gauss-Bonnet", [&] { gauss_bonnet(all_ran ? runs : std::vector<ScenarioResult>{}); });
  guarded(8, "pointwise calibration inequalities", [&] { pointwise_inequalities(all_ran ? runs : std::vector<ScenarioResult>{}); });
  guarded(9, "stationary stability", [&] {
    const ScenarioResult* st = nullptr;
    for (const auto& r : runs)
      if (r.scenario.name == "stationary-circle-perturbed") st = &r;
    stationary_stability(st);
  });
  guarded(10, "weak-strong comparison", [&] {
    auto it = std::find_if(scenarios.begin(), scenarios.end(), [](const Scenario& s) { return s.name == "ellipse-bubbles-k4"; });
    if (it == scenarios.end()) throw Error(ErrorKind::Config, "acceptance", "scenario ellipse-bubbles-k4 missing");
    Scenario base = *it;
    base.monte_carlo = 0;
    Scenario half = base;
    half.flow.dt *= 0.5;
    weak_strong(run_scenario(base), run_scenario(half), base);
  });
  guarded(11, "nu.B flux sums", [&] { nu_dot_b(all_ran ? runs : std::vector<ScenarioResult>{}); });
  guarded(13, "Poincare constant", [&] { poincare(runs); });
  guarded(14, "bulk error oracles", [&] { bulk_oracles(all_ran ? runs : std::vector<ScenarioResult>{}); });

  std::printf("%d of 14 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
