#pragma once

// Surface diffusion V = d_s^2 kappa for closed polygonal curves.
//
// Each component is advanced by a mixed semi-implicit finite element step in
// the unknowns (X^{n+1}, kappa^{n+1}) with lumped mass:
//
//   m_i w_i . (X_i^{n+1} - X_i^n) / dt + (K kappa^{n+1})_i = 0
//   m_i kappa_i^{n+1} w_i - (K X^{n+1})_i                   = 0
//
// where K is the stiffness on the current edges and m_i w_i is half the sum
// of the adjacent edge normals (scaled by length). With w taken on X^n this
// is the classical scheme; with w taken on the midpoint polygon
// (X^n + X^{n+1}) / 2 the enclosed area is preserved exactly and the system
// is solved by Newton's method starting from the linear step.

#include "sdlab/curve_io.hpp"
#include "sdlab/geometry.hpp"
#include "sdlab/poisson.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <filesystem>
#include <fstream>
#include <iomanip>

namespace sdlab {

enum class FlowScheme { Classical, AreaPreserving };

struct FlowConfig {
  double dt = 1e-4;
  double dt_max = 1e-2;
  double dt_min = 1e-12;
  double max_dt_growth = 1.0;  // <= 1.2; 1 keeps dt fixed
  double remesh_min_ratio = 0.25;
  double remesh_max_ratio = 4.0;
  double area_drift_abort = 1e-4;
  double end_time = 1.0;
  FlowScheme scheme = FlowScheme::AreaPreserving;
  int newton_max_iter = 20;
  double newton_tol = 1e-13;
  bool check_intersections = true;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::Config, "flow", m); };
    if (!(dt > 0.0)) bad("dt must be positive");
    if (!(max_dt_growth >= 1.0 && max_dt_growth <= 1.2)) bad("max_dt_growth must lie in [1, 1.2]");
    if (!(remesh_min_ratio > 0.0 && remesh_min_ratio < 1.0)) bad("remesh min ratio must lie in (0, 1)");
    if (!(remesh_max_ratio > 1.0)) bad("remesh max ratio must exceed 1");
    if (!(area_drift_abort > 0.0)) bad("area_drift_abort must be positive");
  }
};

struct FlowState {
  PolyCurve curve;
  double time = 0.0;
  long step_index = 0;
  std::vector<GeometryCache> caches;
  std::vector<Eigen::VectorXd> kappa;     // curvature unknown of the last step (turning-angle curvature initially)
  std::vector<Eigen::VectorXd> velocity;  // normal velocity of the last step
  double initial_area = 0.0;

  static FlowState from_curve(PolyCurve c) {
    FlowState s;
    s.caches = build_geometry(c);
    s.curve = std::move(c);
    s.initial_area = s.curve.signed_area();
    for (const auto& g : s.caches) {
      s.kappa.push_back(Eigen::Map<const Eigen::VectorXd>(g.kappa.data(), g.size()));
      s.velocity.push_back(Eigen::VectorXd::Zero(g.size()));
    }
    return s;
  }

  double length() const {
    double l = 0.0;
    for (const auto& g : caches) l += g.length;
    return l;
  }
  double area() const { return curve.signed_area(); }
  double isoperimetric_ratio() const { return length() * length() / (4.0 * kPi * area()); }
};

/// m_i w_i = (h_{i-1} n_{i-1} + h_i n_i) / 2 for the polygon x.
inline std::vector<Vec2> weighted_vertex_normals(const std::vector<Vec2>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<Vec2> w(n);
  for (int i = 0; i < n; ++i) {
    const Vec2& xm = x[(i + n - 1) % n];
    const Vec2& xp = x[(i + 1) % n];
    w[i] = 0.5 * rotate_cw(xp - xm);
  }
  return w;
}

struct ComponentStep {
  std::vector<Vec2> x;
  Eigen::VectorXd kappa;
  Eigen::VectorXd velocity;  // w_i . dX_i / dt
  int iterations = 1;
};

inline ComponentStep step_component(const GeometryCache& g, double dt, FlowScheme scheme,
                                    int max_iter = 20, double tol = 1e-13) {
  const int n = g.size();
  using SpMat = Eigen::SparseMatrix<double>;
  Eigen::SparseLU<SpMat> lu;
  const std::vector<Vec2> mw0 = weighted_vertex_normals(g.x);
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = 1.0 / g.edge_length[g.prev(i)];
    b[i] = 1.0 / g.edge_length[i];
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 23);
  auto add_stiffness = [&](int i) {
    const int im = g.prev(i), ip = g.next(i);
    trip.emplace_back(3 * i, 3 * i + 2, a[i] + b[i]);
    trip.emplace_back(3 * i, 3 * im + 2, -a[i]);
    trip.emplace_back(3 * i, 3 * ip + 2, -b[i]);
    for (int d = 0; d < 2; ++d) {
      const int row = 3 * i + 1 + d;
      trip.emplace_back(row, 3 * i + d, -(a[i] + b[i]));
      trip.emplace_back(row, 3 * im + d, a[i]);
      trip.emplace_back(row, 3 * ip + d, b[i]);
    }
  };
  auto factor = [&](SpMat& A) {
    A.setFromTriplets(trip.begin(), trip.end());
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw Error(ErrorKind::SingularSystem, "flow", "step system factorisation failed");
  };

  // Linear step with normals frozen at X^n.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(3 * i, 3 * i, mw0[i].x() / dt);
    trip.emplace_back(3 * i, 3 * i + 1, mw0[i].y() / dt);
    trip.emplace_back(3 * i + 1, 3 * i + 2, mw0[i].x());
    trip.emplace_back(3 * i + 2, 3 * i + 2, mw0[i].y());
    add_stiffness(i);
    rhs[3 * i] = mw0[i].dot(g.x[i]) / dt;
  }
  SpMat A(3 * n, 3 * n);
  factor(A);
  Eigen::VectorXd sol = lu.solve(rhs);

  ComponentStep out;
  auto position = [&](int i) { return Vec2(sol[3 * i], sol[3 * i + 1]); };
  std::vector<Vec2> mw = mw0;
  if (scheme == FlowScheme::AreaPreserving) {
    // Newton on the system with normals taken on the midpoint polygon; those
    // normals are affine in X^{n+1}, so the residual is quadratic.
    // The Jacobian is refactored only when the chord iteration stalls.
    bool refactor = true;
    double last_change = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
      std::vector<Vec2> mid(n);
      for (int i = 0; i < n; ++i) mid[i] = 0.5 * (g.x[i] + position(i));
      mw = weighted_vertex_normals(mid);
      Eigen::VectorXd res(3 * n);
      if (refactor) trip.clear();
      for (int i = 0; i < n; ++i) {
        const int im = g.prev(i), ip = g.next(i);
        const Vec2 dx = position(i) - g.x[i];
        const double k = sol[3 * i + 2];
        const double kk = (a[i] + b[i]) * k - a[i] * sol[3 * im + 2] - b[i] * sol[3 * ip + 2];
        res[3 * i] = mw[i].dot(dx) / dt + kk;
        for (int d = 0; d < 2; ++d) {
          const double kx = (a[i] + b[i]) * sol[3 * i + d] - a[i] * sol[3 * im + d] - b[i] * sol[3 * ip + d];
          res[3 * i + 1 + d] = mw[i][d] * k - kx;
        }
        if (!refactor) continue;
        // d(mw_i . dx)/dX_{i+1} = rotate_ccw(dx) / 4, opposite sign for X_{i-1}.
        const Vec2 q = 0.25 * rotate_ccw(dx) / dt;
        trip.emplace_back(3 * i, 3 * i, mw[i].x() / dt);
        trip.emplace_back(3 * i, 3 * i + 1, mw[i].y() / dt);
        trip.emplace_back(3 * i, 3 * ip, q.x());
        trip.emplace_back(3 * i, 3 * ip + 1, q.y());
        trip.emplace_back(3 * i, 3 * im, -q.x());
        trip.emplace_back(3 * i, 3 * im + 1, -q.y());
        // mw_i = rotate_cw(X_{i+1} - X_{i-1}) / 4 + const.
        trip.emplace_back(3 * i + 1, 3 * i + 2, mw[i].x());
        trip.emplace_back(3 * i + 1, 3 * ip + 1, 0.25 * k);
        trip.emplace_back(3 * i + 1, 3 * im + 1, -0.25 * k);
        trip.emplace_back(3 * i + 2, 3 * i + 2, mw[i].y());
        trip.emplace_back(3 * i + 2, 3 * ip, -0.25 * k);
        trip.emplace_back(3 * i + 2, 3 * im, 0.25 * k);
        add_stiffness(i);
      }
      if (refactor) factor(A);
      const Eigen::VectorXd delta = lu.solve(-res);
      sol += delta;
      double change = 0.0;
      for (int i = 0; i < n; ++i) change = std::max(change, std::hypot(delta[3 * i], delta[3 * i + 1]));
      out.iterations = it + 2;
      if (change <= tol * std::max(1.0, g.diameter)) break;
      refactor = change > 0.1 * last_change;
      last_change = change;
    }
    std::vector<Vec2> mid(n);
    for (int i = 0; i < n; ++i) mid[i] = 0.5 * (g.x[i] + position(i));
    mw = weighted_vertex_normals(mid);
  }
  out.x.resize(n);
  out.kappa.resize(n);
  out.velocity.resize(n);
  for (int i = 0; i < n; ++i) {
    out.x[i] = position(i);
    out.kappa[i] = sol[3 * i + 2];
    out.velocity[i] = mw[i].dot(out.x[i] - g.x[i]) / (dt * g.dual_length[i]);
  }
  return out;
}

inline double edge_ratio(const GeometryCache& g) {
  const auto [mn, mx] = std::minmax_element(g.edge_length.begin(), g.edge_length.end());
  const double mean = g.length / g.size();
  return std::max(mean / *mn, *mx / mean);
}

/// One attempted step. Throws StepRejected / TopologyChange; the caller halves dt.
inline FlowState step(const FlowState& state, const FlowConfig& config, double dt) {
  FlowState next;
  next.curve = state.curve;
  next.initial_area = state.initial_area;
  next.time = state.time + dt;
  next.step_index = state.step_index + 1;
  for (std::size_t c = 0; c < state.caches.size(); ++c) {
    auto r = step_component(state.caches[c], dt, config.scheme, config.newton_max_iter, config.newton_tol);
    next.curve.components[c].vertices = std::move(r.x);
    next.kappa.push_back(std::move(r.kappa));
    next.velocity.push_back(std::move(r.velocity));
  }
  for (auto& comp : next.curve.components) {
    const double a = shoelace_area(comp.vertices);
    if ((a > 0 ? 1 : -1) != comp.orientation)
      throw Error(ErrorKind::TopologyChange, "flow", "component " + std::to_string(comp.id) + " inverted");
  }
  if (config.check_intersections) {
    const double diam = next.curve.diameter();
    if (auto hit = find_intersection(next.curve, 1e-10 * diam))
      throw Error(ErrorKind::TopologyChange, "flow",
                  "self-intersection at t=" + std::to_string(next.time) + " between components " +
                      std::to_string(next.curve[hit->first.component].id) + " and " +
                      std::to_string(next.curve[hit->second.component].id));
  }
  next.caches = build_geometry(next.curve, false);
  const double drift = std::abs(next.area() - state.initial_area) / std::abs(state.initial_area);
  if (drift > config.area_drift_abort)
    throw Error(ErrorKind::StepRejected, "flow", "area drift " + std::to_string(drift));
  if (next.length() > state.length() * (1.0 + 1e-14))
    throw Error(ErrorKind::StepRejected, "flow", "length increased");
  bool remeshed = false;
  for (std::size_t c = 0; c < next.caches.size(); ++c) {
    const auto& g = next.caches[c];
    const auto [mn, mx] = std::minmax_element(g.edge_length.begin(), g.edge_length.end());
    const double mean = g.length / g.size();
    if (*mn / mean < config.remesh_min_ratio || *mx / mean > config.remesh_max_ratio) {
      next.curve.components[c].vertices = resample_spline(g.x, g.size());
      remeshed = true;
    }
  }
  if (remeshed) {
    next.caches = build_geometry(next.curve, false);
    for (std::size_t c = 0; c < next.caches.size(); ++c) {
      const auto& g = next.caches[c];
      next.kappa[c] = Eigen::Map<const Eigen::VectorXd>(g.kappa.data(), g.size());
      next.velocity[c] = Eigen::VectorXd::Zero(g.size());
    }
  }
  return next;
}

struct TrajectorySample {
  double t = 0.0;
  PolyCurve curve;
  std::vector<Eigen::VectorXd> kappa;     // turning-angle curvature
  std::vector<Eigen::VectorXd> velocity;  // discrete d_s^2 kappa
};

/// Instantaneous curvature and normal velocity V = d_s^2 kappa of a curve.
inline TrajectorySample sample_of(double t, const PolyCurve& curve) {
  TrajectorySample s;
  s.t = t;
  s.curve = curve;
  for (const auto& g : build_geometry(curve, false)) {
    Eigen::VectorXd k = Eigen::Map<const Eigen::VectorXd>(g.kappa.data(), g.size());
    s.velocity.push_back(laplacian_apply(g, k));
    s.kappa.push_back(std::move(k));
  }
  return s;
}

/// Point at arc-length fraction f along a closed polygon (measured from vertex 0).
inline Vec2 point_at_fraction(const GeometryCache& g, double f) {
  f -= std::floor(f);
  const double target = f * g.length;
  auto it = std::upper_bound(g.arc_positions.begin(), g.arc_positions.end(), target);
  const int i = static_cast<int>(it - g.arc_positions.begin()) - 1;
  const double u = (target - g.arc_positions[i]) / g.edge_length[i];
  return g.x[i] + u * (g.x[g.next(i)] - g.x[i]);
}

class Trajectory {
 public:
  std::vector<TrajectorySample> samples;

  bool empty() const { return samples.empty(); }
  double t0() const { return samples.front().t; }
  double t1() const { return samples.back().t; }

  void push(TrajectorySample s) {
    if (!samples.empty() && !(s.t > samples.back().t))
      throw Error(ErrorKind::InvalidCurve, "flow", "trajectory times must increase strictly");
    samples.push_back(std::move(s));
  }

  /// Piecewise-linear interpolation in vertex positions; the later sample is
  /// matched to the earlier one's vertices by arc-length fraction.
  PolyCurve at(double t) const {
    if (samples.empty()) throw Error(ErrorKind::InvalidCurve, "flow", "empty trajectory");
    if (t <= samples.front().t) return samples.front().curve;
    if (t >= samples.back().t) return samples.back().curve;
    auto it = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double v, const TrajectorySample& s) { return v < s.t; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double w = (t - a.t) / (b.t - a.t);
    PolyCurve out = a.curve;
    const auto ga = build_geometry(a.curve, false);
    const auto gb = build_geometry(b.curve, false);
    for (std::size_t c = 0; c < out.size(); ++c) {
      auto& v = out.components[c].vertices;
      for (int i = 0; i < static_cast<int>(v.size()); ++i) {
        const Vec2 pb = point_at_fraction(gb[c], ga[c].arc_positions[i] / ga[c].length);
        v[i] = (1.0 - w) * v[i] + w * pb;
      }
    }
    return out;
  }

  /// Writes curve_<k>.txt files and index.csv (t,file) into dir.
  void export_to(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream index(dir / "index.csv");
    index << "t,file\n" << std::setprecision(17);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      std::ostringstream name;
      name << "curve_" << std::setw(5) << std::setfill('0') << k << ".txt";
      write_curve_file((dir / name.str()).string(), samples[k].curve);
      index << samples[k].t << ',' << name.str() << '\n';
    }
  }

  static Trajectory load(const std::filesystem::path& dir) {
    std::ifstream index(dir / "index.csv");
    if (!index) throw Error(ErrorKind::Parse, "flow", "missing index.csv in " + dir.string());
    Trajectory tr;
    std::string line;
    int lineno = 0;
    while (std::getline(index, line)) {
      ++lineno;
      if (lineno == 1 || line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw Error(ErrorKind::Parse, "flow", (dir / "index.csv").string() + ":" + std::to_string(lineno) + ": expected t,file");
      const double t = std::stod(line.substr(0, comma));
      tr.push(sample_of(t, read_curve_file((dir / line.substr(comma + 1)).string())));
    }
    if (tr.empty()) throw Error(ErrorKind::Parse, "flow", "trajectory " + dir.string() + " has no samples");
    return tr;
  }
};

struct RunOptions {
  double sample_interval = 0.0;  // 0 records every accepted step
  std::function<bool(const FlowState&)> stop;  // optional early stop
  std::function<void(const FlowState& before, const FlowState& after)> on_step;
  long max_steps = 100000000;
};

struct RunResult {
  Trajectory trajectory;
  FlowState final_state;
  long accepted = 0;
  long rejected = 0;
  bool length_monotone = true;
  double max_area_drift = 0.0;
};

inline RunResult run_flow(const PolyCurve& initial, const FlowConfig& config, const RunOptions& opts = {}) {
  config.validate();
  RunResult res;
  FlowState state = FlowState::from_curve(initial);
  res.trajectory.push(sample_of(state.time, state.curve));
  double dt = config.dt;
  double next_sample = state.time + opts.sample_interval;
  int streak = 0;
  const double eps_t = 1e-12 * std::max(1.0, config.end_time);
  while (state.time < config.end_time - eps_t && res.accepted < opts.max_steps) {
    if (opts.stop && opts.stop(state)) break;
    const double h = std::min(dt, config.end_time - state.time);
    FlowState next;
    try {
      next = step(state, config, h);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::StepRejected) throw;
      ++res.rejected;
      dt *= 0.5;
      streak = 0;
      if (dt < config.dt_min) throw Error(ErrorKind::StepRejected, "flow", std::string("dt underflow: ") + e.what());
      continue;
    }
    if (next.length() > state.length()) res.length_monotone = false;
    if (opts.on_step) opts.on_step(state, next);
    state = std::move(next);
    ++res.accepted;
    res.max_area_drift =
        std::max(res.max_area_drift, std::abs(state.area() - state.initial_area) / std::abs(state.initial_area));
    if (++streak >= 10 && config.max_dt_growth > 1.0) {
      dt = std::min(dt * config.max_dt_growth, config.dt_max);
      streak = 0;
    }
    if (opts.sample_interval <= 0.0 || state.time >= next_sample - eps_t) {
      res.trajectory.push(sample_of(state.time, state.curve));
      next_sample = state.time + opts.sample_interval;
    }
  }
  if (res.trajectory.samples.back().t < state.time) res.trajectory.push(sample_of(state.time, state.curve));
  res.final_state = std::move(state);
  return res;
}

struct DissipationResidual {
  double rate = 0.0;        // (L_after - L_before) / dt
  double dirichlet = 0.0;   // int |d_s kappa|^2 at the midpoint geometry
  double potential = 0.0;   // int |d_s phi_V|^2 at the midpoint geometry
  double full = 0.0;        // |rate + dirichlet|
  double half = 0.0;        // |rate + dirichlet / 2 + potential / 2|
};

inline DissipationResidual dissipation_identity_residual(const FlowState& before, const FlowState& after) {
  DissipationResidual r;
  const double dt = after.time - before.time;
  r.rate = (after.length() - before.length()) / dt;
  PolyCurve mid = after.curve;
  for (std::size_t c = 0; c < mid.size(); ++c) {
    if (before.curve[c].vertices.size() != after.curve[c].vertices.size()) continue;
    for (std::size_t i = 0; i < mid[c].vertices.size(); ++i)
      mid[c].vertices[i] = 0.5 * (before.curve[c].vertices[i] + after.curve[c].vertices[i]);
  }
  for (const auto& g : build_geometry(mid, false)) {
    const Eigen::VectorXd k = Eigen::Map<const Eigen::VectorXd>(g.kappa.data(), g.size());
    r.dirichlet += grad_norm_sq(g, k);
    const Eigen::VectorXd v = laplacian_apply(g, k);
    r.potential += grad_norm_sq(g, solve_zero_average(g, v).solution.values);
  }
  r.full = std::abs(r.rate + r.dirichlet);
  r.half = std::abs(r.rate + 0.5 * r.dirichlet + 0.5 * r.potential);
  return r;
}

inline double volume_drift(const Trajectory& tr) {
  if (tr.empty()) throw Error(ErrorKind::InvalidCurve, "flow", "empty trajectory");
  const double a0 = tr.samples.front().curve.signed_area();
  double d = 0.0;
  for (const auto& s : tr.samples) d = std::max(d, std::abs(s.curve.signed_area() - a0) / std::abs(a0));
  return d;
}

/// Runs the flow at refine_factor times the input resolution (spline
/// resampling) and records samples every sample_interval.
inline Trajectory make_reference(const FlowConfig& config, const PolyCurve& initial, int refine_factor = 4,
                                 double sample_interval = 0.0) {
  if (refine_factor < 1) throw Error(ErrorKind::Config, "flow", "refine factor must be positive");
  PolyCurve fine = initial;
  for (auto& c : fine.components)
    c.vertices = resample_spline(c.vertices, static_cast<int>(c.vertices.size()) * refine_factor);
  RunOptions opts;
  opts.sample_interval = sample_interval;
  return run_flow(fine, config, opts).trajectory;
}

}  // namespace sdlab
