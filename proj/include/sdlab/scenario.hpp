#pragma once

// Scenario files (YAML): reference and weak initial data, bubble seeding,
// flow settings and the comparison run.

#include "sdlab/curve_io.hpp"
#include "sdlab/energy.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <optional>

namespace sdlab {

struct ShapeSpec {
  std::string kind = "circle";  // circle | ellipse | polar | file
  double radius = 1.0;
  double a = 2.0, b = 1.0;
  int mode = 3;
  double amplitude = 0.0;
  double phase = 0.0;
  bool match_reference_area = false;
  Vec2 center = Vec2::Zero();
  std::string file;
  int resolution = 256;
};

struct BubbleSpec {
  Vec2 center = Vec2::Zero();
  double radius = 0.01;
};

struct Scenario {
  std::string name = "scenario";
  ShapeSpec reference;
  bool reference_evolves = true;
  std::optional<ShapeSpec> weak;  // empty: same datum as the reference
  int weak_resolution = 0;        // 0: reference resolution
  std::vector<BubbleSpec> bubbles;
  int random_bubbles = 0;
  double random_bubble_radius = 0.01;
  int bubble_vertices = 16;
  double delta = 0.0;  // 0: auto
  FlowConfig flow;
  double sample_interval = 0.0;
  double stop_isoperimetric = 0.0;
  int max_samples = 0;
  long monte_carlo = 0;
  std::uint64_t seed = 1;
  std::string output;
  std::filesystem::path base_dir;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& source, const YAML::Node& n, const std::string& msg) {
  const auto m = n.Mark();
  throw Error(ErrorKind::Config, "cli",
              source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": " + msg);
}

template <class T>
T get(const std::string& source, const YAML::Node& parent, const char* key, T fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    config_error(source, n, std::string("bad value for '") + key + "'");
  }
}

inline Vec2 get_vec(const std::string& source, const YAML::Node& parent, const char* key, Vec2 fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  if (!n.IsSequence() || n.size() != 2) config_error(source, n, std::string("'") + key + "' must be [x, y]");
  try {
    return {n[0].as<double>(), n[1].as<double>()};
  } catch (const YAML::Exception&) {
    config_error(source, n, std::string("'") + key + "' must be numeric");
  }
}

inline void check_keys(const std::string& source, const YAML::Node& n, std::initializer_list<const char*> allowed) {
  if (!n.IsMap()) config_error(source, n, "expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      config_error(source, kv.first, "unknown key '" + key + "'");
  }
}

inline ShapeSpec parse_shape(const std::string& source, const YAML::Node& n) {
  check_keys(source, n, {"shape", "radius", "semi_axes", "mode", "amplitude", "phase", "match_reference_area",
                         "center", "file", "resolution", "evolve"});
  ShapeSpec s;
  s.kind = get<std::string>(source, n, "shape", s.kind);
  if (s.kind != "circle" && s.kind != "ellipse" && s.kind != "polar" && s.kind != "file")
    config_error(source, n["shape"], "shape must be circle, ellipse, polar or file");
  s.radius = get<double>(source, n, "radius", s.radius);
  if (n["semi_axes"]) {
    const Vec2 ab = get_vec(source, n, "semi_axes", Vec2(s.a, s.b));
    s.a = ab.x();
    s.b = ab.y();
  }
  s.mode = get<int>(source, n, "mode", s.mode);
  s.amplitude = get<double>(source, n, "amplitude", s.amplitude);
  s.phase = get<double>(source, n, "phase", s.phase);
  s.match_reference_area = get<bool>(source, n, "match_reference_area", false);
  s.center = get_vec(source, n, "center", s.center);
  s.file = get<std::string>(source, n, "file", "");
  s.resolution = get<int>(source, n, "resolution", s.resolution);
  if (s.kind == "file" && s.file.empty()) config_error(source, n, "shape 'file' needs a 'file' entry");
  if (s.resolution < kMinVertices) config_error(source, n, "resolution below " + std::to_string(kMinVertices));
  if (!(s.radius > 0.0) || !(s.a > 0.0) || !(s.b > 0.0)) config_error(source, n, "sizes must be positive");
  return s;
}

}  // namespace detail

/// Parses a scenario; `source` labels diagnostics, `base_dir` resolves curve files.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>",
                               const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::Config, "cli",
                source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  check_keys(source, root, {"name", "reference", "weak", "delta", "flow", "sample_interval", "stop_isoperimetric",
                            "max_samples", "monte_carlo", "seed", "output"});
  Scenario sc;
  sc.base_dir = base_dir;
  sc.name = get<std::string>(source, root, "name", sc.name);
  if (!root["reference"]) config_error(source, root, "missing 'reference'");
  sc.reference = parse_shape(source, root["reference"]);
  sc.reference_evolves = get<bool>(source, root["reference"], "evolve", true);
  if (const YAML::Node w = root["weak"]) {
    check_keys(source, w, {"shape", "radius", "semi_axes", "mode", "amplitude", "phase", "match_reference_area",
                           "center", "file", "resolution", "bubbles"});
    if (w["shape"]) {
      YAML::Node shape = YAML::Clone(w);
      shape.remove("bubbles");
      sc.weak = parse_shape(source, shape);
    }
    sc.weak_resolution = get<int>(source, w, "resolution", 0);
    if (sc.weak_resolution != 0 && sc.weak_resolution < kMinVertices)
      config_error(source, w["resolution"], "resolution below " + std::to_string(kMinVertices));
    if (const YAML::Node b = w["bubbles"]) {
      if (b.IsSequence()) {
        for (const auto& item : b) {
          check_keys(source, item, {"center", "radius"});
          BubbleSpec bs;
          bs.center = get_vec(source, item, "center", bs.center);
          bs.radius = get<double>(source, item, "radius", bs.radius);
          if (!(bs.radius > 0.0)) config_error(source, item, "bubble radius must be positive");
          sc.bubbles.push_back(bs);
        }
      } else {
        check_keys(source, b, {"count", "radius", "vertices"});
        sc.random_bubbles = get<int>(source, b, "count", 0);
        sc.random_bubble_radius = get<double>(source, b, "radius", sc.random_bubble_radius);
        sc.bubble_vertices = get<int>(source, b, "vertices", sc.bubble_vertices);
        if (sc.random_bubbles < 0 || !(sc.random_bubble_radius > 0.0) || sc.bubble_vertices < kMinVertices)
          config_error(source, b, "bad bubble settings");
      }
    }
  }
  if (const YAML::Node d = root["delta"]) {
    const auto v = d.as<std::string>();
    if (v != "auto") {
      sc.delta = get<double>(source, root, "delta", 0.0);
      if (!(sc.delta > 0.0)) config_error(source, d, "delta must be positive or 'auto'");
    }
  }
  if (const YAML::Node f = root["flow"]) {
    check_keys(source, f, {"dt", "dt_max", "dt_growth", "end_time", "scheme", "area_drift_abort"});
    sc.flow.dt = get<double>(source, f, "dt", sc.flow.dt);
    sc.flow.dt_max = get<double>(source, f, "dt_max", sc.flow.dt_max);
    sc.flow.max_dt_growth = get<double>(source, f, "dt_growth", sc.flow.max_dt_growth);
    sc.flow.end_time = get<double>(source, f, "end_time", sc.flow.end_time);
    sc.flow.area_drift_abort = get<double>(source, f, "area_drift_abort", sc.flow.area_drift_abort);
    const auto scheme = get<std::string>(source, f, "scheme", "area_preserving");
    if (scheme == "area_preserving") sc.flow.scheme = FlowScheme::AreaPreserving;
    else if (scheme == "classical") sc.flow.scheme = FlowScheme::Classical;
    else config_error(source, f["scheme"], "scheme must be area_preserving or classical");
    try {
      sc.flow.validate();
    } catch (const Error& e) {
      config_error(source, f, e.what());
    }
  }
  sc.sample_interval = get<double>(source, root, "sample_interval", 0.0);
  sc.stop_isoperimetric = get<double>(source, root, "stop_isoperimetric", 0.0);
  sc.max_samples = get<int>(source, root, "max_samples", 0);
  sc.monte_carlo = get<long>(source, root, "monte_carlo", 0);
  sc.seed = get<std::uint64_t>(source, root, "seed", 1);
  sc.output = get<std::string>(source, root, "output", "");
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cli", "cannot open scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string(), path.parent_path());
}

inline PolyCurve build_shape(const ShapeSpec& s, const std::filesystem::path& base_dir, double reference_area = 0.0) {
  PolyCurve c;
  if (s.kind == "circle") {
    c.components.push_back(make_circle(s.radius, s.resolution, s.center));
  } else if (s.kind == "ellipse") {
    c.components.push_back(make_ellipse(s.a, s.b, s.resolution, s.center));
  } else if (s.kind == "polar") {
    const double R = s.radius, A = s.amplitude, ph = s.phase;
    const int m = s.mode;
    c.components.push_back(make_polar([=](double t) { return R * (1.0 + A * std::cos(m * t + ph)); }, s.resolution,
                                      s.match_reference_area ? reference_area : 0.0, s.center));
  } else {
    const auto p = std::filesystem::path(s.file).is_absolute() ? std::filesystem::path(s.file) : base_dir / s.file;
    c = read_curve_file(p.string());
  }
  if (s.match_reference_area && s.kind != "polar" && reference_area > 0.0) {
    const double f = std::sqrt(reference_area / c.signed_area());
    const Vec2 ctr = s.center;
    for (auto& comp : c.components)
      for (auto& v : comp.vertices) v = ctr + f * (v - ctr);
  }
  c.validate();
  return c;
}

/// Places `count` circles of the given radius outside `curve`, pairwise
/// separated and at least 4 radii from every component.
inline std::vector<BubbleSpec> seed_bubbles(const PolyCurve& curve, int count, double radius, std::uint64_t seed) {
  std::vector<BubbleSpec> out;
  if (count == 0) return out;
  const auto segs = curve.segments();
  const SegmentGrid grid(segs);
  const EvenOddIndex parity(segs);
  Vec2 lo = curve[0].vertices[0], hi = lo;
  for (const auto& c : curve.components)
    for (const auto& p : c.vertices) lo = lo.cwiseMin(p), hi = hi.cwiseMax(p);
  const double pad = 0.25 * (hi - lo).maxCoeff();
  lo -= Vec2::Constant(pad);
  hi += Vec2::Constant(pad);
  CounterRng rng = CounterRng(seed).fork(0xb0bb1e5);
  for (int attempt = 0; attempt < 100000 && static_cast<int>(out.size()) < count; ++attempt) {
    const Vec2 p(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()));
    if (parity.contains(p) || grid.nearest(p).distance < 5.0 * radius) continue;
    if (std::any_of(out.begin(), out.end(), [&](const BubbleSpec& b) { return (b.center - p).norm() < 4.0 * radius; }))
      continue;
    out.push_back({p, radius});
  }
  if (static_cast<int>(out.size()) < count) throw Error(ErrorKind::Config, "cli", "could not place all bubbles");
  return out;
}

inline PolyCurve add_bubbles(PolyCurve curve, const std::vector<BubbleSpec>& bubbles, int vertices) {
  int id = static_cast<int>(curve.size());
  for (const auto& b : bubbles) curve.components.push_back(make_circle(b.radius, vertices, b.center, 1, 0.0, id++));
  curve.validate();
  return curve;
}

struct ScenarioData {
  PolyCurve reference;
  PolyCurve weak;
  std::vector<BubbleSpec> bubbles;
};

inline ScenarioData initial_data(const Scenario& sc) {
  ScenarioData d;
  d.reference = build_shape(sc.reference, sc.base_dir);
  if (sc.weak) {
    d.weak = build_shape(*sc.weak, sc.base_dir, d.reference.signed_area());
  } else {
    d.weak = d.reference;
    if (sc.weak_resolution > 0 && sc.weak_resolution != sc.reference.resolution)
      for (auto& c : d.weak.components) c.vertices = resample_spline(c.vertices, sc.weak_resolution);
  }
  d.bubbles = sc.bubbles;
  const auto seeded = seed_bubbles(d.weak, sc.random_bubbles, sc.random_bubble_radius, sc.seed);
  d.bubbles.insert(d.bubbles.end(), seeded.begin(), seeded.end());
  if (!d.bubbles.empty()) d.weak = add_bubbles(d.weak, d.bubbles, sc.bubble_vertices);
  return d;
}

struct ScenarioResult {
  Scenario scenario;
  ScenarioData data;
  RunResult weak_run;
  std::optional<RunResult> strong_run;
  CompareResult comparison;
  double gauss_bonnet_max = 0.0;
};

inline double max_gauss_bonnet(const Trajectory& tr) {
  double r = 0.0;
  for (const auto& s : tr.samples)
    for (const auto& g : build_geometry(s.curve, false)) r = std::max(r, gauss_bonnet_residual(g));
  return r;
}

inline ScenarioResult run_scenario(const Scenario& sc, int jobs = 1) {
  ScenarioResult res;
  res.scenario = sc;
  res.data = initial_data(sc);
  RunOptions opts;
  opts.sample_interval = sc.sample_interval;
  if (sc.stop_isoperimetric > 0.0) {
    const double target = sc.stop_isoperimetric;
    opts.stop = [target](const FlowState& s) { return s.isoperimetric_ratio() <= target; };
  }
  FlowConfig weak_cfg = sc.flow;
  ReferenceTrack track;
  if (sc.reference_evolves) {
    RunOptions ropts;
    ropts.sample_interval = sc.sample_interval;
    res.strong_run = run_flow(res.data.reference, sc.flow, ropts);
    res.weak_run = run_flow(res.data.weak, weak_cfg, opts);
    track = ReferenceTrack(res.strong_run->trajectory);
  } else {
    res.weak_run = run_flow(res.data.weak, weak_cfg, opts);
    track = ReferenceTrack(res.data.reference);
  }
  CompareOptions co;
  co.delta = sc.delta;
  co.jobs = jobs;
  co.extension = sc.reference_evolves;
  co.monte_carlo = sc.monte_carlo;
  co.seed = sc.seed;
  co.max_samples = sc.max_samples;
  res.comparison = compare_trajectories(res.weak_run.trajectory, track, co);
  res.gauss_bonnet_max = max_gauss_bonnet(res.weak_run.trajectory);
  if (res.strong_run) res.gauss_bonnet_max = std::max(res.gauss_bonnet_max, max_gauss_bonnet(res.strong_run->trajectory));
  return res;
}

}  // namespace sdlab
