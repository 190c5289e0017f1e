#pragma once

// Multi-component closed polygonal curves, per-component differential
// quantities, Jordan nesting, and metric diagnostics on curves.

#include "sdlab/core.hpp"
#include "sdlab/numerics.hpp"
#include "sdlab/spatial.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <optional>

namespace sdlab {

struct Component {
  std::vector<Vec2> vertices;
  int orientation = 1;  // +1 counter-clockwise (outer boundary), -1 clockwise (hole)
  int id = 0;
};

struct VertexField {
  int component = 0;
  Eigen::VectorXd values;
  Eigen::Index size() const { return values.size(); }
};

inline constexpr int kMinVertices = 8;

inline double shoelace_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(v[i], v[(i + 1) % n]);
  return 0.5 * a;
}

inline double polygon_length(const std::vector<Vec2>& v) {
  double l = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) l += (v[(i + 1) % v.size()] - v[i]).norm();
  return l;
}

/// Extrinsic diameter via convex hull (Andrew's monotone chain).
inline double point_set_diameter(std::vector<Vec2> pts) {
  if (pts.size() < 2) return 0.0;
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  double d2 = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) d2 = std::max(d2, (hull[i] - hull[j]).squaredNorm());
  return std::sqrt(d2);
}

/// Even-odd point-in-polygon for a single closed polygon.
inline bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double xc = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (xc > p.x()) inside = !inside;
    }
  }
  return inside;
}

inline double point_polygon_distance(const Vec2& p, const std::vector<Vec2>& poly) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i)
    d = std::min(d, point_segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  return d;
}

struct JordanBoundary {
  int component = 0;
  int sign = 1;     // +1 for J+, -1 for J-
  int parent = -1;  // innermost containing component, -1 at top level
  int depth = 0;
};

/// Region Y = int(outer) minus the closures of its direct hole children.
struct JordanRegion {
  int outer = 0;
  std::vector<int> holes;
};

struct JordanForest {
  std::vector<JordanBoundary> boundaries;
  std::vector<JordanRegion> regions;
  // contains[i][j]: component i lies in the interior of component j
  std::vector<std::vector<bool>> contains;
  double total_perimeter = 0.0;
};

class PolyCurve {
 public:
  std::vector<Component> components;

  PolyCurve() = default;
  explicit PolyCurve(std::vector<Component> comps) : components(std::move(comps)) {}

  std::size_t size() const { return components.size(); }
  const Component& operator[](std::size_t i) const { return components[i]; }
  Component& operator[](std::size_t i) { return components[i]; }

  double diameter() const {
    std::vector<Vec2> all;
    for (const auto& c : components) all.insert(all.end(), c.vertices.begin(), c.vertices.end());
    return point_set_diameter(std::move(all));
  }

  double signed_area() const {
    double a = 0.0;
    for (const auto& c : components) a += shoelace_area(c.vertices);
    return a;
  }

  double length() const {
    double l = 0.0;
    for (const auto& c : components) l += polygon_length(c.vertices);
    return l;
  }

  std::vector<Segment> segments() const {
    std::vector<Segment> segs;
    for (int c = 0; c < static_cast<int>(components.size()); ++c) {
      const auto& v = components[c].vertices;
      for (int i = 0; i < static_cast<int>(v.size()); ++i)
        segs.push_back({v[i], v[(i + 1) % v.size()], c, i});
    }
    return segs;
  }

  /// Throws InvalidCurve / DegenerateEdge / SelfIntersection on failure.
  void validate() const;
};

inline void check_basic(const PolyCurve& curve, double diam) {
  if (curve.components.empty()) throw Error(ErrorKind::InvalidCurve, "geometry", "curve has no components");
  for (const auto& c : curve.components) {
    if (c.vertices.size() < static_cast<std::size_t>(kMinVertices))
      throw Error(ErrorKind::InvalidCurve, "geometry",
                  "component " + std::to_string(c.id) + " has fewer than 8 vertices");
    if (c.orientation != 1 && c.orientation != -1)
      throw Error(ErrorKind::InvalidCurve, "geometry", "orientation must be +1 or -1");
    for (const auto& p : c.vertices)
      if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
        throw Error(ErrorKind::InvalidCurve, "geometry", "non-finite vertex");
    const double floor = 1e-12 * diam;
    for (std::size_t i = 0; i < c.vertices.size(); ++i)
      if ((c.vertices[(i + 1) % c.vertices.size()] - c.vertices[i]).norm() <= floor)
        throw Error(ErrorKind::DegenerateEdge, "geometry",
                    "component " + std::to_string(c.id) + " edge " + std::to_string(i) + " is degenerate");
    const double a = shoelace_area(c.vertices);
    if ((a > 0 ? 1 : -1) != c.orientation)
      throw Error(ErrorKind::InvalidCurve, "geometry",
                  "component " + std::to_string(c.id) + " traversal does not match its orientation flag");
  }
}

/// Broad phase on a uniform grid, exact segment tests in the narrow phase.
/// Returns the first offending pair or nullopt.
inline std::optional<std::pair<Segment, Segment>> find_intersection(const PolyCurve& curve, double tol) {
  const SegmentGrid grid(curve.segments());
  const auto& segs = grid.segments();
  std::vector<int> stamp(segs.size(), -1);
  for (int id = 0; id < static_cast<int>(segs.size()); ++id) {
    const auto& s = segs[id];
    const Vec2 pad = Vec2::Constant(tol);
    const Vec2 lo = s.a.cwiseMin(s.b) - pad, hi = s.a.cwiseMax(s.b) + pad;
    std::optional<int> hit;
    grid.for_each_in_box(lo, hi, [&](int other) {
      if (hit || other <= id || stamp[other] == id) return;
      stamp[other] = id;
      const auto& o = segs[other];
      if (o.component == s.component) {
        const int n = static_cast<int>(curve.components[s.component].vertices.size());
        if ((s.index + 1) % n == o.index || (o.index + 1) % n == s.index) return;
      }
      if (segment_segment_distance(s.a, s.b, o.a, o.b) <= tol) hit = other;
    });
    if (hit) return std::make_pair(s, segs[*hit]);
  }
  return std::nullopt;
}

inline JordanForest jordan_decompose(const PolyCurve& curve) {
  const int n = static_cast<int>(curve.components.size());
  const double tol = 1e-10 * std::max(curve.diameter(), 1e-300);
  JordanForest f;
  f.contains.assign(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    const Vec2& p = curve.components[i].vertices.front();
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& poly = curve.components[j].vertices;
      if (point_polygon_distance(p, poly) <= tol)
        throw Error(ErrorKind::AmbiguousNesting, "geometry",
                    "vertex of component " + std::to_string(curve.components[i].id) +
                        " lies on component " + std::to_string(curve.components[j].id));
      f.contains[i][j] = point_in_polygon(p, poly);
    }
  }
  f.boundaries.resize(n);
  for (int i = 0; i < n; ++i) {
    int depth = 0, parent = -1, parent_depth = -1;
    for (int j = 0; j < n; ++j)
      if (f.contains[i][j]) ++depth;
    for (int j = 0; j < n; ++j) {
      if (!f.contains[i][j]) continue;
      int dj = 0;
      for (int k = 0; k < n; ++k)
        if (f.contains[j][k]) ++dj;
      if (dj > parent_depth) parent_depth = dj, parent = j;
    }
    f.boundaries[i] = {i, depth % 2 == 0 ? 1 : -1, parent, depth};
  }
  for (int i = 0; i < n; ++i) {
    if (f.boundaries[i].sign < 0) continue;
    JordanRegion r{i, {}};
    for (int k = 0; k < n; ++k)
      if (f.boundaries[k].parent == i && f.boundaries[k].sign < 0) r.holes.push_back(k);
    f.regions.push_back(std::move(r));
  }
  f.total_perimeter = curve.length();
  return f;
}

inline void PolyCurve::validate() const {
  const double diam = diameter();
  check_basic(*this, diam);
  if (auto hit = find_intersection(*this, 1e-10 * diam))
    throw Error(ErrorKind::SelfIntersection, "geometry",
                "edge " + std::to_string(hit->first.index) + " of component " +
                    std::to_string(components[hit->first.component].id) + " meets edge " +
                    std::to_string(hit->second.index) + " of component " +
                    std::to_string(components[hit->second.component].id));
  const auto forest = jordan_decompose(*this);
  for (const auto& b : forest.boundaries)
    if (b.sign != components[b.component].orientation)
      throw Error(ErrorKind::InvalidCurve, "geometry",
                  "component " + std::to_string(components[b.component].id) +
                      " orientation disagrees with its nesting depth");
  if (signed_area() <= 0.0) throw Error(ErrorKind::InvalidCurve, "geometry", "total signed area is not positive");
}

/// Per-component geometry. Edge i joins vertex i to vertex i+1 (cyclic).
struct GeometryCache {
  int component = 0;
  int orientation = 1;
  std::vector<Vec2> x;
  std::vector<double> edge_length;  // h_i
  std::vector<Vec2> edge_tau;       // unit tangent of edge i
  std::vector<double> arc_positions;
  std::vector<double> dual_length;  // m_i = (h_{i-1} + h_i) / 2
  std::vector<double> turning;      // signed exterior angle at vertex i
  std::vector<Vec2> tau;
  std::vector<Vec2> nu;
  std::vector<double> kappa;
  double length = 0.0;
  double area = 0.0;
  double diameter = 0.0;

  int size() const { return static_cast<int>(x.size()); }
  int next(int i) const { return i + 1 == size() ? 0 : i + 1; }
  int prev(int i) const { return i == 0 ? size() - 1 : i - 1; }
  Vec2 edge_normal(int i) const { return rotate_cw(edge_tau[i]); }
  Vec2 edge_midpoint(int i) const { return 0.5 * (x[i] + x[next(i)]); }
};

inline GeometryCache build_component_geometry(const Component& c, int index = 0) {
  GeometryCache g;
  g.component = index;
  g.orientation = c.orientation;
  g.x = c.vertices;
  const int n = static_cast<int>(g.x.size());
  g.edge_length.resize(n);
  g.edge_tau.resize(n);
  g.arc_positions.resize(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec2 e = g.x[(i + 1) % n] - g.x[i];
    g.edge_length[i] = e.norm();
    if (g.edge_length[i] == 0.0)
      throw Error(ErrorKind::DegenerateEdge, "geometry", "zero-length edge " + std::to_string(i));
    g.edge_tau[i] = e / g.edge_length[i];
    g.arc_positions[i] = acc;
    acc += g.edge_length[i];
  }
  g.length = acc;
  g.dual_length.resize(n);
  g.turning.resize(n);
  g.tau.resize(n);
  g.nu.resize(n);
  g.kappa.resize(n);
  for (int i = 0; i < n; ++i) {
    const int im = (i + n - 1) % n;
    const Vec2& a = g.edge_tau[im];
    const Vec2& b = g.edge_tau[i];
    g.dual_length[i] = 0.5 * (g.edge_length[im] + g.edge_length[i]);
    g.turning[i] = std::atan2(cross(a, b), a.dot(b));
    Vec2 t = a + b;
    const double tn = t.norm();
    t = tn > 1e-14 ? Vec2(t / tn) : Vec2(rotate_ccw(a));
    g.tau[i] = t;
    g.nu[i] = rotate_cw(t);
    g.kappa[i] = g.turning[i] / g.dual_length[i];
  }
  g.area = shoelace_area(g.x);
  g.diameter = point_set_diameter(g.x);
  return g;
}

inline std::vector<GeometryCache> build_geometry(const PolyCurve& curve, bool validate = true) {
  if (validate) curve.validate();
  std::vector<GeometryCache> out;
  out.reserve(curve.size());
  for (int c = 0; c < static_cast<int>(curve.size()); ++c)
    out.push_back(build_component_geometry(curve.components[c], c));
  return out;
}

inline double gauss_bonnet_residual(const GeometryCache& g) {
  double sum = 0.0;
  for (int i = 0; i < g.size(); ++i) sum += g.kappa[i] * g.dual_length[i];
  return std::abs(sum - g.orientation * kTwoPi);
}

inline double intrinsic_distance(const GeometryCache& g, int i, int j) {
  const double d = std::abs(g.arc_positions[j] - g.arc_positions[i]);
  return std::min(d, g.length - d);
}

inline double intrinsic_distance(const std::vector<GeometryCache>& caches, int ci, int i, int cj, int j) {
  if (ci != cj) return std::numeric_limits<double>::infinity();
  return intrinsic_distance(caches[ci], i, j);
}

/// Measure of the intrinsic ball of radius r around vertex i, by walking the
/// arc in both directions.
inline double intrinsic_ball_measure(const GeometryCache& g, int i, double r) {
  if (2.0 * r >= g.length) return g.length;
  double fwd = 0.0, bwd = 0.0;
  for (int k = i; fwd < r; k = g.next(k)) fwd += g.edge_length[k];
  for (int k = g.prev(i); bwd < r; k = g.prev(k)) bwd += g.edge_length[k];
  return std::min(fwd, r) + std::min(bwd, r);
}

/// Total length of the curve inside the Euclidean disc B(p, r).
inline double extrinsic_ball_measure(const std::vector<GeometryCache>& caches, const Vec2& p, double r) {
  double total = 0.0;
  for (const auto& g : caches) {
    for (int i = 0; i < g.size(); ++i) {
      const Vec2 a = g.x[i] - p;
      const Vec2 d = g.x[g.next(i)] - g.x[i];
      const double A = d.squaredNorm(), B = a.dot(d), C = a.squaredNorm() - r * r;
      const double disc = B * B - A * C;
      if (disc <= 0.0) continue;
      const double sq = std::sqrt(disc);
      const double t0 = std::clamp((-B - sq) / A, 0.0, 1.0);
      const double t1 = std::clamp((-B + sq) / A, 0.0, 1.0);
      total += (t1 - t0) * g.edge_length[i];
    }
  }
  return total;
}

inline std::vector<double> dyadic_radii(double length, int levels = 12) {
  std::vector<double> r;
  double v = length / 4.0;
  for (int k = 0; k < levels; ++k, v *= 0.5) r.push_back(v);
  return r;
}

/// max over sampled centres and dyadic radii of |B(x, r) cap Sigma| / (2r),
/// intrinsic balls.
inline double density_ratio_bound(const GeometryCache& g, int center_stride = 1) {
  double best = 0.0;
  for (double r : dyadic_radii(g.length))
    for (int i = 0; i < g.size(); i += std::max(1, center_stride))
      best = std::max(best, intrinsic_ball_measure(g, i, r) / (2.0 * r));
  return best;
}

/// Same statistic with Euclidean balls, for comparison.
inline double density_ratio_bound_extrinsic(const std::vector<GeometryCache>& caches, int center_stride = 1) {
  double best = 0.0;
  double len = 0.0;
  for (const auto& g : caches) len += g.length;
  for (const auto& g : caches)
    for (double r : dyadic_radii(len))
      for (int i = 0; i < g.size(); i += std::max(1, center_stride))
        best = std::max(best, extrinsic_ball_measure(caches, g.x[i], r) / (2.0 * r));
  return best;
}

/// Mass-lumped mean <u> = sum m_i u_i / L.
inline double weighted_mean(const GeometryCache& g, const Eigen::VectorXd& u) {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i) s += g.dual_length[i] * u[i];
  return s / g.length;
}

inline double integrate(const GeometryCache& g, const Eigen::VectorXd& u) {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i) s += g.dual_length[i] * u[i];
  return s;
}

/// Centred arc-length derivative with non-uniform weights.
inline Eigen::VectorXd d_s(const GeometryCache& g, const Eigen::VectorXd& f) {
  Eigen::VectorXd out(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const int im = g.prev(i), ip = g.next(i);
    out[i] = (f[ip] - f[im]) / (g.edge_length[im] + g.edge_length[i]);
  }
  return out;
}

/// Edge-based quadrature of |d_s u|^p.
inline double grad_power_integral(const GeometryCache& g, const Eigen::VectorXd& u, double p) {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const double h = g.edge_length[i];
    s += h * std::pow(std::abs((u[g.next(i)] - u[i]) / h), p);
  }
  return s;
}

inline double grad_norm_sq(const GeometryCache& g, const Eigen::VectorXd& u) {
  double s = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    const double d = u[g.next(i)] - u[i];
    s += d * d / g.edge_length[i];
  }
  return s;
}

/// int |u - <u>|^p / (diam^p int |d_s u|^p); zero for constant u.
inline double poincare_ratio(const GeometryCache& g, const Eigen::VectorXd& u, double p) {
  const double mean = weighted_mean(g, u);
  double num = 0.0;
  for (int i = 0; i < g.size(); ++i) num += g.dual_length[i] * std::pow(std::abs(u[i] - mean), p);
  const double den = std::pow(g.diameter, p) * grad_power_integral(g, u, p);
  if (den <= 0.0 || num <= 0.0) return 0.0;
  return num / den;
}

// ---------------------------------------------------------------------------
// Curve factories

inline Component make_circle(double radius, int n, Vec2 center = Vec2::Zero(), int orientation = 1,
                             double phase = 0.0, int id = 0) {
  Component c;
  c.orientation = orientation;
  c.id = id;
  c.vertices.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double t = phase + orientation * kTwoPi * i / n;
    c.vertices.emplace_back(center.x() + radius * std::cos(t), center.y() + radius * std::sin(t));
  }
  return c;
}

/// Uniform in the ellipse parameter t.
inline Component make_ellipse(double a, double b, int n, Vec2 center = Vec2::Zero(), int id = 0) {
  Component c;
  c.id = id;
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * i / n;
    c.vertices.emplace_back(center.x() + a * std::cos(t), center.y() + b * std::sin(t));
  }
  return c;
}

/// Star-shaped curve r(theta); if target_area > 0 the curve is scaled so its
/// polygon area equals target_area.
inline Component make_polar(const std::function<double(double)>& r, int n, double target_area = 0.0,
                            Vec2 center = Vec2::Zero(), int id = 0) {
  Component c;
  c.id = id;
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * i / n;
    c.vertices.emplace_back(r(t) * std::cos(t), r(t) * std::sin(t));
  }
  if (target_area > 0.0) {
    const double s = std::sqrt(target_area / shoelace_area(c.vertices));
    for (auto& v : c.vertices) v *= s;
  }
  for (auto& v : c.vertices) v += center;
  return c;
}

/// Resample a closed polygon at m points equally spaced in arc length on the
/// periodic chord-length cubic spline through its vertices.
inline std::vector<Vec2> resample_spline(const std::vector<Vec2>& v, int m, double phase_fraction = 0.0) {
  const int n = static_cast<int>(v.size());
  std::vector<double> knots(n), xs(n), ys(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    knots[i] = acc;
    xs[i] = v[i].x();
    ys[i] = v[i].y();
    acc += (v[(i + 1) % n] - v[i]).norm();
  }
  const PeriodicCubic px(knots, xs, acc), py(knots, ys, acc);
  // Arc length of the spline by Gauss quadrature per piece, then invert.
  constexpr int kSub = 4;
  std::vector<double> u_tab, s_tab;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = knots[i], h = (i + 1 < n ? knots[i + 1] : acc) - a;
    for (int k = 0; k < kSub; ++k) {
      const double u0 = a + h * k / kSub, du = h / kSub;
      u_tab.push_back(u0);
      s_tab.push_back(s);
      for (auto [node, w] : gauss_unit<3>()) {
        const double u = u0 + node * du;
        const auto ex = px.eval_on_piece(i, u), ey = py.eval_on_piece(i, u);
        s += w * du * std::hypot(ex[1], ey[1]);
      }
    }
  }
  u_tab.push_back(acc);
  s_tab.push_back(s);
  std::vector<Vec2> out(m);
  for (int j = 0; j < m; ++j) {
    const double target = s * (j + phase_fraction) / m;
    auto it = std::upper_bound(s_tab.begin(), s_tab.end(), target);
    const std::size_t k = std::clamp<std::size_t>(it - s_tab.begin(), 1, s_tab.size() - 1) - 1;
    const double f = (target - s_tab[k]) / std::max(s_tab[k + 1] - s_tab[k], 1e-300);
    const double u = u_tab[k] + f * (u_tab[k + 1] - u_tab[k]);
    out[j] = Vec2(px(u), py(u));
  }
  return out;
}

}  // namespace sdlab
