#pragma once

// Smooth reference curves: each component is the periodic chord-length cubic
// spline through its polygon vertices. Signed distance, foot points and foot
// curvature are taken on the spline.

#include "sdlab/flow.hpp"
#include "sdlab/geometry.hpp"
#include "sdlab/spatial.hpp"

#include <memory>
#include <mutex>

namespace sdlab {

struct DistanceQuery {
  double s = 0.0;             // signed distance, negative inside
  Vec2 grad = Vec2::Zero();   // unit normal at the foot point (= grad s)
  Vec2 foot = Vec2::Zero();
  double foot_kappa = 0.0;    // curvature at the foot point (outward-normal convention)
  int component = -1;
  double param = 0.0;         // spline parameter of the foot point
  bool far = false;           // |s| beyond the requested cap; only the sign and a lower bound are exact
  bool near_medial_axis = false;
};

class ReferenceCurve {
 public:
  struct Spline {
    PeriodicCubic x, y;
    int orientation = 1;
  };

  ReferenceCurve() = default;

  explicit ReferenceCurve(PolyCurve curve) : curve_(std::move(curve)) {
    curve_.validate();
    for (const auto& c : curve_.components) {
      const int n = static_cast<int>(c.vertices.size());
      std::vector<double> knots(n), xs(n), ys(n);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        knots[i] = acc;
        xs[i] = c.vertices[i].x();
        ys[i] = c.vertices[i].y();
        acc += (c.vertices[(i + 1) % n] - c.vertices[i]).norm();
      }
      splines_.push_back({PeriodicCubic(knots, xs, acc), PeriodicCubic(knots, ys, acc), c.orientation});
    }
    grid_ = SegmentGrid(curve_.segments());
    parity_ = EvenOddIndex(curve_.segments());
    // Largest spline-polygon deviation, sampled per piece.
    for (std::size_t c = 0; c < splines_.size(); ++c) {
      const auto& sp = splines_[c];
      const auto& k = sp.x.knots();
      const int n = static_cast<int>(k.size());
      for (int i = 0; i < n; ++i) {
        const double h = (i + 1 < n ? k[i + 1] : sp.x.period()) - k[i];
        const Vec2 a = curve_[c].vertices[i], b = curve_[c].vertices[(i + 1) % n];
        for (double f : {0.25, 0.5, 0.75}) {
          const Vec2 p = point(static_cast<int>(c), k[i] + f * h);
          deviation_ = std::max(deviation_, point_segment_distance(p, a, b));
        }
      }
    }
    diameter_ = curve_.diameter();
  }

  const PolyCurve& curve() const { return curve_; }
  const std::vector<Spline>& splines() const { return splines_; }
  double deviation() const { return deviation_; }
  double diameter() const { return diameter_; }

  Vec2 point(int c, double u) const { return {splines_[c].x(u), splines_[c].y(u)}; }

  /// Position, first and second derivatives at parameter u.
  std::array<Vec2, 3> jet(int c, double u) const {
    const auto ex = splines_[c].x.eval(u), ey = splines_[c].y.eval(u);
    return {Vec2(ex[0], ey[0]), Vec2(ex[1], ey[1]), Vec2(ex[2], ey[2])};
  }

  double curvature(int c, double u) const {
    const auto j = jet(c, u);
    return cross(j[1], j[2]) / std::pow(j[1].norm(), 3);
  }

  Vec2 normal(int c, double u) const { return rotate_cw(jet(c, u)[1].normalized()); }

  bool inside(const Vec2& x) const { return parity_.contains(x); }

  /// Signed distance with foot point. If cap > 0 and the polygon is farther
  /// than cap (plus the spline deviation), the result is marked far and
  /// carries the polygon distance with the even-odd sign.
  DistanceQuery query(const Vec2& x, double cap = 0.0) const {
    DistanceQuery q;
    const NearestSegment ns = grid_.nearest(x);
    const double margin = 2.0 * deviation_ + 1e-12 * diameter_;
    if (cap > 0.0 && ns.distance > cap + margin) {
      q.far = true;
      q.s = parity_.contains(x) ? -ns.distance : ns.distance;
      q.component = grid_.segments()[ns.segment].component;
      q.foot = ns.point;
      q.grad = Vec2::Zero();
      return q;
    }
    const double radius = ns.distance + margin;
    struct Cand {
      double d;
      int c;
      double u;
    };
    std::vector<Cand> cands;
    const Vec2 r = Vec2::Constant(radius);
    std::vector<int> seen;
    grid_.for_each_in_box(x - r, x + r, [&](int id) { seen.push_back(id); });
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (int id : seen) {
      const Segment& sg = grid_.segments()[id];
      double t = 0.0;
      if (point_segment_distance(x, sg.a, sg.b, &t) > radius) continue;
      const auto& knots = splines_[sg.component].x.knots();
      const int n = static_cast<int>(knots.size());
      const double period = splines_[sg.component].x.period();
      const double h = (sg.index + 1 < n ? knots[sg.index + 1] : period) - knots[sg.index];
      const double u = newton_foot(sg.component, x, knots[sg.index] + t * h, h);
      const double d = (point(sg.component, u) - x).norm();
      cands.push_back({d, sg.component, u});
    }
    if (cands.empty()) {
      const Segment& sg = grid_.segments()[ns.segment];
      cands.push_back({ns.distance, sg.component, splines_[sg.component].x.knots()[sg.index]});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
    const Cand best = cands.front();
    q.component = best.c;
    q.param = best.u;
    q.foot = point(best.c, best.u);
    q.grad = normal(best.c, best.u);
    q.foot_kappa = curvature(best.c, best.u);
    const double side = (x - q.foot).dot(q.grad);
    q.s = side >= 0.0 ? best.d : -best.d;
    const double tol = 1e-10 * std::max(diameter_, 1e-300);
    for (std::size_t k = 1; k < cands.size(); ++k) {
      if (cands[k].d - best.d > tol) break;
      if ((point(cands[k].c, cands[k].u) - q.foot).norm() > 1e3 * tol) {
        q.near_medial_axis = true;
        break;
      }
    }
    return q;
  }

 private:
  double newton_foot(int c, const Vec2& x, double u0, double h) const {
    double u = u0;
    for (int it = 0; it < 40; ++it) {
      const auto j = jet(c, u);
      const Vec2 d = j[0] - x;
      const double f = d.dot(j[1]);
      double fp = j[1].squaredNorm() + d.dot(j[2]);
      if (fp <= 0.0) fp = j[1].squaredNorm();
      double step = -f / fp;
      step = std::clamp(step, -0.5 * h, 0.5 * h);
      u += step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(u))) break;
    }
    return splines_[c].x.wrap(u);
  }

  PolyCurve curve_;
  std::vector<Spline> splines_;
  SegmentGrid grid_;
  EvenOddIndex parity_;
  double deviation_ = 0.0;
  double diameter_ = 0.0;
};

/// Reference evolution: a trajectory whose interpolated curves are wrapped
/// as spline references on demand, with a one-entry cache.
class ReferenceTrack {
 public:
  ReferenceTrack() = default;
  explicit ReferenceTrack(Trajectory traj) : traj_(std::make_shared<Trajectory>(std::move(traj))) {}
  explicit ReferenceTrack(const PolyCurve& stationary) {
    Trajectory t;
    t.push(sample_of(0.0, stationary));
    traj_ = std::make_shared<Trajectory>(std::move(t));
    stationary_ = true;
  }

  bool stationary() const { return stationary_ || traj_->samples.size() == 1; }
  const Trajectory& trajectory() const { return *traj_; }

  std::shared_ptr<const ReferenceCurve> at(double t) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (stationary()) t = traj_->t0();
    if (cache_ && cache_t_ == t) return cache_;
    cache_ = std::make_shared<const ReferenceCurve>(traj_->at(t));
    cache_t_ = t;
    return cache_;
  }

  /// Curvature and d_s^2 curvature of the interpolated polygon at t.
  TrajectorySample sample(double t) const { return sample_of(t, at(t)->curve()); }

 private:
  std::shared_ptr<Trajectory> traj_;
  bool stationary_ = false;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
  mutable std::shared_ptr<const ReferenceCurve> cache_;
  mutable double cache_t_ = 0.0;
};

}  // namespace sdlab
