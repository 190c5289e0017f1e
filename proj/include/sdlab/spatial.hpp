#pragma once

// Uniform-grid acceleration for segment soups: nearest-segment queries,
// broad-phase candidate enumeration, and even-odd point classification.

#include "sdlab/core.hpp"

#include <limits>

namespace sdlab {

struct Segment {
  Vec2 a;
  Vec2 b;
  int component = 0;
  int index = 0;  // edge index within the component (edge i joins vertex i and i+1)
};

struct NearestSegment {
  double distance = std::numeric_limits<double>::infinity();
  int segment = -1;
  double param = 0.0;  // position along the segment in [0, 1]
  Vec2 point = Vec2::Zero();
};

class SegmentGrid {
 public:
  SegmentGrid() = default;

  explicit SegmentGrid(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) return;
    lo_ = hi_ = segments_.front().a;
    double total = 0.0;
    for (const auto& s : segments_) {
      lo_ = lo_.cwiseMin(s.a).cwiseMin(s.b);
      hi_ = hi_.cwiseMax(s.a).cwiseMax(s.b);
      total += (s.b - s.a).norm();
    }
    const double mean_len = total / static_cast<double>(segments_.size());
    const Vec2 ext = (hi_ - lo_).cwiseMax(Vec2::Constant(1e-12));
    double cell = std::max(2.0 * mean_len, std::max(ext.x(), ext.y()) / 512.0);
    cell = std::max(cell, 1e-12);
    cell_ = cell;
    nx_ = std::max(1, static_cast<int>(std::ceil(ext.x() / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(ext.y() / cell_)));
    cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (int id = 0; id < static_cast<int>(segments_.size()); ++id) {
      const auto& s = segments_[id];
      const Vec2 smin = s.a.cwiseMin(s.b), smax = s.a.cwiseMax(s.b);
      const int i0 = cx(smin.x()), i1 = cx(smax.x());
      const int j0 = cy(smin.y()), j1 = cy(smax.y());
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) cells_[static_cast<std::size_t>(j) * nx_ + i].push_back(id);
    }
  }

  const std::vector<Segment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }

  NearestSegment nearest(const Vec2& x) const {
    NearestSegment best;
    if (segments_.empty()) return best;
    const int ci = cx(x.x()), cj = cy(x.y());
    const int max_ring = std::max(nx_, ny_) + 1;
    for (int r = 0; r <= max_ring; ++r) {
      if (best.segment >= 0 && best.distance <= (r - 1) * cell_) break;
      for (int j = cj - r; j <= cj + r; ++j) {
        if (j < 0 || j >= ny_) continue;
        for (int i = ci - r; i <= ci + r; ++i) {
          if (i < 0 || i >= nx_) continue;
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != r) continue;
          for (int id : cells_[static_cast<std::size_t>(j) * nx_ + i]) {
            double t = 0.0;
            const auto& s = segments_[id];
            const double d = point_segment_distance(x, s.a, s.b, &t);
            if (d < best.distance) {
              best.distance = d;
              best.segment = id;
              best.param = t;
              best.point = s.a + t * (s.b - s.a);
            }
          }
        }
      }
    }
    return best;
  }

  /// Visit every segment whose cells overlap the box [lo, hi] (may repeat ids).
  template <class Fn>
  void for_each_in_box(const Vec2& lo, const Vec2& hi, Fn&& fn) const {
    if (segments_.empty()) return;
    const int i0 = cx(lo.x()), i1 = cx(hi.x());
    const int j0 = cy(lo.y()), j1 = cy(hi.y());
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i)
        for (int id : cells_[static_cast<std::size_t>(j) * nx_ + i]) fn(id);
  }

 private:
  int cx(double x) const {
    return std::clamp(static_cast<int>(std::floor((x - lo_.x()) / cell_)), 0, nx_ - 1);
  }
  int cy(double y) const {
    return std::clamp(static_cast<int>(std::floor((y - lo_.y()) / cell_)), 0, ny_ - 1);
  }

  std::vector<Segment> segments_;
  std::vector<std::vector<int>> cells_;
  Vec2 lo_ = Vec2::Zero(), hi_ = Vec2::Zero();
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
};

/// Even-odd classification by +x ray casting, with edges bucketed into
/// horizontal strips so each query only inspects edges spanning its y.
class EvenOddIndex {
 public:
  EvenOddIndex() = default;
  explicit EvenOddIndex(const std::vector<Segment>& segments) {
    if (segments.empty()) return;
    ylo_ = std::numeric_limits<double>::infinity();
    double yhi = -ylo_;
    for (const auto& s : segments) {
      ylo_ = std::min({ylo_, s.a.y(), s.b.y()});
      yhi = std::max({yhi, s.a.y(), s.b.y()});
    }
    strips_ = std::max<int>(1, static_cast<int>(std::sqrt(static_cast<double>(segments.size()))) * 2);
    height_ = std::max(1e-12, (yhi - ylo_) / strips_);
    buckets_.assign(strips_, {});
    for (const auto& s : segments) {
      const int j0 = strip(std::min(s.a.y(), s.b.y()));
      const int j1 = strip(std::max(s.a.y(), s.b.y()));
      for (int j = j0; j <= j1; ++j) buckets_[j].push_back({s.a, s.b});
    }
  }

  bool contains(const Vec2& p) const {
    if (buckets_.empty()) return false;
    const int j = static_cast<int>(std::floor((p.y() - ylo_) / height_));
    if (j < 0 || j >= strips_) return false;
    bool inside = false;
    for (const auto& [a, b] : buckets_[j]) {
      if ((a.y() > p.y()) != (b.y() > p.y())) {
        const double xc = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
        if (xc > p.x()) inside = !inside;
      }
    }
    return inside;
  }

 private:
  int strip(double y) const {
    return std::clamp(static_cast<int>(std::floor((y - ylo_) / height_)), 0, strips_ - 1);
  }
  std::vector<std::vector<std::pair<Vec2, Vec2>>> buckets_;
  double ylo_ = 0.0, height_ = 1.0;
  int strips_ = 0;
};

}  // namespace sdlab
