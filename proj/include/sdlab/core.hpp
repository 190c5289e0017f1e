#pragma once

// Shared vocabulary: 2D vectors, the error type, and small vector helpers.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdlab {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class ErrorKind {
  InvalidCurve,
  DegenerateEdge,
  SelfIntersection,
  AmbiguousNesting,
  SingularSystem,
  NonZeroMean,
  StepRejected,
  TopologyChange,
  ZeroReach,
  RankDeficient,
  DegenerateInitialData,
  NonStationaryReference,
  Parse,
  Config,
  Usage,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidCurve: return "InvalidCurve";
    case ErrorKind::DegenerateEdge: return "DegenerateEdge";
    case ErrorKind::SelfIntersection: return "SelfIntersection";
    case ErrorKind::AmbiguousNesting: return "AmbiguousNesting";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NonZeroMean: return "NonZeroMean";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::TopologyChange: return "TopologyChange";
    case ErrorKind::ZeroReach: return "ZeroReach";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::DegenerateInitialData: return "DegenerateInitialData";
    case ErrorKind::NonStationaryReference: return "NonStationaryReference";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable kind; `module` names the subsystem
/// that raised it so CLI diagnostics can report provenance.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + to_string(kind) + ": " + what),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Outward normal of a tangent when the enclosed region lies to the left of
// the traversal: rotation by -90 degrees.
inline Vec2 rotate_cw(const Vec2& v) { return {v.y(), -v.x()}; }
// Inverse of rotate_cw; recovers the tangent from an outward normal.
inline Vec2 rotate_ccw(const Vec2& v) { return {-v.y(), v.x()}; }

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b,
                                     double* param = nullptr) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  if (param) *param = t;
  return (a + t * ab - p).norm();
}

inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(q2 - q1, p1 - q1);
  const double d2 = cross(q2 - q1, p2 - q1);
  const double d3 = cross(p2 - p1, q1 - p1);
  const double d4 = cross(p2 - p1, q2 - p1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}

inline double segment_segment_distance(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                                       const Vec2& q2) {
  if (segments_intersect(p1, p2, q1, q2)) return 0.0;
  return std::min({point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
                   point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2)});
}

}  // namespace sdlab
