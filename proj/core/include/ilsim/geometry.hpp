#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace ilsim {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Point2& operator-=(const Point2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend constexpr Point2 operator+(Point2 a, const Point2& b) { return a += b; }
  friend constexpr Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
  friend constexpr Point2 operator-(const Point2& a) { return {-a.x, -a.y}; }
  friend constexpr Point2 operator*(double k, const Point2& a) { return {k * a.x, k * a.y}; }
  friend constexpr Point2 operator*(const Point2& a, double k) { return {k * a.x, k * a.y}; }
  friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

constexpr double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }
inline double distance(const Point2& a, const Point2& b) { return norm(a - b); }
inline Point2 unit_from_heading(double heading) { return {std::cos(heading), std::sin(heading)}; }
/// Left-hand normal of a heading.
inline Point2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

/// Wraps an angle into [-pi, pi).
double wrap_angle(double angle);

/// Expresses a world vector in the ego frame: x to the right, y forward.
inline Point2 to_ego_frame(const Point2& world_vec, double ego_heading) {
  const double c = std::cos(ego_heading);
  const double s = std::sin(ego_heading);
  return {world_vec.x * s - world_vec.y * c, world_vec.x * c + world_vec.y * s};
}

/// Inverse of to_ego_frame.
inline Point2 from_ego_frame(const Point2& ego_vec, double ego_heading) {
  const double c = std::cos(ego_heading);
  const double s = std::sin(ego_heading);
  return {ego_vec.x * s + ego_vec.y * c, -ego_vec.x * c + ego_vec.y * s};
}

/// Closest point on a segment; `u` is the clamped segment parameter in [0, 1].
struct SegmentFoot {
  Point2 foot;
  double u = 0.0;
};
SegmentFoot closest_on_segment(const Point2& p, const Point2& a, const Point2& b);
double distance_to_segment(const Point2& p, const Point2& a, const Point2& b);
bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

/// Per-point signed curvature from the circumcircle of each consecutive triple.
/// Endpoints copy their neighbour; collinear triples give exactly zero.
/// Throws DegenerateGeometryError on duplicate consecutive points or fewer than 3 points.
std::vector<double> estimate_curvature(std::span<const Point2> points);

struct PathProjection {
  double s = 0.0;
  double lateral_offset = 0.0;  ///< positive left of the tangent
  Point2 foot;
};

struct PathSample {
  Point2 pos;
  double heading = 0.0;
  double curvature = 0.0;
};

/// Polyline reference path parameterised by arc length.
///
/// Immutable after construction. Consecutive points must be distinct and no
/// farther apart than `max_spacing`; use `densified` to insert points on long
/// segments first.
class ReferencePath {
 public:
  static constexpr double kDefaultMaxSpacing = 2.0;

  ReferencePath() = default;
  ReferencePath(std::vector<Point2> points, std::string id, double max_spacing = kDefaultMaxSpacing);

  /// Splits segments longer than `max_spacing` into equal pieces.
  static ReferencePath densified(const std::vector<Point2>& points, std::string id,
                                 double max_spacing = kDefaultMaxSpacing);
  /// Resamples at (close to) uniform arc-length spacing; endpoints are kept.
  static ReferencePath resampled(const std::vector<Point2>& points, std::string id, double spacing);

  const std::vector<Point2>& points() const { return points_; }
  const std::vector<double>& cum_s() const { return cum_s_; }
  const std::vector<double>& curvature() const { return curvature_; }
  const std::string& id() const { return id_; }
  double length() const { return cum_s_.empty() ? 0.0 : cum_s_.back(); }
  const Point2& front() const { return points_.front(); }
  const Point2& back() const { return points_.back(); }

  PathSample eval(double s) const;
  PathProjection project(const Point2& p) const;

  friend bool operator==(const ReferencePath& a, const ReferencePath& b) {
    return a.id_ == b.id_ && a.points_ == b.points_;
  }

 private:
  std::size_t segment_for(double s) const;

  std::vector<Point2> points_;
  std::vector<double> cum_s_;
  std::vector<double> curvature_;
  std::string id_;
};

inline PathProjection project_to_path(const Point2& p, const ReferencePath& path) {
  return path.project(p);
}
/// Throws RangeError when s lies outside [0, length].
inline PathSample eval_path(const ReferencePath& path, double s) { return path.eval(s); }

struct OrientedBox {
  Point2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;

  OrientedBox() = default;
  OrientedBox(Point2 c, double h, double len, double wid);

  Point2 axis_long() const { return unit_from_heading(heading); }
  Point2 axis_lat() const { return left_normal(heading); }
  /// Counter-clockwise corners starting front-left.
  std::array<Point2, 4> corners() const;
  bool contains(const Point2& p) const;
  OrientedBox inflated(double margin) const;
  double circumradius() const { return 0.5 * std::hypot(length, width); }
};

/// Separating-axis test over the four face normals. Touching edges overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);
/// True when the segment crosses the box or either endpoint lies inside it.
bool box_intersects_segment(const OrientedBox& box, const Point2& a, const Point2& b);

}  // namespace ilsim
