#include "ilsim/geometry.hpp"

#include <algorithm>
#include <fmt/format.h>

#include "ilsim/errors.hpp"

namespace ilsim {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(angle + std::numbers::pi, two_pi);
  if (r < 0.0) r += two_pi;
  r -= std::numbers::pi;
  // fmod rounding can land exactly on +pi
  if (r >= std::numbers::pi) r -= two_pi;
  return r;
}

SegmentFoot closest_on_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return {a, 0.0};
  const double u = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return {a + u * ab, u};
}

double distance_to_segment(const Point2& p, const Point2& a, const Point2& b) {
  return distance(p, closest_on_segment(p, a, b).foot);
}

namespace {

int orientation(const Point2& a, const Point2& b, const Point2& c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

std::vector<double> estimate_curvature(std::span<const Point2> points) {
  if (points.size() < 3) {
    throw DegenerateGeometryError(
        fmt::format("curvature needs at least 3 points, got {}", points.size()));
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i] == points[i - 1]) {
      throw DegenerateGeometryError(fmt::format("duplicate consecutive points at index {}", i));
    }
  }
  std::vector<double> kappa(points.size(), 0.0);
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    const Point2& a = points[i - 1];
    const Point2& b = points[i];
    const Point2& c = points[i + 1];
    const double twice_area = cross(b - a, c - b);
    if (twice_area == 0.0) continue;
    kappa[i] = 2.0 * twice_area / (distance(a, b) * distance(b, c) * distance(a, c));
  }
  kappa.front() = kappa[1];
  kappa.back() = kappa[kappa.size() - 2];
  return kappa;
}

ReferencePath::ReferencePath(std::vector<Point2> points, std::string id, double max_spacing)
    : points_(std::move(points)), id_(std::move(id)) {
  if (points_.size() < 2) {
    throw ValidationError(fmt::format("reference path '{}' needs at least 2 points", id_));
  }
  cum_s_.resize(points_.size());
  cum_s_[0] = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const Point2& p = points_[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError(fmt::format("reference path '{}' has a non-finite point", id_));
    }
    const double step = distance(points_[i - 1], p);
    if (!(step > 0.0)) {
      throw ValidationError(
          fmt::format("reference path '{}' repeats point {} (arc length must increase)", id_, i));
    }
    if (step > max_spacing * (1.0 + 1e-12)) {
      throw ValidationError(fmt::format("reference path '{}' spacing {:.3f} m exceeds max {:.3f} m",
                                        id_, step, max_spacing));
    }
    cum_s_[i] = cum_s_[i - 1] + step;
  }
  if (points_.size() >= 3) {
    curvature_ = estimate_curvature(points_);
  } else {
    curvature_.assign(points_.size(), 0.0);
  }
}

ReferencePath ReferencePath::densified(const std::vector<Point2>& points, std::string id,
                                       double max_spacing) {
  std::vector<Point2> out;
  if (!points.empty()) out.push_back(points.front());
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Point2 a = points[i - 1];
    const Point2 b = points[i];
    const double len = distance(a, b);
    const auto pieces = static_cast<int>(std::ceil(len / max_spacing - 1e-12));
    for (int k = 1; k < pieces; ++k) out.push_back(a + (static_cast<double>(k) / pieces) * (b - a));
    out.push_back(b);
  }
  return ReferencePath(std::move(out), std::move(id), max_spacing);
}

ReferencePath ReferencePath::resampled(const std::vector<Point2>& points, std::string id,
                                       double spacing) {
  std::vector<double> cum(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) cum[i] = cum[i - 1] + distance(points[i - 1], points[i]);
  const double total = cum.empty() ? 0.0 : cum.back();
  const int n = std::max(1, static_cast<int>(std::round(total / spacing)));
  std::vector<Point2> out;
  out.reserve(n + 1);
  std::size_t seg = 1;
  for (int k = 0; k <= n; ++k) {
    const double s = total * k / n;
    while (seg + 1 < cum.size() && cum[seg] < s) ++seg;
    const double span = cum[seg] - cum[seg - 1];
    const double u = span > 0.0 ? std::clamp((s - cum[seg - 1]) / span, 0.0, 1.0) : 0.0;
    out.push_back(points[seg - 1] + u * (points[seg] - points[seg - 1]));
  }
  out.back() = points.back();
  return ReferencePath(std::move(out), std::move(id), spacing * 1.5);
}

std::size_t ReferencePath::segment_for(double s) const {
  const auto it = std::upper_bound(cum_s_.begin(), cum_s_.end(), s);
  auto idx = static_cast<std::size_t>(std::distance(cum_s_.begin(), it));
  if (idx == 0) idx = 1;
  if (idx >= cum_s_.size()) idx = cum_s_.size() - 1;
  return idx - 1;
}

PathSample ReferencePath::eval(double s) const {
  if (!(s >= 0.0 && s <= length())) {
    throw RangeError(fmt::format("arc length {} outside [0, {}] on path '{}'", s, length(), id_));
  }
  const std::size_t i = segment_for(s);
  const Point2& a = points_[i];
  const Point2& b = points_[i + 1];
  const double span = cum_s_[i + 1] - cum_s_[i];
  const double u = std::clamp((s - cum_s_[i]) / span, 0.0, 1.0);
  PathSample out;
  out.pos = u == 1.0 ? b : a + u * (b - a);
  out.heading = std::atan2(b.y - a.y, b.x - a.x);
  out.curvature = curvature_[i] + u * (curvature_[i + 1] - curvature_[i]);
  return out;
}

PathProjection ReferencePath::project(const Point2& p) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  PathProjection best;
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Point2& a = points_[i];
    const Point2& b = points_[i + 1];
    const SegmentFoot sf = closest_on_segment(p, a, b);
    const Point2 d = p - sf.foot;
    const double d2 = dot(d, d);
    if (d2 < best_d2) {
      best_d2 = d2;
      best.foot = sf.foot;
      best.s = cum_s_[i] + sf.u * (cum_s_[i + 1] - cum_s_[i]);
      const double side = cross(b - a, d);
      best.lateral_offset = (side >= 0.0 ? 1.0 : -1.0) * std::sqrt(d2);
    }
  }
  return best;
}

OrientedBox::OrientedBox(Point2 c, double h, double len, double wid)
    : center(c), heading(wrap_angle(h)), length(len), width(wid) {
  if (!(length > 0.0) || !(width > 0.0)) {
    throw ValidationError(fmt::format("box dimensions must be positive ({} x {})", length, width));
  }
}

std::array<Point2, 4> OrientedBox::corners() const {
  const Point2 f = 0.5 * length * axis_long();
  const Point2 l = 0.5 * width * axis_lat();
  return {center + f + l, center - f + l, center - f - l, center + f - l};
}

bool OrientedBox::contains(const Point2& p) const {
  const Point2 d = p - center;
  return std::abs(dot(d, axis_long())) <= 0.5 * length && std::abs(dot(d, axis_lat())) <= 0.5 * width;
}

OrientedBox OrientedBox::inflated(double margin) const {
  return OrientedBox(center, heading, length + 2.0 * margin, width + 2.0 * margin);
}

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const Point2 d = b.center - a.center;
  const std::array<Point2, 2> a_axes{a.axis_long(), a.axis_lat()};
  const std::array<Point2, 2> b_axes{b.axis_long(), b.axis_lat()};
  const std::array<double, 2> a_half{0.5 * a.length, 0.5 * a.width};
  const std::array<double, 2> b_half{0.5 * b.length, 0.5 * b.width};
  auto separated_on = [&](const Point2& axis) {
    const double ra = a_half[0] * std::abs(dot(a_axes[0], axis)) + a_half[1] * std::abs(dot(a_axes[1], axis));
    const double rb = b_half[0] * std::abs(dot(b_axes[0], axis)) + b_half[1] * std::abs(dot(b_axes[1], axis));
    return std::abs(dot(d, axis)) > ra + rb;
  };
  for (const Point2& axis : a_axes) {
    if (separated_on(axis)) return false;
  }
  for (const Point2& axis : b_axes) {
    if (separated_on(axis)) return false;
  }
  return true;
}

bool box_intersects_segment(const OrientedBox& box, const Point2& a, const Point2& b) {
  if (box.contains(a) || box.contains(b)) return true;
  const auto c = box.corners();
  for (std::size_t i = 0; i < 4; ++i) {
    if (segments_intersect(a, b, c[i], c[(i + 1) % 4])) return true;
  }
  return false;
}

}  // namespace ilsim
