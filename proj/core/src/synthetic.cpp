// Synthetic scenes: template routes, a road region built as the union of lane
// buffers (its boundary rings are the curbs), and time-gap scheduled traffic.

#include <algorithm>
#include <random>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/linestring.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <fmt/format.h>

#include "ilsim/dataset.hpp"
#include "ilsim/errors.hpp"

namespace ilsim {

namespace {

namespace bg = boost::geometry;
using BPoint = bg::model::d2::point_xy<double>;
using BLine = bg::model::linestring<BPoint>;
using BPolygon = bg::model::polygon<BPoint>;
using BMulti = bg::model::multi_polygon<BPolygon>;

constexpr double kDeg = std::numbers::pi / 180.0;

struct RouteTemplate {
  std::string id;
  std::vector<Point2> control;
};

Point2 polar(double r, double angle) { return {r * std::cos(angle), r * std::sin(angle)}; }

std::vector<Point2> chaikin(std::vector<Point2> pts, int iterations) {
  for (int it = 0; it < iterations; ++it) {
    std::vector<Point2> next;
    next.reserve(pts.size() * 2);
    next.push_back(pts.front());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const Point2 a = pts[i];
      const Point2 b = pts[i + 1];
      next.push_back(0.75 * a + 0.25 * b);
      next.push_back(0.25 * a + 0.75 * b);
    }
    next.push_back(pts.back());
    pts = std::move(next);
  }
  return pts;
}

std::vector<RouteTemplate> roundabout_routes() {
  constexpr double ring = 20.0;
  constexpr double arm = 70.0;
  constexpr double lane = 2.0;
  std::vector<RouteTemplate> out;
  for (int e = 0; e < 4; ++e) {
    const double te = e * 90.0 * kDeg;
    const Point2 ue = unit_from_heading(te);
    const Point2 ne = left_normal(te);
    for (int q = 1; q <= 3; ++q) {
      const double tx = te + q * 90.0 * kDeg;
      const Point2 ux = unit_from_heading(tx);
      const Point2 nx = left_normal(tx);
      RouteTemplate r;
      r.id = fmt::format("R{}{}", e, (e + q) % 4);
      r.control = {arm * ue + lane * ne, 45.0 * ue + lane * ne, 31.0 * ue + lane * ne};
      for (double a = te + 28.0 * kDeg; a <= tx - 28.0 * kDeg + 1e-9; a += 4.0 * kDeg) {
        r.control.push_back(polar(ring, a));
      }
      r.control.push_back(31.0 * ux - lane * nx);
      r.control.push_back(45.0 * ux - lane * nx);
      r.control.push_back(arm * ux - lane * nx);
      out.push_back(std::move(r));
    }
  }
  return out;
}

Point2 line_intersection(Point2 p, Point2 d, Point2 q, Point2 e) {
  const double denom = cross(d, e);
  const double t = cross(q - p, e) / denom;
  return p + t * d;
}

std::vector<RouteTemplate> intersection_routes() {
  constexpr double arm = 60.0;
  constexpr double lane = 2.0;
  constexpr double stop = 12.0;
  std::vector<RouteTemplate> out;
  const char* names[] = {"", "L", "S", "R"};
  for (int e = 0; e < 4; ++e) {
    const double te = e * 90.0 * kDeg;
    const Point2 ue = unit_from_heading(te);
    const Point2 ne = left_normal(te);
    for (int q : {1, 2, 3}) {
      // q = 1 exits on the arm 90 deg counter-clockwise (a right turn), 2 straight, 3 left.
      const double tx = te + q * 90.0 * kDeg;
      const Point2 ux = unit_from_heading(tx);
      const Point2 nx = left_normal(tx);
      RouteTemplate r;
      r.id = fmt::format("I{}{}{}", e, (e + q) % 4, names[4 - q]);
      r.control = {arm * ue + lane * ne, stop * ue + lane * ne};
      if (q != 2) r.control.push_back(line_intersection(lane * ne, ue, -lane * nx, ux));
      r.control.push_back(stop * ux - lane * nx);
      r.control.push_back(arm * ux - lane * nx);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<RouteTemplate> merging_routes() {
  return {
      {"Mmain", {{-90.0, 0.0}, {-30.0, 0.0}, {0.0, 0.0}, {90.0, 0.0}}},
      {"Mramp", {{-90.0, -32.0}, {-45.0, -14.0}, {-12.0, -1.0}, {10.0, 0.0}, {90.0, 0.0}}},
  };
}

std::vector<ReferencePath> build_paths(const std::vector<RouteTemplate>& templates, double spacing) {
  std::vector<ReferencePath> out;
  for (const auto& t : templates) {
    // Densify before smoothing so Chaikin only rounds the corners.
    const ReferencePath coarse = ReferencePath::densified(t.control, t.id, 4.0);
    out.push_back(ReferencePath::resampled(chaikin(coarse.points(), 5), t.id, spacing));
  }
  return out;
}

std::vector<Polyline> build_curbs(const std::vector<ReferencePath>& paths, double half_width) {
  bg::strategy::buffer::distance_symmetric<double> dist(half_width);
  bg::strategy::buffer::side_straight side;
  bg::strategy::buffer::join_round join(24);
  bg::strategy::buffer::end_flat end;
  bg::strategy::buffer::point_circle circle(24);

  BMulti road;
  for (const auto& path : paths) {
    // Extend both ends so vehicle bodies at the route ends stay on the road.
    constexpr double extension = 10.0;
    const auto& pts = path.points();
    const Point2 d0 = (pts[0] - pts[1]) * (1.0 / distance(pts[0], pts[1]));
    const Point2 d1 = (pts.back() - pts[pts.size() - 2]) * (1.0 / distance(pts.back(), pts[pts.size() - 2]));
    BLine line;
    const Point2 start = pts.front() + extension * d0;
    line.emplace_back(start.x, start.y);
    for (std::size_t i = 0; i < pts.size(); i += 2) line.emplace_back(pts[i].x, pts[i].y);
    if ((pts.size() - 1) % 2 != 0) line.emplace_back(pts.back().x, pts.back().y);
    const Point2 stop = pts.back() + extension * d1;
    line.emplace_back(stop.x, stop.y);

    BMulti lane;
    bg::buffer(line, lane, dist, side, join, end, circle);
    BMulti merged;
    bg::union_(road, lane, merged);
    road = std::move(merged);
  }
  BMulti simplified;
  bg::simplify(road, simplified, 0.02);

  std::vector<Polyline> curbs;
  auto add_ring = [&](const auto& ring) {
    Polyline pl;
    for (const auto& p : ring) pl.push_back({p.x(), p.y()});
    if (pl.size() >= 2) curbs.push_back(std::move(pl));
  };
  for (const auto& poly : simplified) {
    add_ring(poly.outer());
    for (const auto& inner : poly.inners()) add_ring(inner);
  }
  return curbs;
}

struct Motion {
  std::vector<double> s;  // per frame
  std::vector<Point2> pos;
};

/// Speed profile bounded by cruise speed, lateral acceleration and yaw rate,
/// then integrated at the frame period.
std::vector<double> integrate_profile(const ReferencePath& path, double cruise, double dt,
                                      const SyntheticOptions& opt) {
  const auto& kappa = path.curvature();
  const auto& cum = path.cum_s();
  std::vector<double> vmax(kappa.size());
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    const double k = std::abs(kappa[i]);
    double v = cruise;
    if (k > 1e-9) v = std::min({v, std::sqrt(opt.lateral_accel_max / k), opt.yaw_rate_max / k});
    vmax[i] = std::max(v, 1.5);
  }
  constexpr double accel = 1.2;
  constexpr double decel = 1.8;
  for (std::size_t i = 1; i < vmax.size(); ++i) {
    const double ds = cum[i] - cum[i - 1];
    vmax[i] = std::min(vmax[i], std::sqrt(vmax[i - 1] * vmax[i - 1] + 2.0 * accel * ds));
  }
  for (std::size_t i = vmax.size() - 1; i-- > 0;) {
    const double ds = cum[i + 1] - cum[i];
    vmax[i] = std::min(vmax[i], std::sqrt(vmax[i + 1] * vmax[i + 1] + 2.0 * decel * ds));
  }
  auto speed_at = [&](double s) {
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const auto i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cum.begin(), 1,
                                                                       static_cast<std::ptrdiff_t>(cum.size() - 1)));
    const double u = std::clamp((s - cum[i - 1]) / (cum[i] - cum[i - 1]), 0.0, 1.0);
    return vmax[i - 1] + u * (vmax[i] - vmax[i - 1]);
  };
  std::vector<double> s_frames{0.0};
  const double end = path.length();
  while (s_frames.back() < end) {
    const double s = s_frames.back();
    const double v_mid = speed_at(std::min(end, s + 0.5 * dt * speed_at(s)));
    s_frames.push_back(std::min(end, s + v_mid * dt));
  }
  return s_frames;
}

}  // namespace

TrafficLog make_synthetic_scenario(ScenarioKind kind, int n_vehicles, std::uint64_t seed,
                                   const SyntheticOptions& opt) {
  if (n_vehicles < 1) throw ValidationError("n_vehicles must be >= 1");
  std::vector<RouteTemplate> templates;
  switch (kind) {
    case ScenarioKind::Roundabout:
      templates = roundabout_routes();
      break;
    case ScenarioKind::Intersection:
      templates = intersection_routes();
      break;
    case ScenarioKind::Merging:
      templates = merging_routes();
      break;
  }
  TrafficLog log;
  log.frame_period_ms = 100;
  log.reference_paths = build_paths(templates, opt.path_spacing);
  log.curbs = build_curbs(log.reference_paths, opt.lane_half_width);

  const double dt = log.frame_period();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  struct Placed {
    std::int64_t first_frame;
    std::vector<Point2> pos;
    std::vector<double> heading;
    double length;
    double width;
  };
  std::vector<Placed> placed;
  std::int64_t base_frame = 0;

  for (int v = 0; v < n_vehicles; ++v) {
    const auto route = static_cast<std::size_t>(unit(rng) * static_cast<double>(log.reference_paths.size())) %
                       log.reference_paths.size();
    const ReferencePath& path = log.reference_paths[route];
    const double length = uniform(4.2, 5.0);
    const double width = uniform(1.75, 2.0);
    const double cruise = uniform(opt.cruise_speed_min, opt.cruise_speed_max);
    const double amp = uniform(0.0, opt.max_wander);
    const double wavelength = uniform(35.0, 80.0);
    const double phase = uniform(0.0, 2.0 * std::numbers::pi);
    const double gap = uniform(0.4, 1.6) * opt.mean_entry_gap;

    const auto s_frames = integrate_profile(path, cruise, dt, opt);
    Placed p;
    p.length = length;
    p.width = width;
    for (double s : s_frames) {
      const PathSample ps = path.eval(s);
      // Taper the drift to zero at both route ends.
      const double taper = std::min({1.0, s / 15.0, (path.length() - s) / 15.0});
      const double lat = amp * taper * std::sin(2.0 * std::numbers::pi * s / wavelength + phase);
      p.pos.push_back(ps.pos + lat * left_normal(ps.heading));
    }
    // Drop repeated tail positions (clamped at the route end).
    while (p.pos.size() > 2 && p.pos.back() == p.pos[p.pos.size() - 2]) p.pos.pop_back();
    p.heading.resize(p.pos.size());
    for (std::size_t i = 0; i < p.pos.size(); ++i) {
      const Point2 a = p.pos[i == 0 ? 0 : i - 1];
      const Point2 b = p.pos[std::min(i + 1, p.pos.size() - 1)];
      p.heading[i] = std::atan2(b.y - a.y, b.x - a.x);
    }

    base_frame += static_cast<std::int64_t>(std::llround(gap / dt));
    std::int64_t start = base_frame;
    auto conflicts = [&](std::int64_t first) {
      for (const Placed& q : placed) {
        const std::int64_t lo = std::max(first, q.first_frame);
        const std::int64_t hi = std::min(first + static_cast<std::int64_t>(p.pos.size()),
                                         q.first_frame + static_cast<std::int64_t>(q.pos.size()));
        for (std::int64_t f = lo; f < hi; ++f) {
          const auto i = static_cast<std::size_t>(f - first);
          const auto j = static_cast<std::size_t>(f - q.first_frame);
          if (distance(p.pos[i], q.pos[j]) > 8.0 + 2.0 * opt.safety_gap) continue;
          const OrientedBox a(p.pos[i], p.heading[i], p.length, p.width);
          const OrientedBox b(q.pos[j], q.heading[j], q.length, q.width);
          if (boxes_overlap(a.inflated(opt.safety_gap), b)) return true;
        }
      }
      return false;
    };
    int tries = 0;
    while (conflicts(start)) {
      start += 3;
      if (++tries > 2000) throw Error("synthetic scheduling failed to find a conflict-free entry");
    }
    p.first_frame = start;
    // Later vehicles keep entering roughly in order of arrival.
    base_frame = std::max(base_frame, start - static_cast<std::int64_t>(std::llround(opt.mean_entry_gap / dt)));

    VehicleTrack tr;
    tr.track_id = v + 1;
    tr.first_frame_id = start;
    tr.length = length;
    tr.width = width;
    for (std::size_t i = 0; i < p.pos.size(); ++i) {
      TrackState st;
      st.timestamp_ms = (start + static_cast<std::int64_t>(i)) * log.frame_period_ms;
      st.pos = p.pos[i];
      const Point2 a = p.pos[i == 0 ? 0 : i - 1];
      const Point2 b = p.pos[std::min(i + 1, p.pos.size() - 1)];
      const double span = static_cast<double>((i == 0 ? 0 : 1) + (i + 1 < p.pos.size() ? 1 : 0)) * dt;
      st.vel = (b - a) * (1.0 / span);
      st.heading = p.heading[i];
      tr.states.push_back(st);
    }
    log.tracks.emplace(tr.track_id, std::move(tr));
    placed.push_back(std::move(p));
  }
  log.validate();
  return log;
}

}  // namespace ilsim
