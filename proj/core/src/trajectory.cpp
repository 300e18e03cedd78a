#include "ilsim/trajectory.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ilsim/errors.hpp"

namespace ilsim {

Point2 Trajectory::position_at(double t) const {
  if (waypoints.empty()) throw ValidationError("empty trajectory");
  if (t <= waypoints.front().t) return waypoints.front().pos;
  if (t >= waypoints.back().t) return waypoints.back().pos;
  const auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  return a.pos + u * (b.pos - a.pos);
}

void Trajectory::validate() const {
  if (waypoints.empty()) throw ValidationError("trajectory has no waypoints");
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (!(waypoints[i].t > waypoints[i - 1].t)) {
      throw ValidationError(fmt::format("trajectory timestamps not increasing at waypoint {}", i));
    }
  }
}

OrientedBox ego_box(const EgoState& ego, double length, double width) {
  return OrientedBox(ego.pos, ego.heading, length, width);
}

}  // namespace ilsim
