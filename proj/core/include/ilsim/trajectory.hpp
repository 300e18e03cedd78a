#pragma once

#include <optional>
#include <vector>

#include "ilsim/geometry.hpp"

namespace ilsim {

struct EgoState {
  Point2 pos;
  double heading = 0.0;
  double speed = 0.0;
  double t = 0.0;

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct Waypoint {
  double t = 0.0;
  Point2 pos;
  std::optional<double> heading;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Timestamped world-frame waypoints, strictly increasing in time.
struct Trajectory {
  std::vector<Waypoint> waypoints;

  bool empty() const { return waypoints.empty(); }
  std::size_t size() const { return waypoints.size(); }
  const Waypoint& front() const { return waypoints.front(); }
  const Waypoint& back() const { return waypoints.back(); }

  /// Linear interpolation in time, clamped to the end points.
  Point2 position_at(double t) const;
  /// Throws ValidationError if empty or timestamps do not increase.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Ego footprint at a state.
OrientedBox ego_box(const EgoState& ego, double length, double width);

}  // namespace ilsim
