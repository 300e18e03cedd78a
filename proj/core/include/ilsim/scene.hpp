#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "ilsim/dataset.hpp"
#include "ilsim/geometry.hpp"

namespace ilsim {

/// Uniform-grid bucket index over every curb segment of a log.
class CurbIndex {
 public:
  struct SegmentRef {
    int curb = 0;
    int index = 0;  ///< segment from point `index` to `index + 1`
  };

  CurbIndex() = default;
  explicit CurbIndex(const std::vector<Polyline>& curbs, double cell_size = 4.0);

  /// Lowest curb index whose polyline touches the box, if any.
  std::optional<int> first_hit(const OrientedBox& box) const;
  /// Distance along the ray to the nearest curb segment, capped at `max_range`.
  double ray_distance(const Point2& origin, double heading, double max_range) const;

  const std::vector<Polyline>& curbs() const { return *curbs_; }

 private:
  std::vector<SegmentRef> candidates(double min_x, double min_y, double max_x, double max_y) const;
  long cell_key(int cx, int cy) const { return static_cast<long>(cy) * nx_ + cx; }

  const std::vector<Polyline>* curbs_ = nullptr;
  double cell_ = 4.0;
  double min_x_ = 0.0;
  double min_y_ = 0.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::vector<SegmentRef>> cells_;
};

struct VehicleSnapshot {
  int track_id = 0;
  OrientedBox box;
  Point2 vel;
};

/// A validated log plus the indices needed to query it quickly. Immutable and
/// shareable across threads.
class Scene {
 public:
  explicit Scene(TrafficLog log);
  Scene(const Scene&) = delete;
  Scene& operator=(const Scene&) = delete;

  const TrafficLog& log() const { return log_; }
  const CurbIndex& curbs() const { return curbs_; }
  const ReferencePath& path(int index) const { return log_.reference_paths.at(static_cast<std::size_t>(index)); }
  /// Route index of a track (see route_for_track), cached.
  int route_of(int track_id) const;

  /// Replay vehicles present at time t, ascending track id, minus `exclude_track`.
  std::vector<VehicleSnapshot> vehicles_at(double t, int exclude_track = -1) const;

 private:
  TrafficLog log_;
  CurbIndex curbs_;
  std::map<int, int> routes_;
};

}  // namespace ilsim
