#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ilsim/geometry.hpp"

namespace ilsim {

/// One logged row of a vehicle. Velocity is kept as components so that a
/// written log reads back bit-identical.
struct TrackState {
  std::int64_t timestamp_ms = 0;
  Point2 pos;
  Point2 vel;
  double heading = 0.0;

  double t() const { return static_cast<double>(timestamp_ms) / 1000.0; }
  double speed() const { return std::hypot(vel.x, vel.y); }
  friend bool operator==(const TrackState&, const TrackState&) = default;
};

struct VehicleTrack {
  int track_id = 0;
  std::int64_t first_frame_id = 0;
  std::vector<TrackState> states;
  double length = 0.0;
  double width = 0.0;

  double t_begin() const { return states.front().t(); }
  double t_end() const { return states.back().t(); }
  std::size_t size() const { return states.size(); }
  friend bool operator==(const VehicleTrack&, const VehicleTrack&) = default;
};

/// Interpolated state of a logged vehicle.
struct VehicleState {
  Point2 pos;
  Point2 vel;
  double speed = 0.0;
  double heading = 0.0;
};

using Polyline = std::vector<Point2>;

/// A recorded scene: the substrate of the replay simulator. Immutable once
/// validated.
struct TrafficLog {
  std::map<int, VehicleTrack> tracks;
  std::int64_t frame_period_ms = 100;
  std::vector<Polyline> curbs;
  std::vector<ReferencePath> reference_paths;

  double frame_period() const { return static_cast<double>(frame_period_ms) / 1000.0; }
  const VehicleTrack& track(int track_id) const;

  /// Throws ValidationError when an invariant does not hold.
  void validate() const;

  friend bool operator==(const TrafficLog&, const TrafficLog&) = default;
};

/// Linear interpolation between bracketing frames, heading on the circle.
/// Empty outside the recorded interval.
std::optional<VehicleState> state_at(const VehicleTrack& track, double t);
/// Same, with the frame period supplied by the caller (avoids re-deriving it).
std::optional<VehicleState> state_at(const VehicleTrack& track, std::int64_t frame_period_ms, double t);

TrafficLog load_log(const std::filesystem::path& tracks_file, const std::filesystem::path& map_file);
void write_log(const TrafficLog& log, const std::filesystem::path& tracks_file,
               const std::filesystem::path& map_file);

/// Stream variants, used by the file functions and by tests.
TrafficLog parse_log(const std::string& tracks_csv, const std::string& map_json);
std::string tracks_to_csv(const TrafficLog& log);
std::string map_to_json(const TrafficLog& log);

struct EpisodeSpec {
  int ego_track_id = 0;
  int start_frame = 0;  ///< index into the ego track's states
  int horizon_frames = 1;
  int path_index = 0;  ///< reference path the ego is routed along

  friend bool operator==(const EpisodeSpec&, const EpisodeSpec&) = default;
};

/// Index of the reference path that best explains a track: minimum mean
/// distance of its logged positions, ties broken by path id.
int route_for_track(const TrafficLog& log, const VehicleTrack& track);

/// Horizon granted to an episode with `remaining` logged future frames.
int default_horizon_frames(int remaining);

/// One spec per (track, start frame multiple of stride) with at least
/// `min_remaining` logged future frames, ordered by track id then frame.
std::vector<EpisodeSpec> enumerate_episodes(const TrafficLog& log, int stride_frames, int min_remaining);

/// Mean logged speed of a track, used as the pseudo-expert goal speed.
double mean_speed(const VehicleTrack& track);

enum class ScenarioKind { Roundabout, Intersection, Merging };

std::optional<ScenarioKind> parse_scenario_kind(const std::string& name);
std::string to_string(ScenarioKind kind);

struct SyntheticOptions {
  double lane_half_width = 2.4;
  double path_spacing = 0.5;
  double safety_gap = 1.0;  ///< box inflation used while scheduling entries
  double max_wander = 0.45;  ///< amplitude of the lateral drift around the route
  double cruise_speed_min = 7.0;
  double cruise_speed_max = 10.0;
  double lateral_accel_max = 2.5;
  double yaw_rate_max = 0.5;
  double mean_entry_gap = 2.5;  ///< seconds
};

/// Deterministic-per-seed synthetic log. Vehicles follow template routes with
/// randomized entry times, speeds and lateral drift; entries are delayed until
/// no pair of boxes (inflated by `safety_gap`) overlaps at any frame.
TrafficLog make_synthetic_scenario(ScenarioKind kind, int n_vehicles, std::uint64_t seed,
                                   const SyntheticOptions& options = {});

}  // namespace ilsim
