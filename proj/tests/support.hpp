#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ilsim/dataset.hpp"
#include "ilsim/policy.hpp"
#include "ilsim/scene.hpp"

namespace ilsim::fixtures {

/// Straight path along +x from (0, 0) to (length, 0) at 1 m spacing.
inline ReferencePath straight_path(double length = 100.0, const std::string& id = "straight") {
  std::vector<Point2> pts;
  for (int i = 0; i <= static_cast<int>(length); ++i) pts.push_back({static_cast<double>(i), 0.0});
  return ReferencePath(pts, id);
}

/// Curbs parallel to the straight path at +/- half_width.
inline std::vector<Polyline> straight_curbs(double length, double half_width) {
  return {{{-10.0, half_width}, {length + 10.0, half_width}}, {{-10.0, -half_width}, {length + 10.0, -half_width}}};
}

/// A track moving with constant velocity from `start`.
inline VehicleTrack constant_track(int id, Point2 start, Point2 vel, int frames, std::int64_t t0_ms = 0,
                                   double length = 4.5, double width = 1.8, std::int64_t period_ms = 100) {
  VehicleTrack tr;
  tr.track_id = id;
  tr.length = length;
  tr.width = width;
  const double heading = (vel.x == 0.0 && vel.y == 0.0) ? 0.0 : std::atan2(vel.y, vel.x);
  for (int i = 0; i < frames; ++i) {
    TrackState s;
    s.timestamp_ms = t0_ms + i * period_ms;
    const double t = static_cast<double>(i * period_ms) / 1000.0;
    s.pos = start + t * vel;
    s.vel = vel;
    s.heading = heading;
    tr.states.push_back(s);
  }
  return tr;
}

/// Straight road with an ego track (id 1) driving along it at `speed`.
inline TrafficLog straight_road_log(double length = 100.0, double speed = 8.0, int frames = 120,
                                    double half_width = 3.5) {
  TrafficLog log;
  log.frame_period_ms = 100;
  log.reference_paths.push_back(straight_path(length));
  log.curbs = straight_curbs(length, half_width);
  log.tracks[1] = constant_track(1, {0.0, 0.0}, {speed, 0.0}, frames);
  return log;
}

/// Replays the ego's own logged future as waypoint offsets.
class LogReplayPolicy : public Policy {
 public:
  LogReplayPolicy(const Scene& scene, int track, int n = 10, double period = 0.3)
      : scene_(&scene), track_(track), n_(n), period_(period) {}

  WaypointPrediction act(const Observation& obs) const override {
    const VehicleTrack& tr = scene_->log().track(track_);
    const EgoState& e = obs.frame.ego;
    WaypointPrediction p;
    p.period = period_;
    for (int i = 1; i <= n_; ++i) {
      const auto st = state_at(tr, scene_->log().frame_period_ms, std::min(e.t + period_ * i, tr.t_end()));
      p.offsets.push_back(to_ego_frame(st->pos - e.pos, e.heading));
    }
    return p;
  }

 private:
  const Scene* scene_;
  int track_;
  int n_;
  double period_;
};

/// Always predicts the same offsets.
class ConstantPolicy : public Policy {
 public:
  explicit ConstantPolicy(std::vector<Point2> offsets, double period = 0.3) {
    pred_.offsets = std::move(offsets);
    pred_.period = period;
  }
  WaypointPrediction act(const Observation&) const override { return pred_; }

 private:
  WaypointPrediction pred_;
};

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ilsim_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ilsim::fixtures
