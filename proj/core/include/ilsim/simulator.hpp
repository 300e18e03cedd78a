#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ilsim/dataset.hpp"
#include "ilsim/policy.hpp"
#include "ilsim/refine.hpp"
#include "ilsim/scene.hpp"
#include "ilsim/trajectory.hpp"

namespace ilsim {

struct SimConfig {
  double step_period = 0.1;
  double goal_radius = 2.0;
  double accel_max = 4.0;
  double yaw_rate_max = 0.6;
  /// Realise the policy through qp_smooth before tracking.
  bool use_qp = true;
  /// Keep every frame's Observation in the result (memory heavy with grids).
  bool keep_observations = false;
  RefineConfig refine;
  ObservationConfig observation;

  void validate() const;
};

enum class Outcome { Success, FailVehicle, FailCurb, Timeout };

std::string to_string(Outcome o);
std::optional<Outcome> parse_outcome(const std::string& s);

struct RolloutFrame {
  EgoState ego;
  std::vector<double> features;
  WaypointPrediction prediction;
  std::shared_ptr<const Observation> observation;

  friend bool operator==(const RolloutFrame& a, const RolloutFrame& b) {
    return a.ego == b.ego && a.features == b.features && a.prediction.offsets == b.prediction.offsets &&
           a.prediction.period == b.prediction.period;
  }
};

struct RolloutResult {
  EpisodeSpec spec;
  Outcome outcome = Outcome::Timeout;
  std::vector<RolloutFrame> frames;
  std::optional<int> failure_frame;
  /// Track id (FailVehicle) or curb index (FailCurb) that was hit.
  std::optional<int> hit;

  bool failed() const { return outcome == Outcome::FailVehicle || outcome == Outcome::FailCurb; }
  friend bool operator==(const RolloutResult&, const RolloutResult&) = default;
};

struct Collision {
  enum class Kind { None, Vehicle, Curb };
  Kind kind = Kind::None;
  int id = -1;

  explicit operator bool() const { return kind != Kind::None; }
  friend bool operator==(const Collision&, const Collision&) = default;
};

/// Vehicles first (ascending track id), then curbs (ascending index).
Collision check_collisions(const OrientedBox& ego_box, const Scene& scene, double t, int exclude_track = -1);

/// One kinematic step toward the trajectory position at state.t + step_period,
/// with speed and heading changes capped.
EgoState track_waypoints(const EgoState& state, const Trajectory& traj, double step_period, double accel_max = 4.0,
                         double yaw_rate_max = 0.6);

/// Initial ego state of an episode (the logged state at its start frame).
EgoState episode_start(const Scene& scene, const EpisodeSpec& spec);
/// Number of simulation steps an episode may take.
int horizon_steps(const Scene& scene, const EpisodeSpec& spec, double step_period);

/// Rolls one episode out. PolicyError and other exceptions from the policy
/// propagate to the caller.
RolloutResult run_episode(const Scene& scene, const EpisodeSpec& spec, const Policy& policy, const SimConfig& cfg);

struct Metrics {
  long episodes = 0;  ///< episodes that produced an outcome
  long success = 0;
  long fail_vehicle = 0;
  long fail_curb = 0;
  long timeout = 0;
  long errored = 0;  ///< episodes aborted by an error, outside the partition

  double rate(long count) const { return episodes == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(episodes); }
  double suc_rate() const { return rate(success); }
  double fail_v_rate() const { return rate(fail_vehicle); }
  double fail_c_rate() const { return rate(fail_curb); }
  double timeout_rate() const { return rate(timeout); }
  /// Counts form an exact partition of the completed episodes.
  bool partition_holds() const { return success + fail_vehicle + fail_curb + timeout == episodes; }
  void add(Outcome o);

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct EpisodeRecord {
  std::optional<RolloutResult> result;
  std::string error;  ///< non-empty when the episode aborted
};

struct Evaluation {
  Metrics metrics;
  std::vector<EpisodeRecord> episodes;  ///< in spec order
};

/// Runs all episodes over `workers` threads; results are ordered by spec index
/// and independent of the worker count.
Evaluation evaluate(const Scene& scene, const std::vector<EpisodeSpec>& specs, const Policy& policy,
                    const SimConfig& cfg, int workers = 1);

}  // namespace ilsim
