#include "ilsim/simulator.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ilsim/errors.hpp"
#include "ilsim/parallel.hpp"

namespace ilsim {

void SimConfig::validate() const {
  if (!(step_period > 0.0)) throw ValidationError("step_period must be positive");
  if (!(goal_radius > 0.0)) throw ValidationError("goal_radius must be positive");
  if (!(accel_max > 0.0) || !(yaw_rate_max > 0.0)) throw ValidationError("tracking caps must be positive");
  refine.validate();
  observation.validate();
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Success:
      return "success";
    case Outcome::FailVehicle:
      return "fail_vehicle";
    case Outcome::FailCurb:
      return "fail_curb";
    case Outcome::Timeout:
      return "timeout";
  }
  return "timeout";
}

std::optional<Outcome> parse_outcome(const std::string& s) {
  for (Outcome o : {Outcome::Success, Outcome::FailVehicle, Outcome::FailCurb, Outcome::Timeout}) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

Collision check_collisions(const OrientedBox& ego_box, const Scene& scene, double t, int exclude_track) {
  const double r = ego_box.circumradius();
  for (const auto& v : scene.vehicles_at(t, exclude_track)) {
    if (distance(v.box.center, ego_box.center) > r + v.box.circumradius()) continue;
    if (boxes_overlap(ego_box, v.box)) return {Collision::Kind::Vehicle, v.track_id};
  }
  if (const auto curb = scene.curbs().first_hit(ego_box)) return {Collision::Kind::Curb, *curb};
  return {};
}

EgoState track_waypoints(const EgoState& state, const Trajectory& traj, double step_period, double accel_max,
                         double yaw_rate_max) {
  if (traj.empty() || !(traj.back().t > state.t)) {
    throw TrackingError(fmt::format("no waypoint after t={:.3f}", state.t));
  }
  const double t_next = state.t + step_period;
  const Point2 target = traj.position_at(t_next);
  const Point2 d = target - state.pos;
  const double dist = norm(d);
  const double want_speed = dist / step_period;
  const double want_heading = dist > 1e-9 ? std::atan2(d.y, d.x) : state.heading;

  const double dv_cap = accel_max * step_period;
  const double dh_cap = yaw_rate_max * step_period;
  const double dv = want_speed - state.speed;
  const double dh = wrap_angle(want_heading - state.heading);

  EgoState next;
  next.t = t_next;
  if (std::abs(dv) <= dv_cap && std::abs(dh) <= dh_cap) {
    next.pos = target;
    next.speed = want_speed;
    next.heading = wrap_angle(want_heading);
    return next;
  }
  next.speed = std::max(0.0, state.speed + std::clamp(dv, -dv_cap, dv_cap));
  next.heading = wrap_angle(state.heading + std::clamp(dh, -dh_cap, dh_cap));
  next.pos = state.pos + (next.speed * step_period) * unit_from_heading(next.heading);
  return next;
}

EgoState episode_start(const Scene& scene, const EpisodeSpec& spec) {
  const VehicleTrack& tr = scene.log().track(spec.ego_track_id);
  if (spec.start_frame < 0 || static_cast<std::size_t>(spec.start_frame) >= tr.states.size()) {
    throw ValidationError(fmt::format("start frame {} outside track {}", spec.start_frame, spec.ego_track_id));
  }
  const TrackState& s = tr.states[static_cast<std::size_t>(spec.start_frame)];
  return {s.pos, s.heading, s.speed(), s.t()};
}

int horizon_steps(const Scene& scene, const EpisodeSpec& spec, double step_period) {
  if (spec.horizon_frames < 1) throw ValidationError("horizon_frames must be >= 1");
  const double ratio = scene.log().frame_period() / step_period;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    throw ValidationError(fmt::format("step period {} does not divide the frame period {}", step_period,
                                      scene.log().frame_period()));
  }
  return spec.horizon_frames * static_cast<int>(rounded);
}

void Metrics::add(Outcome o) {
  ++episodes;
  switch (o) {
    case Outcome::Success:
      ++success;
      break;
    case Outcome::FailVehicle:
      ++fail_vehicle;
      break;
    case Outcome::FailCurb:
      ++fail_curb;
      break;
    case Outcome::Timeout:
      ++timeout;
      break;
  }
}

RolloutResult run_episode(const Scene& scene, const EpisodeSpec& spec, const Policy& policy, const SimConfig& cfg) {
  const VehicleTrack& tr = scene.log().track(spec.ego_track_id);
  if (spec.path_index < 0 || static_cast<std::size_t>(spec.path_index) >= scene.log().reference_paths.size()) {
    throw ValidationError(fmt::format("episode path index {} out of range", spec.path_index));
  }
  const ReferencePath& path = scene.path(spec.path_index);
  const int steps = horizon_steps(scene, spec, cfg.step_period);
  EgoState ego = episode_start(scene, spec);
  const double t0 = ego.t;

  RolloutResult res;
  res.spec = spec;
  for (int j = 0;; ++j) {
    ego.t = t0 + j * cfg.step_period;
    auto obs = std::make_shared<Observation>(observe(scene, ego, path, spec.ego_track_id, cfg.observation));
    RolloutFrame frame;
    frame.ego = ego;
    frame.features = featurize(*obs);
    frame.prediction = policy.act(*obs);
    if (cfg.keep_observations) frame.observation = obs;
    res.frames.push_back(std::move(frame));

    const Collision hit = check_collisions(ego_box(ego, tr.length, tr.width), scene, ego.t, spec.ego_track_id);
    if (hit) {
      res.outcome = hit.kind == Collision::Kind::Vehicle ? Outcome::FailVehicle : Outcome::FailCurb;
      res.failure_frame = j;
      res.hit = hit.id;
      return res;
    }
    if (distance(ego.pos, path.back()) <= cfg.goal_radius) {
      res.outcome = Outcome::Success;
      return res;
    }
    if (j >= steps) {
      res.outcome = Outcome::Timeout;
      return res;
    }
    const WaypointPrediction& pred = res.frames.back().prediction;
    Trajectory traj;
    if (cfg.use_qp) {
      traj = qp_smooth(pred.offsets, ego, pred.period, cfg.refine);
    } else {
      traj.waypoints.push_back({ego.t, ego.pos, ego.heading});
      const auto pts = offsets_to_world(pred.offsets, ego);
      for (std::size_t k = 0; k < pts.size(); ++k) {
        traj.waypoints.push_back({ego.t + static_cast<double>(k + 1) * pred.period, pts[k], std::nullopt});
      }
    }
    ego = track_waypoints(ego, traj, cfg.step_period, cfg.accel_max, cfg.yaw_rate_max);
  }
}

Evaluation evaluate(const Scene& scene, const std::vector<EpisodeSpec>& specs, const Policy& policy,
                    const SimConfig& cfg, int workers) {
  if (specs.empty()) throw ValidationError("no episodes to evaluate");
  cfg.validate();
  Evaluation ev;
  ev.episodes.resize(specs.size());
  parallel_for(specs.size(), workers, [&](std::size_t i) {
    try {
      ev.episodes[i].result = run_episode(scene, specs[i], policy, cfg);
    } catch (const std::exception& e) {
      ev.episodes[i].error = e.what();
      if (ev.episodes[i].error.empty()) ev.episodes[i].error = "unknown error";
    }
  });
  for (const auto& rec : ev.episodes) {
    if (rec.result) {
      ev.metrics.add(rec.result->outcome);
    } else {
      ++ev.metrics.errored;
    }
  }
  return ev;
}

}  // namespace ilsim
