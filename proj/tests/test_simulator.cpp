#include <gtest/gtest.h>

#include "ilsim/errors.hpp"
#include "ilsim/simulator.hpp"
#include "support.hpp"

using namespace ilsim;

namespace {

Trajectory line_trajectory(const Point2& from, const Point2& to, double t0, double t1) {
  Trajectory t;
  t.waypoints.push_back({t0, from, std::nullopt});
  t.waypoints.push_back({t1, to, std::nullopt});
  return t;
}

std::vector<Point2> straight_offsets(double speed, int n = 10, double period = 0.3) {
  std::vector<Point2> out;
  for (int k = 1; k <= n; ++k) out.push_back({0.0, speed * period * k});
  return out;
}

EpisodeSpec first_episode(const Scene& scene) { return enumerate_episodes(scene.log(), 10, 30).front(); }

class ThrowingPolicy : public Policy {
 public:
  WaypointPrediction act(const Observation&) const override { throw PolicyError("no"); }
};

}  // namespace

TEST(TrackWaypoints, ReachesTargetWhenUncapped) {
  const EgoState s{{0.0, 0.0}, 0.0, 5.0, 0.0};
  const EgoState n = track_waypoints(s, line_trajectory({0.0, 0.0}, {5.0, 0.0}, 0.0, 1.0), 0.1);
  EXPECT_NEAR(n.pos.x, 0.5, 1e-12);
  EXPECT_NEAR(n.pos.y, 0.0, 1e-12);
  EXPECT_NEAR(n.speed, 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(n.t, 0.1);
}

TEST(TrackWaypoints, AccelerationIsCapped) {
  // Wants 10 m/s from 5 m/s; the cap allows +0.4 m/s per 0.1 s step.
  const EgoState s{{0.0, 0.0}, 0.0, 5.0, 0.0};
  const EgoState n = track_waypoints(s, line_trajectory({0.0, 0.0}, {10.0, 0.0}, 0.0, 1.0), 0.1);
  EXPECT_NEAR(n.speed, 5.4, 1e-12);
  EXPECT_NEAR(n.pos.x, 0.54, 1e-12);
  EXPECT_NEAR(n.heading, 0.0, 1e-12);
}

TEST(TrackWaypoints, YawRateIsCapped) {
  const EgoState s{{0.0, 0.0}, 0.0, 5.0, 0.0};
  const EgoState n = track_waypoints(s, line_trajectory({0.0, 0.0}, {0.0, 5.0}, 0.0, 1.0), 0.1);
  EXPECT_NEAR(n.heading, 0.06, 1e-12);
  EXPECT_NEAR(n.speed, 5.0, 1e-12);
  EXPECT_NEAR(distance(n.pos, s.pos), 0.5, 1e-12);
}

TEST(TrackWaypoints, NeverReverses) {
  const EgoState s{{0.0, 0.0}, 0.0, 0.2, 0.0};
  const EgoState n = track_waypoints(s, line_trajectory({0.0, 0.0}, {0.0, 0.0}, 0.0, 1.0), 0.1);
  EXPECT_GE(n.speed, 0.0);
}

TEST(TrackWaypoints, NeedsAFutureWaypoint) {
  const EgoState s{{0.0, 0.0}, 0.0, 5.0, 2.0};
  EXPECT_THROW(track_waypoints(s, line_trajectory({0.0, 0.0}, {1.0, 0.0}, 0.0, 1.0), 0.1), TrackingError);
  EXPECT_THROW(track_waypoints(s, Trajectory{}, 0.1), TrackingError);
}

TEST(CheckCollisions, VehiclesBeforeCurbs) {
  TrafficLog log = fixtures::straight_road_log(100.0, 8.0, 120, 3.5);
  log.tracks[5] = fixtures::constant_track(5, {50.0, 3.0}, {0.0, 0.0}, 120);
  const Scene scene(std::move(log));
  EXPECT_FALSE(check_collisions(OrientedBox({20.0, 0.0}, 0.0, 4.5, 1.8), scene, 1.0, 1));
  const Collision curb = check_collisions(OrientedBox({20.0, 3.0}, 0.0, 4.5, 1.8), scene, 1.0, 1);
  EXPECT_EQ(curb.kind, Collision::Kind::Curb);
  EXPECT_EQ(curb.id, 0);
  const Collision both = check_collisions(OrientedBox({50.0, 3.0}, 0.0, 4.5, 1.8), scene, 1.0, 1);
  EXPECT_EQ(both.kind, Collision::Kind::Vehicle);
  EXPECT_EQ(both.id, 5);
  // The ego's own logged track never counts.
  EXPECT_FALSE(check_collisions(OrientedBox({8.0, 0.0}, 0.0, 4.5, 1.8), scene, 1.0, 1));
  EXPECT_TRUE(check_collisions(OrientedBox({8.0, 0.0}, 0.0, 4.5, 1.8), scene, 1.0, -1));
}

TEST(RunEpisode, StraightPolicyOnEmptyRoadSucceeds) {
  const Scene scene(fixtures::straight_road_log());
  const fixtures::ConstantPolicy policy(straight_offsets(8.0));
  const RolloutResult r = run_episode(scene, first_episode(scene), policy, SimConfig{});
  EXPECT_EQ(r.outcome, Outcome::Success);
  EXPECT_FALSE(r.failure_frame);
  EXPECT_LE(distance(r.frames.back().ego.pos, scene.path(0).back()), SimConfig{}.goal_radius);
  for (std::size_t j = 0; j < r.frames.size(); ++j) EXPECT_NEAR(r.frames[j].ego.t, 0.1 * static_cast<double>(j), 1e-12);
}

TEST(RunEpisode, VeeringIntoTheCurbFails) {
  const Scene scene(fixtures::straight_road_log());
  std::vector<Point2> veer;
  for (int k = 1; k <= 10; ++k) veer.push_back({-1.0 * k, 2.0 * k});
  const fixtures::ConstantPolicy policy(veer);
  const RolloutResult r = run_episode(scene, first_episode(scene), policy, SimConfig{});
  EXPECT_EQ(r.outcome, Outcome::FailCurb);
  ASSERT_TRUE(r.failure_frame);
  EXPECT_EQ(*r.failure_frame, static_cast<int>(r.frames.size()) - 1);
  EXPECT_EQ(r.hit, 0);
}

TEST(RunEpisode, RearEndingAVehicleFails) {
  TrafficLog log = fixtures::straight_road_log();
  log.tracks[2] = fixtures::constant_track(2, {30.0, 0.0}, {0.0, 0.0}, 120);
  const Scene scene(std::move(log));
  const fixtures::ConstantPolicy policy(straight_offsets(8.0));
  const RolloutResult r = run_episode(scene, first_episode(scene), policy, SimConfig{});
  EXPECT_EQ(r.outcome, Outcome::FailVehicle);
  EXPECT_EQ(r.hit, 2);
}

TEST(RunEpisode, StandingStillTimesOut) {
  const Scene scene(fixtures::straight_road_log());
  const fixtures::ConstantPolicy policy(std::vector<Point2>(10, Point2{0.0, 0.0}));
  const EpisodeSpec spec = first_episode(scene);
  const RolloutResult r = run_episode(scene, spec, policy, SimConfig{});
  EXPECT_EQ(r.outcome, Outcome::Timeout);
  EXPECT_EQ(static_cast<int>(r.frames.size()), horizon_steps(scene, spec, 0.1) + 1);
}

TEST(RunEpisode, LogReplayNeverFails) {
  const Scene scene(make_synthetic_scenario(ScenarioKind::Roundabout, 10, 7));
  for (const auto& spec : enumerate_episodes(scene.log(), 20, 30)) {
    const fixtures::LogReplayPolicy policy(scene, spec.ego_track_id);
    const RolloutResult r = run_episode(scene, spec, policy, SimConfig{});
    EXPECT_FALSE(r.failed()) << "track " << spec.ego_track_id << " frame " << spec.start_frame << " outcome "
                             << to_string(r.outcome);
  }
}

TEST(RunEpisode, ReplayIsNotReactive) {
  const Scene scene(make_synthetic_scenario(ScenarioKind::Intersection, 8, 3));
  const EpisodeSpec spec = first_episode(scene);
  SimConfig cfg;
  cfg.keep_observations = true;
  const fixtures::ConstantPolicy slow(straight_offsets(2.0));
  const fixtures::ConstantPolicy fast(straight_offsets(9.0));
  const RolloutResult a = run_episode(scene, spec, slow, cfg);
  const RolloutResult b = run_episode(scene, spec, fast, cfg);
  const std::size_t common = std::min(a.frames.size(), b.frames.size());
  ASSERT_GT(common, 5u);
  for (std::size_t j = 0; j < common; ++j) {
    const auto& va = a.frames[j].observation->vehicles;
    const auto& vb = b.frames[j].observation->vehicles;
    const auto want = scene.vehicles_at(a.frames[j].ego.t, spec.ego_track_id);
    ASSERT_EQ(va.size(), want.size());
    ASSERT_EQ(vb.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(va[i].box.center, want[i].box.center);
      EXPECT_EQ(vb[i].box.center, want[i].box.center);
    }
  }
}

TEST(RunEpisode, RejectsBadSpecs) {
  const Scene scene(fixtures::straight_road_log());
  const fixtures::ConstantPolicy policy(straight_offsets(8.0));
  EpisodeSpec spec = first_episode(scene);
  spec.path_index = 3;
  EXPECT_THROW(run_episode(scene, spec, policy, SimConfig{}), ValidationError);
  spec = first_episode(scene);
  spec.start_frame = 5000;
  EXPECT_THROW(run_episode(scene, spec, policy, SimConfig{}), ValidationError);
  SimConfig odd;
  odd.step_period = 0.03;
  EXPECT_THROW(run_episode(scene, first_episode(scene), policy, odd), ValidationError);
}

TEST(Evaluate, PartitionAndErrors) {
  const Scene scene(make_synthetic_scenario(ScenarioKind::Merging, 8, 4));
  const auto specs = enumerate_episodes(scene.log(), 15, 30);
  const fixtures::ConstantPolicy policy(straight_offsets(7.0));
  const Evaluation ev = evaluate(scene, specs, policy, SimConfig{}, 2);
  EXPECT_TRUE(ev.metrics.partition_holds());
  EXPECT_EQ(ev.metrics.episodes, static_cast<long>(specs.size()));
  EXPECT_NEAR(ev.metrics.suc_rate() + ev.metrics.fail_v_rate() + ev.metrics.fail_c_rate() + ev.metrics.timeout_rate(),
              1.0, 1e-12);

  const Evaluation bad = evaluate(scene, specs, ThrowingPolicy{}, SimConfig{}, 2);
  EXPECT_EQ(bad.metrics.episodes, 0);
  EXPECT_EQ(bad.metrics.errored, static_cast<long>(specs.size()));
  EXPECT_TRUE(bad.metrics.partition_holds());
  EXPECT_EQ(bad.episodes.front().error, "no");
  EXPECT_EQ(bad.metrics.suc_rate(), 0.0);

  EXPECT_THROW(evaluate(scene, {}, policy, SimConfig{}), ValidationError);
}

TEST(Evaluate, IndependentOfWorkerCount) {
  const Scene scene(make_synthetic_scenario(ScenarioKind::Roundabout, 8, 11));
  const auto specs = enumerate_episodes(scene.log(), 10, 30);
  const fixtures::ConstantPolicy policy(straight_offsets(6.0));
  const Evaluation a = evaluate(scene, specs, policy, SimConfig{}, 1);
  const Evaluation b = evaluate(scene, specs, policy, SimConfig{}, 4);
  EXPECT_EQ(a.metrics, b.metrics);
  ASSERT_EQ(a.episodes.size(), b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) EXPECT_EQ(a.episodes[i].result, b.episodes[i].result);
}

TEST(Outcome, StringRoundTrip) {
  for (Outcome o : {Outcome::Success, Outcome::FailVehicle, Outcome::FailCurb, Outcome::Timeout}) {
    EXPECT_EQ(parse_outcome(to_string(o)), o);
  }
  EXPECT_FALSE(parse_outcome("crash"));
}

TEST(Metrics, AddCountsEachOutcome) {
  Metrics m;
  m.add(Outcome::Success);
  m.add(Outcome::Success);
  m.add(Outcome::FailCurb);
  m.add(Outcome::Timeout);
  EXPECT_EQ(m.episodes, 4);
  EXPECT_DOUBLE_EQ(m.suc_rate(), 0.5);
  EXPECT_DOUBLE_EQ(m.fail_c_rate(), 0.25);
  EXPECT_TRUE(m.partition_holds());
}
