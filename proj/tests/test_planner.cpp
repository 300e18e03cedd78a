#include <gtest/gtest.h>

#include <random>

#include "ilsim/errors.hpp"
#include "ilsim/planner.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ilsim;

namespace {

PlanNode node_at(double s, double v, double t = 0.0) {
  PlanNode n;
  n.s = s;
  n.v = v;
  n.t = t;
  return n;
}

}  // namespace

TEST(StepNode, Examples) {
  const PlanNode a = step_node(node_at(0.0, 10.0), 0.0, 0.5);
  EXPECT_DOUBLE_EQ(a.s, 5.0);
  EXPECT_DOUBLE_EQ(a.v, 10.0);
  EXPECT_DOUBLE_EQ(a.t, 0.5);

  const PlanNode b = step_node(node_at(0.0, 0.0), 2.0, 0.5);
  EXPECT_DOUBLE_EQ(b.s, 0.25);
  EXPECT_DOUBLE_EQ(b.v, 1.0);
}

TEST(StepNode, StopsWithinTheStep) {
  // 1 m/s braking at 4 m/s^2 stops after 0.25 s and 0.125 m.
  const PlanNode n = step_node(node_at(3.0, 1.0), -4.0, 0.5);
  EXPECT_DOUBLE_EQ(n.v, 0.0);
  EXPECT_DOUBLE_EQ(n.s, 3.125);
  EXPECT_DOUBLE_EQ(n.t, 0.5);
  const PlanNode still = step_node(node_at(3.0, 0.0), -1.0, 0.5);
  EXPECT_DOUBLE_EQ(still.s, 3.0);
  EXPECT_DOUBLE_EQ(still.v, 0.0);
}

TEST(StepNode, NeverReversesOnRandomInputs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const PlanNode n = node_at(50.0 * u(rng), 12.0 * u(rng));
    const double a = kDefaultAccelSet[static_cast<std::size_t>(u(rng) * kDefaultAccelSet.size())];
    const PlanNode m = step_node(n, a, 0.5);
    EXPECT_GE(m.v, 0.0);
    EXPECT_GE(m.s, n.s);
  }
}

TEST(Successor, ClampsAtPathEndAndCountsSteps) {
  PlanNode n = node_at(9.0, 10.0);
  n.step = 3;
  const PlanNode m = successor(n, 0.0, 0.5, 10.0);
  EXPECT_DOUBLE_EQ(m.s, 10.0);
  EXPECT_EQ(m.step, 4);
  EXPECT_DOUBLE_EQ(m.t, 2.0);
}

TEST(Cost, Examples) {
  const auto path = fixtures::straight_path(100.0);
  PlannerConfig cfg;
  cfg.v_goal = 8.0;
  // Straight path: only the acceleration and speed terms.
  const PlanNode next = node_at(10.0, 9.0);
  EXPECT_DOUBLE_EQ(motion_cost(1.0, next, path, cfg), 1.0 * 1.0 + 0.5 * 1.0);
  EXPECT_DOUBLE_EQ(motion_cost(0.0, node_at(10.0, 8.0), path, cfg), 0.0);

  // Unit-radius-ish arc: centripetal term uses |kappa| v^2.
  std::vector<Point2> arc;
  const double r = 20.0;
  for (int i = 0; i <= 60; ++i) arc.push_back({r * std::sin(i / r), r * (1.0 - std::cos(i / r))});
  const ReferencePath curved(arc, "arc");
  const double kappa = std::abs(curved.eval(30.0).curvature);
  EXPECT_NEAR(kappa, 1.0 / r, 1e-3);
  EXPECT_DOUBLE_EQ(motion_cost(0.0, node_at(30.0, 8.0), curved, cfg), 2.0 * kappa * 64.0);
}

TEST(Cost, CollisionIsInfinite) {
  TrafficLog log = fixtures::straight_road_log();
  log.tracks[2] = fixtures::constant_track(2, {20.0, 0.0}, {0.0, 0.0}, 120);
  const Scene scene(std::move(log));
  const PlannerConfig cfg;
  const PlanNode from = node_at(0.0, 8.0);
  EXPECT_TRUE(std::isinf(transition_cost(from, 0.0, node_at(20.0, 8.0, 1.0), scene.path(0), scene, cfg, 0.0, 1)));
  EXPECT_TRUE(std::isfinite(transition_cost(from, 0.0, node_at(5.0, 8.0, 1.0), scene.path(0), scene, cfg, 0.0, 1)));
  // At the path end the ego has left the map.
  EXPECT_FALSE((CollisionOracle{&scene.path(0), &scene, 1, 4.5, 1.8, 0.3}.collides(100.0, 1.0)));
}

TEST(Plan, ZeroCostOnEmptyRoad) {
  const Scene scene(fixtures::straight_road_log(150.0, 8.0, 150));
  PlannerConfig cfg;
  cfg.v_goal = 8.0;
  const PlanResult res = plan(0.0, 8.0, scene.path(0), scene, 0.0, cfg, 1);
  EXPECT_EQ(res.total_cost, 0.0);
  ASSERT_EQ(res.accelerations().size(), 16u);
  for (double a : res.accelerations()) EXPECT_EQ(a, 0.0);
  EXPECT_EQ(res.nodes.size(), 17u);
  for (std::size_t i = 1; i < res.nodes.size(); ++i) {
    EXPECT_EQ(res.nodes[i].parent, static_cast<int>(i) - 1);
    EXPECT_DOUBLE_EQ(res.nodes[i].s, 4.0 * static_cast<double>(i));
  }
}

TEST(Plan, SlowsForAVehicleParkedAhead) {
  TrafficLog log = fixtures::straight_road_log(150.0, 8.0, 150);
  log.tracks[2] = fixtures::constant_track(2, {45.0, 0.0}, {0.0, 0.0}, 150);
  const Scene scene(std::move(log));
  PlannerConfig cfg;
  cfg.v_goal = 8.0;
  const PlanResult res = plan(0.0, 8.0, scene.path(0), scene, 0.0, cfg, 1);
  EXPECT_GT(res.total_cost, 0.0);
  const double limit = 45.0 - 0.5 * 4.5 - 0.5 * (4.5 + 0.6);
  for (const auto& n : res.nodes) EXPECT_LT(n.s, limit);
}

TEST(Plan, WaitsForACrossingVehicle) {
  TrafficLog log = fixtures::straight_road_log(150.0, 8.0, 150);
  // Crosses the path at x = 30 around t = 3.75 s.
  log.tracks[2] = fixtures::constant_track(2, {30.0, -30.0}, {0.0, 8.0}, 150);
  const Scene scene(std::move(log));
  PlannerConfig cfg;
  cfg.v_goal = 8.0;
  const PlanResult res = plan(0.0, 8.0, scene.path(0), scene, 0.0, cfg, 1);
  const CollisionOracle oracle{&scene.path(0), &scene, 1, cfg.ego_length, cfg.ego_width, cfg.safety_margin};
  for (const auto& n : res.nodes) EXPECT_FALSE(oracle.collides(n.s, n.t));
  EXPECT_GT(res.total_cost, 0.0);
}

TEST(Plan, InfeasibleWhenBoxedIn) {
  TrafficLog log = fixtures::straight_road_log(150.0, 8.0, 150);
  // Something sits on the ego's start pose for the whole horizon.
  log.tracks[2] = fixtures::constant_track(2, {2.0, 0.0}, {0.0, 0.0}, 150);
  const Scene scene(std::move(log));
  EXPECT_THROW(plan(0.0, 0.0, scene.path(0), scene, 0.0, PlannerConfig{}, 1), InfeasiblePlanError);
}

TEST(Plan, RejectsBadInputs) {
  const Scene scene(fixtures::straight_road_log());
  EXPECT_THROW(plan(-1.0, 5.0, scene.path(0), scene, 0.0, PlannerConfig{}, 1), RangeError);
  EXPECT_THROW(plan(101.0, 5.0, scene.path(0), scene, 0.0, PlannerConfig{}, 1), RangeError);
  PlannerConfig bad;
  bad.horizon = 1.3;
  EXPECT_THROW(plan(0.0, 5.0, scene.path(0), scene, 0.0, bad, 1), ValidationError);
  PlannerConfig tiny;
  tiny.max_expansions = 2;
  EXPECT_THROW(plan(0.0, 5.0, scene.path(0), scene, 0.0, tiny, 1), InfeasiblePlanError);
}

TEST(Plan, ReachesPathEndAndStaysThere) {
  const Scene scene(fixtures::straight_road_log(30.0, 8.0, 100));
  PlannerConfig cfg;
  cfg.v_goal = 8.0;
  const PlanResult res = plan(20.0, 8.0, scene.path(0), scene, 0.0, cfg, 1);
  EXPECT_DOUBLE_EQ(res.nodes.back().s, 30.0);
  for (const auto& n : res.nodes) EXPECT_LE(n.s, 30.0);
}

TEST(Plan, MatchesBinnedDpOracle) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    TrafficLog log = fixtures::straight_road_log(80.0, 5.0, 100);
    for (int k = 0; k < 3; ++k) {
      const double x = 10.0 + 50.0 * u(rng);
      log.tracks[2 + k] = fixtures::constant_track(2 + k, {x, -10.0 - 10.0 * u(rng)}, {0.0, 3.0 + 5.0 * u(rng)}, 100);
    }
    const Scene scene(std::move(log));
    PlannerConfig cfg;
    cfg.horizon = 0.5 * (4 + static_cast<int>(u(rng) * 9.0));
    cfg.bin_s = 1.0;
    cfg.bin_v = 0.5;
    cfg.v_goal = 3.0 + 6.0 * u(rng);
    const double v0 = 8.0 * u(rng);
    std::optional<double> got;
    try {
      got = plan(0.0, v0, scene.path(0), scene, 0.0, cfg, 1).total_cost;
    } catch (const InfeasiblePlanError&) {
    }
    EXPECT_EQ(got, oracle::binned_dp_cost(0.0, v0, scene.path(0), scene, 0.0, cfg, 1)) << "trial " << trial;
  }
}

TEST(Plan, HeuristicNeverBeatsTheExactSearch) {
  TrafficLog log = fixtures::straight_road_log(150.0, 8.0, 150);
  log.tracks[2] = fixtures::constant_track(2, {40.0, -25.0}, {0.0, 7.0}, 150);
  const Scene scene(std::move(log));
  PlannerConfig exact;
  exact.v_goal = 10.0;
  PlannerConfig fast = exact;
  fast.use_heuristic = true;
  fast.heuristic_eps = 0.5;
  const PlanResult a = plan(0.0, 4.0, scene.path(0), scene, 0.0, exact, 1);
  const PlanResult b = plan(0.0, 4.0, scene.path(0), scene, 0.0, fast, 1);
  EXPECT_LE(a.total_cost, b.total_cost);
}

TEST(Plan, DeterministicAcrossCalls) {
  const Scene scene(make_synthetic_scenario(ScenarioKind::Roundabout, 10, 7));
  const auto& tr = scene.log().tracks.begin()->second;
  const auto& st = tr.states[tr.states.size() / 3];
  const ReferencePath& path = scene.path(scene.route_of(tr.track_id));
  const double s = path.project(st.pos).s;
  auto run = [&]() -> std::optional<PlanResult> {
    try {
      return plan(s, st.speed(), path, scene, st.t(), PlannerConfig{}, tr.track_id);
    } catch (const InfeasiblePlanError&) {
      return std::nullopt;
    }
  };
  EXPECT_EQ(run(), run());
}

TEST(ToWorldTrajectory, RoundTripsThroughProjection) {
  std::vector<Point2> arc;
  for (int i = 0; i <= 80; ++i) arc.push_back({30.0 * std::sin(i / 30.0), 30.0 * (1.0 - std::cos(i / 30.0))});
  const ReferencePath path(arc, "arc");
  std::vector<PlanNode> nodes;
  for (int k = 0; k <= 10; ++k) {
    PlanNode n = node_at(3.0 + 5.5 * k, 6.0, 0.5 * k);
    n.step = k;
    nodes.push_back(n);
  }
  const Trajectory traj = to_world_trajectory(nodes, path, 12.0);
  ASSERT_EQ(traj.size(), nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    EXPECT_DOUBLE_EQ(traj.waypoints[k].t, 12.0 + nodes[k].t);
    EXPECT_NEAR(path.project(traj.waypoints[k].pos).s, nodes[k].s, 1e-9);
    EXPECT_NEAR(path.project(traj.waypoints[k].pos).lateral_offset, 0.0, 1e-9);
  }
}

TEST(BinOf, FloorsWithTolerance) {
  PlannerConfig cfg;
  EXPECT_EQ(bin_of(node_at(0.5 - 1e-12, 0.25, 1.0), cfg), (BinKey{1, 1, 2}));
  EXPECT_EQ(bin_of(node_at(0.49, 0.24, 0.4), cfg), (BinKey{0, 0, 0}));
}

TEST(PlannerConfig, AccelerationSetIsExact) {
  EXPECT_EQ(PlannerConfig{}.accel_set, (std::vector<double>{-4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0}));
  EXPECT_EQ(PlannerConfig{}.horizon_steps(), 16);
}
