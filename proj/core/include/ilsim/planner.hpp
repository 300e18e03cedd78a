#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "ilsim/geometry.hpp"
#include "ilsim/scene.hpp"
#include "ilsim/trajectory.hpp"

namespace ilsim {

/// Accelerations available to the pseudo-expert, m/s^2.
inline const std::vector<double> kDefaultAccelSet = {-4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};

struct PlannerConfig {
  std::vector<double> accel_set = kDefaultAccelSet;
  double dt = 0.5;
  double horizon = 8.0;
  double w1 = 1.0;  ///< acceleration
  double w2 = 2.0;  ///< centripetal |kappa| v^2
  double w3 = 0.5;  ///< speed tracking
  double v_goal = 8.0;
  double bin_s = 0.5;
  double bin_v = 0.25;
  double bin_t = 0.5;
  double ego_length = 4.5;
  double ego_width = 1.8;
  double safety_margin = 0.3;
  /// Inadmissible speed-up h = w3 (v - v_goal)^2 * remaining_steps * eps.
  bool use_heuristic = false;
  double heuristic_eps = 1.0;
  /// Guard against runaway searches; 0 disables the limit.
  long max_expansions = 0;

  /// Number of dt steps in the horizon.
  int horizon_steps() const;
  void validate() const;
};

struct PlanNode {
  double s = 0.0;
  double v = 0.0;
  double t = 0.0;
  int step = 0;
  std::optional<int> parent;  ///< index of the parent in the owning node list
  double accel_in = 0.0;
  double g_cost = 0.0;

  friend bool operator==(const PlanNode&, const PlanNode&) = default;
};

struct PlanResult {
  std::vector<PlanNode> nodes;  ///< root to leaf; parent indexes this list
  Trajectory trajectory;
  double total_cost = 0.0;
  long expansions = 0;

  std::vector<double> accelerations() const;
  friend bool operator==(const PlanResult& a, const PlanResult& b) {
    return a.nodes == b.nodes && a.trajectory == b.trajectory && a.total_cost == b.total_cost;
  }
};

/// Kinematic transition; a step that would reverse stops within the step.
PlanNode step_node(const PlanNode& n, double a, double dt);

/// Same transition with the step index advanced; s is clamped to the path end.
PlanNode successor(const PlanNode& n, double a, double dt, double path_length);

/// Everything the collision term needs: where the footprint sits at arc
/// length s and which replay vehicles exist at absolute time t.
struct CollisionOracle {
  const ReferencePath* path = nullptr;
  const Scene* scene = nullptr;
  int exclude_track = -1;
  double ego_length = 4.5;
  double ego_width = 1.8;
  double safety_margin = 0.3;

  /// Footprint at arc length s, inflated by the safety margin.
  OrientedBox footprint(double s) const;
  /// True if the footprint at s overlaps a replay vehicle at time t. Poses at
  /// the path end count as having left the map and never collide.
  bool collides(double s, double t) const;
};

/// w1 a^2 + w2 |kappa(s')| v'^2 + w3 (v' - v_goal)^2 + Col(n'); Col is +inf on
/// overlap at absolute time t0 + n'.t.
double transition_cost(const PlanNode& n, double a, const PlanNode& next, const ReferencePath& path,
                       const Scene& scene, const PlannerConfig& cfg, double t0, int exclude_track = -1);

/// The non-collision part of transition_cost.
double motion_cost(double a, const PlanNode& next, const ReferencePath& path, const PlannerConfig& cfg);

struct BinKey {
  long s = 0;
  long v = 0;
  long t = 0;
  friend auto operator<=>(const BinKey&, const BinKey&) = default;
};

BinKey bin_of(const PlanNode& n, const PlannerConfig& cfg);

/// Best-first search over (s, v, t) from (start_s, start_v, 0). Throws
/// InfeasiblePlanError when no node reaches the horizon.
PlanResult plan(double start_s, double start_v, const ReferencePath& path, const Scene& scene, double t0,
                const PlannerConfig& cfg, int exclude_track = -1);

/// Waypoint k at t0 + node.t on the path.
Trajectory to_world_trajectory(const std::vector<PlanNode>& nodes, const ReferencePath& path, double t0);

}  // namespace ilsim
