#pragma once

#include <span>
#include <vector>

#include "ilsim/geometry.hpp"
#include "ilsim/trajectory.hpp"

namespace ilsim {

struct RefineConfig {
  double max_heading_dev = 20.0 * std::numbers::pi / 180.0;
  double alpha_fidelity = 1.0;
  double alpha_vel_var = 5.0;
  double alpha_curv_var = 5.0;
  /// When false the anchor only pins p_0 and is left out of the difference terms.
  bool anchor_in_differences = true;
  /// Log (never reject) collisions of blended trajectories.
  bool debug_post_check = false;

  void validate() const;
};

/// Translates a rough on-path trajectory so it starts at the ego position and
/// returns to the path.
///
/// Waypoint k is moved along the rough trajectory's left normal by
/// d_k = d_0 * exp(-rate * sigma_k), sigma_k being the rough arc length, and
/// snapped to zero once below a millimetre. The rate is the fastest one that
/// keeps every refined segment within `max_heading_dev` of the rough segment.
/// The first waypoint is the ego position; waypoints after the return equal
/// the rough ones. Throws BlendInfeasibleError when no rate returns to the path
/// before the trajectory ends.
Trajectory blend_to_ego(const Trajectory& rough, const EgoState& ego, const ReferencePath& path,
                        const RefineConfig& cfg);

/// Smooths ego-frame waypoint offsets (x right, y forward) by solving the
/// anchored least-squares problem
///   a_f * sum |p_k - q_k|^2 + a_v * sum |second difference|^2 + a_c * sum |third difference|^2
/// with p_0 pinned at the current position. Returns world-frame waypoints
/// p_0..p_n at `period` spacing starting at `current.t`.
Trajectory qp_smooth(std::span<const Point2> raw_offsets, const EgoState& current, double period,
                     const RefineConfig& cfg);

/// The smoothing objective for world points p_1..p_n against targets q_1..q_n.
double qp_objective(const Point2& anchor, std::span<const Point2> targets, std::span<const Point2> points,
                    const RefineConfig& cfg);

/// World positions of ego-frame offsets.
std::vector<Point2> offsets_to_world(std::span<const Point2> offsets, const EgoState& ego);

}  // namespace ilsim
