#include "ilsim/planner.hpp"

#include <cmath>
#include <queue>
#include <tuple>
#include <unordered_set>

#include <fmt/format.h>

#include "ilsim/errors.hpp"

namespace ilsim {

int PlannerConfig::horizon_steps() const {
  const double r = horizon / dt;
  return static_cast<int>(std::llround(r));
}

void PlannerConfig::validate() const {
  if (accel_set.empty()) throw ValidationError("planner accel_set must not be empty");
  if (!(dt > 0.0)) throw ValidationError("planner dt must be positive");
  if (!(horizon > 0.0)) throw ValidationError("planner horizon must be positive");
  const double r = horizon / dt;
  if (std::abs(r - std::round(r)) > 1e-9 || std::round(r) < 1.0) {
    throw ValidationError("planner horizon must be a positive multiple of dt");
  }
  if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0) throw ValidationError("planner weights must be >= 0");
  if (!(bin_s > 0.0 && bin_v > 0.0 && bin_t > 0.0)) throw ValidationError("planner bins must be positive");
  if (!(ego_length > 0.0 && ego_width > 0.0)) throw ValidationError("ego footprint must be positive");
  if (safety_margin < 0.0) throw ValidationError("safety_margin must be >= 0");
  if (!std::isfinite(v_goal) || v_goal < 0.0) throw ValidationError("v_goal must be finite and >= 0");
  if (use_heuristic && !(heuristic_eps > 0.0 && heuristic_eps <= 1.0)) {
    throw ValidationError("heuristic_eps must lie in (0, 1]");
  }
}

std::vector<double> PlanResult::accelerations() const {
  std::vector<double> out;
  for (std::size_t i = 1; i < nodes.size(); ++i) out.push_back(nodes[i].accel_in);
  return out;
}

PlanNode step_node(const PlanNode& n, double a, double dt) {
  PlanNode out = n;
  out.accel_in = a;
  out.t = n.t + dt;
  const double v = n.v + a * dt;
  if (v < 0.0) {
    out.v = 0.0;
    out.s = n.s + n.v * n.v / (2.0 * std::abs(a));
  } else {
    out.v = v;
    out.s = n.s + n.v * dt + 0.5 * a * dt * dt;
  }
  return out;
}

PlanNode successor(const PlanNode& n, double a, double dt, double path_length) {
  PlanNode out = step_node(n, a, dt);
  out.step = n.step + 1;
  out.t = out.step * dt;
  out.s = std::min(out.s, path_length);
  return out;
}

OrientedBox CollisionOracle::footprint(double s) const {
  const PathSample ps = path->eval(std::clamp(s, 0.0, path->length()));
  return OrientedBox(ps.pos, ps.heading, ego_length + 2.0 * safety_margin, ego_width + 2.0 * safety_margin);
}

bool CollisionOracle::collides(double s, double t) const {
  if (s >= path->length()) return false;
  const OrientedBox box = footprint(s);
  const double r = box.circumradius();
  for (const auto& v : scene->vehicles_at(t, exclude_track)) {
    if (distance(v.box.center, box.center) > r + v.box.circumradius()) continue;
    if (boxes_overlap(box, v.box)) return true;
  }
  return false;
}

double motion_cost(double a, const PlanNode& next, const ReferencePath& path, const PlannerConfig& cfg) {
  const double kappa = path.eval(std::min(next.s, path.length())).curvature;
  const double dv = next.v - cfg.v_goal;
  return cfg.w1 * a * a + cfg.w2 * std::abs(kappa) * next.v * next.v + cfg.w3 * dv * dv;
}

double transition_cost(const PlanNode& /*n*/, double a, const PlanNode& next, const ReferencePath& path,
                       const Scene& scene, const PlannerConfig& cfg, double t0, int exclude_track) {
  const CollisionOracle oracle{&path, &scene, exclude_track, cfg.ego_length, cfg.ego_width, cfg.safety_margin};
  if (oracle.collides(next.s, t0 + next.t)) return std::numeric_limits<double>::infinity();
  return motion_cost(a, next, path, cfg);
}

BinKey bin_of(const PlanNode& n, const PlannerConfig& cfg) {
  constexpr double eps = 1e-9;
  return {static_cast<long>(std::floor(n.s / cfg.bin_s + eps)), static_cast<long>(std::floor(n.v / cfg.bin_v + eps)),
          static_cast<long>(std::floor(n.t / cfg.bin_t + eps))};
}

namespace {

struct BinHash {
  std::size_t operator()(const BinKey& k) const {
    std::size_t h = std::hash<long>{}(k.s);
    h = h * 1000003u ^ std::hash<long>{}(k.v);
    h = h * 1000003u ^ std::hash<long>{}(k.t);
    return h;
  }
};

/// Replay boxes per planner step, fetched once per search.
class StepBoxes {
 public:
  StepBoxes(const Scene& scene, double t0, double dt, int steps, int exclude) : boxes_(static_cast<std::size_t>(steps) + 1) {
    for (int k = 0; k <= steps; ++k) {
      for (const auto& v : scene.vehicles_at(t0 + k * dt, exclude)) boxes_[static_cast<std::size_t>(k)].push_back(v.box);
    }
  }
  bool hits(int step, const OrientedBox& box) const {
    const double r = box.circumradius();
    for (const auto& b : boxes_[static_cast<std::size_t>(step)]) {
      if (distance(b.center, box.center) > r + b.circumradius()) continue;
      if (boxes_overlap(box, b)) return true;
    }
    return false;
  }

 private:
  std::vector<std::vector<OrientedBox>> boxes_;
};

}  // namespace

PlanResult plan(double start_s, double start_v, const ReferencePath& path, const Scene& scene, double t0,
                const PlannerConfig& cfg, int exclude_track) {
  cfg.validate();
  if (!(start_s >= 0.0 && start_s <= path.length())) {
    throw RangeError(fmt::format("start s {} outside [0, {}]", start_s, path.length()));
  }
  if (!(start_v >= 0.0) || !std::isfinite(start_v)) throw ValidationError("start speed must be finite and >= 0");
  const int steps = cfg.horizon_steps();
  const double length = path.length();
  const StepBoxes boxes(scene, t0, cfg.dt, steps, exclude_track);
  const CollisionOracle oracle{&path, &scene, exclude_track, cfg.ego_length, cfg.ego_width, cfg.safety_margin};

  auto heuristic = [&](const PlanNode& n) {
    if (!cfg.use_heuristic) return 0.0;
    const double dv = n.v - cfg.v_goal;
    return cfg.w3 * dv * dv * (steps - n.step) * cfg.heuristic_eps;
  };

  // (f, step, s, v, arena index); lexicographic order makes expansion order,
  // and hence the winner of every bin, fully determined.
  using Entry = std::tuple<double, int, double, double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::vector<PlanNode> arena;
  std::unordered_set<BinKey, BinHash> closed;

  PlanNode root;
  root.s = start_s;
  root.v = start_v;
  arena.push_back(root);
  open.emplace(heuristic(root), 0, root.s, root.v, 0);

  long expansions = 0;
  std::optional<std::size_t> goal;
  while (!open.empty()) {
    const auto [f, step, s, v, idx] = open.top();
    open.pop();
    const PlanNode node = arena[idx];
    if (!closed.insert(bin_of(node, cfg)).second) continue;
    if (node.step == steps) {
      goal = idx;
      break;
    }
    ++expansions;
    if (cfg.max_expansions > 0 && expansions > cfg.max_expansions) {
      throw InfeasiblePlanError(fmt::format("search exceeded {} expansions", cfg.max_expansions));
    }
    for (double a : cfg.accel_set) {
      PlanNode child = successor(node, a, cfg.dt, length);
      if (closed.count(bin_of(child, cfg)) != 0) continue;
      if (child.s < length && boxes.hits(child.step, oracle.footprint(child.s))) continue;
      child.g_cost = node.g_cost + motion_cost(a, child, path, cfg);
      child.parent = static_cast<int>(idx);
      arena.push_back(child);
      open.emplace(child.g_cost + heuristic(child), child.step, child.s, child.v, arena.size() - 1);
    }
  }
  if (!goal) {
    throw InfeasiblePlanError(fmt::format("no collision-free plan reaches the {:.2f} s horizon", cfg.horizon));
  }

  std::vector<PlanNode> chain;
  for (std::optional<int> i = static_cast<int>(*goal); i; i = arena[static_cast<std::size_t>(*i)].parent) {
    chain.push_back(arena[static_cast<std::size_t>(*i)]);
  }
  std::reverse(chain.begin(), chain.end());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    chain[i].parent = i == 0 ? std::nullopt : std::optional<int>(static_cast<int>(i) - 1);
  }

  PlanResult res;
  res.total_cost = chain.back().g_cost;
  res.trajectory = to_world_trajectory(chain, path, t0);
  res.nodes = std::move(chain);
  res.expansions = expansions;
  return res;
}

Trajectory to_world_trajectory(const std::vector<PlanNode>& nodes, const ReferencePath& path, double t0) {
  Trajectory out;
  out.waypoints.reserve(nodes.size());
  for (const auto& n : nodes) {
    const PathSample ps = path.eval(std::clamp(n.s, 0.0, path.length()));
    out.waypoints.push_back({t0 + n.t, ps.pos, ps.heading});
  }
  return out;
}

}  // namespace ilsim
