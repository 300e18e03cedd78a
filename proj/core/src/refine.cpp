#include "ilsim/refine.hpp"

#include <algorithm>
#include <cassert>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <fmt/format.h>

#include "ilsim/errors.hpp"

namespace ilsim {

void RefineConfig::validate() const {
  if (!(max_heading_dev > 0.0 && max_heading_dev < 0.5 * std::numbers::pi)) {
    throw ValidationError("max_heading_dev must lie in (0, pi/2)");
  }
  if (!(alpha_fidelity > 0.0) || alpha_vel_var < 0.0 || alpha_curv_var < 0.0) {
    throw ValidationError("qp weights must be non-negative with alpha_fidelity > 0");
  }
}

namespace {

constexpr double kSnap = 1e-3;
constexpr double kTinyStep = 1e-9;

double angle_between(const Point2& a, const Point2& b) {
  return std::abs(std::atan2(cross(a, b), dot(a, b)));
}

struct BlendFrame {
  std::vector<Point2> normals;
  std::vector<double> arc;
};

BlendFrame rough_frame(const Trajectory& rough) {
  const auto& w = rough.waypoints;
  BlendFrame f;
  f.normals.resize(w.size());
  f.arc.assign(w.size(), 0.0);
  for (std::size_t k = 0; k < w.size(); ++k) {
    double heading = 0.0;
    if (w[k].heading) {
      heading = *w[k].heading;
    } else {
      // Direction of the nearest non-degenerate segment.
      std::size_t a = k, b = k;
      while (b + 1 < w.size() && distance(w[a].pos, w[b].pos) < kTinyStep) ++b;
      while (a > 0 && distance(w[a].pos, w[b].pos) < kTinyStep) --a;
      const Point2 d = w[b].pos - w[a].pos;
      heading = std::atan2(d.y, d.x);
    }
    f.normals[k] = left_normal(heading);
    if (k > 0) f.arc[k] = f.arc[k - 1] + distance(w[k - 1].pos, w[k].pos);
  }
  return f;
}

/// Builds the blended points for a decay rate; empty when the schedule breaks the bound.
std::vector<Point2> try_blend(const Trajectory& rough, const BlendFrame& frame, const Point2& ego_pos,
                              double d0, double rate, double max_dev) {
  const auto& w = rough.waypoints;
  std::vector<Point2> pts(w.size());
  std::vector<double> d(w.size(), 0.0);
  pts[0] = ego_pos;
  d[0] = d0;
  bool returned = false;
  for (std::size_t k = 1; k < w.size(); ++k) {
    double dk = returned ? 0.0 : d0 * std::exp(-rate * frame.arc[k]);
    if (std::abs(dk) < kSnap) dk = 0.0;
    returned = returned || dk == 0.0;
    d[k] = dk;
    pts[k] = dk == 0.0 ? w[k].pos : w[k].pos + dk * frame.normals[k];
  }
  if (d.back() != 0.0 && w.size() > 1) return {};
  if (w.size() == 1) return d0 == 0.0 ? pts : std::vector<Point2>{};
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    if (d[k] == 0.0) break;
    const Point2 rough_step = w[k + 1].pos - w[k].pos;
    const Point2 step = pts[k + 1] - pts[k];
    const bool rough_moves = norm(rough_step) > kTinyStep;
    const bool moves = norm(step) > kTinyStep;
    if (!rough_moves) {
      if (moves) return {};
      continue;
    }
    if (!moves) return {};
    if (angle_between(rough_step, step) > max_dev) return {};
  }
  return pts;
}

}  // namespace

Trajectory blend_to_ego(const Trajectory& rough, const EgoState& ego, const ReferencePath& path,
                        const RefineConfig& cfg) {
  rough.validate();
  const double d0 = path.project(ego.pos).lateral_offset;
  if (d0 == 0.0) return rough;

  const BlendFrame frame = rough_frame(rough);
  constexpr double rate_max = 50.0;
  constexpr double rate_min = 1e-4;
  constexpr int scan = 160;
  std::vector<Point2> best;
  double best_rate = -1.0;
  double next_infeasible = -1.0;
  // Scan from fast to slow; the first feasible rate is the fastest on the grid.
  for (int i = 0; i <= scan; ++i) {
    const double rate = rate_max * std::pow(rate_min / rate_max, static_cast<double>(i) / scan);
    auto pts = try_blend(rough, frame, ego.pos, d0, rate, cfg.max_heading_dev);
    if (!pts.empty()) {
      best = std::move(pts);
      best_rate = rate;
      break;
    }
    next_infeasible = rate;
  }
  if (best_rate < 0.0) {
    throw BlendInfeasibleError(
        fmt::format("lateral offset {:.3f} m cannot be recovered within {} waypoints", d0, rough.size()));
  }
  if (next_infeasible > 0.0) {
    double lo = best_rate;
    double hi = next_infeasible;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      auto pts = try_blend(rough, frame, ego.pos, d0, mid, cfg.max_heading_dev);
      if (pts.empty()) {
        hi = mid;
      } else {
        lo = mid;
        best = std::move(pts);
      }
    }
  }

  Trajectory out = rough;
  for (std::size_t k = 0; k < out.waypoints.size(); ++k) {
    out.waypoints[k].pos = best[k];
    if (best[k] != rough.waypoints[k].pos && k + 1 < best.size()) {
      const Point2 d = best[k + 1] - best[k];
      if (norm(d) > kTinyStep) out.waypoints[k].heading = std::atan2(d.y, d.x);
    }
  }
  return out;
}

std::vector<Point2> offsets_to_world(std::span<const Point2> offsets, const EgoState& ego) {
  std::vector<Point2> out;
  out.reserve(offsets.size());
  for (const Point2& o : offsets) out.push_back(ego.pos + from_ego_frame(o, ego.heading));
  return out;
}

namespace {

struct DiffRow {
  int first = 0;  ///< index of the first coefficient in 0..n
  std::vector<double> coeffs;
};

std::vector<DiffRow> difference_rows(int n, const RefineConfig& cfg, std::vector<double>& weights) {
  std::vector<DiffRow> rows;
  const int lo = cfg.anchor_in_differences ? 0 : 1;
  if (cfg.alpha_vel_var > 0.0) {
    for (int k = lo; k + 2 <= n; ++k) {
      rows.push_back({k, {1.0, -2.0, 1.0}});
      weights.push_back(cfg.alpha_vel_var);
    }
  }
  if (cfg.alpha_curv_var > 0.0) {
    for (int k = lo; k + 3 <= n; ++k) {
      rows.push_back({k, {-1.0, 3.0, -3.0, 1.0}});
      weights.push_back(cfg.alpha_curv_var);
    }
  }
  return rows;
}

}  // namespace

double qp_objective(const Point2& anchor, std::span<const Point2> targets, std::span<const Point2> points,
                    const RefineConfig& cfg) {
  if (targets.size() != points.size()) throw ShapeError("qp_objective: size mismatch");
  const int n = static_cast<int>(points.size());
  auto at = [&](int i) { return i == 0 ? anchor : points[static_cast<std::size_t>(i - 1)]; };
  double j = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Point2 e = points[k] - targets[k];
    j += cfg.alpha_fidelity * dot(e, e);
  }
  std::vector<double> weights;
  const auto rows = difference_rows(n, cfg, weights);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Point2 acc;
    for (std::size_t c = 0; c < rows[r].coeffs.size(); ++c) acc += rows[r].coeffs[c] * at(rows[r].first + static_cast<int>(c));
    j += weights[r] * dot(acc, acc);
  }
  return j;
}

Trajectory qp_smooth(std::span<const Point2> raw_offsets, const EgoState& current, double period,
                     const RefineConfig& cfg) {
  const int n = static_cast<int>(raw_offsets.size());
  if (n < 3) throw ShapeError(fmt::format("qp_smooth needs at least 3 waypoints, got {}", n));
  const std::vector<Point2> targets = offsets_to_world(raw_offsets, current);

  // Normal equations over p_1..p_n; the anchor p_0 moves to the right-hand side.
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n) * cfg.alpha_fidelity;
  Eigen::MatrixXd rhs(n, 2);
  for (int k = 0; k < n; ++k) {
    rhs(k, 0) = cfg.alpha_fidelity * targets[static_cast<std::size_t>(k)].x;
    rhs(k, 1) = cfg.alpha_fidelity * targets[static_cast<std::size_t>(k)].y;
  }
  std::vector<double> weights;
  const auto rows = difference_rows(n, cfg, weights);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const int m = static_cast<int>(row.coeffs.size());
    for (int a = 0; a < m; ++a) {
      const int ia = row.first + a;
      if (ia == 0) continue;
      for (int b = 0; b < m; ++b) {
        const int ib = row.first + b;
        const double v = weights[r] * row.coeffs[static_cast<std::size_t>(a)] * row.coeffs[static_cast<std::size_t>(b)];
        if (ib == 0) {
          rhs(ia - 1, 0) -= v * current.pos.x;
          rhs(ia - 1, 1) -= v * current.pos.y;
        } else {
          h(ia - 1, ib - 1) += v;
        }
      }
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(h);
  assert(llt.info() == Eigen::Success);
  if (llt.info() != Eigen::Success) throw Error("qp_smooth: normal matrix not positive definite");
  const Eigen::MatrixXd sol = llt.solve(rhs);

  Trajectory out;
  out.waypoints.reserve(static_cast<std::size_t>(n) + 1);
  out.waypoints.push_back({current.t, current.pos, current.heading});
  for (int k = 0; k < n; ++k) {
    out.waypoints.push_back({current.t + (k + 1) * period, {sol(k, 0), sol(k, 1)}, std::nullopt});
  }
  for (std::size_t k = 1; k < out.waypoints.size(); ++k) {
    const Point2 d = out.waypoints[k].pos - out.waypoints[k - 1].pos;
    if (norm(d) > kTinyStep) out.waypoints[k].heading = std::atan2(d.y, d.x);
  }
  return out;
}

}  // namespace ilsim
