#include "ilsim/scene.hpp"

#include <algorithm>
#include <set>

namespace ilsim {

CurbIndex::CurbIndex(const std::vector<Polyline>& curbs, double cell_size) : curbs_(&curbs), cell_(cell_size) {
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = max_x;
  min_x_ = std::numeric_limits<double>::infinity();
  min_y_ = min_x_;
  for (const auto& c : curbs) {
    for (const auto& p : c) {
      min_x_ = std::min(min_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
  }
  if (!std::isfinite(min_x_)) {
    nx_ = ny_ = 0;
    return;
  }
  nx_ = static_cast<int>((max_x - min_x_) / cell_) + 1;
  ny_ = static_cast<int>((max_y - min_y_) / cell_) + 1;
  cells_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), {});
  for (std::size_t ci = 0; ci < curbs.size(); ++ci) {
    for (std::size_t i = 0; i + 1 < curbs[ci].size(); ++i) {
      const Point2 a = curbs[ci][i];
      const Point2 b = curbs[ci][i + 1];
      const int x0 = static_cast<int>((std::min(a.x, b.x) - min_x_) / cell_);
      const int x1 = static_cast<int>((std::max(a.x, b.x) - min_x_) / cell_);
      const int y0 = static_cast<int>((std::min(a.y, b.y) - min_y_) / cell_);
      const int y1 = static_cast<int>((std::max(a.y, b.y) - min_y_) / cell_);
      for (int cy = y0; cy <= y1; ++cy) {
        for (int cx = x0; cx <= x1; ++cx) {
          cells_[static_cast<std::size_t>(cell_key(cx, cy))].push_back(
              {static_cast<int>(ci), static_cast<int>(i)});
        }
      }
    }
  }
}

std::vector<CurbIndex::SegmentRef> CurbIndex::candidates(double min_x, double min_y, double max_x,
                                                         double max_y) const {
  std::vector<SegmentRef> out;
  if (nx_ == 0) return out;
  const int x0 = std::max(0, static_cast<int>(std::floor((min_x - min_x_) / cell_)));
  const int x1 = std::min(nx_ - 1, static_cast<int>(std::floor((max_x - min_x_) / cell_)));
  const int y0 = std::max(0, static_cast<int>(std::floor((min_y - min_y_) / cell_)));
  const int y1 = std::min(ny_ - 1, static_cast<int>(std::floor((max_y - min_y_) / cell_)));
  for (int cy = y0; cy <= y1; ++cy) {
    for (int cx = x0; cx <= x1; ++cx) {
      const auto& cell = cells_[static_cast<std::size_t>(cell_key(cx, cy))];
      out.insert(out.end(), cell.begin(), cell.end());
    }
  }
  return out;
}

std::optional<int> CurbIndex::first_hit(const OrientedBox& box) const {
  const auto c = box.corners();
  double lo_x = c[0].x, hi_x = c[0].x, lo_y = c[0].y, hi_y = c[0].y;
  for (const auto& p : c) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  std::optional<int> best;
  for (const SegmentRef& ref : candidates(lo_x, lo_y, hi_x, hi_y)) {
    if (best && ref.curb >= *best) continue;
    const auto& pl = (*curbs_)[static_cast<std::size_t>(ref.curb)];
    if (box_intersects_segment(box, pl[static_cast<std::size_t>(ref.index)],
                               pl[static_cast<std::size_t>(ref.index) + 1])) {
      best = ref.curb;
    }
  }
  return best;
}

double CurbIndex::ray_distance(const Point2& origin, double heading, double max_range) const {
  const Point2 dir = unit_from_heading(heading);
  const Point2 end = origin + max_range * dir;
  double best = max_range;
  // Walk the ray in sub-cell steps so that only nearby buckets are visited.
  std::set<long> seen;
  const int steps = static_cast<int>(max_range / (0.5 * cell_)) + 1;
  for (int k = 0; k <= steps; ++k) {
    const double along = std::min(max_range, k * 0.5 * cell_);
    if (along > best + cell_) break;
    const Point2 p = origin + along * dir;
    for (const SegmentRef& ref : candidates(p.x - 0.5 * cell_, p.y - 0.5 * cell_, p.x + 0.5 * cell_,
                                            p.y + 0.5 * cell_)) {
      const long key = static_cast<long>(ref.curb) * 1000003L + ref.index;
      if (!seen.insert(key).second) continue;
      const auto& pl = (*curbs_)[static_cast<std::size_t>(ref.curb)];
      const Point2 a = pl[static_cast<std::size_t>(ref.index)];
      const Point2 b = pl[static_cast<std::size_t>(ref.index) + 1];
      const Point2 e = b - a;
      const double denom = cross(end - origin, e);
      if (denom == 0.0) continue;
      const double t = cross(a - origin, e) / denom;
      const double u = cross(a - origin, end - origin) / denom;
      if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) best = std::min(best, t * max_range);
    }
  }
  return best;
}

Scene::Scene(TrafficLog log) : log_(std::move(log)) {
  log_.validate();
  curbs_ = CurbIndex(log_.curbs);
  for (const auto& [id, tr] : log_.tracks) routes_[id] = route_for_track(log_, tr);
}

int Scene::route_of(int track_id) const { return routes_.at(track_id); }

std::vector<VehicleSnapshot> Scene::vehicles_at(double t, int exclude_track) const {
  std::vector<VehicleSnapshot> out;
  for (const auto& [id, tr] : log_.tracks) {
    if (id == exclude_track) continue;
    const auto st = state_at(tr, log_.frame_period_ms, t);
    if (!st) continue;
    out.push_back({id, OrientedBox(st->pos, st->heading, tr.length, tr.width), st->vel});
  }
  return out;
}

}  // namespace ilsim
