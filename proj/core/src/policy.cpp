#include "ilsim/policy.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ilsim/errors.hpp"

namespace ilsim {

Grid Grid::channel(int ch) const {
  Grid out(height, width, 1);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) out.at(r, c) = at(r, c, ch);
  }
  return out;
}

CellPos GridFrame::cell_of(const Point2& ego_offset) const {
  return {static_cast<double>(height / 2) - ego_offset.y / resolution,
          static_cast<double>(width / 2) + ego_offset.x / resolution};
}

Point2 GridFrame::offset_of(int row, int col) const {
  return {(col - width / 2) * resolution, (height / 2 - row) * resolution};
}

Point2 GridFrame::world_of(int row, int col) const {
  return ego.pos + from_ego_frame(offset_of(row, col), ego.heading);
}

void ObservationConfig::validate() const {
  if (!(resolution > 0.0)) throw ValidationError("observation resolution must be positive");
  if (height < 1 || width < 1) throw ValidationError("observation grid must be non-empty");
  if (nearest_vehicles < 0) throw ValidationError("nearest_vehicles must be >= 0");
}

namespace {

CellPos world_to_cell(const GridFrame& frame, const Point2& p) {
  return frame.cell_of(to_ego_frame(p - frame.ego.pos, frame.ego.heading));
}

/// Sets channel `ch` to 1 for cells within one cell of the polyline.
void draw_polyline(Grid& grid, int ch, const GridFrame& frame, const Polyline& pl, bool close) {
  if (pl.size() < 2) return;
  std::vector<CellPos> cells;
  cells.reserve(pl.size() + 1);
  for (const auto& p : pl) cells.push_back(world_to_cell(frame, p));
  if (close && pl.front() != pl.back()) cells.push_back(cells.front());
  for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
    const CellPos a = cells[i];
    const CellPos b = cells[i + 1];
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.row, b.row) - 1.0)));
    const int r1 = std::min(grid.height - 1, static_cast<int>(std::ceil(std::max(a.row, b.row) + 1.0)));
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.col, b.col) - 1.0)));
    const int c1 = std::min(grid.width - 1, static_cast<int>(std::ceil(std::max(a.col, b.col) + 1.0)));
    if (r0 > r1 || c0 > c1) continue;
    const Point2 pa{a.row, a.col};
    const Point2 pb{b.row, b.col};
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (distance_to_segment({static_cast<double>(r), static_cast<double>(c)}, pa, pb) <= 1.0) {
          grid.at(r, c, ch) = 1.0;
        }
      }
    }
  }
}

/// Even-odd fill over the curb polylines, each treated as closed.
void fill_road(Grid& grid, int ch, const GridFrame& frame, const std::vector<Polyline>& curbs) {
  if (curbs.empty()) {
    for (int r = 0; r < grid.height; ++r) {
      for (int c = 0; c < grid.width; ++c) grid.at(r, c, ch) = 1.0;
    }
    return;
  }
  std::vector<std::pair<CellPos, CellPos>> edges;
  for (const auto& pl : curbs) {
    std::vector<CellPos> cells;
    for (const auto& p : pl) cells.push_back(world_to_cell(frame, p));
    if (pl.front() != pl.back()) cells.push_back(cells.front());
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) edges.emplace_back(cells[i], cells[i + 1]);
  }
  std::vector<double> xs;
  for (int r = 0; r < grid.height; ++r) {
    const double row = r;
    xs.clear();
    for (const auto& [p, q] : edges) {
      if ((p.row > row) != (q.row > row)) {
        xs.push_back(p.col + (row - p.row) * (q.col - p.col) / (q.row - p.row));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[i])));
      const int c1 = std::min(grid.width - 1, static_cast<int>(std::floor(xs[i + 1])));
      for (int c = c0; c <= c1; ++c) grid.at(r, c, ch) = 1.0;
    }
  }
}

void paint_vehicles(Grid& grid, int mask_ch, int vel_ch, const GridFrame& frame,
                    const std::vector<VehicleSnapshot>& vehicles) {
  for (const auto& v : vehicles) {
    const auto corners = v.box.corners();
    double r_lo = 1e300, r_hi = -1e300, c_lo = 1e300, c_hi = -1e300;
    for (const auto& p : corners) {
      const CellPos cp = world_to_cell(frame, p);
      r_lo = std::min(r_lo, cp.row);
      r_hi = std::max(r_hi, cp.row);
      c_lo = std::min(c_lo, cp.col);
      c_hi = std::max(c_hi, cp.col);
    }
    const int r0 = std::max(0, static_cast<int>(std::floor(r_lo)));
    const int r1 = std::min(grid.height - 1, static_cast<int>(std::ceil(r_hi)));
    const int c0 = std::max(0, static_cast<int>(std::floor(c_lo)));
    const int c1 = std::min(grid.width - 1, static_cast<int>(std::ceil(c_hi)));
    const Point2 vel = to_ego_frame(v.vel, frame.ego.heading);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (!v.box.contains(frame.world_of(r, c))) continue;
        grid.at(r, c, mask_ch) = 1.0;
        if (vel_ch >= 0) {
          grid.at(r, c, vel_ch) = vel.x;
          grid.at(r, c, vel_ch + 1) = vel.y;
        }
      }
    }
  }
}

GridFrame make_frame(const EgoState& ego, double resolution, int height, int width) {
  GridFrame f;
  f.resolution = resolution;
  f.height = height;
  f.width = width;
  f.ego = ego;
  return f;
}

}  // namespace

Observation observe(const Scene& scene, const EgoState& ego, const ReferencePath& path, int exclude_track,
                    const ObservationConfig& cfg) {
  Observation obs;
  obs.ego_speed = ego.speed;
  obs.frame = make_frame(ego, cfg.resolution, cfg.height, cfg.width);
  obs.nearest_vehicles = cfg.nearest_vehicles;
  obs.vehicle_range = cfg.vehicle_range;
  obs.vehicles = scene.vehicles_at(ego.t, exclude_track);
  const PathProjection proj = path.project(ego.pos);
  const PathSample ps = path.eval(proj.s);
  obs.lateral_offset = proj.lateral_offset;
  obs.heading_error = wrap_angle(ego.heading - ps.heading);
  obs.path_curvature = ps.curvature;
  obs.curb_distance = scene.curbs().ray_distance(ego.pos, ego.heading, cfg.curb_range);

  if (cfg.rasterize) {
    Grid grid(cfg.height, cfg.width, kChannelCount);
    fill_road(grid, kRoadMask, obs.frame, scene.log().curbs);
    paint_vehicles(grid, kVehicleMask, kVelocityX, obs.frame, obs.vehicles);
    draw_polyline(grid, kPathMask, obs.frame, path.points(), false);
    obs.grid = std::move(grid);
  }
  return obs;
}

Observation rasterize(const Scene& scene, const EgoState& ego, const ReferencePath& path, double resolution,
                      int height, int width, int exclude_track) {
  ObservationConfig cfg;
  cfg.rasterize = true;
  cfg.resolution = resolution;
  cfg.height = height;
  cfg.width = width;
  cfg.validate();
  return observe(scene, ego, path, exclude_track, cfg);
}

Grid vehicle_mask(const Scene& scene, const GridFrame& frame, double t, int exclude_track) {
  Grid grid(frame.height, frame.width, 1);
  paint_vehicles(grid, 0, -1, frame, scene.vehicles_at(t, exclude_track));
  return grid;
}

Grid curb_mask(const Scene& scene, const GridFrame& frame) {
  Grid grid(frame.height, frame.width, 1);
  for (const auto& pl : scene.log().curbs) draw_polyline(grid, 0, frame, pl, false);
  return grid;
}

std::size_t feature_length(int nearest_vehicles) {
  return 4 + static_cast<std::size_t>(nearest_vehicles) * kFeatureSlotWidth + 1;
}

std::vector<double> featurize(const Observation& obs) {
  const EgoState& ego = obs.frame.ego;
  std::vector<double> f;
  f.reserve(feature_length(obs.nearest_vehicles));
  f.push_back(obs.ego_speed);
  f.push_back(obs.lateral_offset);
  f.push_back(obs.heading_error);
  f.push_back(obs.path_curvature);

  struct Slot {
    double dist;
    Point2 rel;
    Point2 rel_vel;
    double dheading;
  };
  const Point2 ego_vel = ego.speed * unit_from_heading(ego.heading);
  std::vector<Slot> slots;
  for (const auto& v : obs.vehicles) {
    const Point2 d = v.box.center - ego.pos;
    const double dist = norm(d);
    if (dist > obs.vehicle_range) continue;
    slots.push_back({dist, to_ego_frame(d, ego.heading), to_ego_frame(v.vel - ego_vel, ego.heading),
                     wrap_angle(v.box.heading - ego.heading)});
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.rel.x != b.rel.x) return a.rel.x < b.rel.x;
    return a.rel.y < b.rel.y;
  });
  for (int k = 0; k < obs.nearest_vehicles; ++k) {
    if (static_cast<std::size_t>(k) < slots.size()) {
      const Slot& s = slots[static_cast<std::size_t>(k)];
      f.insert(f.end(), {s.rel.x, s.rel.y, s.rel_vel.x, s.rel_vel.y, s.dheading});
    } else {
      f.insert(f.end(), {0.0, kAbsentForward, 0.0, 0.0, 0.0});
    }
  }
  f.push_back(obs.curb_distance);
  return f;
}

long Dataset::total_weight() const {
  long w = 0;
  for (const auto& s : samples) w += s.multiplicity;
  return w;
}

void Dataset::validate() const {
  if (n < 1) throw ValidationError("dataset waypoint count must be >= 1");
  const std::size_t dims = samples.empty() ? 0 : samples.front().features.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.targets.size() != static_cast<std::size_t>(n)) {
      throw ShapeError(fmt::format("sample {} has {} targets, dataset expects {}", i, s.targets.size(), n));
    }
    if (s.features.size() != dims) throw ShapeError(fmt::format("sample {} feature length differs", i));
    if (s.multiplicity < 1) throw ValidationError(fmt::format("sample {} multiplicity < 1", i));
    for (double v : s.features) {
      if (!std::isfinite(v)) throw ValidationError(fmt::format("sample {} has a non-finite feature", i));
    }
  }
}

double loss_pred(const WaypointPrediction& pred, std::span<const Point2> target) {
  if (pred.offsets.size() != target.size()) {
    throw ShapeError(fmt::format("loss_pred: {} predicted vs {} target waypoints", pred.offsets.size(), target.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Point2 e = pred.offsets[i] - target[i];
    sum += dot(e, e);
  }
  return sum;
}

Grid waypoint_heatmap(const GridFrame& frame, const Point2& offset, double sigma_cells) {
  const CellPos cp = frame.cell_of(offset);
  const double r0 = std::round(cp.row);
  const double c0 = std::round(cp.col);
  Grid g(frame.height, frame.width, 1);
  const double inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
  for (int r = 0; r < frame.height; ++r) {
    const double dr = r - r0;
    for (int c = 0; c < frame.width; ++c) {
      const double dc = c - c0;
      g.at(r, c) = std::exp(-(dr * dr + dc * dc) * inv);
    }
  }
  return g;
}

namespace {

void require_single_channel(const Grid& g, const GridFrame& frame, const char* what) {
  if (g.height != frame.height || g.width != frame.width || g.channels != 1) {
    throw ShapeError(fmt::format("{}: grid {}x{}x{} does not match frame {}x{}x1", what, g.height, g.width,
                                 g.channels, frame.height, frame.width));
  }
}

double inner(const Grid& a, const Grid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

}  // namespace

double loss_veh(const WaypointPrediction& pred, std::span<const Grid> vehicle_masks, const GridFrame& frame,
                double sigma_cells) {
  if (vehicle_masks.size() != pred.offsets.size()) {
    throw ShapeError(fmt::format("loss_veh: {} waypoints vs {} vehicle grids", pred.offsets.size(), vehicle_masks.size()));
  }
  if (pred.offsets.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.offsets.size(); ++i) {
    require_single_channel(vehicle_masks[i], frame, "loss_veh");
    sum += inner(waypoint_heatmap(frame, pred.offsets[i], sigma_cells), vehicle_masks[i]);
  }
  return sum / static_cast<double>(pred.offsets.size());
}

double loss_curb(const WaypointPrediction& pred, const Grid& curb, const GridFrame& frame, double sigma_cells) {
  require_single_channel(curb, frame, "loss_curb");
  if (pred.offsets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& o : pred.offsets) sum += inner(waypoint_heatmap(frame, o, sigma_cells), curb);
  return sum / static_cast<double>(pred.offsets.size());
}

double loss_total(const WaypointPrediction& pred, std::span<const Point2> target, std::span<const Grid> vehicle_masks,
                  const Grid& curb, const GridFrame& frame, const LossWeights& w) {
  return loss_pred(pred, target) + w.lambda_veh * loss_veh(pred, vehicle_masks, frame, w.sigma_cells) +
         w.lambda_curb * loss_curb(pred, curb, frame, w.sigma_cells);
}

KnnPolicy::KnnPolicy(std::vector<std::vector<double>> features, std::vector<std::vector<Point2>> targets,
                     std::vector<int> multiplicity, int n, double period, const KnnConfig& cfg)
    : cfg_(cfg), n_(n), period_(period), targets_(std::move(targets)), multiplicity_(std::move(multiplicity)) {
  if (features.empty()) throw ValidationError("knn: empty dataset");
  if (cfg_.k < 1) throw ValidationError("knn: k must be >= 1");
  dims_ = features.front().size();
  long total = 0;
  for (int m : multiplicity_) total += m;
  if (cfg_.k > total) {
    spdlog::warn("knn: k={} exceeds dataset size {}, capping", cfg_.k, total);
    cfg_.k = static_cast<int>(total);
  }
  mean_.assign(dims_, 0.0);
  scale_.assign(dims_, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t d = 0; d < dims_; ++d) mean_[d] += multiplicity_[i] * features[i][d];
  }
  for (auto& m : mean_) m /= static_cast<double>(total);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t d = 0; d < dims_; ++d) {
      const double e = features[i][d] - mean_[d];
      scale_[d] += multiplicity_[i] * e * e;
    }
  }
  for (auto& s : scale_) s = std::max(std::sqrt(s / static_cast<double>(total)), cfg_.min_std);
  normalized_.resize(features.size() * dims_);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t d = 0; d < dims_; ++d) normalized_[i * dims_ + d] = (features[i][d] - mean_[d]) / scale_[d];
  }
  trained_ = true;
}

WaypointPrediction KnnPolicy::predict(std::span<const double> features) const {
  if (!trained_) throw PolicyError("policy has not been trained");
  if (features.size() != dims_) {
    throw ShapeError(fmt::format("knn: query has {} features, index has {}", features.size(), dims_));
  }
  std::vector<double> q(dims_);
  for (std::size_t d = 0; d < dims_; ++d) q[d] = (features[d] - mean_[d]) / scale_[d];

  const std::size_t count = targets_.size();
  std::vector<std::pair<double, std::size_t>> dist(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double* row = &normalized_[i * dims_];
    double s = 0.0;
    for (std::size_t d = 0; d < dims_; ++d) {
      const double e = row[d] - q[d];
      s += e * e;
    }
    dist[i] = {s, i};
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg_.k), count);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());

  // Walk neighbours in (distance, index) order, consuming multiplicity as if
  // every sample were physically repeated.
  struct Pick {
    std::size_t index;
    double copies;
    double d;
  };
  std::vector<Pick> picks;
  int remaining = cfg_.k;
  for (std::size_t j = 0; j < take && remaining > 0; ++j) {
    const auto [d2, idx] = dist[j];
    const int used = std::min(remaining, multiplicity_[idx]);
    picks.push_back({idx, static_cast<double>(used), std::sqrt(d2)});
    remaining -= used;
  }

  WaypointPrediction out;
  out.period = period_;
  if (picks.size() == 1 || picks.front().d == 0.0) {
    // Exact matches dominate inverse-distance weighting.
    std::vector<Pick> exact;
    for (const auto& p : picks) {
      if (p.d == 0.0 || picks.size() == 1) exact.push_back(p);
    }
    if (exact.size() == 1) {
      out.offsets = targets_[exact.front().index];
      return out;
    }
    picks = std::move(exact);
    for (auto& p : picks) p.d = 0.0;
  }
  out.offsets.assign(static_cast<std::size_t>(n_), Point2{});
  double wsum = 0.0;
  for (const auto& p : picks) {
    const double w = p.copies / (p.d + cfg_.distance_epsilon);
    wsum += w;
    const auto& t = targets_[p.index];
    for (std::size_t i = 0; i < t.size(); ++i) out.offsets[i] += w * t[i];
  }
  for (auto& o : out.offsets) o = (1.0 / wsum) * o;
  return out;
}

WaypointPrediction KnnPolicy::act(const Observation& obs) const {
  if (!trained_) throw PolicyError("policy has not been trained");
  return predict(featurize(obs));
}

KnnPolicy knn_bc_fit(const Dataset& dataset, const KnnConfig& cfg, std::span<const int> weights) {
  if (dataset.samples.empty()) throw ValidationError("knn_bc_fit: dataset is empty");
  if (!weights.empty() && weights.size() != dataset.samples.size()) {
    throw ShapeError("knn_bc_fit: weights must match the sample count");
  }
  std::vector<std::vector<double>> features;
  std::vector<std::vector<Point2>> targets;
  std::vector<int> mult;
  features.reserve(dataset.samples.size());
  targets.reserve(dataset.samples.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    features.push_back(dataset.samples[i].features);
    targets.push_back(dataset.samples[i].targets);
    mult.push_back(weights.empty() ? dataset.samples[i].multiplicity : weights[i]);
  }
  return KnnPolicy(std::move(features), std::move(targets), std::move(mult), dataset.n, dataset.period, cfg);
}

KnnPolicy knn_bc_fit(const Dataset& dataset, int k, std::span<const int> weights) {
  KnnConfig cfg;
  cfg.k = k;
  return knn_bc_fit(dataset, cfg, weights);
}

double mean_loss_pred(const KnnPolicy& policy, const Dataset& dataset) {
  double sum = 0.0;
  long w = 0;
  for (const auto& s : dataset.samples) {
    sum += s.multiplicity * loss_pred(policy.predict(s.features), s.targets);
    w += s.multiplicity;
  }
  return w == 0 ? 0.0 : sum / static_cast<double>(w);
}

void dump_grid(const Grid& grid, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(static_cast<std::uint64_t>(grid.height));
  put_u64(static_cast<std::uint64_t>(grid.width));
  put_u64(static_cast<std::uint64_t>(grid.channels));
  for (double v : grid.data) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(bits);
  }
}

Grid read_grid(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", file.string()));
  auto get_u64 = [&]() {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("grid file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  const auto h = static_cast<int>(get_u64());
  const auto w = static_cast<int>(get_u64());
  const auto c = static_cast<int>(get_u64());
  Grid g(h, w, c);
  for (auto& v : g.data) {
    const std::uint64_t bits = get_u64();
    std::memcpy(&v, &bits, sizeof v);
  }
  return g;
}

}  // namespace ilsim
