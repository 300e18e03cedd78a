#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ilsim/geometry.hpp"
#include "ilsim/scene.hpp"
#include "ilsim/trajectory.hpp"

namespace ilsim {

/// Dense H x W x C grid, row-major with channels innermost.
struct Grid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0.0) {}

  bool empty() const { return data.empty(); }
  double& at(int r, int c, int ch = 0) { return data[index(r, c, ch)]; }
  double at(int r, int c, int ch = 0) const { return data[index(r, c, ch)]; }
  /// Single-channel copy of channel `ch`.
  Grid channel(int ch) const;

 private:
  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)) * channels + static_cast<std::size_t>(ch);
  }
};

enum Channel : int { kRoadMask = 0, kVehicleMask = 1, kVelocityX = 2, kVelocityY = 3, kPathMask = 4, kChannelCount = 5 };

struct CellPos {
  double row = 0.0;
  double col = 0.0;
};

/// Ego-centric grid geometry: the ego sits at cell (height/2, width/2) with its
/// heading pointing to decreasing row index (image up); columns grow to the right.
struct GridFrame {
  double resolution = 0.5;
  int height = 128;
  int width = 128;
  EgoState ego;

  /// Continuous cell coordinates of an ego-frame point (x right, y forward).
  CellPos cell_of(const Point2& ego_offset) const;
  /// Ego-frame point at the centre of a cell.
  Point2 offset_of(int row, int col) const;
  Point2 world_of(int row, int col) const;
};

struct ObservationConfig {
  bool rasterize = false;
  double resolution = 0.5;
  int height = 128;
  int width = 128;
  int nearest_vehicles = 4;
  double vehicle_range = 50.0;
  double curb_range = 50.0;

  void validate() const;
};

/// What the policy sees at one instant. The grid is optional; the object-level
/// context is always filled and is what `featurize` reads.
struct Observation {
  Grid grid;
  double ego_speed = 0.0;
  GridFrame frame;

  std::vector<VehicleSnapshot> vehicles;  ///< ascending track id
  double lateral_offset = 0.0;
  double heading_error = 0.0;
  double path_curvature = 0.0;
  double curb_distance = 0.0;
  int nearest_vehicles = 4;
  double vehicle_range = 50.0;
};

/// Builds the observation for an ego pose. Vehicle `exclude_track` (the ego's
/// own logged track) is not part of the replayed traffic.
Observation observe(const Scene& scene, const EgoState& ego, const ReferencePath& path, int exclude_track,
                    const ObservationConfig& cfg);

/// Birdeye rasterisation. A cell is set iff its centre is covered.
Observation rasterize(const Scene& scene, const EgoState& ego, const ReferencePath& path, double resolution,
                      int height, int width, int exclude_track = -1);

/// Single-channel masks in a given ego frame.
Grid vehicle_mask(const Scene& scene, const GridFrame& frame, double t, int exclude_track);
/// Curb polylines drawn with one-cell radius.
Grid curb_mask(const Scene& scene, const GridFrame& frame);

inline constexpr int kFeatureSlotWidth = 5;
inline constexpr double kAbsentForward = 60.0;

/// Fixed-length ego-relative feature vector:
/// [speed, lateral offset, heading error, curvature,
///  K x (x, y, relative vx, relative vy, heading diff), curb distance ahead].
/// Missing vehicles fill their slot with (0, kAbsentForward, 0, 0, 0).
std::vector<double> featurize(const Observation& obs);
std::size_t feature_length(int nearest_vehicles);

struct WaypointPrediction {
  std::vector<Point2> offsets;  ///< ego frame, x right, y forward
  double period = 0.3;

  std::size_t n() const { return offsets.size(); }
};

enum class SampleSource { Original, PseudoExpert };

struct LabeledSample {
  std::vector<double> features;
  std::vector<Point2> targets;
  SampleSource source = SampleSource::Original;
  int iteration = -1;  ///< DAgger iteration that produced a pseudo-expert sample
  int multiplicity = 1;
  std::shared_ptr<const Observation> observation;  ///< optional, for loss evaluation

  friend bool operator==(const LabeledSample& a, const LabeledSample& b) {
    return a.features == b.features && a.targets == b.targets && a.source == b.source &&
           a.iteration == b.iteration && a.multiplicity == b.multiplicity;
  }
};

struct Dataset {
  std::vector<LabeledSample> samples;
  int n = 10;
  double period = 0.3;

  /// Sum of multiplicities.
  long total_weight() const;
  void validate() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Sum over waypoints of squared offset error.
double loss_pred(const WaypointPrediction& pred, std::span<const Point2> target);

/// Peak-normalised Gaussian centred at the cell that contains `offset`.
Grid waypoint_heatmap(const GridFrame& frame, const Point2& offset, double sigma_cells);

/// (1/n) sum_i <M_i, masks[i]>.
double loss_veh(const WaypointPrediction& pred, std::span<const Grid> vehicle_masks, const GridFrame& frame,
                double sigma_cells = 2.0);
/// (1/n) sum_i <M_i, curb>.
double loss_curb(const WaypointPrediction& pred, const Grid& curb, const GridFrame& frame, double sigma_cells = 2.0);

struct LossWeights {
  double lambda_veh = 0.5;
  double lambda_curb = 0.5;
  double sigma_cells = 2.0;
};

double loss_total(const WaypointPrediction& pred, std::span<const Point2> target, std::span<const Grid> vehicle_masks,
                  const Grid& curb, const GridFrame& frame, const LossWeights& w);

class Policy {
 public:
  virtual ~Policy() = default;
  /// Deterministic; throws PolicyError when the policy cannot act.
  virtual WaypointPrediction act(const Observation& obs) const = 0;
};

struct KnnConfig {
  int k = 5;
  double distance_epsilon = 1e-6;
  double min_std = 1e-3;
};

/// Nearest-neighbour behavioural cloning on standardised features.
class KnnPolicy : public Policy {
 public:
  KnnPolicy() = default;
  KnnPolicy(std::vector<std::vector<double>> features, std::vector<std::vector<Point2>> targets,
            std::vector<int> multiplicity, int n, double period, const KnnConfig& cfg);

  WaypointPrediction act(const Observation& obs) const override;
  WaypointPrediction predict(std::span<const double> features) const;

  bool trained() const { return trained_; }
  int k() const { return cfg_.k; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  bool trained_ = false;
  KnnConfig cfg_;
  int n_ = 0;
  double period_ = 0.3;
  std::size_t dims_ = 0;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<double> normalized_;  ///< row-major samples x dims
  std::vector<std::vector<Point2>> targets_;
  std::vector<int> multiplicity_;
};

/// Fits the standardiser (multiplicity-weighted) and index. `weights` overrides
/// the samples' own multiplicities when non-empty.
KnnPolicy knn_bc_fit(const Dataset& dataset, int k, std::span<const int> weights = {});
KnnPolicy knn_bc_fit(const Dataset& dataset, const KnnConfig& cfg, std::span<const int> weights = {});

/// Mean of loss_pred over the dataset, weighted by multiplicity.
double mean_loss_pred(const KnnPolicy& policy, const Dataset& dataset);

/// Writes H, W, C as little-endian u64 followed by H*W*C little-endian f64.
void dump_grid(const Grid& grid, const std::filesystem::path& file);
Grid read_grid(const std::filesystem::path& file);

}  // namespace ilsim
