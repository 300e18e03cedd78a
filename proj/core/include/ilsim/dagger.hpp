#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ilsim/planner.hpp"
#include "ilsim/policy.hpp"
#include "ilsim/refine.hpp"
#include "ilsim/simulator.hpp"

namespace ilsim {

enum class Strategy { KFailure, Adversary };

std::string to_string(Strategy s);
std::optional<Strategy> parse_strategy(const std::string& s);

struct DiscriminatorConfig {
  int epochs = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  double tolerance = 1e-7;  ///< stop once the largest gradient entry falls below this
};

/// Logistic model p(expert | x) on standardised inputs.
struct Discriminator {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> weights;
  double bias = 0.0;

  /// Zero-weight model over `dims` inputs; predicts exactly 0.5.
  static Discriminator zero(std::size_t dims);
  double probability(std::span<const double> x) const;
  void validate() const;
};

/// features followed by the flattened (x, y) offsets.
std::vector<double> discriminator_input(std::span<const double> features, std::span<const Point2> offsets);

/// Class-balanced logistic regression, label 1 = expert. Full-batch gradient
/// descent from zero weights. Throws ValidationError when a class is empty.
Discriminator fit_discriminator(const std::vector<std::vector<double>>& expert,
                                const std::vector<std::vector<double>>& policy, const DiscriminatorConfig& cfg = {});
/// Expert rows from the original samples of `expert`, policy rows from every
/// rollout frame.
Discriminator fit_discriminator(const Dataset& expert, const std::vector<RolloutResult>& rollouts,
                                const DiscriminatorConfig& cfg = {});

/// Frames max(0, failure - k) .. failure - 1 of a failed rollout.
std::vector<int> select_k_failure(const RolloutResult& result, int k);
/// The frame with the lowest expert probability, earliest on ties.
std::vector<int> select_adversary(const RolloutResult& result, const Discriminator& disc);

/// Logged future frames needed to cover n waypoints at `period`.
int frames_needed(int n, double period, double frame_period);

/// Every logged vehicle as its own expert: one sample per frame with enough
/// future, targets being its logged future offsets in its ego frame.
Dataset extract_original_dataset(const Scene& scene, int n, double period, const ObservationConfig& obs_cfg = {});

struct LabelConfig {
  PlannerConfig planner;
  RefineConfig refine;
  ObservationConfig observation;
  int n = 10;
  double period = 0.3;
  /// Expert samples per labelled state: 1 labels only the state itself, m > 1
  /// also labels the next m - 1 expert waypoints.
  int samples_per_state = 1;
  /// Goal speed: the ego's mean logged speed when true, planner.v_goal otherwise.
  bool goal_from_log = true;
};

enum class LabelStatus { Labeled, Infeasible, Collision };

struct LabelOutcome {
  LabelStatus status = LabelStatus::Labeled;
  std::vector<LabeledSample> samples;
  bool blend_fallback = false;  ///< blend infeasible; the rough plan was used
  std::string message;
};

/// Plans from the ego's projection onto its route at the ego's time, blends
/// back to the ego, resamples at the waypoint period and emits samples. Samples
/// whose footprints would hit a replay vehicle are dropped.
LabelOutcome label_with_expert(const Scene& scene, const EpisodeSpec& spec, const EgoState& ego, int iteration,
                               const LabelConfig& cfg);

struct DaggerConfig {
  int iterations = 10;
  Strategy strategy = Strategy::KFailure;
  int k = 20;
  int duplication = 10;
  int workers = 1;
  int episode_stride = 10;
  int min_remaining = 30;
  int max_episodes = 0;  ///< 0 keeps every enumerated episode
  std::uint64_t seed = 7;  ///< subset sampling when max_episodes > 0
  KnnConfig knn;
  SimConfig sim;
  LabelConfig label;
  DiscriminatorConfig discriminator;

  void validate() const;
};

struct IterationReport {
  int iteration = 0;
  long dataset_samples = 0;
  long dataset_weight = 0;
  Metrics metrics;
  long selected = 0;
  long labeled = 0;
  long skipped_infeasible = 0;
  long skipped_collision = 0;
  long blend_fallbacks = 0;

  friend bool operator==(const IterationReport&, const IterationReport&) = default;
};

struct DaggerReport {
  std::string strategy;
  int k = 0;
  int duplication = 0;
  long episodes = 0;
  std::vector<IterationReport> iterations;

  friend bool operator==(const DaggerReport&, const DaggerReport&) = default;
};

/// Episodes rolled out every iteration.
std::vector<EpisodeSpec> training_episodes(const Scene& scene, const DaggerConfig& cfg);

/// Called after iteration i with D_{i+1} (or D_i for the last iteration) and
/// the report so far.
using IterationCallback = std::function<void(int iteration, const Dataset& next, const DaggerReport& report)>;

struct ResumeState {
  int next_iteration = 0;
  Dataset dataset;  ///< D_{next_iteration}
  DaggerReport report;  ///< entries 0 .. next_iteration - 1
};

/// Trains, rolls out, labels and aggregates for cfg.iterations rounds. `resume`
/// continues a run from a checkpoint.
DaggerReport run_dagger(const Scene& scene, const DaggerConfig& cfg, const IterationCallback& on_iteration = {},
                        const std::optional<ResumeState>& resume = std::nullopt);

}  // namespace ilsim
