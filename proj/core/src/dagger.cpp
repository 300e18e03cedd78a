#include "ilsim/dagger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ilsim/errors.hpp"
#include "ilsim/parallel.hpp"

namespace ilsim {

std::string to_string(Strategy s) { return s == Strategy::KFailure ? "k-failure" : "adversary"; }

std::optional<Strategy> parse_strategy(const std::string& s) {
  if (s == "k-failure" || s == "k_failure" || s == "kfailure") return Strategy::KFailure;
  if (s == "adversary") return Strategy::Adversary;
  return std::nullopt;
}

Discriminator Discriminator::zero(std::size_t dims) {
  Discriminator d;
  d.mean.assign(dims, 0.0);
  d.scale.assign(dims, 1.0);
  d.weights.assign(dims, 0.0);
  return d;
}

double Discriminator::probability(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw ShapeError(fmt::format("discriminator expects {} inputs, got {}", weights.size(), x.size()));
  }
  double z = bias;
  for (std::size_t d = 0; d < x.size(); ++d) z += weights[d] * (x[d] - mean[d]) / scale[d];
  return 1.0 / (1.0 + std::exp(-z));
}

void Discriminator::validate() const {
  if (mean.size() != weights.size() || scale.size() != weights.size()) throw ShapeError("discriminator shape mismatch");
  for (double w : weights) {
    if (!std::isfinite(w)) throw ValidationError("discriminator weight is not finite");
  }
  if (!std::isfinite(bias)) throw ValidationError("discriminator bias is not finite");
}

std::vector<double> discriminator_input(std::span<const double> features, std::span<const Point2> offsets) {
  std::vector<double> x(features.begin(), features.end());
  for (const auto& o : offsets) {
    x.push_back(o.x);
    x.push_back(o.y);
  }
  return x;
}

namespace {

Discriminator fit_rows(const std::vector<const std::vector<double>*>& rows, const std::vector<int>& labels,
                       const DiscriminatorConfig& cfg) {
  const std::size_t n = rows.size();
  const std::size_t dims = rows.front()->size();
  const long n_expert = std::count(labels.begin(), labels.end(), 1);
  const long n_policy = static_cast<long>(n) - n_expert;
  if (n_expert == 0 || n_policy == 0) throw ValidationError("discriminator needs both expert and policy samples");

  Discriminator d = Discriminator::zero(dims);
  for (const auto* r : rows) {
    if (r->size() != dims) throw ShapeError("discriminator rows differ in length");
    for (std::size_t k = 0; k < dims; ++k) d.mean[k] += (*r)[k];
  }
  for (auto& m : d.mean) m /= static_cast<double>(n);
  std::vector<double> var(dims, 0.0);
  for (const auto* r : rows) {
    for (std::size_t k = 0; k < dims; ++k) {
      const double e = (*r)[k] - d.mean[k];
      var[k] += e * e;
    }
  }
  for (std::size_t k = 0; k < dims; ++k) {
    const double s = std::sqrt(var[k] / static_cast<double>(n));
    d.scale[k] = s > 1e-12 ? s : 1.0;
  }
  std::vector<double> z(n * dims);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dims; ++k) z[i * dims + k] = ((*rows[i])[k] - d.mean[k]) / d.scale[k];
  }
  const double w_expert = static_cast<double>(n) / (2.0 * static_cast<double>(n_expert));
  const double w_policy = static_cast<double>(n) / (2.0 * static_cast<double>(n_policy));

  std::vector<double> grad(dims);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* zi = &z[i * dims];
      double logit = d.bias;
      for (std::size_t k = 0; k < dims; ++k) logit += d.weights[k] * zi[k];
      const double p = 1.0 / (1.0 + std::exp(-logit));
      const double err = (labels[i] == 1 ? w_expert : w_policy) * (p - labels[i]);
      for (std::size_t k = 0; k < dims; ++k) grad[k] += err * zi[k];
      grad_b += err;
    }
    double worst = std::abs(grad_b / static_cast<double>(n));
    for (std::size_t k = 0; k < dims; ++k) {
      grad[k] = grad[k] / static_cast<double>(n) + cfg.l2 * d.weights[k];
      worst = std::max(worst, std::abs(grad[k]));
    }
    if (worst < cfg.tolerance) break;
    for (std::size_t k = 0; k < dims; ++k) d.weights[k] -= cfg.learning_rate * grad[k];
    d.bias -= cfg.learning_rate * grad_b / static_cast<double>(n);
  }
  d.validate();
  return d;
}

}  // namespace

Discriminator fit_discriminator(const std::vector<std::vector<double>>& expert,
                                const std::vector<std::vector<double>>& policy, const DiscriminatorConfig& cfg) {
  if (expert.empty() || policy.empty()) throw ValidationError("discriminator needs both expert and policy samples");
  std::vector<const std::vector<double>*> rows;
  std::vector<int> labels;
  for (const auto& r : expert) {
    rows.push_back(&r);
    labels.push_back(1);
  }
  for (const auto& r : policy) {
    rows.push_back(&r);
    labels.push_back(0);
  }
  return fit_rows(rows, labels, cfg);
}

namespace {

std::vector<std::vector<double>> expert_rows(const Dataset& expert) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : expert.samples) {
    if (s.source == SampleSource::Original) rows.push_back(discriminator_input(s.features, s.targets));
  }
  return rows;
}

std::vector<std::vector<double>> policy_rows(const std::vector<const RolloutResult*>& rollouts) {
  std::vector<std::vector<double>> rows;
  for (const auto* r : rollouts) {
    for (const auto& f : r->frames) rows.push_back(discriminator_input(f.features, f.prediction.offsets));
  }
  return rows;
}

}  // namespace

Discriminator fit_discriminator(const Dataset& expert, const std::vector<RolloutResult>& rollouts,
                                const DiscriminatorConfig& cfg) {
  std::vector<const RolloutResult*> ptrs;
  for (const auto& r : rollouts) ptrs.push_back(&r);
  return fit_discriminator(expert_rows(expert), policy_rows(ptrs), cfg);
}

std::vector<int> select_k_failure(const RolloutResult& result, int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (!result.failed() || !result.failure_frame) return {};
  const int last = std::min(*result.failure_frame, static_cast<int>(result.frames.size()));
  std::vector<int> out;
  for (int f = std::max(0, last - k); f < last; ++f) out.push_back(f);
  return out;
}

std::vector<int> select_adversary(const RolloutResult& result, const Discriminator& disc) {
  if (result.frames.empty()) return {};
  int best = 0;
  double best_p = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < result.frames.size(); ++f) {
    const auto& fr = result.frames[f];
    const double p = disc.probability(discriminator_input(fr.features, fr.prediction.offsets));
    if (p < best_p) {
      best_p = p;
      best = static_cast<int>(f);
    }
  }
  return {best};
}

int frames_needed(int n, double period, double frame_period) {
  return static_cast<int>(std::ceil(n * period / frame_period - 1e-9));
}

Dataset extract_original_dataset(const Scene& scene, int n, double period, const ObservationConfig& obs_cfg) {
  if (n < 1) throw ValidationError("waypoint count must be >= 1");
  if (!(period > 0.0)) throw ValidationError("waypoint period must be positive");
  const TrafficLog& log = scene.log();
  const int need = frames_needed(n, period, log.frame_period());
  Dataset ds;
  ds.n = n;
  ds.period = period;
  for (const auto& [id, tr] : log.tracks) {
    const int frames = static_cast<int>(tr.states.size());
    if (frames <= need) continue;
    const ReferencePath& path = scene.path(scene.route_of(id));
    for (int f = 0; f + need < frames; ++f) {
      const TrackState& st = tr.states[static_cast<std::size_t>(f)];
      const EgoState ego{st.pos, st.heading, st.speed(), st.t()};
      LabeledSample s;
      s.features = featurize(observe(scene, ego, path, id, obs_cfg));
      for (int i = 1; i <= n; ++i) {
        const auto fut = state_at(tr, log.frame_period_ms, ego.t + i * period);
        if (!fut) throw Error(fmt::format("track {} has no state {} s after frame {}", id, i * period, f));
        s.targets.push_back(to_ego_frame(fut->pos - ego.pos, ego.heading));
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

namespace {

/// Pose on a trajectory, heading and speed from a short forward difference.
EgoState pose_on(const Trajectory& traj, double t) {
  constexpr double h = 0.1;
  const Point2 p = traj.position_at(t);
  const Point2 q = traj.position_at(t + h);
  const Point2 d = q - p;
  EgoState s;
  s.pos = p;
  s.t = t;
  s.speed = norm(d) / h;
  if (norm(d) > 1e-9) {
    s.heading = std::atan2(d.y, d.x);
  } else {
    const Point2 back = p - traj.position_at(t - h);
    s.heading = norm(back) > 1e-9 ? std::atan2(back.y, back.x) : traj.front().heading.value_or(0.0);
  }
  return s;
}

}  // namespace

LabelOutcome label_with_expert(const Scene& scene, const EpisodeSpec& spec, const EgoState& ego, int iteration,
                               const LabelConfig& cfg) {
  LabelOutcome out;
  const VehicleTrack& tr = scene.log().track(spec.ego_track_id);
  const ReferencePath& path = scene.path(spec.path_index);
  PlannerConfig pc = cfg.planner;
  pc.ego_length = tr.length;
  pc.ego_width = tr.width;
  if (cfg.goal_from_log) pc.v_goal = mean_speed(tr);
  const int per_state = std::max(1, cfg.samples_per_state);
  if ((per_state - 1 + cfg.n) * cfg.period > pc.horizon + 1e-9) {
    throw ValidationError("planner horizon is shorter than the labelled waypoints");
  }

  const PathProjection proj = path.project(ego.pos);
  PlanResult planned;
  try {
    planned = plan(proj.s, ego.speed, path, scene, ego.t, pc, spec.ego_track_id);
  } catch (const InfeasiblePlanError& e) {
    out.status = LabelStatus::Infeasible;
    out.message = e.what();
    return out;
  }
  Trajectory expert;
  try {
    expert = blend_to_ego(planned.trajectory, ego, path, cfg.refine);
  } catch (const BlendInfeasibleError& e) {
    out.blend_fallback = true;
    out.message = e.what();
    expert = planned.trajectory;
  }

  bool any_collision = false;
  for (int j = 0; j < per_state; ++j) {
    const EgoState at = j == 0 ? ego : pose_on(expert, ego.t + j * cfg.period);
    LabeledSample s;
    s.source = SampleSource::PseudoExpert;
    s.iteration = iteration;
    bool collides = false;
    Point2 prev = at.pos;
    for (int i = 1; i <= cfg.n; ++i) {
      const double t = at.t + i * cfg.period;
      const Point2 p = expert.position_at(t);
      const Point2 d = p - prev;
      const double heading = norm(d) > 1e-9 ? std::atan2(d.y, d.x) : at.heading;
      prev = p;
      if (check_collisions(OrientedBox(p, heading, tr.length, tr.width), scene, t, spec.ego_track_id).kind ==
          Collision::Kind::Vehicle) {
        collides = true;
        break;
      }
      s.targets.push_back(to_ego_frame(p - at.pos, at.heading));
    }
    if (collides) {
      any_collision = true;
      continue;
    }
    s.features = featurize(observe(scene, at, path, spec.ego_track_id, cfg.observation));
    out.samples.push_back(std::move(s));
  }
  if (out.samples.empty() && any_collision) {
    out.status = LabelStatus::Collision;
    out.message = "expert waypoints overlap a replay vehicle";
  }
  return out;
}

void DaggerConfig::validate() const {
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (k < 1) throw ValidationError("k must be >= 1");
  if (duplication < 1) throw ValidationError("duplication must be >= 1");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (episode_stride < 1) throw ValidationError("episode_stride must be >= 1");
  if (min_remaining < 1) throw ValidationError("min_remaining must be >= 1");
  if (max_episodes < 0) throw ValidationError("max_episodes must be >= 0");
  if (knn.k < 1) throw ValidationError("knn k must be >= 1");
  if (label.n < 1 || !(label.period > 0.0)) throw ValidationError("waypoint shape must be positive");
  if (label.samples_per_state < 1) throw ValidationError("samples_per_state must be >= 1");
  sim.validate();
  label.planner.validate();
  label.refine.validate();
}

std::vector<EpisodeSpec> training_episodes(const Scene& scene, const DaggerConfig& cfg) {
  auto specs = enumerate_episodes(scene.log(), cfg.episode_stride, cfg.min_remaining);
  if (cfg.max_episodes > 0 && static_cast<std::size_t>(cfg.max_episodes) < specs.size()) {
    std::vector<std::size_t> idx(specs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(static_cast<std::size_t>(cfg.max_episodes));
    std::sort(idx.begin(), idx.end());
    std::vector<EpisodeSpec> subset;
    for (std::size_t i : idx) subset.push_back(specs[i]);
    specs = std::move(subset);
  }
  return specs;
}

DaggerReport run_dagger(const Scene& scene, const DaggerConfig& cfg, const IterationCallback& on_iteration,
                        const std::optional<ResumeState>& resume) {
  cfg.validate();
  const auto specs = training_episodes(scene, cfg);
  if (specs.empty()) throw ValidationError("no training episodes; lower min_remaining or episode_stride");

  Dataset data;
  DaggerReport report;
  int start = 0;
  if (resume) {
    data = resume->dataset;
    report = resume->report;
    start = resume->next_iteration;
    if (static_cast<int>(report.iterations.size()) != start) {
      throw ValidationError("resume report does not match the checkpoint iteration");
    }
  } else {
    data = extract_original_dataset(scene, cfg.label.n, cfg.label.period, cfg.label.observation);
    report.strategy = to_string(cfg.strategy);
    report.k = cfg.k;
    report.duplication = cfg.duplication;
    report.episodes = static_cast<long>(specs.size());
  }
  data.validate();
  if (data.samples.empty()) throw ValidationError("the original dataset is empty");

  for (int it = start; it < cfg.iterations; ++it) {
    const KnnPolicy policy = knn_bc_fit(data, cfg.knn);
    const Evaluation ev = evaluate(scene, specs, policy, cfg.sim, cfg.workers);
    IterationReport rep;
    rep.iteration = it;
    rep.dataset_samples = static_cast<long>(data.samples.size());
    rep.dataset_weight = data.total_weight();
    rep.metrics = ev.metrics;
    spdlog::info("iteration {}: success {}/{} fail_v {} fail_c {} timeout {} errored {}", it, ev.metrics.success,
                 ev.metrics.episodes, ev.metrics.fail_vehicle, ev.metrics.fail_curb, ev.metrics.timeout,
                 ev.metrics.errored);

    if (it + 1 < cfg.iterations) {
      std::vector<std::pair<std::size_t, int>> picks;
      std::optional<Discriminator> disc;
      if (cfg.strategy == Strategy::Adversary) {
        std::vector<const RolloutResult*> rollouts;
        for (const auto& rec : ev.episodes) {
          if (rec.result) rollouts.push_back(&*rec.result);
        }
        disc = fit_discriminator(expert_rows(data), policy_rows(rollouts), cfg.discriminator);
      }
      for (std::size_t e = 0; e < ev.episodes.size(); ++e) {
        const auto& rec = ev.episodes[e];
        if (!rec.result) continue;
        const auto frames = cfg.strategy == Strategy::KFailure ? select_k_failure(*rec.result, cfg.k)
                                                                : select_adversary(*rec.result, *disc);
        for (int f : frames) picks.emplace_back(e, f);
      }
      rep.selected = static_cast<long>(picks.size());

      std::vector<LabelOutcome> labels(picks.size());
      parallel_for(picks.size(), cfg.workers, [&](std::size_t i) {
        const auto& [e, f] = picks[i];
        const RolloutResult& r = *ev.episodes[e].result;
        labels[i] = label_with_expert(scene, r.spec, r.frames[static_cast<std::size_t>(f)].ego, it, cfg.label);
      });
      for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& lo = labels[i];
        if (lo.blend_fallback) ++rep.blend_fallbacks;
        if (lo.status == LabelStatus::Infeasible) {
          ++rep.skipped_infeasible;
          spdlog::debug("skipped state (episode {}, frame {}): {}", picks[i].first, picks[i].second, lo.message);
          continue;
        }
        if (lo.status == LabelStatus::Collision) {
          ++rep.skipped_collision;
          continue;
        }
        for (auto& s : lo.samples) {
          s.multiplicity = cfg.duplication;
          data.samples.push_back(std::move(s));
          ++rep.labeled;
        }
      }
    }
    report.iterations.push_back(rep);
    if (on_iteration) on_iteration(it, data, report);
  }
  return report;
}

}  // namespace ilsim
