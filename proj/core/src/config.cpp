#include "ilsim/config.hpp"

#include <optional>
#include <set>

#include <fmt/format.h>

#include "ilsim/errors.hpp"
#include "ilsim/io.hpp"

namespace ilsim {

namespace {

/// Reads fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ValidationError(fmt::format("config section '{}' must be an object", name_));
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (seen_.count(key) == 0) throw ValidationError(fmt::format("unknown config key '{}{}'", prefix(), key));
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(fmt::format("config key '{}{}' has the wrong type", prefix(), key));
    }
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return std::optional<Section>(std::in_place, j_.at(key), prefix() + key);
  }

 private:
  std::string prefix() const { return name_.empty() ? "" : name_ + "."; }
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::finalize() {
  dagger.label.observation = dagger.sim.observation;
  dagger.label.refine = dagger.sim.refine;
  dagger.validate();
  if (losses.lambda_veh < 0.0 || losses.lambda_curb < 0.0 || !(losses.sigma_cells > 0.0)) {
    throw ValidationError("loss weights must be >= 0 and sigma_cells > 0");
  }
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  DaggerConfig& d = cfg.dagger;
  {
    Section root(j, "");
    std::string out_dir = cfg.output_dir.string();
    root.get("output_dir", out_dir);
    cfg.output_dir = out_dir;
    root.get("seed", d.seed);
    root.get("workers", d.workers);
    if (auto s = root.sub("dagger")) {
      std::string strategy = to_string(d.strategy);
      s->get("iterations", d.iterations);
      s->get("strategy", strategy);
      const auto parsed = parse_strategy(strategy);
      if (!parsed) throw ValidationError(fmt::format("unknown strategy '{}'", strategy));
      d.strategy = *parsed;
      s->get("k", d.k);
      s->get("duplication", d.duplication);
      s->get("episode_stride", d.episode_stride);
      s->get("min_remaining", d.min_remaining);
      s->get("max_episodes", d.max_episodes);
      s->finish();
    }
    if (auto s = root.sub("knn")) {
      s->get("k", d.knn.k);
      s->get("distance_epsilon", d.knn.distance_epsilon);
      s->get("min_std", d.knn.min_std);
      s->finish();
    }
    if (auto s = root.sub("sim")) {
      s->get("step_period", d.sim.step_period);
      s->get("goal_radius", d.sim.goal_radius);
      s->get("accel_max", d.sim.accel_max);
      s->get("yaw_rate_max", d.sim.yaw_rate_max);
      s->get("use_qp", d.sim.use_qp);
      s->finish();
    }
    if (auto s = root.sub("refine")) {
      RefineConfig& r = d.sim.refine;
      double deg = r.max_heading_dev * 180.0 / std::numbers::pi;
      s->get("max_heading_dev_deg", deg);
      r.max_heading_dev = deg * std::numbers::pi / 180.0;
      s->get("alpha_fidelity", r.alpha_fidelity);
      s->get("alpha_vel_var", r.alpha_vel_var);
      s->get("alpha_curv_var", r.alpha_curv_var);
      s->get("anchor_in_differences", r.anchor_in_differences);
      s->get("debug_post_check", r.debug_post_check);
      s->finish();
    }
    if (auto s = root.sub("observation")) {
      ObservationConfig& o = d.sim.observation;
      s->get("rasterize", o.rasterize);
      s->get("resolution", o.resolution);
      s->get("height", o.height);
      s->get("width", o.width);
      s->get("nearest_vehicles", o.nearest_vehicles);
      s->get("vehicle_range", o.vehicle_range);
      s->get("curb_range", o.curb_range);
      s->finish();
    }
    if (auto s = root.sub("planner")) {
      PlannerConfig& p = d.label.planner;
      s->get("accel_set", p.accel_set);
      s->get("dt", p.dt);
      s->get("horizon", p.horizon);
      s->get("w1", p.w1);
      s->get("w2", p.w2);
      s->get("w3", p.w3);
      s->get("v_goal", p.v_goal);
      s->get("goal_from_log", d.label.goal_from_log);
      s->get("bin_s", p.bin_s);
      s->get("bin_v", p.bin_v);
      s->get("bin_t", p.bin_t);
      s->get("safety_margin", p.safety_margin);
      s->get("use_heuristic", p.use_heuristic);
      s->get("heuristic_eps", p.heuristic_eps);
      s->get("max_expansions", p.max_expansions);
      s->finish();
    }
    if (auto s = root.sub("policy")) {
      s->get("n", d.label.n);
      s->get("period", d.label.period);
      s->get("samples_per_state", d.label.samples_per_state);
      s->finish();
    }
    if (auto s = root.sub("discriminator")) {
      s->get("epochs", d.discriminator.epochs);
      s->get("learning_rate", d.discriminator.learning_rate);
      s->get("l2", d.discriminator.l2);
      s->get("tolerance", d.discriminator.tolerance);
      s->finish();
    }
    if (auto s = root.sub("losses")) {
      s->get("lambda_veh", cfg.losses.lambda_veh);
      s->get("lambda_curb", cfg.losses.lambda_curb);
      s->get("sigma_cells", cfg.losses.sigma_cells);
      s->finish();
    }
    root.finish();
  }
  cfg.finalize();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(file));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("config '{}': {}", file.string(), e.what()));
  } catch (const ParseError& e) {
    throw ValidationError(e.what());
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  const DaggerConfig& d = cfg.dagger;
  const PlannerConfig& p = d.label.planner;
  const RefineConfig& r = d.sim.refine;
  const ObservationConfig& o = d.sim.observation;
  return {
      {"output_dir", cfg.output_dir.string()},
      {"seed", d.seed},
      {"workers", d.workers},
      {"dagger",
       {{"iterations", d.iterations},
        {"strategy", to_string(d.strategy)},
        {"k", d.k},
        {"duplication", d.duplication},
        {"episode_stride", d.episode_stride},
        {"min_remaining", d.min_remaining},
        {"max_episodes", d.max_episodes}}},
      {"knn", {{"k", d.knn.k}, {"distance_epsilon", d.knn.distance_epsilon}, {"min_std", d.knn.min_std}}},
      {"sim",
       {{"step_period", d.sim.step_period},
        {"goal_radius", d.sim.goal_radius},
        {"accel_max", d.sim.accel_max},
        {"yaw_rate_max", d.sim.yaw_rate_max},
        {"use_qp", d.sim.use_qp}}},
      {"refine",
       {{"max_heading_dev_deg", r.max_heading_dev * 180.0 / std::numbers::pi},
        {"alpha_fidelity", r.alpha_fidelity},
        {"alpha_vel_var", r.alpha_vel_var},
        {"alpha_curv_var", r.alpha_curv_var},
        {"anchor_in_differences", r.anchor_in_differences},
        {"debug_post_check", r.debug_post_check}}},
      {"observation",
       {{"rasterize", o.rasterize},
        {"resolution", o.resolution},
        {"height", o.height},
        {"width", o.width},
        {"nearest_vehicles", o.nearest_vehicles},
        {"vehicle_range", o.vehicle_range},
        {"curb_range", o.curb_range}}},
      {"planner",
       {{"accel_set", p.accel_set},
        {"dt", p.dt},
        {"horizon", p.horizon},
        {"w1", p.w1},
        {"w2", p.w2},
        {"w3", p.w3},
        {"v_goal", p.v_goal},
        {"goal_from_log", d.label.goal_from_log},
        {"bin_s", p.bin_s},
        {"bin_v", p.bin_v},
        {"bin_t", p.bin_t},
        {"safety_margin", p.safety_margin},
        {"use_heuristic", p.use_heuristic},
        {"heuristic_eps", p.heuristic_eps},
        {"max_expansions", p.max_expansions}}},
      {"policy", {{"n", d.label.n}, {"period", d.label.period}, {"samples_per_state", d.label.samples_per_state}}},
      {"discriminator",
       {{"epochs", d.discriminator.epochs},
        {"learning_rate", d.discriminator.learning_rate},
        {"l2", d.discriminator.l2},
        {"tolerance", d.discriminator.tolerance}}},
      {"losses",
       {{"lambda_veh", cfg.losses.lambda_veh},
        {"lambda_curb", cfg.losses.lambda_curb},
        {"sigma_cells", cfg.losses.sigma_cells}}},
  };
}

}  // namespace ilsim
