#include "ilsim_cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ilsim/config.hpp"
#include "ilsim/dagger.hpp"
#include "ilsim/errors.hpp"
#include "ilsim/io.hpp"
#include "ilsim/planner.hpp"
#include "ilsim/refine.hpp"
#include "ilsim/simulator.hpp"
#include "ilsim/svg.hpp"

namespace fs = std::filesystem;

namespace ilsim::cli {

namespace {

struct CommonFlags {
  std::string config;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--workers", f.workers, "parallel episode workers")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_flag("--quiet", f.quiet, "only print errors");
}

RunConfig base_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(f.config);
  if (f.workers) cfg.dagger.workers = *f.workers;
  if (f.seed) cfg.dagger.seed = *f.seed;
  if (f.out) cfg.output_dir = *f.out;
  return cfg;
}

fs::path tracks_file(const fs::path& scene) { return scene / "tracks.csv"; }
fs::path map_file(const fs::path& scene) { return scene / "map.json"; }

std::unique_ptr<Scene> load_scene(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError(fmt::format("scene directory '{}' not found", dir.string()));
  return std::make_unique<Scene>(load_log(tracks_file(dir), map_file(dir)));
}

std::vector<Point2> waypoint_points(const Trajectory& t) {
  std::vector<Point2> pts;
  for (const auto& w : t.waypoints) pts.push_back(w.pos);
  return pts;
}

// gen ------------------------------------------------------------------------

struct GenArgs {
  std::string kind;
  int vehicles = 20;
  std::uint64_t seed = 7;
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto kind = parse_scenario_kind(a.kind);
  if (!kind) throw ValidationError(fmt::format("unknown scenario kind '{}'", a.kind));
  if (a.vehicles < 1) throw ValidationError("--vehicles must be >= 1");
  const TrafficLog log = make_synthetic_scenario(*kind, a.vehicles, a.seed);
  fs::create_directories(a.out);
  write_log(log, tracks_file(a.out), map_file(a.out));
  out << fmt::format("wrote {} and {}\n", tracks_file(a.out).string(), map_file(a.out).string());
  return kOk;
}

// plan -----------------------------------------------------------------------

struct PlanArgs {
  CommonFlags common;
  std::string scene;
  int track = 0;
  int frame = 0;
  std::string svg;
  std::string json_out;
  bool blend = false;
};

int cmd_plan(const PlanArgs& a, std::ostream& out) {
  const RunConfig cfg = base_config(a.common);
  const auto scene = load_scene(a.scene);
  const VehicleTrack& tr = scene->log().track(a.track);
  if (a.frame < 0 || static_cast<std::size_t>(a.frame) >= tr.states.size()) {
    throw ValidationError(fmt::format("frame {} outside track {} ({} frames)", a.frame, a.track, tr.states.size()));
  }
  const int path_index = scene->route_of(a.track);
  const ReferencePath& path = scene->path(path_index);
  const TrackState& st = tr.states[static_cast<std::size_t>(a.frame)];
  PlannerConfig pc = cfg.dagger.label.planner;
  pc.ego_length = tr.length;
  pc.ego_width = tr.width;
  if (cfg.dagger.label.goal_from_log) pc.v_goal = mean_speed(tr);
  const PathProjection proj = path.project(st.pos);
  PlanResult res = plan(proj.s, st.speed(), path, *scene, st.t(), pc, a.track);
  if (a.blend) {
    res.trajectory = blend_to_ego(res.trajectory, {st.pos, st.heading, st.speed(), st.t()}, path, cfg.dagger.sim.refine);
  }
  const std::string text = plan_to_json(res).dump(2) + "\n";
  if (!a.json_out.empty()) write_text(a.json_out, text);
  if (!a.svg.empty()) {
    SceneDrawing d;
    d.path_index = path_index;
    d.ego_paths.push_back(waypoint_points(res.trajectory));
    d.vehicle_window = std::make_pair(st.t(), st.t() + pc.horizon);
    d.exclude_track = a.track;
    write_text(a.svg, render_scene_svg(scene->log(), d));
  }
  out << text;
  return kOk;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  CommonFlags common;
  std::string scene;
  std::string dataset;
  std::string rollouts;
  std::string json_out;
  std::optional<int> max_episodes;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  RunConfig cfg = base_config(a.common);
  if (a.max_episodes) cfg.dagger.max_episodes = *a.max_episodes;
  cfg.finalize();
  const auto scene = load_scene(a.scene);
  const Dataset ds = read_dataset(a.dataset);
  if (ds.samples.empty()) throw ValidationError("dataset is empty");
  const auto specs = training_episodes(*scene, cfg.dagger);
  if (specs.empty()) throw ValidationError("no episodes to evaluate");
  const KnnPolicy policy = knn_bc_fit(ds, cfg.dagger.knn);
  const Evaluation ev = evaluate(*scene, specs, policy, cfg.dagger.sim, cfg.dagger.workers);
  const nlohmann::json table = metrics_to_json(ev.metrics);
  if (!a.rollouts.empty()) write_rollouts(a.rollouts, ev.episodes);
  if (!a.json_out.empty()) write_text(a.json_out, table.dump(2) + "\n");
  out << metrics_table(ev.metrics);
  out << table.dump() << "\n";
  return kOk;
}

// dagger ---------------------------------------------------------------------

struct DaggerArgs {
  CommonFlags common;
  std::string scene;
  std::optional<std::string> strategy;
  std::optional<int> k;
  std::optional<int> iterations;
  std::optional<int> duplication;
  std::optional<int> max_episodes;
  std::optional<int> resume_from;
};

fs::path checkpoint_dir(const RunConfig& cfg) { return cfg.output_dir / "checkpoints"; }
fs::path dataset_checkpoint(const RunConfig& cfg, int i) {
  return checkpoint_dir(cfg) / fmt::format("dataset_{:02d}.jsonl", i);
}
fs::path report_checkpoint(const RunConfig& cfg, int i) {
  return checkpoint_dir(cfg) / fmt::format("report_{:02d}.json", i);
}

int cmd_dagger(const DaggerArgs& a, std::ostream& out) {
  RunConfig cfg = base_config(a.common);
  if (a.strategy) {
    const auto s = parse_strategy(*a.strategy);
    if (!s) throw ValidationError(fmt::format("unknown strategy '{}'", *a.strategy));
    cfg.dagger.strategy = *s;
  }
  if (a.k) cfg.dagger.k = *a.k;
  if (a.iterations) cfg.dagger.iterations = *a.iterations;
  if (a.duplication) cfg.dagger.duplication = *a.duplication;
  if (a.max_episodes) cfg.dagger.max_episodes = *a.max_episodes;
  cfg.finalize();

  std::optional<ResumeState> resume;
  if (a.resume_from) {
    const int next = *a.resume_from;
    if (next < 1 || next >= cfg.dagger.iterations) {
      throw ValidationError(fmt::format("--resume-from must lie in [1, {})", cfg.dagger.iterations));
    }
    ResumeState rs;
    rs.next_iteration = next;
    rs.dataset = read_dataset(dataset_checkpoint(cfg, next));
    rs.report = report_from_json(nlohmann::json::parse(read_text(report_checkpoint(cfg, next - 1))));
    resume = std::move(rs);
  }
  const auto scene = load_scene(a.scene);

  fs::create_directories(checkpoint_dir(cfg));
  if (!resume) write_dataset(dataset_checkpoint(cfg, 0), extract_original_dataset(*scene, cfg.dagger.label.n,
                                                                                    cfg.dagger.label.period,
                                                                                    cfg.dagger.label.observation));
  write_text(cfg.output_dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  const DaggerReport report = run_dagger(
      *scene, cfg.dagger,
      [&](int it, const Dataset& next, const DaggerReport& so_far) {
        write_text(report_checkpoint(cfg, it), report_to_json(so_far).dump(2) + "\n");
        if (it + 1 < cfg.dagger.iterations) write_dataset(dataset_checkpoint(cfg, it + 1), next);
      },
      resume);

  write_text(cfg.output_dir / "report.json", report_to_json(report).dump(2) + "\n");
  CurveSeries series{report.strategy, {}};
  for (const auto& it : report.iterations) series.values.push_back(it.metrics.suc_rate());
  write_text(cfg.output_dir / "success_curve.svg", render_curve_svg("success rate per iteration", {series}));

  out << fmt::format("{:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}\n", "iter", "Suc.", "Fail-V", "Fail-C", "Timeout",
                     "labeled", "samples");
  for (const auto& it : report.iterations) {
    out << fmt::format("{:>4} {:>7.1f}% {:>7.1f}% {:>7.1f}% {:>7.1f}% {:>8} {:>9}\n", it.iteration,
                       100.0 * it.metrics.suc_rate(), 100.0 * it.metrics.fail_v_rate(),
                       100.0 * it.metrics.fail_c_rate(), 100.0 * it.metrics.timeout_rate(), it.labeled,
                       it.dataset_samples);
  }
  out << fmt::format("report: {}\n", (cfg.output_dir / "report.json").string());
  return kOk;
}

// render ---------------------------------------------------------------------

struct RenderArgs {
  std::string scene;
  std::string rollouts;
  std::string plan;
  int episode = 0;
  std::string out;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  if (a.rollouts.empty() == a.plan.empty()) throw ValidationError("give exactly one of --rollouts or --plan");
  const auto scene = load_scene(a.scene);
  SceneDrawing d;
  if (!a.rollouts.empty()) {
    const auto results = read_rollouts(a.rollouts);
    if (a.episode < 0 || static_cast<std::size_t>(a.episode) >= results.size()) {
      throw ValidationError(fmt::format("episode {} not in '{}' ({} episodes)", a.episode, a.rollouts, results.size()));
    }
    const RolloutResult& r = results[static_cast<std::size_t>(a.episode)];
    std::vector<Point2> pts;
    for (const auto& f : r.frames) pts.push_back(f.ego.pos);
    d.ego_paths.push_back(std::move(pts));
    d.path_index = r.spec.path_index;
    d.exclude_track = r.spec.ego_track_id;
    d.vehicle_window = std::make_pair(r.frames.front().ego.t, r.frames.back().ego.t);
  } else {
    const PlanResult p = plan_from_json(nlohmann::json::parse(read_text(a.plan)));
    if (p.trajectory.empty()) throw ValidationError("plan has no trajectory");
    d.ego_paths.push_back(waypoint_points(p.trajectory));
    // The route is the path closest to the plan's first waypoint.
    const Point2 start = p.trajectory.front().pos;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scene->log().reference_paths.size(); ++i) {
      const double dist = std::abs(scene->path(static_cast<int>(i)).project(start).lateral_offset);
      if (dist < best) {
        best = dist;
        d.path_index = static_cast<int>(i);
      }
    }
    d.vehicle_window = std::make_pair(p.trajectory.front().t, p.trajectory.back().t);
  }
  write_text(a.out, render_scene_svg(scene->log(), d));
  out << fmt::format("wrote {}\n", a.out);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Log-replay driving simulator with a search-based pseudo-expert and DAgger training", "ilsim"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "generate a synthetic scene");
  c_gen->add_option("--kind", gen.kind, "roundabout | intersection | merging")->required();
  c_gen->add_option("--vehicles", gen.vehicles, "number of vehicles");
  c_gen->add_option("--seed", gen.seed, "generator seed");
  c_gen->add_option("--out", gen.out, "output directory")->required();

  PlanArgs pl;
  auto* c_plan = app.add_subcommand("plan", "run the pseudo-expert once and print the plan as JSON");
  add_common(c_plan, pl.common);
  c_plan->add_option("--scene", pl.scene, "scene directory")->required();
  c_plan->add_option("--track", pl.track, "ego track id")->required();
  c_plan->add_option("--frame", pl.frame, "frame index within the track")->required();
  c_plan->add_option("--svg", pl.svg, "also write an SVG drawing");
  c_plan->add_option("--json", pl.json_out, "also write the plan JSON to a file");
  c_plan->add_flag("--blend", pl.blend, "blend the trajectory back to the logged pose");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a dataset checkpoint's policy");
  add_common(c_eval, ev.common);
  c_eval->add_option("--scene", ev.scene, "scene directory")->required();
  c_eval->add_option("--dataset", ev.dataset, "dataset checkpoint (JSONL)")->required();
  c_eval->add_option("--rollouts", ev.rollouts, "write rollouts as JSONL");
  c_eval->add_option("--json", ev.json_out, "write the metrics table as JSON");
  c_eval->add_option("--max-episodes", ev.max_episodes, "evaluate a seeded subset of episodes");

  DaggerArgs dg;
  auto* c_dagger = app.add_subcommand("dagger", "run the DAgger loop");
  add_common(c_dagger, dg.common);
  c_dagger->add_option("--scene", dg.scene, "scene directory")->required();
  c_dagger->add_option("--out", dg.common.out, "output directory");
  c_dagger->add_option("--strategy", dg.strategy, "k-failure | adversary");
  c_dagger->add_option("--k", dg.k, "frames before a failure (k-failure)");
  c_dagger->add_option("--iterations", dg.iterations, "policies to train");
  c_dagger->add_option("--duplication", dg.duplication, "multiplicity of new samples");
  c_dagger->add_option("--max-episodes", dg.max_episodes, "roll out a seeded subset of episodes");
  c_dagger->add_option("--resume-from", dg.resume_from, "continue at this iteration from the checkpoints");

  RenderArgs rd;
  auto* c_render = app.add_subcommand("render", "draw a rollout or a plan as SVG");
  c_render->add_option("--scene", rd.scene, "scene directory")->required();
  c_render->add_option("--rollouts", rd.rollouts, "rollout JSONL");
  c_render->add_option("--episode", rd.episode, "line index in the rollout file");
  c_render->add_option("--plan", rd.plan, "plan JSON");
  c_render->add_option("--out", rd.out, "output SVG")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  const auto level = spdlog::get_level();
  try {
    for (const CommonFlags* f : {&pl.common, &ev.common, &dg.common}) {
      if (f->quiet) spdlog::set_level(spdlog::level::warn);
    }
    int code = kOk;
    if (c_gen->parsed()) code = cmd_gen(gen, out);
    if (c_plan->parsed()) code = cmd_plan(pl, out);
    if (c_eval->parsed()) code = cmd_eval(ev, out);
    if (c_dagger->parsed()) code = cmd_dagger(dg, out);
    if (c_render->parsed()) code = cmd_render(rd, out);
    spdlog::set_level(level);
    return code;
  } catch (const InfeasiblePlanError& e) {
    spdlog::set_level(level);
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ValidationError& e) {
    spdlog::set_level(level);
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::set_level(level);
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace ilsim::cli
