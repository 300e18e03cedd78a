#include "ilsim/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ilsim/errors.hpp"

namespace ilsim {

namespace {

json point_json(const Point2& p) { return json::array({p.x, p.y}); }

Point2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json spec_json(const EpisodeSpec& s) {
  return {{"ego_track_id", s.ego_track_id},
          {"start_frame", s.start_frame},
          {"horizon_frames", s.horizon_frames},
          {"path_index", s.path_index}};
}

EpisodeSpec spec_from(const json& j) {
  EpisodeSpec s;
  s.ego_track_id = j.at("ego_track_id").get<int>();
  s.start_frame = j.at("start_frame").get<int>();
  s.horizon_frames = j.at("horizon_frames").get<int>();
  s.path_index = j.value("path_index", 0);
  return s;
}

template <class Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}: {}", what, e.what()));
  }
}

}  // namespace

json trajectory_to_json(const Trajectory& traj) {
  json arr = json::array();
  for (const auto& w : traj.waypoints) {
    json jw = {{"t", w.t}, {"x", w.pos.x}, {"y", w.pos.y}};
    jw["heading"] = w.heading ? json(*w.heading) : json(nullptr);
    arr.push_back(std::move(jw));
  }
  return arr;
}

Trajectory trajectory_from_json(const json& j) {
  return guarded("trajectory", [&] {
    Trajectory t;
    for (const auto& jw : j) {
      Waypoint w;
      w.t = jw.at("t").get<double>();
      w.pos = {jw.at("x").get<double>(), jw.at("y").get<double>()};
      if (jw.contains("heading") && !jw.at("heading").is_null()) w.heading = jw.at("heading").get<double>();
      t.waypoints.push_back(w);
    }
    return t;
  });
}

json plan_to_json(const PlanResult& plan) {
  json nodes = json::array();
  for (const auto& n : plan.nodes) {
    json jn = {{"s", n.s}, {"v", n.v}, {"t", n.t}, {"step", n.step}, {"accel_in", n.accel_in}, {"g_cost", n.g_cost}};
    jn["parent"] = n.parent ? json(*n.parent) : json(nullptr);
    nodes.push_back(std::move(jn));
  }
  return {{"nodes", nodes},
          {"trajectory", trajectory_to_json(plan.trajectory)},
          {"total_cost", plan.total_cost},
          {"expansions", plan.expansions}};
}

PlanResult plan_from_json(const json& j) {
  return guarded("plan", [&] {
    PlanResult p;
    for (const auto& jn : j.at("nodes")) {
      PlanNode n;
      n.s = jn.at("s").get<double>();
      n.v = jn.at("v").get<double>();
      n.t = jn.at("t").get<double>();
      n.step = jn.at("step").get<int>();
      n.accel_in = jn.at("accel_in").get<double>();
      n.g_cost = jn.at("g_cost").get<double>();
      if (!jn.at("parent").is_null()) n.parent = jn.at("parent").get<int>();
      p.nodes.push_back(n);
    }
    p.trajectory = trajectory_from_json(j.at("trajectory"));
    p.total_cost = j.at("total_cost").get<double>();
    p.expansions = j.value("expansions", 0L);
    return p;
  });
}

json rollout_to_json(const RolloutResult& r) {
  json frames = json::array();
  for (const auto& f : r.frames) {
    json offs = json::array();
    for (const auto& o : f.prediction.offsets) offs.push_back(point_json(o));
    frames.push_back({{"t", f.ego.t},
                      {"x", f.ego.pos.x},
                      {"y", f.ego.pos.y},
                      {"heading", f.ego.heading},
                      {"speed", f.ego.speed},
                      {"features", f.features},
                      {"offsets", offs},
                      {"period", f.prediction.period}});
  }
  json j = {{"spec", spec_json(r.spec)}, {"outcome", to_string(r.outcome)}, {"frames", frames}};
  j["failure_frame"] = r.failure_frame ? json(*r.failure_frame) : json(nullptr);
  j["hit"] = r.hit ? json(*r.hit) : json(nullptr);
  return j;
}

RolloutResult rollout_from_json(const json& j) {
  return guarded("rollout", [&] {
    RolloutResult r;
    r.spec = spec_from(j.at("spec"));
    const auto outcome = parse_outcome(j.at("outcome").get<std::string>());
    if (!outcome) throw ParseError("unknown outcome " + j.at("outcome").get<std::string>());
    r.outcome = *outcome;
    for (const auto& jf : j.at("frames")) {
      RolloutFrame f;
      f.ego = {{jf.at("x").get<double>(), jf.at("y").get<double>()},
               jf.at("heading").get<double>(),
               jf.at("speed").get<double>(),
               jf.at("t").get<double>()};
      f.features = jf.value("features", std::vector<double>{});
      if (jf.contains("offsets")) {
        for (const auto& o : jf.at("offsets")) f.prediction.offsets.push_back(point_from(o));
      }
      f.prediction.period = jf.value("period", 0.3);
      r.frames.push_back(std::move(f));
    }
    if (!j.at("failure_frame").is_null()) r.failure_frame = j.at("failure_frame").get<int>();
    if (j.contains("hit") && !j.at("hit").is_null()) r.hit = j.at("hit").get<int>();
    if (r.frames.empty()) throw ParseError("rollout has no frames");
    if (r.failure_frame.has_value() != r.failed()) throw ParseError("failure_frame inconsistent with outcome");
    return r;
  });
}

void write_rollouts(const std::filesystem::path& file, const std::vector<EpisodeRecord>& episodes) {
  std::string out;
  for (const auto& rec : episodes) {
    if (rec.result) {
      out += rollout_to_json(*rec.result).dump();
    } else {
      out += json({{"error", rec.error}}).dump();
    }
    out += '\n';
  }
  write_text(file, out);
}

std::vector<RolloutResult> read_rollouts(const std::filesystem::path& file) {
  std::istringstream in(read_text(file));
  std::vector<RolloutResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
    }
    if (j.contains("error")) continue;
    out.push_back(rollout_from_json(j));
  }
  return out;
}

json sample_to_json(const LabeledSample& s, double period) {
  json targets = json::array();
  for (const auto& t : s.targets) targets.push_back(point_json(t));
  return {{"features", s.features},
          {"targets", targets},
          {"source", s.source == SampleSource::Original ? "original" : "pseudo_expert"},
          {"iteration", s.iteration},
          {"multiplicity", s.multiplicity},
          {"period", period}};
}

std::string dataset_to_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& s : ds.samples) {
    out += sample_to_json(s, ds.period).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& file, const Dataset& ds) { write_text(file, dataset_to_jsonl(ds)); }

Dataset dataset_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool shaped = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      LabeledSample s;
      s.features = j.at("features").get<std::vector<double>>();
      for (const auto& t : j.at("targets")) s.targets.push_back(point_from(t));
      const auto source = j.at("source").get<std::string>();
      if (source == "original") {
        s.source = SampleSource::Original;
      } else if (source == "pseudo_expert") {
        s.source = SampleSource::PseudoExpert;
      } else {
        throw ParseError("unknown source " + source);
      }
      s.iteration = j.value("iteration", -1);
      s.multiplicity = j.value("multiplicity", 1);
      const double period = j.value("period", ds.period);
      if (!shaped) {
        ds.n = static_cast<int>(s.targets.size());
        ds.period = period;
        shaped = true;
      } else if (period != ds.period) {
        throw ParseError("samples disagree on the waypoint period");
      }
      ds.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("dataset line {}: {}", line_no, e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("dataset line {}: {}", line_no, e.what()));
    }
  }
  ds.validate();
  return ds;
}

Dataset read_dataset(const std::filesystem::path& file) { return dataset_from_jsonl(read_text(file)); }

json metrics_to_json(const Metrics& m) {
  return {{"episodes", m.episodes},
          {"success", m.success},
          {"fail_vehicle", m.fail_vehicle},
          {"fail_curb", m.fail_curb},
          {"timeout", m.timeout},
          {"errored", m.errored},
          {"suc_rate", m.suc_rate()},
          {"fail_v_rate", m.fail_v_rate()},
          {"fail_c_rate", m.fail_c_rate()},
          {"timeout_rate", m.timeout_rate()}};
}

Metrics metrics_from_json(const json& j) {
  return guarded("metrics", [&] {
    Metrics m;
    m.episodes = j.at("episodes").get<long>();
    m.success = j.at("success").get<long>();
    m.fail_vehicle = j.at("fail_vehicle").get<long>();
    m.fail_curb = j.at("fail_curb").get<long>();
    m.timeout = j.at("timeout").get<long>();
    m.errored = j.value("errored", 0L);
    return m;
  });
}

std::string metrics_table(const Metrics& m) {
  std::string out = fmt::format("{:>9} {:>9} {:>9} {:>9} {:>9}\n", "episodes", "Suc.", "Fail-V", "Fail-C", "Timeout");
  out += fmt::format("{:>9} {:>8.1f}% {:>8.1f}% {:>8.1f}% {:>8.1f}%\n", m.episodes, 100.0 * m.suc_rate(),
                     100.0 * m.fail_v_rate(), 100.0 * m.fail_c_rate(), 100.0 * m.timeout_rate());
  if (m.errored > 0) out += fmt::format("({} episodes aborted with errors)\n", m.errored);
  return out;
}

json report_to_json(const DaggerReport& r) {
  json its = json::array();
  for (const auto& it : r.iterations) {
    its.push_back({{"iteration", it.iteration},
                   {"dataset_samples", it.dataset_samples},
                   {"dataset_weight", it.dataset_weight},
                   {"metrics", metrics_to_json(it.metrics)},
                   {"selected", it.selected},
                   {"labeled", it.labeled},
                   {"skipped_infeasible", it.skipped_infeasible},
                   {"skipped_collision", it.skipped_collision},
                   {"blend_fallbacks", it.blend_fallbacks}});
  }
  return {{"strategy", r.strategy},
          {"k", r.k},
          {"duplication", r.duplication},
          {"episodes", r.episodes},
          {"iterations", its}};
}

DaggerReport report_from_json(const json& j) {
  return guarded("report", [&] {
    DaggerReport r;
    r.strategy = j.at("strategy").get<std::string>();
    r.k = j.at("k").get<int>();
    r.duplication = j.at("duplication").get<int>();
    r.episodes = j.at("episodes").get<long>();
    for (const auto& ji : j.at("iterations")) {
      IterationReport it;
      it.iteration = ji.at("iteration").get<int>();
      it.dataset_samples = ji.at("dataset_samples").get<long>();
      it.dataset_weight = ji.at("dataset_weight").get<long>();
      it.metrics = metrics_from_json(ji.at("metrics"));
      it.selected = ji.at("selected").get<long>();
      it.labeled = ji.at("labeled").get<long>();
      it.skipped_infeasible = ji.at("skipped_infeasible").get<long>();
      it.skipped_collision = ji.at("skipped_collision").get<long>();
      it.blend_fallbacks = ji.at("blend_fallbacks").get<long>();
      r.iterations.push_back(it);
    }
    return r;
  });
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const std::filesystem::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", file.string()));
    out << text;
    if (!out) throw Error(fmt::format("write to '{}' failed", file.string()));
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace ilsim
