#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <sstream>

#include "ilsim/dataset.hpp"
#include "ilsim/io.hpp"
#include "ilsim_cli/cli.hpp"
#include "support.hpp"

using namespace ilsim;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation ilsim_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_scene(const TrafficLog& log, const fs::path& dir) {
  fs::create_directories(dir);
  write_log(log, dir / "tracks.csv", dir / "map.json");
}

int count_ego_polylines(const boost::property_tree::ptree& node) {
  int n = 0;
  for (const auto& [name, child] : node) {
    if (name == "polyline" && child.get<std::string>("<xmlattr>.class", "") == "ego") ++n;
    n += count_ego_polylines(child);
  }
  return n;
}

/// Shared generated scene for the slower commands.
const fs::path& roundabout_scene() {
  static fixtures::TempDir dir("cli_scene");
  static const bool made = [] {
    const Invocation r = ilsim_run({"gen", "--kind", "roundabout", "--vehicles", "8", "--seed", "3", "--out",
                             (dir.path() / "scene").string()});
    return r.code == 0;
  }();
  static const fs::path path = dir.path() / "scene";
  EXPECT_TRUE(made);
  return path;
}

}  // namespace

TEST(CliGen, DeterministicPerSeed) {
  fixtures::TempDir dir("gen");
  for (const char* name : {"a", "b"}) {
    const Invocation r = ilsim_run({"gen", "--kind", "merging", "--vehicles", "6", "--seed", "9", "--out",
                             (dir.path() / name).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  ASSERT_EQ(ilsim_run({"gen", "--kind", "merging", "--vehicles", "6", "--seed", "10", "--out",
                       (dir.path() / "c").string()})
                .code,
            0);
  for (const char* file : {"tracks.csv", "map.json"}) {
    EXPECT_EQ(read_text(dir.path() / "a" / file), read_text(dir.path() / "b" / file));
  }
  EXPECT_NE(read_text(dir.path() / "a" / "tracks.csv"), read_text(dir.path() / "c" / "tracks.csv"));
  const TrafficLog log = load_log(dir.path() / "a" / "tracks.csv", dir.path() / "a" / "map.json");
  EXPECT_EQ(log.tracks.size(), 6u);
}

TEST(CliGen, UsageErrors) {
  fixtures::TempDir dir("gen_bad");
  const Invocation bad = ilsim_run({"gen", "--kind", "highway", "--out", dir.path().string()});
  EXPECT_EQ(bad.code, cli::kUsage);
  EXPECT_NE(bad.err.find("highway"), std::string::npos);
  EXPECT_EQ(ilsim_run({"gen", "--kind", "roundabout", "--vehicles", "0", "--out", dir.path().string()}).code,
            cli::kUsage);
  EXPECT_EQ(ilsim_run({"gen", "--kind", "roundabout"}).code, cli::kUsage);
  EXPECT_EQ(ilsim_run({}).code, cli::kUsage);
  EXPECT_EQ(ilsim_run({"fly"}).code, cli::kUsage);
  EXPECT_EQ(ilsim_run({"--help"}).code, cli::kOk);
}

TEST(CliPlan, EmptyRoadCostsNothing) {
  fixtures::TempDir dir("plan");
  write_scene(fixtures::straight_road_log(150.0, 8.0, 150), dir.path() / "scene");
  const fs::path svg = dir.path() / "plan.svg";
  const fs::path js = dir.path() / "plan.json";
  const Invocation r = ilsim_run({"plan", "--scene", (dir.path() / "scene").string(), "--track", "1", "--frame", "0",
                           "--svg", svg.string(), "--json", js.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["total_cost"].get<double>(), 0.0);
  EXPECT_EQ(j, json::parse(read_text(js)));
  const PlanResult p = plan_from_json(j);
  for (double a : p.accelerations()) EXPECT_EQ(a, 0.0);

  boost::property_tree::ptree tree;
  std::istringstream in(read_text(svg));
  boost::property_tree::read_xml(in, tree);
  EXPECT_EQ(count_ego_polylines(tree), 1);
  EXPECT_EQ(tree.get_child("svg").get<std::string>("<xmlattr>.xmlns"), "http://www.w3.org/2000/svg");

  const fs::path out = dir.path() / "render.svg";
  const Invocation rr = ilsim_run({"render", "--scene", (dir.path() / "scene").string(), "--plan", js.string(), "--out",
                            out.string()});
  ASSERT_EQ(rr.code, 0) << rr.err;
  boost::property_tree::ptree again;
  std::istringstream in2(read_text(out));
  boost::property_tree::read_xml(in2, again);
  EXPECT_EQ(count_ego_polylines(again), 1);
}

TEST(CliPlan, BlockedSceneIsInfeasible) {
  fixtures::TempDir dir("plan_blocked");
  TrafficLog log = fixtures::straight_road_log(150.0, 8.0, 150);
  log.tracks[2] = fixtures::constant_track(2, {2.0, 0.0}, {0.0, 0.0}, 150);
  write_scene(log, dir.path() / "scene");
  const Invocation r = ilsim_run({"plan", "--scene", (dir.path() / "scene").string(), "--track", "1", "--frame", "0"});
  EXPECT_EQ(r.code, cli::kInfeasible);
  EXPECT_NE(r.err.find("infeasible"), std::string::npos);
  EXPECT_EQ(ilsim_run({"plan", "--scene", (dir.path() / "scene").string(), "--track", "1", "--frame", "999"}).code,
            cli::kUsage);
  EXPECT_EQ(ilsim_run({"plan", "--scene", (dir.path() / "nowhere").string(), "--track", "1", "--frame", "0"}).code,
            cli::kUsage);
}

TEST(CliEval, RatesPartitionTheEpisodes) {
  fixtures::TempDir dir("eval");
  const Scene scene(load_log(roundabout_scene() / "tracks.csv", roundabout_scene() / "map.json"));
  write_dataset(dir.path() / "d0.jsonl", extract_original_dataset(scene, 10, 0.3));
  const fs::path metrics = dir.path() / "m.json";
  const fs::path rollouts = dir.path() / "r.jsonl";
  const Invocation r = ilsim_run({"eval", "--scene", roundabout_scene().string(), "--dataset",
                           (dir.path() / "d0.jsonl").string(), "--max-episodes", "6", "--json", metrics.string(),
                           "--rollouts", rollouts.string(), "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Metrics m = metrics_from_json(json::parse(read_text(metrics)));
  EXPECT_EQ(m.episodes + m.errored, 6);
  EXPECT_TRUE(m.partition_holds());
  EXPECT_NEAR(m.suc_rate() + m.fail_v_rate() + m.fail_c_rate() + m.timeout_rate(), 1.0, 1e-12);
  EXPECT_NE(r.out.find("Suc."), std::string::npos);
  EXPECT_EQ(read_rollouts(rollouts).size(), static_cast<std::size_t>(m.episodes));

  const fs::path svg = dir.path() / "episode.svg";
  ASSERT_EQ(ilsim_run({"render", "--scene", roundabout_scene().string(), "--rollouts", rollouts.string(), "--episode",
                       "0", "--out", svg.string()})
                .code,
            0);
  boost::property_tree::ptree tree;
  std::istringstream in(read_text(svg));
  boost::property_tree::read_xml(in, tree);
  EXPECT_EQ(count_ego_polylines(tree), 1);
  EXPECT_EQ(ilsim_run({"render", "--scene", roundabout_scene().string(), "--rollouts", rollouts.string(), "--episode",
                       "99", "--out", svg.string()})
                .code,
            cli::kUsage);
  EXPECT_EQ(ilsim_run({"render", "--scene", roundabout_scene().string(), "--out", svg.string()}).code, cli::kUsage);

  write_text(dir.path() / "empty.jsonl", "");
  EXPECT_EQ(ilsim_run({"eval", "--scene", roundabout_scene().string(), "--dataset",
                       (dir.path() / "empty.jsonl").string()})
                .code,
            cli::kUsage);
}

TEST(CliDagger, CheckpointsAndResume) {
  fixtures::TempDir dir("dagger");
  const fs::path a = dir.path() / "a";
  const std::vector<std::string> common{"dagger", "--scene", roundabout_scene().string(), "--iterations", "3",
                                        "--max-episodes", "8", "--seed", "4", "--quiet"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = common;
    args.insert(args.end(), extra.begin(), extra.end());
    return ilsim_run(args);
  };
  const Invocation r = with({"--out", a.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"report.json", "config.json", "success_curve.svg", "checkpoints/dataset_00.jsonl",
                        "checkpoints/dataset_01.jsonl", "checkpoints/dataset_02.jsonl", "checkpoints/report_00.json",
                        "checkpoints/report_01.json", "checkpoints/report_02.json"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  const DaggerReport rep = report_from_json(json::parse(read_text(a / "report.json")));
  EXPECT_EQ(rep.iterations.size(), 3u);
  EXPECT_EQ(rep.strategy, "k-failure");
  EXPECT_EQ(rep.episodes, 8);
  EXPECT_EQ(read_dataset(a / "checkpoints/dataset_01.jsonl").samples.size(),
            static_cast<std::size_t>(rep.iterations[1].dataset_samples));

  // Resume from iteration 1 with only the first two checkpoints present.
  const fs::path b = dir.path() / "b";
  fs::create_directories(b / "checkpoints");
  for (const char* f : {"checkpoints/dataset_00.jsonl", "checkpoints/dataset_01.jsonl", "checkpoints/report_00.json"}) {
    fs::copy_file(a / f, b / f);
  }
  const Invocation resumed = with({"--out", b.string(), "--resume-from", "1"});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_EQ(read_text(b / "report.json"), read_text(a / "report.json"));
  EXPECT_EQ(read_text(b / "checkpoints/dataset_02.jsonl"), read_text(a / "checkpoints/dataset_02.jsonl"));

  EXPECT_EQ(with({"--out", b.string(), "--resume-from", "3"}).code, cli::kUsage);
  EXPECT_EQ(with({"--out", b.string(), "--strategy", "greedy"}).code, cli::kUsage);
  EXPECT_EQ(with({"--out", b.string(), "--k", "0"}).code, cli::kUsage);
  EXPECT_EQ(with({"--out", b.string(), "--workers", "0"}).code, cli::kUsage);
  EXPECT_EQ(with({"--out", (dir.path() / "c").string(), "--resume-from", "1"}).code, cli::kRuntime);
}

TEST(CliDagger, StrategyFlagsAndConfigFile) {
  fixtures::TempDir dir("dagger_cfg");
  write_text(dir.path() / "cfg.json", R"({"dagger": {"strategy": "adversary", "duplication": 2, "iterations": 2}})");
  const fs::path out = dir.path() / "out";
  const Invocation r = ilsim_run({"dagger", "--scene", roundabout_scene().string(), "--config",
                           (dir.path() / "cfg.json").string(), "--max-episodes", "5", "--out", out.string(),
                           "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  const DaggerReport rep = report_from_json(json::parse(read_text(out / "report.json")));
  EXPECT_EQ(rep.strategy, "adversary");
  EXPECT_EQ(rep.duplication, 2);
  EXPECT_EQ(rep.iterations.size(), 2u);
  EXPECT_EQ(rep.iterations[0].selected, rep.iterations[0].metrics.episodes);
  const json cfg = json::parse(read_text(out / "config.json"));
  EXPECT_EQ(cfg["dagger"]["strategy"], "adversary");
  EXPECT_EQ(cfg["dagger"]["max_episodes"], 5);
  EXPECT_EQ(cfg["output_dir"], out.string());

  // Flags override the file.
  const fs::path out2 = dir.path() / "out2";
  ASSERT_EQ(ilsim_run({"dagger", "--scene", roundabout_scene().string(), "--config",
                       (dir.path() / "cfg.json").string(), "--strategy", "k-failure", "--k", "5", "--iterations", "1",
                       "--max-episodes", "5", "--out", out2.string(), "--quiet"})
                .code,
            0);
  const DaggerReport rep2 = report_from_json(json::parse(read_text(out2 / "report.json")));
  EXPECT_EQ(rep2.strategy, "k-failure");
  EXPECT_EQ(rep2.k, 5);
  EXPECT_EQ(rep2.iterations.size(), 1u);

  write_text(dir.path() / "bad.json", R"({"dagger": {"strategy": "adversary", "speed": 3}})");
  EXPECT_EQ(ilsim_run({"dagger", "--scene", roundabout_scene().string(), "--config",
                       (dir.path() / "bad.json").string(), "--out", out2.string()})
                .code,
            cli::kUsage);
  EXPECT_EQ(ilsim_run({"dagger", "--scene", roundabout_scene().string(), "--config",
                       (dir.path() / "missing.json").string(), "--out", out2.string()})
                .code,
            cli::kUsage);
}

TEST(CliDagger, SameArgumentsSameBytes) {
  fixtures::TempDir dir("dagger_bytes");
  std::vector<std::string> texts;
  for (const char* workers : {"1", "3"}) {
    const fs::path out = dir.path() / workers;
    ASSERT_EQ(ilsim_run({"dagger", "--scene", roundabout_scene().string(), "--iterations", "2", "--max-episodes", "6",
                         "--strategy", "adversary", "--workers", workers, "--out", out.string(), "--quiet"})
                  .code,
              0);
    texts.push_back(read_text(out / "report.json") + read_text(out / "checkpoints/dataset_01.jsonl"));
  }
  EXPECT_EQ(texts[0], texts[1]);
}
