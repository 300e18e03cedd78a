#include <gtest/gtest.h>

#include <random>

#include "ilsim/config.hpp"
#include "ilsim/errors.hpp"
#include "ilsim/io.hpp"
#include "support.hpp"

using namespace ilsim;

namespace {

RolloutResult sample_rollout(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  RolloutResult r;
  r.spec = {7, 40, 120, 2};
  r.outcome = Outcome::FailCurb;
  r.failure_frame = 3;
  r.hit = 1;
  for (int f = 0; f < 4; ++f) {
    RolloutFrame fr;
    fr.ego = {{u(rng), u(rng)}, u(rng) / 20.0, std::abs(u(rng)) / 5.0, 0.1 * f + 1.0 / 3.0};
    fr.features = {u(rng), u(rng), 1e-300, -0.0};
    fr.prediction.offsets = {{u(rng), u(rng)}, {u(rng), u(rng)}};
    fr.prediction.period = 0.3;
    r.frames.push_back(fr);
  }
  return r;
}

Dataset sample_dataset() {
  Dataset ds;
  ds.n = 2;
  ds.period = 0.25;
  for (int i = 0; i < 5; ++i) {
    LabeledSample s;
    s.features = {0.1 * i, 1.0 / 3.0, -2.5};
    s.targets = {{0.5 * i, 1.0}, {std::sqrt(2.0), 2.0 / 7.0}};
    if (i % 2 == 1) {
      s.source = SampleSource::PseudoExpert;
      s.iteration = i / 2;
      s.multiplicity = 10;
    }
    ds.samples.push_back(s);
  }
  return ds;
}

}  // namespace

TEST(Json, TrajectoryRoundTrip) {
  Trajectory t;
  t.waypoints = {{0.0, {1.0 / 3.0, -2.0}, 0.5}, {0.1, {2.0, 1e-17}, std::nullopt}};
  const json j = trajectory_to_json(t);
  EXPECT_TRUE(j[1]["heading"].is_null());
  EXPECT_EQ(trajectory_from_json(json::parse(j.dump())), t);
  EXPECT_THROW(trajectory_from_json(json::parse(R"([{"t": 0, "x": 1}])")), ParseError);
}

TEST(Json, PlanRoundTrip) {
  const Scene scene(fixtures::straight_road_log(150.0, 8.0, 150));
  PlannerConfig cfg;
  cfg.v_goal = 6.0;
  const PlanResult p = plan(3.0, 8.0, scene.path(0), scene, 0.0, cfg, 1);
  const PlanResult back = plan_from_json(json::parse(plan_to_json(p).dump()));
  EXPECT_EQ(back, p);
  EXPECT_EQ(back.expansions, p.expansions);
  EXPECT_THROW(plan_from_json(json::parse(R"({"nodes": []})")), ParseError);
}

TEST(Json, RolloutRoundTrip) {
  const RolloutResult r = sample_rollout(4);
  EXPECT_EQ(rollout_from_json(json::parse(rollout_to_json(r).dump())), r);
  RolloutResult ok = sample_rollout(5);
  ok.outcome = Outcome::Success;
  ok.failure_frame.reset();
  ok.hit.reset();
  EXPECT_EQ(rollout_from_json(json::parse(rollout_to_json(ok).dump())), ok);
  json bad = rollout_to_json(r);
  bad["outcome"] = "crashed";
  EXPECT_THROW(rollout_from_json(bad), ParseError);
}

TEST(Json, RolloutFileSkipsErroredEpisodes) {
  fixtures::TempDir dir("rollouts");
  std::vector<EpisodeRecord> recs(3);
  recs[0].result = sample_rollout(1);
  recs[1].error = "policy failed";
  recs[2].result = sample_rollout(2);
  const auto file = dir.path() / "r.jsonl";
  write_rollouts(file, recs);
  const std::string text = read_text(file);
  EXPECT_NE(text.find(R"({"error":"policy failed"})"), std::string::npos);
  const auto back = read_rollouts(file);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], *recs[0].result);
  EXPECT_EQ(back[1], *recs[2].result);
  write_text(file, text + "{not json\n");
  EXPECT_THROW(read_rollouts(file), ParseError);
}

TEST(Json, DatasetRoundTrip) {
  const Dataset ds = sample_dataset();
  const std::string text = dataset_to_jsonl(ds);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_EQ(dataset_from_jsonl(text), ds);
  fixtures::TempDir dir("dataset");
  write_dataset(dir.path() / "d.jsonl", ds);
  EXPECT_EQ(read_dataset(dir.path() / "d.jsonl"), ds);
  EXPECT_EQ(dataset_from_jsonl(text + "\n\n"), ds);
}

TEST(Json, DatasetErrorsNameTheLine) {
  const std::string good = dataset_to_jsonl(sample_dataset());
  try {
    dataset_from_jsonl(good + R"({"features": [1], "targets": [[0, 1]]})" + "\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos) << e.what();
  }
  Dataset other = sample_dataset();
  other.period = 0.5;
  EXPECT_THROW(dataset_from_jsonl(good + dataset_to_jsonl(other)), ParseError);
  std::string bad_source = good;
  bad_source.replace(bad_source.find("\"original\""), 10, "\"observed\"");
  EXPECT_THROW(dataset_from_jsonl(bad_source), ParseError);
  Dataset ragged = sample_dataset();
  ragged.samples[3].targets.pop_back();
  EXPECT_THROW(dataset_from_jsonl(dataset_to_jsonl(ragged)), ShapeError);
}

TEST(Json, MetricsAndReportRoundTrip) {
  Metrics m;
  m.episodes = 40;
  m.success = 25;
  m.fail_vehicle = 7;
  m.fail_curb = 5;
  m.timeout = 3;
  m.errored = 2;
  const json jm = metrics_to_json(m);
  EXPECT_DOUBLE_EQ(jm["suc_rate"].get<double>(), 0.625);
  EXPECT_EQ(metrics_from_json(jm), m);
  const std::string table = metrics_table(m);
  EXPECT_NE(table.find("62.5%"), std::string::npos);
  EXPECT_NE(table.find("2 episodes aborted"), std::string::npos);

  DaggerReport r;
  r.strategy = "adversary";
  r.k = 20;
  r.duplication = 10;
  r.episodes = 40;
  for (int i = 0; i < 3; ++i) {
    IterationReport it;
    it.iteration = i;
    it.dataset_samples = 100 + i;
    it.dataset_weight = 100 + 10 * i;
    it.metrics = m;
    it.selected = i;
    it.labeled = 2 * i;
    it.skipped_infeasible = 1;
    it.skipped_collision = i;
    it.blend_fallbacks = 3;
    r.iterations.push_back(it);
  }
  EXPECT_EQ(report_from_json(json::parse(report_to_json(r).dump())), r);
  EXPECT_THROW(report_from_json(json::parse(R"({"strategy": "adversary"})")), ParseError);
}

TEST(Files, WriteTextReplacesAtomically) {
  fixtures::TempDir dir("text");
  const auto file = dir.path() / "out.txt";
  write_text(file, "first");
  write_text(file, "second");
  EXPECT_EQ(read_text(file), "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(read_text(dir.path() / "missing.txt"), ParseError);
}

TEST(Config, DefaultsRoundTrip) {
  const RunConfig def = config_from_json(json::object());
  const json j = config_to_json(def);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(j["dagger"]["iterations"], 10);
  EXPECT_EQ(j["dagger"]["k"], 20);
  EXPECT_EQ(j["dagger"]["duplication"], 10);
  EXPECT_EQ(j["knn"]["k"], 5);
}

TEST(Config, OverridesPropagate) {
  const RunConfig c = config_from_json(json::parse(R"({
    "workers": 3,
    "dagger": {"strategy": "adversary", "iterations": 4},
    "refine": {"max_heading_dev_deg": 10},
    "observation": {"nearest_vehicles": 2}
  })"));
  EXPECT_EQ(c.dagger.workers, 3);
  EXPECT_EQ(c.dagger.strategy, Strategy::Adversary);
  EXPECT_EQ(c.dagger.iterations, 4);
  EXPECT_NEAR(c.dagger.sim.refine.max_heading_dev, 10.0 * std::numbers::pi / 180.0, 1e-15);
  EXPECT_DOUBLE_EQ(c.dagger.label.refine.max_heading_dev, c.dagger.sim.refine.max_heading_dev);
  EXPECT_EQ(c.dagger.label.observation.nearest_vehicles, 2);
  EXPECT_EQ(c.dagger.sim.observation.nearest_vehicles, 2);
}

TEST(Config, RejectsUnknownAndIllTyped) {
  EXPECT_THROW(config_from_json(json::parse(R"({"dagger": {"iteratons": 3}})")), ValidationError);
  EXPECT_THROW(config_from_json(json::parse(R"({"colour": "red"})")), ValidationError);
  EXPECT_THROW(config_from_json(json::parse(R"({"dagger": {"k": "twenty"}})")), ValidationError);
  EXPECT_THROW(config_from_json(json::parse(R"({"dagger": {"strategy": "random"}})")), ValidationError);
  EXPECT_THROW(config_from_json(json::parse(R"({"dagger": {"iterations": 0}})")), ValidationError);
  EXPECT_THROW(config_from_json(json::parse(R"({"knn": 5})")), ValidationError);
  EXPECT_THROW(config_from_json(json::parse("[]")), ValidationError);
  fixtures::TempDir dir("config");
  write_text(dir.path() / "bad.json", "{ not json");
  EXPECT_THROW(load_config(dir.path() / "bad.json"), ValidationError);
  EXPECT_THROW(load_config(dir.path() / "missing.json"), ValidationError);
}
