#include <benchmark/benchmark.h>

#include <random>

#include "ilsim/dagger.hpp"
#include "ilsim/planner.hpp"
#include "ilsim/policy.hpp"
#include "ilsim/refine.hpp"
#include "ilsim/simulator.hpp"

using namespace ilsim;

namespace {

const Scene& roundabout() {
  static const Scene scene(make_synthetic_scenario(ScenarioKind::Roundabout, 20, 7));
  return scene;
}

const Dataset& original() {
  static const Dataset ds = extract_original_dataset(roundabout(), 10, 0.3);
  return ds;
}

void BM_Project(benchmark::State& state) {
  const ReferencePath& path = roundabout().path(0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-60.0, 60.0);
  std::vector<Point2> pts(256);
  for (auto& p : pts) p = {u(rng), u(rng)};
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(path.project(pts[i++ % pts.size()]));
}
BENCHMARK(BM_Project);

void BM_BoxOverlap(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<OrientedBox> boxes;
  for (int i = 0; i < 256; ++i) boxes.emplace_back(Point2{u(rng), u(rng)}, u(rng), 4.5, 1.8);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(boxes_overlap(boxes[i % 256], boxes[(i * 7 + 3) % 256]));
    ++i;
  }
}
BENCHMARK(BM_BoxOverlap);

void BM_Plan(benchmark::State& state) {
  const Scene& scene = roundabout();
  const auto& tr = scene.log().tracks.begin()->second;
  const auto& st = tr.states[tr.states.size() / 4];
  const ReferencePath& path = scene.path(scene.route_of(tr.track_id));
  const double s = path.project(st.pos).s;
  PlannerConfig cfg;
  cfg.v_goal = mean_speed(tr);
  cfg.use_heuristic = state.range(0) != 0;
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(plan(s, st.speed(), path, scene, st.t(), cfg, tr.track_id));
    } catch (const std::exception&) {
      state.SkipWithError("plan infeasible");
      break;
    }
  }
}
BENCHMARK(BM_Plan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KnnPredict(benchmark::State& state) {
  const KnnPolicy policy = knn_bc_fit(original(), 5);
  const auto& samples = original().samples;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(policy.predict(samples[(i++ * 31) % samples.size()].features));
  state.counters["samples"] = static_cast<double>(samples.size());
}
BENCHMARK(BM_KnnPredict)->Unit(benchmark::kMicrosecond);

void BM_QpSmooth(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Point2> raw;
  for (int k = 1; k <= state.range(0); ++k) raw.push_back({u(rng), 2.5 * k + u(rng)});
  const EgoState ego{{0.0, 0.0}, 0.3, 8.0, 0.0};
  const RefineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(qp_smooth(raw, ego, 0.3, cfg));
}
BENCHMARK(BM_QpSmooth)->Arg(10)->Arg(40);

void BM_RunEpisode(benchmark::State& state) {
  const Scene& scene = roundabout();
  const auto specs = enumerate_episodes(scene.log(), 10, 30);
  const KnnPolicy policy = knn_bc_fit(original(), 5);
  SimConfig cfg;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_episode(scene, specs[(i++ * 13) % specs.size()], policy, cfg));
}
BENCHMARK(BM_RunEpisode)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
  const Scene& scene = roundabout();
  const auto& tr = scene.log().tracks.begin()->second;
  const auto& st = tr.states[tr.states.size() / 2];
  const EgoState ego{st.pos, st.heading, st.speed(), st.t()};
  const ReferencePath& path = scene.path(scene.route_of(tr.track_id));
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(scene, ego, path, 0.5, 128, 128, tr.track_id));
}
BENCHMARK(BM_Rasterize)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
