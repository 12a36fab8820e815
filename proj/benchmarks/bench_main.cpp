#include <benchmark/benchmark.h>

#include "rantwin/anomaly.hpp"
#include "rantwin/eval.hpp"
#include "rantwin/mlp.hpp"
#include "rantwin/ran_sim.hpp"
#include "rantwin/twin_engine.hpp"

using namespace rantwin;

namespace {

// A warmed-up default scenario: 3 cells, 50 UEs.
struct Scenario {
  sim::SimState state = sim::init_sim(sim::SimConfig{});
  std::vector<sim::MeasurementReport> reports;

  Scenario() {
    for (int t = 0; t < 50; ++t) {
      reports = sim::step(state).reports;
      twin::apply_plan(state, twin::allocate_prbs(reports, state.cells, state.config.link));
    }
  }
};

void BM_SimStep(benchmark::State& st) {
  Scenario s;
  for (auto _ : st) benchmark::DoNotOptimize(sim::step(s.state));
}
BENCHMARK(BM_SimStep);

void BM_TwinTick(benchmark::State& st) {
  sim::SimConfig cfg;
  cfg.n_ues = static_cast<int>(st.range(0));
  sim::SimState state = sim::init_sim(cfg);
  const auto reports = sim::step(state).reports;
  for (auto _ : st) benchmark::DoNotOptimize(twin::twin_tick(reports, state.cells, cfg.link));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_TwinTick)->Arg(50)->Arg(200)->Arg(1000);

void BM_Forward(benchmark::State& st) {
  const auto model = mlp::init_model(std::vector<int>{16, 16}, 1);
  const anomaly::FeatureVector x{0.1, -0.2, 0.3, 1.0, -1.0, 0.5, 0.2, 0.0};
  for (auto _ : st) benchmark::DoNotOptimize(mlp::forward(model, x));
}
BENCHMARK(BM_Forward);

void BM_LossAndGrads(benchmark::State& st) {
  const auto model = mlp::init_model(std::vector<int>{16, 16}, 1);
  Rng rng(2);
  std::vector<mlp::Example> batch(32);
  for (auto& e : batch) {
    for (auto& v : e.x) v = rng.normal();
    e.label = static_cast<int>(rng.uniform_index(4));
  }
  for (auto _ : st) benchmark::DoNotOptimize(mlp::loss_and_grads(model, batch));
}
BENCHMARK(BM_LossAndGrads);

void BM_Tsne(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Rng rng(3);
  eval::PointSet pts{n, 4, {}};
  for (std::size_t i = 0; i < n * 4; ++i) pts.values.push_back(rng.uniform());
  eval::TsneConfig cfg;
  cfg.perplexity = 10.0;
  cfg.iterations = 200;
  for (auto _ : st) benchmark::DoNotOptimize(eval::tsne(pts, cfg));
}
BENCHMARK(BM_Tsne)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
