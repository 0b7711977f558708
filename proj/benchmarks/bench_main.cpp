#include "tasc/baselines.hpp"
#include "tasc/em.hpp"
#include "tasc/simulation.hpp"
#include "tasc/state_space.hpp"

#include <benchmark/benchmark.h>

using namespace tasc;

namespace {

SimulatedPanel make_panel(Index n_units, Index d) {
  SimulationConfig sc;
  sc.n_units = n_units;
  sc.d_true = d;
  sc.seed = 11;
  return simulate(sc);
}

void BM_FilterPass(benchmark::State& state) {
  const auto sim = make_panel(state.range(0), state.range(1));
  const MatrixXd Y = sim.panel.values();
  for (auto _ : state) benchmark::DoNotOptimize(filter_pass(Y, sim.theta_true));
  state.SetItemsProcessed(state.iterations() * Y.cols());
}
BENCHMARK(BM_FilterPass)->Args({20, 5})->Args({50, 5})->Args({20, 20});

void BM_EmIteration(benchmark::State& state) {
  const auto sim = make_panel(state.range(0), state.range(1));
  const MatrixXd Y = sim.panel.values().leftCols(sim.panel.t0());
  EmConfig cfg;
  cfg.d = state.range(1);
  cfg.n_iters = 1;
  cfg.n_restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(em_pre(Y, cfg));
}
BENCHMARK(BM_EmIteration)->Args({20, 5})->Args({50, 10});

void BM_ScFit(benchmark::State& state) {
  const auto sim = make_panel(state.range(0), 5);
  const Index t0 = sim.panel.t0();
  const VectorXd y = sim.panel.values().row(0).head(t0).transpose();
  const MatrixXd donors = sim.panel.values().bottomRows(state.range(0) - 1).leftCols(t0);
  for (auto _ : state) benchmark::DoNotOptimize(sc_fit(y, donors));
}
BENCHMARK(BM_ScFit)->Arg(20)->Arg(100);

void BM_Hsvt(benchmark::State& state) {
  const auto sim = make_panel(state.range(0), 5);
  const MatrixXd Y = sim.panel.values();
  for (auto _ : state) benchmark::DoNotOptimize(hsvt(Y, 5));
}
BENCHMARK(BM_Hsvt)->Arg(20)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
