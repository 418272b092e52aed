#include <benchmark/benchmark.h>

#include "gridse/admm.hpp"
#include "gridse/dphase.hpp"
#include "gridse/harness.hpp"
#include "gridse/local_estimators.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/powerflow.hpp"

using namespace gridse;

namespace {

struct Case {
  Workspace ws;
  MeasurementSet set;
};

const Case& ieee14() {
  static const Case c = [] {
    const Scenario sc = load_scenario_file(resolve_fixture("scenarios/ieee14_scada_20sigma.json"));
    Workspace ws = prepare_workspace(sc);
    MeasurementSet set = trial_measurements(ws, sc, 0);
    return Case{std::move(ws), std::move(set)};
  }();
  return c;
}

const Case& ieee118() {
  static const Case c = [] {
    const Scenario sc = load_scenario_file(resolve_fixture("scenarios/ieee118_5area.json"));
    Workspace ws = prepare_workspace(sc);
    MeasurementSet set = trial_measurements(ws, sc, 0);
    return Case{std::move(ws), std::move(set)};
  }();
  return c;
}

}  // namespace

static void BM_PowerFlow118(benchmark::State& state) {
  const NetworkModel& m = ieee118().ws.model;
  for (auto _ : state) benchmark::DoNotOptimize(solve_power_flow(m));
}
BENCHMARK(BM_PowerFlow118)->Unit(benchmark::kMillisecond);

static void BM_ScadaJacobian118(benchmark::State& state) {
  const Case& c = ieee118();
  const MeasurementSet scada = c.set.scada();
  for (auto _ : state) benchmark::DoNotOptimize(scada_jacobian(c.ws.model, c.ws.truth.state, scada.plan));
}
BENCHMARK(BM_ScadaJacobian118)->Unit(benchmark::kMicrosecond);

static void BM_CentralWls118(benchmark::State& state) {
  const Case& c = ieee118();
  for (auto _ : state) benchmark::DoNotOptimize(wls_estimate(c.ws.model, c.set, StateVector::flat(c.ws.model.bus_count())));
}
BENCHMARK(BM_CentralWls118)->Unit(benchmark::kMillisecond);

static void BM_AdmmHybrid14(benchmark::State& state) {
  const Case& c = ieee14();
  for (auto _ : state) benchmark::DoNotOptimize(run_admm(c.ws.model, c.ws.partition, c.set, EstimatorKind::Hybrid));
}
BENCHMARK(BM_AdmmHybrid14)->Unit(benchmark::kMillisecond);

static void BM_Dphase14(benchmark::State& state) {
  const Case& c = ieee14();
  for (auto _ : state) benchmark::DoNotOptimize(run_dphase(c.ws.model, c.ws.partition, c.set));
}
BENCHMARK(BM_Dphase14)->Unit(benchmark::kMillisecond);

static void BM_Dphase118(benchmark::State& state) {
  const Case& c = ieee118();
  for (auto _ : state) benchmark::DoNotOptimize(run_dphase(c.ws.model, c.ws.partition, c.set));
}
BENCHMARK(BM_Dphase118)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
