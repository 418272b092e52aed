#include <gtest/gtest.h>

#include "gridse/admm.hpp"
#include "gridse/error.hpp"
#include "gridse/local_estimators.hpp"
#include "support.hpp"

using namespace gridse;
using gridse::testing::every_bus;
using gridse::testing::fourteen;
using gridse::testing::max_state_error;

namespace {

MeasurementSet retagged(MeasurementSet set, const Partition& partition) {
  assign_areas(set.plan, partition);
  return set;
}

AdmmOptions tight() {
  AdmmOptions o;
  o.epsilon = 1e-8;
  o.max_iter = 5000;
  return o;
}

}  // namespace

TEST(Admm, SingleAreaEqualsCentralizedEstimator) {
  const auto& f = fourteen();
  const Partition one = Partition::single_area(f.model);
  const MeasurementSet set = retagged(synthesize(f.model, f.plan, f.truth, 21), one);

  const DistributedEstimate scada = run_admm(f.model, one, set.scada(), EstimatorKind::Scada);
  const LocalEstimate c_scada = wls_estimate(f.model, set.scada(), StateVector::flat(14));
  EXPECT_TRUE(scada.converged);
  EXPECT_LT(max_state_error(scada.state, c_scada.state, every_bus(f.model)), 1e-9);
  for (double p : scada.trace.primal) EXPECT_EQ(p, 0.0);

  const DistributedEstimate pmu = run_admm(f.model, one, set.pmu(), EstimatorKind::Pmu);
  const LocalEstimate c_pmu = pmu_linear_estimate(f.model, set.pmu());
  EXPECT_LT(max_state_error(pmu.state, c_pmu.state, c_pmu.buses), 1e-9);
}

TEST(Admm, FourAreasMatchCentralizedPooledWls) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 22);
  for (EstimatorKind kind : {EstimatorKind::Scada, EstimatorKind::Pmu, EstimatorKind::Hybrid}) {
    const MeasurementSet rows = kind == EstimatorKind::Scada ? set.scada() : kind == EstimatorKind::Pmu ? set.pmu() : set;
    const DistributedEstimate d = run_admm(f.model, f.partition, rows, kind, tight());
    const LocalEstimate c = kind == EstimatorKind::Pmu ? pmu_linear_estimate(f.model, rows)
                                                      : wls_estimate(f.model, rows, StateVector::flat(14));
    EXPECT_TRUE(d.converged) << estimator_name(kind);
    EXPECT_LT(max_state_error(d.state, c.state, c.buses), 1e-5) << estimator_name(kind);
  }
}

TEST(Admm, TighterThresholdApproachesCentralizedOptimum) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 23);
  const LocalEstimate c = wls_estimate(f.model, set, StateVector::flat(14));
  double previous = INFINITY;
  for (double eps : {1e-3, 1e-5, 1e-7}) {
    AdmmOptions o;
    o.epsilon = eps;
    o.max_iter = 5000;
    const double d = max_state_error(run_admm(f.model, f.partition, set, EstimatorKind::Hybrid, o).state, c.state,
                                      every_bus(f.model));
    EXPECT_LT(d, previous) << eps;
    previous = d;
  }
  EXPECT_LT(previous, 1e-5);
}

TEST(Admm, ExchangesOnlyWithNeighbors) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 24);
  for (EstimatorKind kind : {EstimatorKind::Scada, EstimatorKind::Pmu, EstimatorKind::Hybrid}) {
    const MeasurementSet rows = kind == EstimatorKind::Scada ? set.scada() : kind == EstimatorKind::Pmu ? set.pmu() : set;
    const DistributedEstimate d = run_admm(f.model, f.partition, rows, kind);
    EXPECT_FALSE(d.log.exchanges.empty());
    for (const auto& [consumer, provider] : d.log.exchanges) {
      EXPECT_TRUE(f.partition.are_neighbors(consumer, provider)) << consumer << " <- " << provider;
    }
  }
}

TEST(Admm, ConcurrentRunIsBitIdentical) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 25);
  AdmmOptions serial;
  AdmmOptions parallel;
  parallel.concurrent = true;
  const DistributedEstimate a = run_admm(f.model, f.partition, set, EstimatorKind::Hybrid, serial);
  const DistributedEstimate b = run_admm(f.model, f.partition, set, EstimatorKind::Hybrid, parallel);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.state.magnitude, b.state.magnitude);
  EXPECT_EQ(a.state.angle, b.state.angle);
  EXPECT_EQ(a.trace.primal, b.trace.primal);
}

TEST(Admm, TraceSeriesAreConsistent) {
  const auto& f = fourteen();
  const DistributedEstimate d =
      run_admm(f.model, f.partition, synthesize(f.model, f.plan, f.truth, 26).scada(), EstimatorKind::Scada);
  ASSERT_TRUE(d.converged);
  const ResidualSeries s = consensus_residuals(d.trace);
  EXPECT_EQ(s.primal.size(), static_cast<std::size_t>(d.iterations));
  EXPECT_EQ(s.dual.size(), s.primal.size());
  EXPECT_EQ(s.objective.size(), s.primal.size());
  EXPECT_EQ(d.trace.disagreement.size(), s.primal.size());
  EXPECT_LT(s.primal.back(), AdmmOptions{}.epsilon);
  for (std::size_t k = 0; k < s.primal.size(); ++k) {
    EXPECT_GE(s.primal[k], 0.0);
    EXPECT_GE(s.dual[k], 0.0);
  }
}

TEST(Admm, BoundaryCopiesAgreeOnBundledFixtures) {
  struct Case {
    std::string scenario;
    EstimatorKind kind;
  };
  const std::vector<Case> cases{{"scenarios/ieee14_clean.json", EstimatorKind::Scada},
                                {"scenarios/ieee14_clean.json", EstimatorKind::Pmu},
                                {"scenarios/ieee14_clean.json", EstimatorKind::Hybrid},
                                {"scenarios/ieee118_5area.json", EstimatorKind::Scada},
                                {"scenarios/ieee118_5area.json", EstimatorKind::Pmu}};
  for (const Case& c : cases) {
    Scenario sc = load_scenario_file(resolve_fixture(c.scenario));
    sc.bad_data.clear();
    const Workspace ws = prepare_workspace(sc);
    const MeasurementSet set = trial_measurements(ws, sc, 0);
    const MeasurementSet rows = c.kind == EstimatorKind::Scada ? set.scada() : c.kind == EstimatorKind::Pmu ? set.pmu() : set;
    const DistributedEstimate d = run_admm(ws.model, ws.partition, rows, c.kind, sc.admm);
    ASSERT_TRUE(d.converged) << c.scenario << " " << estimator_name(c.kind);
    EXPECT_LT(d.iterations, sc.admm.max_iter);
    for (double gap : d.trace.disagreement.back()) EXPECT_LT(gap, 10.0 * sc.admm.epsilon) << c.scenario;
  }
}

TEST(Admm, RejectsBadOptionsAndUnobservableData) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 27);
  AdmmOptions o;
  o.rho = 0.0;
  EXPECT_THROW(run_admm(f.model, f.partition, set, EstimatorKind::Hybrid, o), Error);
  o = {};
  o.epsilon = -1.0;
  EXPECT_THROW(run_admm(f.model, f.partition, set, EstimatorKind::Hybrid, o), Error);

  const MeasurementSet few = set.filtered([](const Measurement& m) { return m.kind == MeasurementKind::VoltageMagnitude; });
  EXPECT_THROW(run_admm(f.model, f.partition, few, EstimatorKind::Scada), ObservabilityError);
}

TEST(Admm, RejectsAreaTagsOutsidePartition) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 28);
  EXPECT_THROW(run_admm(f.model, Partition::single_area(f.model), set, EstimatorKind::Hybrid), ModelError);
}

TEST(Admm, IterationCapReportsNonConvergence) {
  const auto& f = fourteen();
  AdmmOptions o;
  o.max_iter = 3;
  o.epsilon = 1e-12;
  const DistributedEstimate d =
      run_admm(f.model, f.partition, synthesize(f.model, f.plan, f.truth, 29), EstimatorKind::Hybrid, o);
  EXPECT_FALSE(d.converged);
  EXPECT_EQ(d.iterations, 3);
  EXPECT_EQ(d.trace.size(), 3u);
}
