#include <gtest/gtest.h>

#include <set>

#include "gridse/error.hpp"
#include "gridse/measurement.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/observability.hpp"
#include "support.hpp"

using namespace gridse;
using gridse::testing::fourteen;
using nlohmann::json;

namespace {

MeasurementPlan full_plan() { return load_plan_file(resolve_fixture("ieee14_full_plan.json"), fourteen().model); }

MeasurementPlan scada_only(const MeasurementPlan& plan) {
  return plan.filtered([](const Measurement& m) { return !is_pmu(m); });
}

MeasurementPlan pmu_only(const MeasurementPlan& plan) {
  return plan.filtered([](const Measurement& m) { return is_pmu(m); });
}

// Central differences of h over (non-slack theta, V), compared entrywise.
double jacobian_error(const NetworkModel& model, const StateVector& x, const MeasurementPlan& plan) {
  const Eigen::MatrixXd jac = Eigen::MatrixXd(scada_jacobian(model, x, plan));
  const double h = 1e-6;
  double worst = 0.0;
  Eigen::Index col = 0;
  for (int component = 0; component < 2; ++component) {
    for (std::size_t k = 0; k < model.bus_count(); ++k) {
      if (component == 0 && k == model.slack()) continue;
      StateVector up = x, down = x;
      (component == 0 ? up.angle : up.magnitude)[static_cast<Eigen::Index>(k)] += h;
      (component == 0 ? down.angle : down.magnitude)[static_cast<Eigen::Index>(k)] -= h;
      const Eigen::VectorXd fd = (evaluate(model, up, plan.entries) - evaluate(model, down, plan.entries)) / (2 * h);
      for (Eigen::Index r = 0; r < fd.size(); ++r) {
        worst = std::max(worst, std::abs(jac(r, col) - fd[r]) / std::max(1.0, std::abs(fd[r])));
      }
      ++col;
    }
  }
  EXPECT_EQ(col, jac.cols());
  return worst;
}

}  // namespace

TEST(Scada, FlatLosslessNetworkGivesUnitMagnitudesAndZeroPowers) {
  const NetworkModel m = load_case(gridse::testing::two_bus_case(10.0));
  const MeasurementPlan plan = load_plan(json{{"scada",
                                               {{{"kind", "v"}, {"bus", "2"}},
                                                {{"kind", "p_inj"}, {"bus", "1"}},
                                                {{"kind", "q_inj"}, {"bus", "2"}},
                                                {{"kind", "p_flow"}, {"branch", json::array({"1", "2"})}, {"end", "to"}},
                                                {{"kind", "q_flow"}, {"branch", json::array({"1", "2"})}, {"end", "from"}}}}},
                                         m);
  const Eigen::VectorXd h = evaluate_scada(m, StateVector::flat(2), plan);
  EXPECT_NEAR(h[0], 1.0, 1e-15);
  for (Eigen::Index r = 1; r < h.size(); ++r) EXPECT_NEAR(h[r], 0.0, 1e-15);
}

TEST(Scada, NoiseFreeValuesMatchOperatingPoint) {
  const auto& f = fourteen();
  const MeasurementPlan plan = full_plan();
  const Eigen::VectorXd h = evaluate(f.model, f.truth.state, plan.entries);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Measurement& m = plan.entries[i];
    const auto bus = static_cast<Eigen::Index>(m.bus);
    const bool from = m.end == BranchEnd::From;
    switch (m.kind) {
      case MeasurementKind::VoltageMagnitude: EXPECT_DOUBLE_EQ(h[i], f.truth.state.magnitude[bus]); break;
      case MeasurementKind::ActiveInjection: EXPECT_NEAR(h[i], f.truth.p[bus], 1e-12); break;
      case MeasurementKind::ReactiveInjection: EXPECT_NEAR(h[i], f.truth.q[bus], 1e-12); break;
      case MeasurementKind::ActiveFlow:
        EXPECT_NEAR(h[i], (from ? f.truth.flows[m.branch].from : f.truth.flows[m.branch].to).real(), 1e-12);
        break;
      case MeasurementKind::ReactiveFlow:
        EXPECT_NEAR(h[i], (from ? f.truth.flows[m.branch].from : f.truth.flows[m.branch].to).imag(), 1e-12);
        break;
      default: break;
    }
  }
}

TEST(Scada, JacobianMatchesFiniteDifferences) {
  const auto& f = fourteen();
  const MeasurementPlan plan = scada_only(full_plan());
  std::set<MeasurementKind> kinds;
  for (const Measurement& m : plan.entries) kinds.insert(m.kind);
  EXPECT_EQ(kinds.size(), 5u);
  EXPECT_LT(jacobian_error(f.model, f.truth.state, plan), 1e-5);

  StateVector odd = f.truth.state;
  for (Eigen::Index k = 0; k < odd.angle.size(); ++k) {
    odd.angle[k] += 0.01 * static_cast<double>(k % 3);
    odd.magnitude[k] *= 1.0 + 0.005 * static_cast<double>(k % 4);
  }
  EXPECT_LT(jacobian_error(f.model, odd, plan), 1e-5);
}

TEST(Scada, FlatStateLosslessInjectionDerivativeIsMinusB) {
  const NetworkModel m = load_case(gridse::testing::two_bus_case(10.0, 0.0, 0.1));
  const MeasurementPlan plan = load_plan(json{{"scada", {{{"kind", "p_inj"}, {"bus", "1"}}, {{"kind", "v"}, {"bus", "2"}}}}}, m);
  const Eigen::MatrixXd jac = Eigen::MatrixXd(scada_jacobian(m, StateVector::flat(2), plan));
  ASSERT_EQ(jac.cols(), 3);  // theta_2, V_1, V_2
  EXPECT_NEAR(jac(0, 0), -10.0, 1e-12);
  EXPECT_DOUBLE_EQ(jac(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(jac(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(jac(1, 2), 1.0);
}

TEST(Pmu, VoltageOnlyDesignIsSelection) {
  const auto& f = fourteen();
  const MeasurementPlan plan = load_plan(json{{"pmu", {{{"bus", "4"}}, {{"bus", "9"}}}}}, f.model);
  const Eigen::MatrixXd a = Eigen::MatrixXd(pmu_design_matrix(f.model, plan));
  ASSERT_EQ(a.rows(), 4);
  ASSERT_EQ(a.cols(), 28);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    EXPECT_DOUBLE_EQ(a.row(r).sum(), 1.0);
    EXPECT_DOUBLE_EQ(a.row(r).cwiseAbs().maxCoeff(), 1.0);
  }
  EXPECT_DOUBLE_EQ(a(0, 3), 1.0);
  EXPECT_DOUBLE_EQ(a(1, 14 + 3), 1.0);
}

TEST(Pmu, TwoBusCurrentRows) {
  const NetworkModel m = load_case(gridse::testing::two_bus_case(10.0, 0.0, 0.1));
  const MeasurementPlan plan = load_plan(json{{"pmu", {{{"bus", "1"}, {"currents", json::array({json::array({"1", "2"})})}}}}}, m);
  const Eigen::MatrixXd a = Eigen::MatrixXd(pmu_design_matrix(m, plan));
  ASSERT_EQ(a.rows(), 4);
  // I = (V1 - V2) / (j 0.1): re I = 10 (f1 - f2), im I = -10 (e1 - e2)
  Eigen::RowVector4d re, im;
  re << 0, 0, 10, -10;
  im << -10, 10, 0, 0;
  EXPECT_LT((a.row(2) - re).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.row(3) - im).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pmu, DesignTimesTruthReproducesValues) {
  const auto& f = fourteen();
  const MeasurementPlan plan = pmu_only(f.plan);
  const Eigen::SparseMatrix<double> a = pmu_design_matrix(f.model, plan);
  Eigen::VectorXd x(28);
  x << f.truth.state.real(), f.truth.state.imag();
  const Eigen::VectorXd h = evaluate(f.model, f.truth.state, plan.entries);
  EXPECT_LT((a * x - h).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pmu, CurrentMustBeIncidentToPmuBus) {
  const auto& f = fourteen();
  EXPECT_THROW(load_plan(json{{"pmu", {{{"bus", "2"}, {"currents", json::array({json::array({"4", "5"})})}}}}}, f.model), ModelError);
}

TEST(Plan, FixtureCounts) {
  const auto& f = fourteen();
  std::size_t v = 0, inj = 0, flow = 0;
  std::set<std::size_t> pmu_buses;
  for (const Measurement& m : f.plan.entries) {
    v += m.kind == MeasurementKind::VoltageMagnitude;
    inj += m.kind == MeasurementKind::ActiveInjection;
    flow += m.kind == MeasurementKind::ActiveFlow;
    if (m.kind == MeasurementKind::VoltageReal) pmu_buses.insert(m.bus);
  }
  EXPECT_EQ(v, 4u);
  EXPECT_EQ(inj, 5u);
  EXPECT_EQ(flow, 16u);
  EXPECT_EQ(pmu_buses.size(), 4u);
}

TEST(Plan, RoundTripThroughJson) {
  const auto& f = fourteen();
  const MeasurementPlan back = load_plan(plan_to_json(f.plan, f.model), f.model, &f.partition);
  ASSERT_EQ(back.size(), f.plan.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.entries[i].kind, f.plan.entries[i].kind);
    EXPECT_EQ(back.entries[i].bus, f.plan.entries[i].bus);
    EXPECT_EQ(back.entries[i].branch, f.plan.entries[i].branch);
    EXPECT_EQ(back.entries[i].area, f.plan.entries[i].area);
    EXPECT_DOUBLE_EQ(back.entries[i].sigma, f.plan.entries[i].sigma);
  }
}

TEST(Observability, PmuFixtureGlobalButNotLocal) {
  const auto& f = fourteen();
  EXPECT_TRUE(check_observability(f.model, f.plan, f.partition, {EstimatorKind::Pmu, std::nullopt}).observable);
  std::size_t blind = 0;
  for (std::size_t a = 0; a < f.partition.area_count(); ++a) {
    blind += !check_observability(f.model, f.plan, f.partition, {EstimatorKind::Pmu, a}).observable;
  }
  EXPECT_GE(blind, 1u);
  for (std::size_t a = 0; a < f.partition.area_count(); ++a) {
    EXPECT_TRUE(check_observability(f.model, f.plan, f.partition, {EstimatorKind::Scada, a}).observable) << a;
  }
}

TEST(Observability, EmptyPlanLeavesEveryBusUnobservable) {
  const auto& f = fourteen();
  const ObservabilityReport r = check_observability(f.model, MeasurementPlan{}, f.partition, {EstimatorKind::Scada, std::nullopt});
  EXPECT_FALSE(r.observable);
  EXPECT_EQ(r.unobservable.size(), 14u);
}

TEST(Observability, AddingRowsNeverShrinksObservableSet) {
  const auto& f = fourteen();
  const MeasurementPlan scada = scada_only(full_plan());
  std::size_t previous = f.model.bus_count() + 1;
  for (std::size_t keep = 0; keep <= scada.size(); keep += 8) {
    MeasurementPlan part;
    part.entries.assign(scada.entries.begin(), scada.entries.begin() + static_cast<std::ptrdiff_t>(keep));
    const std::size_t blind =
        check_observability(f.model, part, f.partition, {EstimatorKind::Scada, std::nullopt}).unobservable.size();
    EXPECT_LE(blind, previous);
    previous = blind;
  }
  EXPECT_EQ(previous, 0u);
}

TEST(Synthesis, SameSeedSameValues) {
  const auto& f = fourteen();
  const MeasurementSet a = synthesize(f.model, f.plan, f.truth, 99);
  const MeasurementSet b = synthesize(f.model, f.plan, f.truth, 99);
  const MeasurementSet c = synthesize(f.model, f.plan, f.truth, 100);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  EXPECT_TRUE(a.bad.empty());
}

TEST(Synthesis, DrawDependsOnlyOnSeedAndEntry) {
  const auto& f = fourteen();
  const MeasurementSet all = synthesize(f.model, f.plan, f.truth, 5);
  const MeasurementPlan pmu = pmu_only(f.plan);
  const MeasurementSet some = synthesize(f.model, pmu, f.truth, 5);
  for (std::size_t i = 0; i < pmu.size(); ++i) {
    EXPECT_DOUBLE_EQ(some.values[static_cast<Eigen::Index>(i)],
                     all.values[static_cast<Eigen::Index>(*all.position(pmu.entries[i].id))]);
  }
}

TEST(Synthesis, TinySigmaGivesNoiseFreeValues) {
  const auto& f = fourteen();
  MeasurementPlan plan = f.plan;
  for (Measurement& m : plan.entries) m.sigma = 1e-14;
  const MeasurementSet set = synthesize(f.model, plan, f.truth, 3);
  EXPECT_LT((set.values - evaluate(f.model, f.truth.state, plan.entries)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synthesis, SampleVarianceMatchesSigma) {
  const auto& f = fourteen();
  MeasurementPlan plan;
  plan.entries.push_back(f.plan.entries.front());
  const double exact = evaluate(f.model, f.truth.state, plan.entries.front());
  const double sigma = plan.entries.front().sigma;
  double sum = 0.0, sq = 0.0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const double e = synthesize(f.model, plan, f.truth, static_cast<std::uint64_t>(s)).values[0] - exact;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(var / (sigma * sigma), 1.0, 0.05);
  EXPECT_LT(std::abs(mean), 4.0 * sigma / std::sqrt(n));
}

TEST(BadData, EmptySpecLeavesSetUnchanged) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 4);
  const MeasurementSet out = inject_bad_data(f.model, set, {}, 4);
  EXPECT_EQ(out.values, set.values);
  EXPECT_TRUE(out.bad.empty());
}

TEST(BadData, SigmaErrorOnOneFlow) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 4);
  std::size_t pos = 0;
  while (f.plan.entries[pos].kind != MeasurementKind::ActiveFlow) ++pos;
  const Measurement& m = f.plan.entries[pos];
  const std::vector<BadDataSpec> spec{{measurement_label(m, f.model), BadDataMode::Sigma, 20.0, {}}};
  const MeasurementSet out = inject_bad_data(f.model, set, spec, 4);
  ASSERT_EQ(out.bad.size(), 1u);
  EXPECT_EQ(out.bad[0].id, m.id);
  EXPECT_DOUBLE_EQ(out.bad[0].original, set.values[static_cast<Eigen::Index>(pos)]);
  EXPECT_DOUBLE_EQ(out.values[static_cast<Eigen::Index>(pos)], set.values[static_cast<Eigen::Index>(pos)] + 20.0 * m.sigma);
  for (Eigen::Index i = 0; i < set.values.size(); ++i)
    if (i != static_cast<Eigen::Index>(pos)) EXPECT_EQ(out.values[i], set.values[i]);
}

TEST(BadData, ConformingPairSharesSign) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 4);
  const std::vector<BadDataSpec> spec{{"q_inj@10", BadDataMode::Conforming, 20.0, "q_flow@17:from"}};
  const MeasurementSet out = inject_bad_data(f.model, set, spec, 4);
  ASSERT_EQ(out.bad.size(), 2u);
  const double d0 = out.bad[0].injected - out.bad[0].original;
  const double d1 = out.bad[1].injected - out.bad[1].original;
  EXPECT_GT(d0 * d1, 0.0);
}

TEST(BadData, UnknownSelectorThrows) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 4);
  const std::vector<BadDataSpec> spec{{"p_flow@999:from", BadDataMode::Sigma, 20.0, {}}};
  EXPECT_THROW(inject_bad_data(f.model, set, spec, 4), ModelError);
}

TEST(MeasurementSetJson, RoundTrip) {
  const auto& f = fourteen();
  const std::vector<BadDataSpec> spec{{"random:scada", BadDataMode::Sigma, 20.0, {}}};
  const MeasurementSet set = inject_bad_data(f.model, synthesize(f.model, f.plan, f.truth, 8), spec, 8);
  const MeasurementSet back = measurement_set_from_json(measurement_set_to_json(set, f.model), f.model);
  EXPECT_EQ(back.values, set.values);
  ASSERT_EQ(back.bad.size(), 1u);
  EXPECT_EQ(back.bad[0].id, set.bad[0].id);
  EXPECT_EQ(back.plan.size(), set.plan.size());
}
