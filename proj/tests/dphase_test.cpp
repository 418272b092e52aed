#include <gtest/gtest.h>

#include "gridse/dphase.hpp"
#include "gridse/error.hpp"
#include "gridse/rng.hpp"
#include "support.hpp"

using namespace gridse;
using gridse::testing::every_bus;
using gridse::testing::fourteen;
using gridse::testing::max_state_error;

namespace {

const std::vector<Strategy> kAll{Strategy::Dphase, Strategy::NoBdp, Strategy::Lnrt, Strategy::Rdse};

StrategyOptions tight() {
  StrategyOptions o;
  o.admm.epsilon = 1e-10;
  o.admm.max_iter = 5000;
  return o;
}

MeasurementSet with_error(const MeasurementSet& set, const std::string& label, double sigmas) {
  const std::vector<BadDataSpec> spec{{label, BadDataMode::Sigma, sigmas, {}}};
  return inject_bad_data(fourteen().model, set, spec, 1);
}

}  // namespace

TEST(StrategyNames, ParseDisplayAndShortForms) {
  for (Strategy s : kAll) EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  EXPECT_EQ(parse_strategy("dphase"), Strategy::Dphase);
  EXPECT_EQ(parse_strategy("no-bdp"), Strategy::NoBdp);
  EXPECT_EQ(parse_strategy("lnrt"), Strategy::Lnrt);
  EXPECT_EQ(parse_strategy("rdse"), Strategy::Rdse);
  EXPECT_THROW(parse_strategy("kalman"), Error);
}

TEST(Dphase, EveryStrategyRecoversNoiseFreeTruth) {
  const auto& f = fourteen();
  const MeasurementSet set = gridse::testing::noise_free(f.model, f.plan, f.truth);
  for (Strategy s : kAll) {
    const EstimationReport r = run_strategy(s, f.model, f.partition, set, tight());
    ASSERT_TRUE(r.ok()) << strategy_name(s) << ": " << r.error;
    EXPECT_TRUE(r.converged) << strategy_name(s);
    EXPECT_LT(max_state_error(r.state, f.truth.state, every_bus(f.model)), 1e-7) << strategy_name(s);
    EXPECT_TRUE(r.bad_data.flagged.empty()) << strategy_name(s);
  }
}

TEST(Dphase, ReportCarriesEveryStage) {
  const auto& f = fourteen();
  const EstimationReport r = run_dphase(f.model, f.partition, synthesize(f.model, f.plan, f.truth, 51));
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_TRUE(r.scada && r.pmu && r.scada_extended && r.pmu_extended && r.fused);
  EXPECT_FALSE(r.hybrid.has_value());
  EXPECT_EQ(r.estimated.size(), 14u);
  for (char e : r.estimated) EXPECT_TRUE(e);
  EXPECT_GE(r.iterations, r.scada->iterations + r.pmu->iterations);
  for (const Eigen::Vector2d& v : r.variance) EXPECT_TRUE((v.array() > 0.0).all());
}

TEST(Dphase, CleanDataRarelyRaisesFlags) {
  const auto& f = fourteen();
  std::size_t flagged_trials = 0;
  const std::size_t trials = 40;
  for (std::size_t t = 0; t < trials; ++t) {
    const EstimationReport r = run_dphase(f.model, f.partition, synthesize(f.model, f.plan, f.truth, derive_seed(52, t)));
    ASSERT_TRUE(r.ok()) << r.error;
    flagged_trials += !r.bad_data.flagged.empty();
  }
  EXPECT_LE(flagged_trials * 5, trials);
}

TEST(Dphase, RemovesGrossPmuError) {
  const auto& f = fourteen();
  const MeasurementSet clean = synthesize(f.model, f.plan, f.truth, 53);
  const MeasurementSet set = with_error(clean, "random:pmu", 20.0);
  const EstimationReport bad = run_dphase(f.model, f.partition, set);
  const EstimationReport ref = run_dphase(f.model, f.partition, clean);
  ASSERT_TRUE(bad.ok() && ref.ok());
  bool hit = false;
  for (const Flag& fl : bad.bad_data.flagged) hit |= fl.id == set.bad[0].id;
  EXPECT_TRUE(hit);
  const double err_bad = max_state_error(bad.state, f.truth.state, every_bus(f.model));
  const double err_raw = max_state_error(run_strategy(Strategy::NoBdp, f.model, f.partition, set).state, f.truth.state,
                                         every_bus(f.model));
  EXPECT_LT(err_bad, err_raw);
}

TEST(Dphase, MissingPmuSideIsReportedNotThrown) {
  const auto& f = fourteen();
  const MeasurementSet scada = synthesize(f.model, f.plan, f.truth, 54).scada();
  EstimationReport r;
  EXPECT_NO_THROW(r = run_dphase(f.model, f.partition, scada));
  EXPECT_FALSE(r.ok());
  EXPECT_FALSE(r.failed_stage.empty());
}

TEST(Dphase, ConcurrentSidesGiveIdenticalResult) {
  const auto& f = fourteen();
  const MeasurementSet set = with_error(synthesize(f.model, f.plan, f.truth, 55), "random:scada", 20.0);
  DphaseOptions a;
  DphaseOptions b;
  b.concurrent = true;
  b.admm.concurrent = true;
  const EstimationReport x = run_dphase(f.model, f.partition, set, a);
  const EstimationReport y = run_dphase(f.model, f.partition, set, b);
  EXPECT_EQ(x.state.angle, y.state.angle);
  EXPECT_EQ(x.state.magnitude, y.state.magnitude);
  EXPECT_EQ(x.iterations, y.iterations);
  EXPECT_EQ(x.bad_data.flagged.size(), y.bad_data.flagged.size());
}

TEST(Dphase, FusionRulesAgreeWithinNoiseScale) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 56);
  DphaseOptions info;
  DphaseOptions entry;
  entry.fusion = FusionRule::PerEntry;
  const EstimationReport a = run_dphase(f.model, f.partition, set, info);
  const EstimationReport b = run_dphase(f.model, f.partition, set, entry);
  ASSERT_TRUE(a.ok() && b.ok());
  const double err = max_state_error(a.state, f.truth.state, every_bus(f.model));
  EXPECT_LT(max_state_error(a.state, b.state, every_bus(f.model)), 5.0 * std::max(err, 1e-4));
}

TEST(Dphase, WithoutCrossValidationStillRuns) {
  const auto& f = fourteen();
  DphaseOptions o;
  o.cross_validation = false;
  const EstimationReport r = run_dphase(f.model, f.partition, synthesize(f.model, f.plan, f.truth, 57), o);
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_TRUE(r.bad_data.suspects.empty());
}

TEST(Baselines, HybridRunsOnEveryRow) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 58);
  for (Strategy s : {Strategy::NoBdp, Strategy::Lnrt, Strategy::Rdse}) {
    const EstimationReport r = run_baseline(s, f.model, f.partition, set);
    ASSERT_TRUE(r.ok()) << strategy_name(s) << ": " << r.error;
    ASSERT_TRUE(r.hybrid.has_value());
    EXPECT_EQ(r.strategy, s);
    EXPECT_LT(max_state_error(r.state, f.truth.state, every_bus(f.model)), 0.05) << strategy_name(s);
  }
  EXPECT_FALSE(run_baseline(Strategy::NoBdp, f.model, f.partition, set).bad_data.any_detection());
  EXPECT_THROW(run_baseline(Strategy::Dphase, f.model, f.partition, set), Error);
}
