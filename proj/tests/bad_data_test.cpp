#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "gridse/bad_data.hpp"
#include "gridse/dphase.hpp"
#include "gridse/error.hpp"
#include "gridse/local_estimators.hpp"
#include "gridse/residuals.hpp"
#include "gridse/rng.hpp"
#include "support.hpp"

using namespace gridse;
using gridse::testing::fourteen;
using nlohmann::json;

namespace {

MeasurementPlan full_plan() { return load_plan_file(resolve_fixture("ieee14_full_plan.json"), fourteen().model); }

MeasurementSet with_error(const MeasurementSet& set, const std::string& label, double sigmas) {
  const std::vector<BadDataSpec> spec{{label, BadDataMode::Sigma, sigmas, {}}};
  return inject_bad_data(fourteen().model, set, spec, 1);
}

std::string label_at(const MeasurementSet& set, std::size_t pos) {
  return measurement_label(set.plan.entries[pos], fourteen().model);
}

}  // namespace

TEST(ChiSquare, TwoDegreesOfFreedomHasClosedFormQuantile) {
  for (double alpha : {0.01, 0.05, 0.1}) {
    const Detection d = chi_square_detect(1.0, 2, alpha);
    EXPECT_NEAR(d.threshold, -2.0 * std::log(alpha), 1e-9);
    EXPECT_FALSE(d.detected);
  }
  EXPECT_TRUE(chi_square_detect(9.3, 2, 0.01).detected);
  EXPECT_FALSE(chi_square_detect(9.2, 2, 0.01).detected);
}

TEST(ChiSquare, OneDegreeOfFreedomIsSquaredNormalQuantile) {
  // P(|Z| > z) = erfc(z / sqrt 2) = alpha, solved by bisection
  const double alpha = 0.01;
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > alpha ? lo : hi) = mid;
  }
  EXPECT_NEAR(chi_square_detect(0.0, 1, alpha).threshold, lo * lo, 1e-9);
}

TEST(ChiSquare, RejectsNonPositiveDof) {
  EXPECT_THROW(chi_square_detect(1.0, 0, 0.01), Error);
}

TEST(Residuals, CovarianceDiagonalMatchesDenseOracle) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, 41).scada();
  const LocalEstimate est = wls_estimate(f.model, set, StateVector::flat(14));
  const ResidualAnalysis ra =
      analyze_residuals(f.model, set.plan.entries, set.values, NativeState::from_polar(est.state, Coordinates::Polar));

  // dense Omega = R - H (H' W H)^-1 H' with the slack angle removed
  const Eigen::MatrixXd h = Eigen::MatrixXd(scada_jacobian(f.model, est.state, set.plan));
  Eigen::VectorXd r(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) r[i] = std::pow(set.plan.entries[static_cast<std::size_t>(i)].sigma, 2);
  const Eigen::MatrixXd g = h.transpose() * r.cwiseInverse().asDiagonal() * h;
  const Eigen::MatrixXd omega = Eigen::MatrixXd(r.asDiagonal()) - h * g.ldlt().solve(h.transpose());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    EXPECT_NEAR(ra.omega[i], omega(i, i), 1e-10 * r[i]) << i;
  }
  EXPECT_EQ(ra.dof, h.rows() - h.cols());
  EXPECT_NEAR((ra.omega.array() / r.array()).sum(), static_cast<double>(ra.dof), 1e-8);
  EXPECT_NEAR(ra.objective, (ra.residual.array().square() / r.array()).sum(), 1e-12);
}

TEST(Residuals, MinimalPlanIsAllCritical) {
  const NetworkModel m = load_case(gridse::testing::two_bus_case(20.0, 5.0));
  const OperatingPoint truth = solve_power_flow(m);
  const MeasurementPlan plan = load_plan(json{{"scada",
                                               {{{"kind", "v"}, {"bus", "1"}},
                                                {{"kind", "p_flow"}, {"branch", json::array({"1", "2"})}, {"end", "from"}},
                                                {{"kind", "q_flow"}, {"branch", json::array({"1", "2"})}, {"end", "from"}}}}},
                                         m);
  const MeasurementSet set = synthesize(m, plan, truth, 3);
  const LocalEstimate est = wls_estimate(m, set, StateVector::flat(2));
  const ResidualAnalysis ra =
      analyze_residuals(m, set.plan.entries, set.values, NativeState::from_polar(est.state, Coordinates::Polar));
  EXPECT_EQ(ra.dof, 0);
  for (char c : ra.critical) EXPECT_TRUE(c);
  const Identification id = lnrt_identify(ra, 3.0);
  EXPECT_FALSE(id.row.has_value());
  EXPECT_EQ(id.critical.size(), 3u);
}

TEST(Lnrt, IdentifiesSingleGrossError) {
  const auto& f = fourteen();
  const MeasurementPlan plan = full_plan();
  for (std::uint64_t t = 0; t < 10; ++t) {
    const MeasurementSet clean = synthesize(f.model, plan, f.truth, derive_seed(42, t));
    const std::size_t pos = static_cast<std::size_t>(t * 7 % plan.size());
    const MeasurementSet set = with_error(clean, label_at(clean, pos), 20.0);
    const LocalEstimate est = wls_estimate(f.model, set, StateVector::flat(14));
    const ResidualAnalysis ra =
        analyze_residuals(f.model, set.plan.entries, set.values, NativeState::from_polar(est.state, Coordinates::Polar));
    EXPECT_TRUE(chi_square_detect(ra, 0.01).detected);
    const Identification id = lnrt_identify(ra, 3.0);
    ASSERT_TRUE(id.row.has_value());
    EXPECT_EQ(*id.row, pos) << label_at(set, pos);
    EXPECT_GT(id.normalized, 3.0);
  }
}

TEST(Lnrt, CentralLoopRemovesTheErrorAndRecovers) {
  const auto& f = fourteen();
  const MeasurementSet clean = synthesize(f.model, full_plan(), f.truth, 43);
  const MeasurementSet set = with_error(clean, label_at(clean, 20), 20.0);
  const CentralBdpResult r = wls_with_lnrt(f.model, set, BdOptions{});
  ASSERT_EQ(r.report.flagged.size(), 1u);
  EXPECT_EQ(r.report.flagged[0].id, set.bad[0].id);
  ASSERT_EQ(r.report.corrections.size(), 1u);
  EXPECT_EQ(r.report.corrections[0].action, CorrectionAction::Removed);
  EXPECT_EQ(r.measurements.size(), set.size() - 1);
  EXPECT_FALSE(r.measurements.position(set.bad[0].id).has_value());

  const LocalEstimate reference = wls_estimate(f.model, clean.filtered([&](const Measurement& m) { return m.id != set.bad[0].id; }),
                                               StateVector::flat(14));
  EXPECT_LT(gridse::testing::max_state_error(r.estimate.state, reference.state, gridse::testing::every_bus(f.model)), 1e-8);
}

TEST(Correct, ReplacementInflatesSigma) {
  const auto& f = fourteen();
  const MeasurementSet set = synthesize(f.model, full_plan(), f.truth, 44);
  BdOptions o;
  o.mode = CorrectionMode::Replace;
  std::vector<CorrectionRecord> log;
  const std::size_t id = set.plan.entries[5].id;
  const MeasurementSet out = correct(f.model, set, std::vector<std::size_t>{id}, f.truth.state, EstimatorKind::Scada, o,
                                     nullptr, &log);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].action, CorrectionAction::Replaced);
  const std::size_t pos = *out.position(id);
  EXPECT_DOUBLE_EQ(out.plan.entries[pos].sigma, set.plan.entries[5].sigma * o.replace_inflation);
  EXPECT_NEAR(out.values[static_cast<Eigen::Index>(pos)], evaluate(f.model, f.truth.state, set.plan.entries[5]), 1e-12);
}

TEST(Correct, RemovalThatBreaksObservabilityFallsBackToReplacement) {
  const NetworkModel m = load_case(gridse::testing::two_bus_case(20.0, 5.0));
  const OperatingPoint truth = solve_power_flow(m);
  const MeasurementPlan plan = load_plan(json{{"scada",
                                               {{{"kind", "v"}, {"bus", "1"}},
                                                {{"kind", "p_flow"}, {"branch", json::array({"1", "2"})}, {"end", "from"}},
                                                {{"kind", "q_flow"}, {"branch", json::array({"1", "2"})}, {"end", "from"}}}}},
                                         m);
  const MeasurementSet set = synthesize(m, plan, truth, 3);
  std::vector<CorrectionRecord> log;
  const MeasurementSet out = correct(m, set, std::vector<std::size_t>{1}, truth.state, EstimatorKind::Scada, BdOptions{},
                                     nullptr, &log);
  EXPECT_EQ(out.size(), 3u);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].action, CorrectionAction::Replaced);
}

TEST(DistributedLnrt, IdentifiesErrorsWithFullRedundancy) {
  const auto& f = fourteen();
  MeasurementPlan plan = full_plan();
  assign_areas(plan, f.partition);
  const MeasurementSet clean = synthesize(f.model, plan, f.truth, 45).scada();
  std::size_t caught = 0, tried = 0;
  for (std::size_t pos = 0; pos < clean.size(); pos += 3) {
    const MeasurementSet set = with_error(clean, label_at(clean, pos), 25.0);
    const DistributedBdpResult r = admm_with_lnrt(f.model, f.partition, set, EstimatorKind::Scada, AdmmOptions{}, BdOptions{});
    for (const AreaDetection& d : r.report.detections) EXPECT_LT(d.area, f.partition.area_count());
    EXPECT_TRUE(r.report.unidentifiable.empty());
    ++tried;
    for (const Flag& fl : r.report.flagged) caught += fl.id == set.bad[0].id;
  }
  EXPECT_GE(caught * 10, tried * 9) << caught << "/" << tried;
}

TEST(CrossValidation, OffersAtMostOneCandidatePerSide) {
  const auto& f = fourteen();
  const MeasurementSet clean = synthesize(f.model, f.plan, f.truth, 46);
  const MeasurementSet set = with_error(clean, "random:scada", 20.0);
  const DistributedEstimate s = run_admm(f.model, f.partition, set.scada(), EstimatorKind::Scada);
  const DistributedEstimate p = run_admm(f.model, f.partition, set.pmu(), EstimatorKind::Pmu);
  ExtendedEstimate se = extend_state_set(s, f.model, set.scada());
  const ExtendedEstimate pe = extend_state_set(p, f.model, set.pmu());
  align_gauge(se, pe, f.model.slack());
  const CrossValidation cv = cross_validate(f.model, f.partition, se, pe, set.scada(), set.pmu(), BdOptions{});
  int per_side[2] = {0, 0};
  for (const Flag& fl : cv.flags) {
    ASSERT_NE(fl.side, Side::Hybrid);
    ++per_side[fl.side == Side::Pmu];
    EXPECT_GT(fl.normalized, BdOptions{}.lambda);
  }
  EXPECT_LE(per_side[0], 1);
  EXPECT_LE(per_side[1], 1);
  if (cv.flags.size() == 2) EXPECT_GE(cv.flags[0].evidence, cv.flags[1].evidence);
}
