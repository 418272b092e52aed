#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "gridse/admm.hpp"
#include "gridse/bad_data.hpp"
#include "gridse/dphase.hpp"
#include "gridse/harness.hpp"
#include "gridse/local_estimators.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/observability.hpp"
#include "gridse/residuals.hpp"
#include "gridse/rng.hpp"

using namespace gridse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Fourteen {
  NetworkModel model = load_case_file(resolve_fixture("ieee14.json"));
  Partition partition = load_partition_file(resolve_fixture("ieee14_4area.json"), model);
  MeasurementPlan plan = load_plan_file(resolve_fixture("ieee14_plan.json"), model, &partition);
  OperatingPoint truth = solve_power_flow(model);
};

double max_abs_diff(const StateVector& a, const StateVector& b, const std::vector<std::size_t>& buses) {
  double worst = 0.0;
  for (std::size_t k : buses) {
    const auto i = static_cast<Eigen::Index>(k);
    worst = std::max({worst, std::abs(a.magnitude[i] - b.magnitude[i]), std::abs(a.angle[i] - b.angle[i])});
  }
  return worst;
}

std::vector<std::size_t> all_buses(const NetworkModel& model) {
  std::vector<std::size_t> out(model.bus_count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = k;
  return out;
}

std::vector<std::size_t> flagged_buses(const std::vector<char>& flags) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < flags.size(); ++k)
    if (flags[k]) out.push_back(k);
  return out;
}

Outcome criterion1() {
  Fourteen f;
  const MeasurementSet set = synthesize(f.model, f.plan, f.truth, derive_seed(1, 0));
  AdmmOptions admm;
  admm.epsilon = 1e-8;
  admm.max_iter = 5000;

  const auto t0 = Clock::now();
  const DistributedEstimate scada = run_admm(f.model, f.partition, set.scada(), EstimatorKind::Scada, admm);
  const DistributedEstimate pmu = run_admm(f.model, f.partition, set.pmu(), EstimatorKind::Pmu, admm);
  const DistributedEstimate hybrid = run_admm(f.model, f.partition, set, EstimatorKind::Hybrid, admm);
  const double secs = seconds_since(t0);

  const LocalEstimate c_scada = wls_estimate(f.model, set.scada(), StateVector::flat(f.model.bus_count()));
  const LocalEstimate c_pmu = pmu_linear_estimate(f.model, set.pmu());
  const LocalEstimate c_hybrid = wls_estimate(f.model, set, StateVector::flat(f.model.bus_count()));

  const double d_scada = max_abs_diff(scada.state, c_scada.state, c_scada.buses);
  const double d_pmu = max_abs_diff(pmu.state, c_pmu.state, c_pmu.buses);
  const double d_hybrid = max_abs_diff(hybrid.state, c_hybrid.state, c_hybrid.buses);
  const bool converged = scada.converged && pmu.converged && hybrid.converged;
  const double worst = std::max({d_scada, d_pmu, d_hybrid});
  return {converged && worst < 1e-5 && secs < 5.0,
          fmt("max |admm - centralized| scada %.2e pmu %.2e hybrid %.2e (< 1e-5), converged %d, %.2f s (< 5 s)",
              d_scada, d_pmu, d_hybrid, converged, secs)};
}

Outcome criterion2() {
  Fourteen f;
  MeasurementSet set = synthesize(f.model, f.plan, f.truth, 7);
  set.values = evaluate(f.model, f.truth.state, set.plan.entries);

  const LocalEstimate scada = wls_estimate(f.model, set.scada(), StateVector::flat(f.model.bus_count()));
  const LocalEstimate pmu = pmu_linear_estimate(f.model, set.pmu());
  DphaseOptions options;
  options.admm.epsilon = 1e-12;
  options.admm.max_iter = 5000;
  const EstimationReport fused = run_dphase(f.model, f.partition, set, options);

  const double e_scada = max_abs_diff(scada.state, f.truth.state, scada.buses);
  const double e_pmu = max_abs_diff(pmu.state, f.truth.state, pmu.buses);
  const double e_fused = fused.ok() ? max_abs_diff(fused.state, f.truth.state, all_buses(f.model)) : INFINITY;
  const bool full = fused.ok() && flagged_buses(fused.estimated).size() == f.model.bus_count();
  const bool no_flags = fused.ok() && fused.bad_data.flagged.empty();
  return {full && no_flags && std::max({e_scada, e_pmu, e_fused}) < 1e-8,
          fmt("max error scada WLS %.2e, PMU linear %.2e (%zu buses), DPHASE fused %.2e (< 1e-8), flags %zu",
              e_scada, e_pmu, pmu.buses.size(), e_fused, fused.bad_data.flagged.size())};
}

Outcome criterion3() {
  Fourteen f;
  const MeasurementPlan scada = f.plan.filtered([](const Measurement& m) { return !is_pmu(m); });
  const MeasurementPlan full = load_plan_file(resolve_fixture("ieee14_full_plan.json"), f.model);
  MeasurementPlan plan = scada;
  for (const Measurement& m : full.entries)
    if (!is_pmu(m)) plan.entries.push_back(m);
  for (std::size_t i = 0; i < plan.entries.size(); ++i) plan.entries[i].id = i;

  std::set<MeasurementKind> kinds;
  for (const Measurement& m : plan.entries) kinds.insert(m.kind);

  const StateVector& x = f.truth.state;
  const Eigen::MatrixXd jac = Eigen::MatrixXd(scada_jacobian(f.model, x, plan));
  const std::size_t n = f.model.bus_count();
  const double h = 1e-6;
  double worst = 0.0;
  Eigen::Index col = 0;
  for (int component = 0; component < 2; ++component) {
    for (std::size_t k = 0; k < n; ++k) {
      if (component == 0 && k == f.model.slack()) continue;
      StateVector up = x, down = x;
      Eigen::VectorXd& u = component == 0 ? up.angle : up.magnitude;
      Eigen::VectorXd& d = component == 0 ? down.angle : down.magnitude;
      u[static_cast<Eigen::Index>(k)] += h;
      d[static_cast<Eigen::Index>(k)] -= h;
      const Eigen::VectorXd fd =
          (evaluate(f.model, up, plan.entries) - evaluate(f.model, down, plan.entries)) / (2.0 * h);
      for (Eigen::Index r = 0; r < fd.size(); ++r) {
        const double rel = std::abs(jac(r, col) - fd[r]) / std::max(1.0, std::abs(fd[r]));
        worst = std::max(worst, rel);
      }
      ++col;
    }
  }
  const bool shape = col == jac.cols();
  return {shape && kinds.size() == 5 && worst < 1e-5,
          fmt("max relative error %.2e over %zu rows x %td columns, %zu SCADA kinds", worst, plan.size(), col,
              kinds.size())};
}

std::pair<bool, std::string> ordering(const MetricTable& t) {
  const auto& d = t.at(Strategy::Dphase);
  const auto& l = t.at(Strategy::Lnrt);
  const auto& n = t.at(Strategy::NoBdp);
  const bool ok = d.amae_v < l.amae_v && l.amae_v < n.amae_v && d.amae_theta < l.amae_theta &&
                  l.amae_theta < n.amae_theta;
  return {ok, fmt("V %.3f<%.3f<%.3f th %.3f<%.3f<%.3f", d.amae_v * 1e3, l.amae_v * 1e3, n.amae_v * 1e3,
                  d.amae_theta * 1e3, l.amae_theta * 1e3, n.amae_theta * 1e3)};
}

Outcome criterion4() {
  Scenario scenario = load_scenario_file(resolve_fixture("scenarios/ieee14_scada_20sigma.json"));
  const Workspace ws = prepare_workspace(scenario);
  const std::uint64_t first = scenario.seed;
  int held = 0;
  double slowest = 0.0;
  std::string detail;
  for (std::uint64_t b = 0; b < 10; ++b) {
    scenario.seed = first + b;
    const auto t0 = Clock::now();
    const Bundle bundle = run_scenario(scenario, ws);
    const MetricTable table = compute_amae(bundle);
    const double secs = seconds_since(t0);
    slowest = std::max(slowest, secs);
    const auto [ok, text] = ordering(table);
    held += ok;
    std::printf("  batch seed %llu: %s %s (x1e-3), %.1f s\n", static_cast<unsigned long long>(scenario.seed),
                ok ? "holds" : "fails", text.c_str(), secs);
  }
  detail = fmt("ordering DPHASE < DSE-LNRT < DSE-without-BDP for V and theta in %d/10 batches (>= 9), slowest batch "
               "%.1f s (< 120 s)",
               held, slowest);
  return {held >= 9 && slowest < 120.0, detail};
}

Outcome criterion5() {
  const Scenario scenario = load_scenario_file(resolve_fixture("scenarios/ieee14_pmu_20sigma.json"));
  const MetricTable table = compute_amae(run_scenario(scenario));
  const auto& d = table.at(Strategy::Dphase);
  const auto& n = table.at(Strategy::NoBdp);
  const bool ok = d.amae_v <= n.amae_v / 3.0 && d.amae_theta <= n.amae_theta / 3.0 && d.failures == 0;
  return {ok, fmt("AMAE DPHASE V %.3e th %.3e vs DSE-without-BDP V %.3e th %.3e: ratios %.1fx, %.1fx (>= 3x)",
                  d.amae_v, d.amae_theta, n.amae_v, n.amae_theta, n.amae_v / d.amae_v, n.amae_theta / d.amae_theta)};
}

Outcome criterion6() {
  const Scenario scenario = load_scenario_file(resolve_fixture("scenarios/ieee14_sweep.json"));
  const std::vector<double> eps{1e-3, 1e-5, 1e-7};
  const SweepTable table = sweep_epsilon(scenario, eps);
  bool monotone = true;
  std::string series;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const SweepRow& r = table.rows[i];
    series += fmt("%seps %.0e: V %.6e th %.6e (%zu unconverged)", i ? "; " : "", r.epsilon, r.amae_v, r.amae_theta,
                  r.unconverged);
    if (i > 0) {
      monotone = monotone && r.amae_v <= table.rows[i - 1].amae_v && r.amae_theta <= table.rows[i - 1].amae_theta;
    }
  }
  bool failures = false;
  for (const SweepRun& r : table.runs) failures = failures || !r.error.empty();
  const bool settles = objective_settles(table, 5, 0.0);
  return {monotone && settles && !failures,
          fmt("error non-increasing %s, objective non-increasing after 5 iterations %s; %s", monotone ? "yes" : "NO",
              settles ? "yes" : "NO", series.c_str())};
}

Outcome criterion7() {
  Fourteen f;
  std::set<std::string> pmu_buses;
  for (const Measurement& m : f.plan.entries)
    if (m.kind == MeasurementKind::VoltageReal) pmu_buses.insert(f.model.bus(m.bus).id);
  const ObservabilityReport global =
      check_observability(f.model, f.plan, f.partition, ObservabilityScope{EstimatorKind::Pmu, std::nullopt});
  std::size_t unobservable = 0;
  for (std::size_t a = 0; a < f.partition.area_count(); ++a) {
    const ObservabilityReport local =
        check_observability(f.model, f.plan, f.partition, ObservabilityScope{EstimatorKind::Pmu, a});
    unobservable += !local.observable;
  }
  const bool placement = pmu_buses == std::set<std::string>{"2", "6", "7", "9"};
  return {placement && global.observable && unobservable >= 1,
          fmt("PMUs at {2,6,7,9} %s, globally observable %s, areas locally PMU-unobservable %zu/%zu",
              placement ? "yes" : "NO", global.observable ? "yes" : "NO", unobservable, f.partition.area_count())};
}

Outcome criterion8() {
  const NetworkModel model = load_case_file(resolve_fixture("ieee14.json"));
  const MeasurementPlan plan = load_plan_file(resolve_fixture("ieee14_full_plan.json"), model);
  const OperatingPoint truth = solve_power_flow(model);
  const BdOptions bd;
  const StateVector flat = StateVector::flat(model.bus_count());

  auto detects = [&](const MeasurementSet& set) {
    const LocalEstimate est = wls_estimate(model, set, flat);
    const NativeState x = NativeState::from_polar(est.state, Coordinates::Polar);
    const ResidualAnalysis ra = analyze_residuals(model, set.plan.entries, set.values, x);
    return chi_square_detect(ra, bd.alpha).detected;
  };

  const std::size_t clean_trials = 1000;
  std::size_t alarms = 0;
  for (std::size_t t = 0; t < clean_trials; ++t) alarms += detects(synthesize(model, plan, truth, derive_seed(81, t)));

  const std::vector<BadDataSpec> gross{{"random:scada", BadDataMode::Sigma, 20.0, {}}};
  const std::size_t bad_trials = 1000;
  std::size_t caught = 0;
  for (std::size_t t = 0; t < bad_trials; ++t) {
    const std::uint64_t seed = derive_seed(82, t);
    caught += detects(inject_bad_data(model, synthesize(model, plan, truth, seed), gross, seed));
  }

  std::size_t identified = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    const std::uint64_t seed = derive_seed(83, t);
    const MeasurementSet set = inject_bad_data(model, synthesize(model, plan, truth, seed), gross, seed);
    const CentralBdpResult r = wls_with_lnrt(model, set, bd);
    identified += !r.report.flagged.empty() && r.report.flagged.front().id == set.bad.front().id;
  }

  const double far = static_cast<double>(alarms) / clean_trials;
  const double pd = static_cast<double>(caught) / bad_trials;
  return {far <= 2.0 * bd.alpha && pd >= 0.99 && identified >= 90,
          fmt("false alarms %zu/%zu = %.4f (<= %.2f), 20-sigma detection %.3f (>= 0.99), LNRT identified %zu/100 "
              "(>= 90)",
              alarms, clean_trials, far, 2.0 * bd.alpha, pd, identified)};
}

Outcome criterion9() {
  const Scenario scenario = load_scenario_file(resolve_fixture("scenarios/ieee14_conforming.json"));
  const MetricTable table = compute_amae(run_scenario(scenario));
  const auto& d = table.at(Strategy::Dphase);
  const auto& l = table.at(Strategy::Lnrt);
  std::size_t wins = 0;
  for (std::size_t t = 0; t < d.max_v.size(); ++t) {
    const double de = std::max(d.max_v[t], d.max_theta[t]);
    const double le = std::max(l.max_v[t], l.max_theta[t]);
    wins += de < le;
  }
  return {wins >= 80 && d.max_v.size() == 100,
          fmt("DPHASE per-trial max error below DSE-LNRT's in %zu/%zu seeds (>= 80)", wins, d.max_v.size())};
}

Outcome criterion10() {
  auto timed = [](const std::string& path, double& secs) {
    const auto t0 = Clock::now();
    const Scenario scenario = load_scenario_file(resolve_fixture(path));
    const Bundle bundle = run_scenario(scenario);
    secs = seconds_since(t0);
    const StrategyOutcome& o = bundle.trials.front().outcomes.front();
    return o.ok() && o.converged;
  };
  double s118 = 0.0, s1062 = 0.0;
  const bool ok118 = timed("scenarios/ieee118_5area.json", s118);
  const bool ok1062 = timed("scenarios/ieee1062_tiled.json", s1062);
  return {ok118 && ok1062 && s118 < 10.0 && s1062 < 120.0,
          fmt("118-bus 5-area DPHASE %.1f s (< 10 s, ok %d), 1062-bus tiled DPHASE %.1f s (< 120 s, ok %d)", s118,
              ok118, s1062, ok1062)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                      criterion6, criterion7, criterion8, criterion9, criterion10};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s  %s  [%.1f s]\n", number, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
