#include "gridse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "gridse/error.hpp"
#include "gridse/rng.hpp"
#include "gridse/serialization.hpp"
#include "json_util.hpp"

#ifndef GRIDSE_DEFAULT_FIXTURES
#define GRIDSE_DEFAULT_FIXTURES "fixtures"
#endif

namespace gridse {

using nlohmann::json;
using namespace detail;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string strategy_key(Strategy s) {
  switch (s) {
    case Strategy::Dphase:
      return "dphase";
    case Strategy::NoBdp:
      return "no-bdp";
    case Strategy::Lnrt:
      return "lnrt";
    case Strategy::Rdse:
      return "rdse";
  }
  return "dphase";
}

json number_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_from(const json& value) { return value.is_null() ? kNaN : value.get<double>(); }

struct Tiling {
  std::string base;
  std::size_t copies = 0;
  std::vector<TieLine> ties;
};

std::optional<Tiling> read_tiling(const json& doc, const std::string& where) {
  if (!doc.is_object() || !doc.contains("copies")) return std::nullopt;
  Tiling t;
  t.base = string_or(doc, "base", "", where);
  if (t.base.empty()) throw ModelError(where + ": missing field 'base'");
  const double copies = number(doc, "copies", where);
  if (!(copies >= 1.0) || copies != std::floor(copies)) throw ModelError(where + ".copies: must be a positive integer");
  t.copies = static_cast<std::size_t>(copies);
  const json& ties = array_field(doc, "ties", where, true);
  for (std::size_t i = 0; i < ties.size(); ++i) {
    const std::string item = where + ".ties[" + std::to_string(i) + "]";
    TieLine tie;
    tie.from_copy = static_cast<std::size_t>(number(ties[i], "from_copy", item));
    tie.to_copy = static_cast<std::size_t>(number(ties[i], "to_copy", item));
    tie.from_bus = id_field(ties[i], "from_bus", item);
    tie.to_bus = id_field(ties[i], "to_bus", item);
    tie.r = number_or(ties[i], "r", 0.0, item);
    tie.x = number(ties[i], "x", item);
    tie.b = number_or(ties[i], "b", 0.0, item);
    t.ties.push_back(std::move(tie));
  }
  return t;
}

void append_tie_flows(MeasurementPlan& plan, const NetworkModel& model, std::size_t first_tie, const NoiseLevels& noise) {
  std::size_t id = 0;
  for (const Measurement& m : plan.entries) id = std::max(id, m.id + 1);
  for (std::size_t l = first_tie; l < model.branch_count(); ++l) {
    const Branch& br = model.branch(l);
    for (const BranchEnd end : {BranchEnd::From, BranchEnd::To}) {
      for (const MeasurementKind kind : {MeasurementKind::ActiveFlow, MeasurementKind::ReactiveFlow}) {
        Measurement m;
        m.id = id++;
        m.kind = kind;
        m.branch = l;
        m.end = end;
        m.bus = end == BranchEnd::From ? br.from : br.to;
        m.sigma = noise.power;
        m.source = Source::Scada;
        plan.entries.push_back(m);
      }
    }
  }
}

json labels_json(const std::vector<BadDataLabel>& labels) {
  json out = json::array();
  for (const BadDataLabel& b : labels) out.push_back({{"id", b.id}, {"original", b.original}, {"injected", b.injected}});
  return out;
}

std::vector<BadDataLabel> labels_from(const json& doc) {
  std::vector<BadDataLabel> out;
  for (const json& item : doc) {
    BadDataLabel b;
    b.id = item.at("id").get<std::size_t>();
    b.original = item.at("original").get<double>();
    b.injected = item.at("injected").get<double>();
    out.push_back(b);
  }
  return out;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_json(v[i]));
  return out;
}

Eigen::VectorXd vector_from(const json& doc) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) v[static_cast<Eigen::Index>(i)] = number_from(doc[i]);
  return v;
}

template <typename Fn>
void for_each_index(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    }));
  }
  for (auto& job : jobs) job.get();
}

}  // namespace

std::string fixture_root() {
  if (const char* env = std::getenv("GRIDSE_FIXTURES"); env && *env) return env;
  return GRIDSE_DEFAULT_FIXTURES;
}

std::string resolve_fixture(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(fixture_root()) / p).string();
}

NetworkModel load_network_file(const std::string& path) {
  const json doc = read_json_file(path, "case file");
  if (const std::optional<Tiling> tiling = read_tiling(doc, path)) {
    const std::filesystem::path base_path = std::filesystem::path(path).parent_path() / tiling->base;
    return tile_network(load_case_file(base_path.string()), tiling->copies, tiling->ties);
  }
  return load_case(doc);
}

Scenario load_scenario(const json& document) {
  const std::string where = "scenario";
  if (!document.is_object()) throw ModelError(where + ": expected an object");
  Scenario s;
  s.name = string_or(document, "name", "", where);
  s.network = string_or(document, "case", "", where);
  if (s.network.empty()) throw ModelError(where + ": missing field 'case'");
  s.partition = string_or(document, "partition", "", where);
  s.plan = string_or(document, "plan", "", where);
  if (s.plan.empty()) throw ModelError(where + ": missing field 'plan'");
  if (document.contains("noise")) s.noise = noise_from_json(document.at("noise"));
  if (document.contains("bad_data")) s.bad_data = load_bad_data(document.at("bad_data"));
  const json& strategies = array_field(document, "strategies", where, true);
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    if (!strategies[i].is_string()) throw ModelError(where + ".strategies[" + std::to_string(i) + "]: expected a string");
    try {
      s.strategies.push_back(parse_strategy(strategies[i].get<std::string>()));
    } catch (const Error& e) {
      throw ModelError(where + ".strategies[" + std::to_string(i) + "]: " + e.what());
    }
  }
  const double seed = number_or(document, "seed", 1.0, where);
  if (!(seed >= 0.0) || seed != std::floor(seed)) throw ModelError(where + ".seed: must be a non-negative integer");
  s.seed = document.contains("seed") && document.at("seed").is_number_unsigned() ? document.at("seed").get<std::uint64_t>()
                                                                                 : static_cast<std::uint64_t>(seed);
  const double trials = number_or(document, "trials", 1.0, where);
  if (!(trials >= 1.0) || trials != std::floor(trials)) throw ModelError(where + ".trials: must be at least 1");
  s.trials = static_cast<std::size_t>(trials);
  const double workers = number_or(document, "workers", 1.0, where);
  if (!(workers >= 1.0) || workers != std::floor(workers)) throw ModelError(where + ".workers: must be at least 1");
  s.workers = static_cast<std::size_t>(workers);
  if (document.contains("admm")) s.admm = admm_options_from_json(document.at("admm"), s.admm);
  if (document.contains("bdp")) s.bd = bd_options_from_json(document.at("bdp"), s.bd);
  s.huber = number_or(document, "huber", s.huber, where);
  if (!(s.huber > 0.0)) throw ModelError(where + ".huber: must be positive");
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  return load_scenario(read_json_file(resolve_fixture(path), "scenario file"));
}

json scenario_to_json(const Scenario& s) {
  json strategies = json::array();
  for (Strategy st : s.strategies) strategies.push_back(strategy_key(st));
  json out = {{"name", s.name}, {"case", s.network}, {"plan", s.plan}};
  if (!s.partition.empty()) out["partition"] = s.partition;
  if (s.noise) out["noise"] = noise_to_json(*s.noise);
  out["bad_data"] = bad_data_to_json(s.bad_data);
  out["strategies"] = std::move(strategies);
  out["seed"] = s.seed;
  out["trials"] = s.trials;
  out["workers"] = s.workers;
  out["admm"] = admm_options_to_json(s.admm);
  out["bdp"] = bd_options_to_json(s.bd);
  out["huber"] = s.huber;
  return out;
}

Workspace prepare_workspace(const Scenario& scenario) {
  const std::string network_path = resolve_fixture(scenario.network);
  const json network_doc = read_json_file(network_path, "case file");
  const NoiseLevels noise = scenario.noise.value_or(NoiseLevels{});
  if (const std::optional<Tiling> tiling = read_tiling(network_doc, scenario.network)) {
    const std::filesystem::path base_path = std::filesystem::path(network_path).parent_path() / tiling->base;
    const NetworkModel base = load_case_file(base_path.string());
    NetworkModel model = tile_network(base, tiling->copies, tiling->ties);
    Partition partition = scenario.partition.empty()
                              ? tiled_partition(model, tiling->copies, base.bus_count())
                              : load_partition_file(resolve_fixture(scenario.partition), model);
    const MeasurementPlan base_plan = load_plan_file(resolve_fixture(scenario.plan), base, nullptr, noise);
    MeasurementPlan plan = tile_plan(base_plan, base, model, tiling->copies);
    append_tie_flows(plan, model, tiling->copies * base.branch_count(), noise);
    if (scenario.noise) apply_noise_levels(plan, *scenario.noise);
    validate_plan(plan, model);
    assign_areas(plan, partition);
    OperatingPoint truth = solve_power_flow(model);
    return Workspace{std::move(model), std::move(partition), std::move(plan), std::move(truth)};
  }
  NetworkModel model = load_case(network_doc);
  Partition partition = scenario.partition.empty() ? Partition::single_area(model)
                                                   : load_partition_file(resolve_fixture(scenario.partition), model);
  MeasurementPlan plan = load_plan_file(resolve_fixture(scenario.plan), model, &partition, noise);
  if (scenario.noise) apply_noise_levels(plan, *scenario.noise);
  OperatingPoint truth = solve_power_flow(model);
  return Workspace{std::move(model), std::move(partition), std::move(plan), std::move(truth)};
}

std::uint64_t trial_seed(const Scenario& scenario, std::size_t trial) { return derive_seed(scenario.seed, trial); }

MeasurementSet trial_measurements(const Workspace& ws, const Scenario& scenario, std::size_t trial) {
  const std::uint64_t seed = trial_seed(scenario, trial);
  MeasurementSet set = synthesize(ws.model, ws.plan, ws.truth, seed);
  if (!scenario.bad_data.empty()) set = inject_bad_data(ws.model, set, scenario.bad_data, seed);
  return set;
}

StrategyOptions strategy_options(const Scenario& scenario) {
  StrategyOptions o;
  o.admm = scenario.admm;
  o.bd = scenario.bd;
  o.huber = scenario.huber;
  return o;
}

StrategyOutcome summarize(const EstimationReport& report) {
  StrategyOutcome o;
  o.strategy = report.strategy;
  o.state = report.state;
  o.estimated = report.estimated;
  o.iterations = report.iterations;
  o.converged = report.converged;
  o.error = report.error;
  o.failed_stage = report.failed_stage;
  o.bad_data = report.bad_data;
  return o;
}

Bundle run_scenario(const Scenario& scenario) { return run_scenario(scenario, prepare_workspace(scenario)); }

Bundle run_scenario(const Scenario& scenario, const Workspace& ws) {
  if (scenario.trials < 1) throw ModelError("scenario.trials: must be at least 1");
  Bundle bundle;
  bundle.scenario = scenario;
  for (const Bus& b : ws.model.buses()) bundle.bus_ids.push_back(b.id);
  bundle.truth = ws.truth.state;
  bundle.trials.resize(scenario.trials);
  const StrategyOptions options = strategy_options(scenario);
  for_each_index(scenario.trials, scenario.workers, [&](std::size_t t) {
    TrialRecord& rec = bundle.trials[t];
    rec.trial = t;
    rec.seed = trial_seed(scenario, t);
    MeasurementSet set;
    try {
      set = trial_measurements(ws, scenario, t);
    } catch (const Error& e) {
      rec.error = e.what();
      for (Strategy s : scenario.strategies) {
        StrategyOutcome o;
        o.strategy = s;
        o.state = StateVector::flat(ws.model.bus_count());
        o.error = e.what();
        o.failed_stage = "measure";
        rec.outcomes.push_back(std::move(o));
      }
      return;
    }
    rec.injected = set.bad;
    for (Strategy s : scenario.strategies) {
      rec.outcomes.push_back(summarize(run_strategy(s, ws.model, ws.partition, set, options)));
    }
  });
  return bundle;
}

double StrategyMetrics::precision() const {
  const std::size_t flagged = true_flags + false_flags;
  return flagged == 0 ? 1.0 : static_cast<double>(true_flags) / static_cast<double>(flagged);
}

double StrategyMetrics::recall() const {
  const std::size_t injected = true_flags + missed;
  return injected == 0 ? 1.0 : static_cast<double>(true_flags) / static_cast<double>(injected);
}

const StrategyMetrics& MetricTable::at(Strategy s) const {
  for (const StrategyMetrics& m : strategies) {
    if (m.strategy == s) return m;
  }
  throw Error("metric table has no row for " + strategy_name(s));
}

std::pair<double, double> max_errors(const StateVector& estimate, const StateVector& truth) {
  if (estimate.magnitude.size() != truth.magnitude.size() || estimate.angle.size() != truth.angle.size()) {
    throw ModelError("metrics: estimate and truth cover different buses");
  }
  if (truth.magnitude.size() == 0) return {0.0, 0.0};
  return {(estimate.magnitude - truth.magnitude).cwiseAbs().maxCoeff(),
          (estimate.angle - truth.angle).cwiseAbs().maxCoeff()};
}

MetricTable compute_amae(std::span<const TrialRecord> trials, std::span<const Strategy> strategies,
                         const StateVector& truth, const std::string& scenario) {
  if (trials.empty()) throw ModelError("metrics: no trials");
  MetricTable table;
  table.scenario = scenario;
  for (Strategy s : strategies) {
    StrategyMetrics m;
    m.strategy = s;
    double sum_v = 0.0;
    double sum_t = 0.0;
    std::size_t used = 0;
    for (const TrialRecord& rec : trials) {
      const auto it = std::find_if(rec.outcomes.begin(), rec.outcomes.end(),
                                   [&](const StrategyOutcome& o) { return o.strategy == s; });
      if (it == rec.outcomes.end()) throw ModelError("metrics: trial " + std::to_string(rec.trial) + " lacks " + strategy_name(s));
      if (!it->ok()) {
        ++m.failures;
        m.max_v.push_back(kNaN);
        m.max_theta.push_back(kNaN);
        continue;
      }
      const auto [ev, et] = max_errors(it->state, truth);
      m.max_v.push_back(ev);
      m.max_theta.push_back(et);
      sum_v += ev;
      sum_t += et;
      ++used;

      std::set<std::size_t> injected;
      for (const BadDataLabel& b : rec.injected) injected.insert(b.id);
      std::set<std::size_t> flagged;
      for (const Flag& f : it->bad_data.flagged) flagged.insert(f.id);
      for (std::size_t id : flagged) (injected.count(id) ? m.true_flags : m.false_flags) += 1;
      for (std::size_t id : injected) m.missed += flagged.count(id) ? 0 : 1;
    }
    m.amae_v = used ? sum_v / static_cast<double>(used) : kNaN;
    m.amae_theta = used ? sum_t / static_cast<double>(used) : kNaN;
    table.strategies.push_back(std::move(m));
  }
  return table;
}

MetricTable compute_amae(const Bundle& bundle) {
  return compute_amae(bundle.trials, bundle.scenario.strategies, bundle.truth, bundle.scenario.name);
}

SweepTable sweep_epsilon(const Scenario& scenario, std::span<const double> epsilons) {
  return sweep_epsilon(scenario, prepare_workspace(scenario), epsilons);
}

SweepTable sweep_epsilon(const Scenario& scenario, const Workspace& ws, std::span<const double> epsilons) {
  if (epsilons.empty()) throw Error("sweep: no thresholds");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw Error("sweep: thresholds must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw Error("sweep: thresholds must be strictly decreasing");
  }
  std::vector<MeasurementSet> sets;
  for (std::size_t t = 0; t < scenario.trials; ++t) sets.push_back(trial_measurements(ws, scenario, t));

  SweepTable table;
  table.scenario = scenario.name;
  table.runs.resize(epsilons.size() * scenario.trials);
  for_each_index(table.runs.size(), scenario.workers, [&](std::size_t k) {
    const std::size_t e = k / scenario.trials;
    const std::size_t t = k % scenario.trials;
    SweepRun& run = table.runs[k];
    run.epsilon = epsilons[e];
    run.trial = t;
    AdmmOptions admm = scenario.admm;
    admm.epsilon = epsilons[e];
    try {
      const DistributedEstimate est = run_admm(ws.model, ws.partition, sets[t], EstimatorKind::Hybrid, admm);
      run.iterations = est.iterations;
      run.converged = est.converged;
      std::tie(run.error_v, run.error_theta) = max_errors(est.state, ws.truth.state);
      run.objective_trace = est.trace.objective;
      run.objective = run.objective_trace.empty() ? kNaN : run.objective_trace.back();
    } catch (const Error& err) {
      run.error = err.what();
      run.error_v = run.error_theta = run.objective = kNaN;
    }
  });
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    SweepRow row;
    row.epsilon = epsilons[e];
    std::size_t used = 0;
    for (std::size_t t = 0; t < scenario.trials; ++t) {
      const SweepRun& run = table.runs[e * scenario.trials + t];
      if (!run.converged) ++row.unconverged;
      if (!run.error.empty()) continue;
      row.mean_iterations += run.iterations;
      row.amae_v += run.error_v;
      row.amae_theta += run.error_theta;
      row.mean_objective += run.objective;
      ++used;
    }
    const double n = used ? static_cast<double>(used) : kNaN;
    row.mean_iterations /= n;
    row.amae_v /= n;
    row.amae_theta /= n;
    row.mean_objective /= n;
    table.rows.push_back(row);
  }
  return table;
}

bool objective_settles(const SweepTable& table, std::size_t burn_in, double slack) {
  for (const SweepRun& run : table.runs) {
    const auto& f = run.objective_trace;
    for (std::size_t i = std::max<std::size_t>(burn_in, 1); i < f.size(); ++i) {
      if (f[i] > f[i - 1] + slack * std::abs(f[i - 1])) return false;
    }
  }
  return true;
}

json bundle_to_json(const Bundle& bundle) {
  json trials = json::array();
  for (const TrialRecord& rec : bundle.trials) {
    json outcomes = json::array();
    for (const StrategyOutcome& o : rec.outcomes) {
      json estimated = json::array();
      for (char c : o.estimated) estimated.push_back(c ? 1 : 0);
      json doc = {{"strategy", strategy_key(o.strategy)},
                  {"v", vector_json(o.state.magnitude)},
                  {"theta", vector_json(o.state.angle)},
                  {"estimated", std::move(estimated)},
                  {"iterations", o.iterations},
                  {"converged", o.converged},
                  {"bad_data", bd_report_to_json(o.bad_data)}};
      if (!o.ok()) {
        doc["error"] = o.error;
        doc["failed_stage"] = o.failed_stage;
      }
      outcomes.push_back(std::move(doc));
    }
    json doc = {{"trial", rec.trial}, {"seed", rec.seed}, {"injected", labels_json(rec.injected)},
                {"outcomes", std::move(outcomes)}};
    if (!rec.error.empty()) doc["error"] = rec.error;
    trials.push_back(std::move(doc));
  }
  return {{"scenario", scenario_to_json(bundle.scenario)},
          {"bus", bundle.bus_ids},
          {"truth", {{"v", vector_json(bundle.truth.magnitude)}, {"theta", vector_json(bundle.truth.angle)}}},
          {"trials", std::move(trials)}};
}

Bundle bundle_from_json(const json& document) {
  Bundle b;
  try {
    b.scenario = load_scenario(document.at("scenario"));
    b.bus_ids = document.at("bus").get<std::vector<std::string>>();
    b.truth.magnitude = vector_from(document.at("truth").at("v"));
    b.truth.angle = vector_from(document.at("truth").at("theta"));
    for (const json& doc : document.at("trials")) {
      TrialRecord rec;
      rec.trial = doc.at("trial").get<std::size_t>();
      rec.seed = doc.at("seed").get<std::uint64_t>();
      rec.injected = labels_from(doc.at("injected"));
      rec.error = doc.value("error", "");
      for (const json& od : doc.at("outcomes")) {
        StrategyOutcome o;
        o.strategy = parse_strategy(od.at("strategy").get<std::string>());
        o.state.magnitude = vector_from(od.at("v"));
        o.state.angle = vector_from(od.at("theta"));
        for (const json& c : od.at("estimated")) o.estimated.push_back(static_cast<char>(c.get<int>()));
        o.iterations = od.at("iterations").get<int>();
        o.converged = od.at("converged").get<bool>();
        o.bad_data = bd_report_from_json(od.at("bad_data"));
        o.error = od.value("error", "");
        o.failed_stage = od.value("failed_stage", "");
        rec.outcomes.push_back(std::move(o));
      }
      b.trials.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ModelError(std::string("bundle: ") + e.what());
  }
  if (b.truth.magnitude.size() != static_cast<Eigen::Index>(b.bus_ids.size())) {
    throw ModelError("bundle: truth does not match the bus list");
  }
  return b;
}

json metric_table_to_json(const MetricTable& table) {
  json rows = json::array();
  for (const StrategyMetrics& m : table.strategies) {
    json max_v = json::array();
    json max_t = json::array();
    for (double x : m.max_v) max_v.push_back(number_json(x));
    for (double x : m.max_theta) max_t.push_back(number_json(x));
    rows.push_back({{"strategy", strategy_name(m.strategy)},
                    {"amae_v", number_json(m.amae_v)},
                    {"amae_theta", number_json(m.amae_theta)},
                    {"failures", m.failures},
                    {"precision", m.precision()},
                    {"recall", m.recall()},
                    {"max_v", std::move(max_v)},
                    {"max_theta", std::move(max_t)}});
  }
  return {{"scenario", table.scenario}, {"strategies", std::move(rows)}};
}

json sweep_to_json(const SweepTable& table) {
  json rows = json::array();
  for (const SweepRow& r : table.rows) {
    rows.push_back({{"epsilon", r.epsilon},
                    {"mean_iterations", number_json(r.mean_iterations)},
                    {"unconverged", r.unconverged},
                    {"amae_v", number_json(r.amae_v)},
                    {"amae_theta", number_json(r.amae_theta)},
                    {"mean_objective", number_json(r.mean_objective)}});
  }
  json runs = json::array();
  for (const SweepRun& r : table.runs) {
    json doc = {{"epsilon", r.epsilon},
                {"trial", r.trial},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"error_v", number_json(r.error_v)},
                {"error_theta", number_json(r.error_theta)},
                {"objective", number_json(r.objective)},
                {"objective_trace", r.objective_trace}};
    if (!r.error.empty()) doc["error"] = r.error;
    runs.push_back(std::move(doc));
  }
  return {{"scenario", table.scenario}, {"rows", std::move(rows)}, {"runs", std::move(runs)}};
}

void write_metric_csv(std::span<const MetricTable> tables, std::span<const Strategy> strategies, std::ostream& out) {
  out << "scenario";
  for (Strategy s : strategies) out << ',' << strategy_name(s) << " V," << strategy_name(s) << " theta";
  out << '\n';
  if (strategies.empty()) return;
  out << std::setprecision(10);
  for (const MetricTable& t : tables) {
    out << t.scenario;
    for (Strategy s : strategies) {
      const StrategyMetrics& m = t.at(s);
      out << ',' << m.amae_v << ',' << m.amae_theta;
    }
    out << '\n';
  }
}

void write_trials_csv(const Bundle& bundle, std::ostream& out) {
  out << "trial,strategy,max_v,max_theta,flags,error\n" << std::setprecision(10);
  for (const TrialRecord& rec : bundle.trials) {
    for (const StrategyOutcome& o : rec.outcomes) {
      out << rec.trial << ',' << strategy_name(o.strategy) << ',';
      if (o.ok()) {
        const auto [ev, et] = max_errors(o.state, bundle.truth);
        out << ev << ',' << et;
      } else {
        out << ',';
      }
      std::string error = o.error;
      std::replace(error.begin(), error.end(), ',', ';');
      std::replace(error.begin(), error.end(), '\n', ' ');
      out << ',' << o.bad_data.flagged.size() << ',' << error << '\n';
    }
  }
}

void write_sweep_csv(const SweepTable& table, std::ostream& out) {
  out << "epsilon,mean_iterations,unconverged,amae_v,amae_theta,mean_objective\n" << std::setprecision(10);
  for (const SweepRow& r : table.rows) {
    out << r.epsilon << ',' << r.mean_iterations << ',' << r.unconverged << ',' << r.amae_v << ',' << r.amae_theta << ','
        << r.mean_objective << '\n';
  }
}

ReportFormat parse_report_format(const std::string& text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  throw Error("unknown report format '" + text + "' (expected json or csv)");
}

void emit_report(const Bundle& bundle, ReportFormat format, const std::string& path) {
  const std::filesystem::path p(path);
  auto open = [](const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(file.string() + ": cannot open for writing");
    return out;
  };
  if (format == ReportFormat::Json) {
    std::ofstream out = open(p);
    out << bundle_to_json(bundle).dump(1) << '\n';
    if (!out) throw Error(path + ": write failed");
    return;
  }
  const MetricTable table = compute_amae(bundle);
  {
    std::ofstream out = open(p);
    write_metric_csv(std::span<const MetricTable>(&table, 1), bundle.scenario.strategies, out);
    if (!out) throw Error(path + ": write failed");
  }
  const std::filesystem::path trials = p.parent_path() / (p.stem().string() + "_trials.csv");
  std::ofstream out = open(trials);
  write_trials_csv(bundle, out);
  if (!out) throw Error(trials.string() + ": write failed");
}

}  // namespace gridse
