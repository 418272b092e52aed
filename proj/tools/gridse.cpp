#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridse/dphase.hpp"
#include "gridse/error.hpp"
#include "gridse/harness.hpp"
#include "gridse/layout.hpp"
#include "gridse/serialization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridse;

namespace {

constexpr int kBatchFailure = 1;
constexpr int kConfigError = 2;

// Thrown for problems with the invocation itself: missing inputs, unreadable
// configuration.
struct ConfigError : Error {
  using Error::Error;
};

struct Inputs {
  std::string config;
  std::string case_file;
  std::string plan;
  std::string partition;
  std::string measurements;
  std::string bad_data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::size_t trial = 0;
  std::optional<std::size_t> workers;
  std::string out;
  std::string out_dir;
};

std::string user_path(const std::string& path) {
  if (path.empty()) return path;
  if (fs::exists(path)) return fs::absolute(path).string();
  return path;
}

void add_network_flags(CLI::App* cmd, Inputs& in, bool with_plan) {
  cmd->add_option("--config", in.config, "Scenario JSON");
  cmd->add_option("--case", in.case_file, "Case JSON or tiling document");
  if (with_plan) {
    cmd->add_option("--plan", in.plan, "Measurement plan JSON");
    cmd->add_option("--partition", in.partition, "Partition JSON");
  }
}

void add_batch_flags(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--seed", in.seed, "Master seed");
  cmd->add_option("--trials", in.trials, "Trial count")->check(CLI::PositiveNumber);
  cmd->add_option("--workers", in.workers, "Concurrent trials")->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", in.out_dir, "Output directory");
}

void add_measurement_flags(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--measurements", in.measurements, "Measurement set JSON (otherwise synthesized)");
  cmd->add_option("--bad-data", in.bad_data, "Bad-data spec JSON applied to synthesized data");
  cmd->add_option("--trial", in.trial, "Trial index whose seed is used for synthesis");
}

template <typename Fn>
auto parse_flag(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

Scenario scenario_from(const Inputs& in) {
  Scenario s;
  if (!in.config.empty()) {
    s = load_scenario_file(user_path(in.config));
  }
  if (!in.case_file.empty()) s.network = user_path(in.case_file);
  if (!in.plan.empty()) s.plan = user_path(in.plan);
  if (!in.partition.empty()) s.partition = user_path(in.partition);
  if (!in.bad_data.empty()) {
    std::ifstream f(user_path(in.bad_data));
    if (!f) throw ConfigError(in.bad_data + ": cannot open bad-data spec");
    s.bad_data = load_bad_data(json::parse(f));
  }
  if (in.seed) s.seed = *in.seed;
  if (in.trials) s.trials = *in.trials;
  if (in.workers) s.workers = *in.workers;
  if (s.network.empty()) throw ConfigError("a case is required (--case or --config)");
  if (s.plan.empty()) throw ConfigError("a measurement plan is required (--plan or --config)");
  if (s.name.empty()) s.name = fs::path(s.network).stem().string();
  return s;
}

MeasurementSet measurements_for(const Workspace& ws, const Scenario& s, const Inputs& in) {
  if (in.measurements.empty()) return trial_measurements(ws, s, in.trial);
  std::ifstream f(user_path(in.measurements));
  if (!f) throw ConfigError(in.measurements + ": cannot open measurement set");
  MeasurementSet set = measurement_set_from_json(json::parse(f), ws.model);
  assign_areas(set.plan, ws.partition);
  return set;
}

void write_json(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(1) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out << doc.dump(1) << '\n';
}

fs::path output_dir(const Inputs& in) {
  const fs::path dir = in.out_dir.empty() ? fs::path(".") : fs::path(in.out_dir);
  fs::create_directories(dir);
  return dir;
}

void print_table(const MetricTable& table) {
  std::cout << "scenario " << table.scenario << "\n";
  std::cout << "strategy             AMAE V (1e-3)  AMAE theta (1e-3)  failures  precision  recall\n";
  for (const StrategyMetrics& m : table.strategies) {
    std::printf("%-20s %14.4f %18.4f %9zu %10.3f %7.3f\n", strategy_name(m.strategy).c_str(), m.amae_v * 1e3,
                m.amae_theta * 1e3, m.failures, m.precision(), m.recall());
  }
}

int run_powerflow(const Inputs& in, double tol, int max_iter) {
  if (in.case_file.empty() && in.config.empty()) throw ConfigError("powerflow needs --case or --config");
  const std::string path = in.case_file.empty() ? resolve_fixture(scenario_from(in).network) : user_path(in.case_file);
  const NetworkModel model = load_network_file(path);
  PowerFlowOptions opts;
  opts.tolerance = tol;
  opts.max_iter = max_iter;
  const OperatingPoint op = solve_power_flow(model, opts);
  write_json(operating_point_to_json(op, model), in.out);
  return 0;
}

int run_measure(const Inputs& in) {
  const Scenario s = scenario_from(in);
  const Workspace ws = prepare_workspace(s);
  write_json(measurement_set_to_json(trial_measurements(ws, s, in.trial), ws.model), in.out);
  return 0;
}

int run_dse(const Inputs& in, const std::string& kind_text, std::optional<double> rho, std::optional<double> eps,
            std::optional<int> max_iter) {
  const Scenario s = scenario_from(in);
  const Workspace ws = prepare_workspace(s);
  const EstimatorKind kind = parse_flag([&] { return parse_estimator(kind_text); });
  AdmmOptions admm = s.admm;
  if (rho) admm.rho = *rho;
  if (eps) admm.epsilon = *eps;
  if (max_iter) admm.max_iter = *max_iter;
  const MeasurementSet set = measurements_for(ws, s, in);
  const DistributedEstimate est = run_admm(ws.model, ws.partition, set, kind, admm);
  write_json(distributed_estimate_to_json(est, ws.model), in.out);
  return est.converged ? 0 : kBatchFailure;
}

int run_single(const Inputs& in, Strategy strategy) {
  const Scenario s = scenario_from(in);
  const Workspace ws = prepare_workspace(s);
  const MeasurementSet set = measurements_for(ws, s, in);
  const EstimationReport report = run_strategy(strategy, ws.model, ws.partition, set, strategy_options(s));
  json doc = estimation_report_to_json(report, ws.model);
  json injected = json::array();
  for (const BadDataLabel& b : set.bad) injected.push_back(b.id);
  doc["injected"] = std::move(injected);
  const auto [ev, et] = max_errors(report.state, ws.truth.state);
  doc["max_error"] = {{"v", ev}, {"theta", et}};
  write_json(doc, in.out);
  if (!report.ok()) std::cerr << "stage " << report.failed_stage << " failed: " << report.error << "\n";
  return report.ok() ? 0 : kBatchFailure;
}

int run_batch(const Inputs& in) {
  if (in.config.empty()) throw ConfigError("run needs --config");
  const Scenario s = scenario_from(in);
  if (s.strategies.empty()) throw ConfigError("scenario lists no strategies");
  const Bundle bundle = run_scenario(s);
  const fs::path dir = output_dir(in);
  emit_report(bundle, ReportFormat::Json, (dir / (s.name + ".json")).string());
  emit_report(bundle, ReportFormat::Csv, (dir / (s.name + ".csv")).string());
  const MetricTable table = compute_amae(bundle);
  print_table(table);
  bool batch_failed = false;
  for (const StrategyMetrics& m : table.strategies) {
    if (m.failures == s.trials) {
      std::cerr << strategy_name(m.strategy) << " failed in every trial\n";
      batch_failed = true;
    } else if (m.failures > 0) {
      std::cerr << strategy_name(m.strategy) << " failed in " << m.failures << " of " << s.trials << " trials\n";
    }
  }
  return batch_failed ? kBatchFailure : 0;
}

int run_sweep(const Inputs& in, std::vector<double> eps) {
  if (in.config.empty()) throw ConfigError("sweep-eps needs --config");
  const Scenario s = scenario_from(in);
  SweepTable table;
  try {
    table = sweep_epsilon(s, eps);
  } catch (const ModelError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = output_dir(in);
  write_json(sweep_to_json(table), (dir / (s.name + "_sweep.json")).string());
  std::ofstream csv(dir / (s.name + "_sweep.csv"));
  write_sweep_csv(table, csv);
  write_sweep_csv(table, std::cout);
  for (const SweepRow& r : table.rows) {
    if (r.unconverged == s.trials) return kBatchFailure;
  }
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& format, const std::string& out) {
  const ReportFormat fmt = parse_flag([&] { return parse_report_format(format); });
  std::vector<MetricTable> tables;
  std::vector<Strategy> strategies;
  for (const std::string& path : inputs) {
    std::ifstream f(path);
    if (!f) throw ConfigError(path + ": cannot open bundle");
    const Bundle b = bundle_from_json(json::parse(f));
    tables.push_back(compute_amae(b));
    for (Strategy s : b.scenario.strategies) {
      if (std::find(strategies.begin(), strategies.end(), s) == strategies.end()) strategies.push_back(s);
    }
  }
  for (const MetricTable& t : tables) {
    for (Strategy s : strategies) {
      try {
        t.at(s);
      } catch (const Error&) {
        throw ConfigError("bundle " + t.scenario + " lacks " + strategy_name(s));
      }
    }
  }
  if (fmt == ReportFormat::Json) {
    json doc = json::array();
    for (const MetricTable& t : tables) doc.push_back(metric_table_to_json(t));
    write_json(doc, out);
    return 0;
  }
  if (out.empty() || out == "-") {
    write_metric_csv(tables, strategies, std::cout);
    return 0;
  }
  std::ofstream f(out);
  if (!f) throw Error(out + ": cannot open for writing");
  write_metric_csv(tables, strategies, f);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized hybrid SCADA/PMU state estimation"};
  app.require_subcommand(1);
  Inputs in;

  auto* pf = app.add_subcommand("powerflow", "Solve the AC power flow of a case");
  add_network_flags(pf, in, false);
  double tol = 1e-10;
  int pf_iter = 50;
  pf->add_option("--tol", tol, "Mismatch tolerance (pu)");
  pf->add_option("--max-iter", pf_iter, "Newton iteration limit");
  pf->add_option("--out", in.out, "Output JSON (stdout when omitted)");

  auto* measure = app.add_subcommand("measure", "Synthesize a measurement set");
  add_network_flags(measure, in, true);
  measure->add_option("--seed", in.seed, "Master seed");
  measure->add_option("--trial", in.trial, "Trial index");
  measure->add_option("--bad-data", in.bad_data, "Bad-data spec JSON");
  measure->add_option("--out", in.out, "Output JSON (stdout when omitted)");

  auto* dse = app.add_subcommand("dse", "Decentralized estimation of one estimator kind");
  add_network_flags(dse, in, true);
  add_measurement_flags(dse, in);
  dse->add_option("--seed", in.seed, "Master seed");
  std::string kind = "scada";
  std::optional<double> rho, eps;
  std::optional<int> dse_iter;
  dse->add_option("--kind", kind, "scada, pmu or hybrid");
  dse->add_option("--rho", rho, "Penalty multiplier")->check(CLI::PositiveNumber);
  dse->add_option("--eps", eps, "Consensus threshold")->check(CLI::PositiveNumber);
  dse->add_option("--max-iter", dse_iter, "Iteration limit")->check(CLI::PositiveNumber);
  dse->add_option("--out", in.out, "Output JSON (stdout when omitted)");

  auto* dphase = app.add_subcommand("dphase", "DPHASE on one measurement set");
  add_network_flags(dphase, in, true);
  add_measurement_flags(dphase, in);
  dphase->add_option("--scenario", in.config, "Scenario JSON (alias of --config)");
  dphase->add_option("--seed", in.seed, "Master seed");
  dphase->add_option("--out", in.out, "Output JSON (stdout when omitted)");

  auto* bdp = app.add_subcommand("bdp", "One strategy on one measurement set");
  add_network_flags(bdp, in, true);
  add_measurement_flags(bdp, in);
  std::string strategy = "dphase";
  bdp->add_option("--strategy", strategy, "dphase, no-bdp, lnrt or rdse");
  bdp->add_option("--seed", in.seed, "Master seed");
  bdp->add_option("--out", in.out, "Output JSON (stdout when omitted)");

  auto* run = app.add_subcommand("run", "Monte Carlo batch of a scenario");
  run->add_option("--config", in.config, "Scenario JSON")->required();
  add_batch_flags(run, in);

  auto* sweep = app.add_subcommand("sweep-eps", "Convergence-threshold sweep");
  sweep->add_option("--config", in.config, "Scenario JSON")->required();
  add_batch_flags(sweep, in);
  std::vector<double> eps_list = {1e-3, 1e-5, 1e-7};
  sweep->add_option("--eps", eps_list, "Thresholds, strictly decreasing")->delimiter(',');

  auto* report = app.add_subcommand("report", "Metric table from saved bundles");
  std::vector<std::string> bundles;
  std::string format = "csv";
  report->add_option("--in", bundles, "Bundle JSON files")->required()->check(CLI::ExistingFile);
  report->add_option("--format", format, "csv or json");
  report->add_option("--out", in.out, "Output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (pf->parsed()) return run_powerflow(in, tol, pf_iter);
    if (measure->parsed()) return run_measure(in);
    if (dse->parsed()) return run_dse(in, kind, rho, eps, dse_iter);
    if (dphase->parsed()) return run_single(in, Strategy::Dphase);
    if (bdp->parsed()) return run_single(in, parse_flag([&] { return parse_strategy(strategy); }));
    if (run->parsed()) return run_batch(in);
    if (sweep->parsed()) return run_sweep(in, eps_list);
    if (report->parsed()) return run_report(bundles, format, in.out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBatchFailure;
  }
  return 0;
}
