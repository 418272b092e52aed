#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridse/admm.hpp"
#include "gridse/bad_data.hpp"
#include "gridse/dphase.hpp"
#include "gridse/grid.hpp"
#include "gridse/measurement.hpp"
#include "gridse/powerflow.hpp"

namespace gridse {

/// Directory that relative fixture paths resolve against: $GRIDSE_FIXTURES
/// when set, otherwise the fixture directory the library was built with.
std::string fixture_root();
std::string resolve_fixture(const std::string& path);

/// Loads a case file or a tiling document; a tiling's base path is relative
/// to the document.
NetworkModel load_network_file(const std::string& path);

struct Scenario {
  std::string name;
  std::string network;    // case file, or a tiling document {"base", "copies", "ties"}
  std::string partition;  // empty for tiled networks: one area per copy
  std::string plan;       // for tiled networks, the plan of the base case
  std::optional<NoiseLevels> noise;  // overrides every sigma of the plan
  std::vector<BadDataSpec> bad_data;
  std::vector<Strategy> strategies;
  std::uint64_t seed = 1;
  std::size_t trials = 1;
  std::size_t workers = 1;
  AdmmOptions admm;
  BdOptions bd;
  double huber = 1.5;
};

/// Throws ModelError on a schema violation or when trials < 1.
Scenario load_scenario(const nlohmann::json& document);
Scenario load_scenario_file(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& scenario);

/// The network, partition, plan and power-flow truth of a scenario.
struct Workspace {
  NetworkModel model;
  Partition partition;
  MeasurementPlan plan;
  OperatingPoint truth;
};

/// Resolves and loads every fixture. Tiled networks get P/Q flow pairs at
/// both ends of each tie line appended to the tiled plan.
Workspace prepare_workspace(const Scenario& scenario);

std::uint64_t trial_seed(const Scenario& scenario, std::size_t trial);

/// Synthesized measurements of one trial with the scenario's bad data applied.
MeasurementSet trial_measurements(const Workspace& ws, const Scenario& scenario, std::size_t trial);

StrategyOptions strategy_options(const Scenario& scenario);

struct StrategyOutcome {
  Strategy strategy = Strategy::Dphase;
  StateVector state;
  std::vector<char> estimated;
  int iterations = 0;
  bool converged = false;
  std::string error;
  std::string failed_stage;
  BdReport bad_data;

  bool ok() const { return error.empty(); }
};

StrategyOutcome summarize(const EstimationReport& report);

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<BadDataLabel> injected;
  std::vector<StrategyOutcome> outcomes;  // in scenario strategy order
  std::string error;  // set when the trial could not be synthesized
};

struct Bundle {
  Scenario scenario;
  std::vector<std::string> bus_ids;
  StateVector truth;
  std::vector<TrialRecord> trials;  // by trial index
};

/// Runs every strategy on the same measurement set per trial. Trials run on
/// up to scenario.workers threads; the result does not depend on the count.
/// Stage errors are recorded per trial.
Bundle run_scenario(const Scenario& scenario);
Bundle run_scenario(const Scenario& scenario, const Workspace& ws);

struct StrategyMetrics {
  Strategy strategy = Strategy::Dphase;
  double amae_v = 0.0;
  double amae_theta = 0.0;
  std::vector<double> max_v;      // per trial; NaN for failed trials
  std::vector<double> max_theta;
  std::size_t failures = 0;
  std::size_t true_flags = 0;     // flagged rows that carry injected bad data
  std::size_t false_flags = 0;
  std::size_t missed = 0;         // injected rows never flagged
  double precision() const;       // 1 when nothing was flagged
  double recall() const;          // 1 when nothing was injected
};

struct MetricTable {
  std::string scenario;
  std::vector<StrategyMetrics> strategies;

  const StrategyMetrics& at(Strategy s) const;
};

/// AMAE per strategy over the trials that did not fail. Throws ModelError
/// when an estimate does not cover the truth's buses or no trial is given.
MetricTable compute_amae(std::span<const TrialRecord> trials, std::span<const Strategy> strategies,
                         const StateVector& truth, const std::string& scenario = {});
MetricTable compute_amae(const Bundle& bundle);

/// Maximum absolute errors over buses (V in pu, theta in rad).
std::pair<double, double> max_errors(const StateVector& estimate, const StateVector& truth);

struct SweepRun {
  double epsilon = 0.0;
  std::size_t trial = 0;
  int iterations = 0;
  bool converged = false;
  double error_v = 0.0;
  double error_theta = 0.0;
  double objective = 0.0;
  std::vector<double> objective_trace;
  std::string error;
};

struct SweepRow {
  double epsilon = 0.0;
  double mean_iterations = 0.0;
  std::size_t unconverged = 0;
  double amae_v = 0.0;
  double amae_theta = 0.0;
  double mean_objective = 0.0;
};

struct SweepTable {
  std::string scenario;
  std::vector<SweepRow> rows;  // one per epsilon, in the given order
  std::vector<SweepRun> runs;
};

/// Decentralized hybrid estimation without bad-data processing at each
/// threshold, on the same trials. `epsilons` must be strictly decreasing and
/// positive. Non-convergence is recorded, not thrown.
SweepTable sweep_epsilon(const Scenario& scenario, std::span<const double> epsilons);
SweepTable sweep_epsilon(const Scenario& scenario, const Workspace& ws, std::span<const double> epsilons);

/// True when every run's objective trace never rises after `burn_in`
/// iterations, up to a relative slack.
bool objective_settles(const SweepTable& table, std::size_t burn_in, double slack = 1e-9);

nlohmann::json bundle_to_json(const Bundle& bundle);
Bundle bundle_from_json(const nlohmann::json& document);
nlohmann::json metric_table_to_json(const MetricTable& table);
nlohmann::json sweep_to_json(const SweepTable& table);

/// One row per table: scenario, then "<strategy> V" and "<strategy> theta"
/// per strategy. Only the header when `strategies` is empty.
void write_metric_csv(std::span<const MetricTable> tables, std::span<const Strategy> strategies, std::ostream& out);
/// Long format: trial, strategy, max_v, max_theta, flags, error.
void write_trials_csv(const Bundle& bundle, std::ostream& out);
void write_sweep_csv(const SweepTable& table, std::ostream& out);

enum class ReportFormat { Json, Csv };

ReportFormat parse_report_format(const std::string& text);

/// JSON: the full bundle at `path`. CSV: the metric table at `path` and the
/// per-trial series next to it, named <stem>_trials.csv.
void emit_report(const Bundle& bundle, ReportFormat format, const std::string& path);

}  // namespace gridse
