#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridse/admm.hpp"
#include "gridse/bad_data.hpp"
#include "gridse/fusion.hpp"
#include "gridse/grid.hpp"
#include "gridse/measurement.hpp"

namespace gridse {

enum class Strategy { Dphase, NoBdp, Lnrt, Rdse };

std::string strategy_name(Strategy s);
/// Accepts the display names and the short forms dphase, no-bdp, lnrt, rdse.
Strategy parse_strategy(const std::string& text);

struct EstimationReport {
  Strategy strategy = Strategy::Dphase;
  StateVector state;
  std::vector<char> estimated;
  std::vector<Eigen::Vector2d> variance;  // per bus (theta, V)
  BdReport bad_data;
  int iterations = 0;  // ADMM iterations summed over all runs
  bool converged = false;
  std::string error;   // set when a stage failed; the other fields hold what was reached
  std::string failed_stage;

  std::optional<DistributedEstimate> scada;
  std::optional<DistributedEstimate> pmu;
  std::optional<DistributedEstimate> hybrid;
  std::optional<ExtendedEstimate> scada_extended;
  std::optional<ExtendedEstimate> pmu_extended;
  std::optional<FusedEstimate> fused;

  bool ok() const { return error.empty(); }
};

enum class FusionRule { Information, PerEntry };

struct DphaseOptions {
  AdmmOptions admm;
  BdOptions bd;
  FusionRule fusion = FusionRule::Information;
  bool cross_validation = true;
  bool concurrent = false;  // run the SCADA and PMU sides on separate threads
};

/// SCADA and PMU decentralized estimation with per-area bad-data processing,
/// cross-validation rounds, re-estimation, extension and fusion.
EstimationReport run_dphase(const NetworkModel& model, const Partition& partition, const MeasurementSet& measurements,
                            const DphaseOptions& options = {});

struct BaselineOptions {
  AdmmOptions admm;
  BdOptions bd;
  double huber = 1.5;  // robust threshold in sigma units
};

/// Hybrid decentralized estimation on every row: plain, with the per-area
/// chi-square / LNRT loop, or with Huber local solves.
EstimationReport run_baseline(Strategy strategy, const NetworkModel& model, const Partition& partition,
                              const MeasurementSet& measurements, const BaselineOptions& options = {});

struct StrategyOptions {
  AdmmOptions admm;
  BdOptions bd;
  double huber = 1.5;
  bool concurrent = false;
};

EstimationReport run_strategy(Strategy strategy, const NetworkModel& model, const Partition& partition,
                              const MeasurementSet& measurements, const StrategyOptions& options = {});

}  // namespace gridse
