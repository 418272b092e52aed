#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gridse/grid.hpp"
#include "gridse/layout.hpp"
#include "gridse/local_estimators.hpp"
#include "gridse/measurement.hpp"
#include "gridse/powerflow.hpp"
#include "gridse/wls.hpp"

namespace gridse {

inline WlsOptions default_local_options() {
  WlsOptions o;
  o.tolerance = 1e-10;
  o.max_iter = 20;
  return o;
}

struct AdmmOptions {
  double rho = 1.0;  // scaled by the smallest local gain diagonal of each shared entry
  double epsilon = 1e-6;
  int max_iter = 500;
  WlsOptions local = default_local_options();
  bool verify_observability = true;
  bool concurrent = false;  // solve area subproblems on separate threads
};

struct AdmmTrace {
  std::vector<double> primal;
  std::vector<double> dual;
  std::vector<double> objective;                  // global WLS objective at the assembled state
  std::vector<std::vector<double>> disagreement;  // per iteration, per area: max |copy - consensus|

  std::size_t size() const { return primal.size(); }
};

/// Pairs (consumer area, provider area) that exchanged boundary copies.
struct InteractionLog {
  std::set<std::pair<std::size_t, std::size_t>> exchanges;
};

struct DistributedEstimate {
  EstimatorKind kind = EstimatorKind::Scada;
  StateVector state;                        // assembled global state
  std::vector<char> estimated;              // per bus: held by some area
  std::vector<char> direct;                 // per bus: held by its owning area
  std::vector<Eigen::Matrix2d> covariance;  // per bus, polar (theta, V), from the pooled gain
  std::vector<LocalEstimate> areas;
  AdmmTrace trace;
  InteractionLog log;
  double rho_scale = 0.0;  // mean penalty actually applied to shared entries
  int iterations = 0;
  bool converged = false;
};

/// Area that owns a row: its tag when set, otherwise the area of the metering bus.
std::size_t row_owner(const Measurement& m, const Partition& partition);

/// Decentralized WLS: per-area regularized local solves, consensus on copies
/// of shared bus states, scaled dual ascent. Rows are assigned to areas by
/// their `area` tag (metering bus when untagged).
DistributedEstimate run_admm(const NetworkModel& model, const Partition& partition, const MeasurementSet& measurements,
                             EstimatorKind kind, const AdmmOptions& options = {},
                             const StateVector* warm_start = nullptr);

struct ResidualSeries {
  std::vector<double> primal;
  std::vector<double> dual;
  std::vector<double> objective;
};

ResidualSeries consensus_residuals(const AdmmTrace& trace);

}  // namespace gridse
