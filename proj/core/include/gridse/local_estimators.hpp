#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gridse/grid.hpp"
#include "gridse/layout.hpp"
#include "gridse/measurement.hpp"
#include "gridse/powerflow.hpp"
#include "gridse/wls.hpp"

namespace gridse {

struct LocalEstimate {
  std::size_t area = kNoIndex;
  EstimatorKind kind = EstimatorKind::Scada;
  std::vector<std::size_t> buses;          // estimated buses, sorted
  StateVector state;                       // full length; meaningful on `buses`
  std::vector<Eigen::Matrix2d> covariance;  // per estimated bus, polar (theta, V)
  double objective = 0.0;                  // J at the estimate
  int iterations = 0;
  bool converged = false;

  bool estimates(std::size_t bus) const;
  const Eigen::Matrix2d& covariance_of(std::size_t bus) const;
};

/// Nonlinear WLS in polar coordinates over `scope` (default: every bus) plus
/// any bus the rows touch. Throws ObservabilityError when a scope bus is not
/// determined and ConvergenceError when Gauss-Newton stalls.
LocalEstimate wls_estimate(const NetworkModel& model, const MeasurementSet& measurements, const StateVector& init,
                           const WlsOptions& options = {}, std::span<const std::size_t> scope = {});

/// One weighted linear solve in rectangular coordinates over the buses the
/// PMU rows make estimable.
LocalEstimate pmu_linear_estimate(const NetworkModel& model, const MeasurementSet& measurements);

}  // namespace gridse
