#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gridse/grid.hpp"
#include "gridse/measurement.hpp"
#include "gridse/powerflow.hpp"

namespace gridse {

/// Derivatives of one measurement with respect to the two state components
/// of a bus. Polar: (d/dtheta, d/dV). Rectangular: (d/de, d/df).
struct Partial {
  std::size_t bus = 0;
  double first = 0.0;
  double second = 0.0;
};

double evaluate(const NetworkModel& model, const StateVector& state, const Measurement& m);
Eigen::VectorXd evaluate(const NetworkModel& model, const StateVector& state, std::span<const Measurement> rows);
Eigen::VectorXd evaluate_scada(const NetworkModel& model, const StateVector& state, const MeasurementPlan& plan);

/// Value and polar partials of any measurement kind. PMU rows are chained
/// through e = V cos(theta), f = V sin(theta).
double linearize_polar(const NetworkModel& model, const StateVector& state, const Measurement& m,
                       std::vector<Partial>& out);

/// Constant rectangular partials of a phasor row. Throws ModelError for
/// non-phasor kinds.
void linearize_rectangular(const NetworkModel& model, const Measurement& m, std::vector<Partial>& out);

/// Buses whose state enters h(x) of the measurement.
std::vector<std::size_t> measurement_buses(const NetworkModel& model, const Measurement& m);

/// dh/d(theta, V); rows in plan order, columns = non-slack angles in bus
/// order followed by all magnitudes.
Eigen::SparseMatrix<double> scada_jacobian(const NetworkModel& model, const StateVector& state,
                                           const MeasurementPlan& plan);

/// Linear map from (e_1..e_n, f_1..f_n) to phasor rows. Every row of the
/// plan must be a phasor component.
Eigen::SparseMatrix<double> pmu_design_matrix(const NetworkModel& model, const MeasurementPlan& plan);

}  // namespace gridse
