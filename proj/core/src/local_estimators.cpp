#include "gridse/local_estimators.hpp"

#include <algorithm>
#include <string>

#include <Eigen/SparseCholesky>

#include "gridse/error.hpp"
#include "gridse/observability.hpp"

namespace gridse {

namespace {

std::string bus_list(const NetworkModel& model, const std::vector<std::size_t>& buses) {
  std::string text;
  for (std::size_t i = 0; i < buses.size() && i < 8; ++i) {
    if (i) text += ", ";
    text += model.bus(buses[i]).id;
  }
  if (buses.size() > 8) text += ", ...";
  return text;
}

}  // namespace

bool LocalEstimate::estimates(std::size_t bus) const { return std::binary_search(buses.begin(), buses.end(), bus); }

const Eigen::Matrix2d& LocalEstimate::covariance_of(std::size_t bus) const {
  const auto it = std::lower_bound(buses.begin(), buses.end(), bus);
  if (it == buses.end() || *it != bus) throw Error("local estimate: bus is not estimated");
  return covariance[static_cast<std::size_t>(it - buses.begin())];
}

LocalEstimate wls_estimate(const NetworkModel& model, const MeasurementSet& measurements, const StateVector& init,
                           const WlsOptions& options, std::span<const std::size_t> scope) {
  const auto& rows = measurements.plan.entries;
  std::vector<std::size_t> wanted(scope.begin(), scope.end());
  if (wanted.empty()) {
    for (std::size_t k = 0; k < model.bus_count(); ++k) wanted.push_back(k);
  }
  std::vector<std::size_t> buses = touched_buses(model, rows);
  buses.insert(buses.end(), wanted.begin(), wanted.end());
  std::sort(buses.begin(), buses.end());
  buses.erase(std::unique(buses.begin(), buses.end()), buses.end());

  const ObservabilityReport report = check_rows(model, rows, EstimatorKind::Hybrid, buses);
  std::vector<std::size_t> missing;
  for (std::size_t bus : wanted) {
    if (std::binary_search(report.unobservable.begin(), report.unobservable.end(), bus)) missing.push_back(bus);
  }
  std::sort(missing.begin(), missing.end());
  if (!missing.empty()) throw ObservabilityError("unobservable: buses " + bus_list(model, missing));

  std::optional<std::size_t> reference = options.reference;
  if (!reference && !has_angle_anchor(rows)) {
    reference = std::binary_search(buses.begin(), buses.end(), model.slack()) ? model.slack() : buses.front();
  }
  std::vector<std::size_t> estimated;
  std::set_difference(buses.begin(), buses.end(), report.unobservable.begin(), report.unobservable.end(),
                      std::back_inserter(estimated));
  const StateLayout layout(Coordinates::Polar, model.bus_count(), estimated, reference);

  const NativeState start = NativeState::from_polar(init, Coordinates::Polar);
  const WlsSolution sol = solve_wls(model, layout, rows, measurements.values, start, options);
  if (!sol.converged) {
    throw ConvergenceError("wls: no convergence in " + std::to_string(options.max_iter) + " iterations");
  }

  LocalEstimate est;
  est.kind = std::any_of(rows.begin(), rows.end(), [](const Measurement& m) { return is_phasor_kind(m.kind); })
                 ? EstimatorKind::Hybrid
                 : EstimatorKind::Scada;
  est.buses = estimated;
  est.state = sol.state.to_polar();
  est.covariance = bus_covariances(gain_matrix(model, layout, rows, sol.state), layout);
  est.objective = sol.objective;
  est.iterations = sol.iterations;
  est.converged = true;
  return est;
}

LocalEstimate pmu_linear_estimate(const NetworkModel& model, const MeasurementSet& measurements) {
  std::vector<Measurement> rows;
  std::vector<Eigen::Index> keep;
  const std::vector<std::size_t> estimable = pmu_estimable_buses(model, measurements.plan.entries);
  if (estimable.empty()) throw ObservabilityError("unobservable: the PMU-estimable set is empty");
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const Measurement& m = measurements.plan.entries[i];
    if (!is_phasor_kind(m.kind)) continue;
    const auto touched = touched_buses(model, std::span<const Measurement>(&m, 1));
    const bool inside = std::all_of(touched.begin(), touched.end(), [&](std::size_t b) {
      return std::binary_search(estimable.begin(), estimable.end(), b);
    });
    if (!inside) continue;
    rows.push_back(m);
    keep.push_back(static_cast<Eigen::Index>(i));
  }
  const Eigen::VectorXd z = measurements.values(keep);

  const StateLayout layout(Coordinates::Rectangular, model.bus_count(), estimable);
  NativeState state = NativeState::from_polar(StateVector::flat(model.bus_count()), Coordinates::Rectangular);
  state.first.setZero();
  Eigen::VectorXd h;
  const Eigen::SparseMatrix<double> design = layout_jacobian(model, layout, rows, state, h);
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) w[static_cast<Eigen::Index>(i)] = 1.0 / (rows[i].sigma * rows[i].sigma);
  Eigen::SparseMatrix<double> gain = design.transpose() * w.asDiagonal() * design;
  gain.makeCompressed();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(gain);
  if (ldlt.info() != Eigen::Success) throw ObservabilityError("unobservable: singular PMU gain matrix");
  const Eigen::VectorXd x = ldlt.solve(design.transpose() * (w.asDiagonal() * z));
  layout.scatter(x, state);

  LocalEstimate est;
  est.kind = EstimatorKind::Pmu;
  est.buses = estimable;
  est.state = state.to_polar();
  const Eigen::VectorXd r = z - design * x;
  est.objective = r.dot(w.asDiagonal() * r);
  est.iterations = 1;
  est.converged = true;
  const auto rect = bus_covariances(gain, layout);
  for (std::size_t i = 0; i < estimable.size(); ++i) {
    const auto bus = static_cast<Eigen::Index>(estimable[i]);
    est.covariance.push_back(rectangular_to_polar(rect[i], state.first[bus], state.second[bus]));
  }
  return est;
}

}  // namespace gridse
