#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gridse/grid.hpp"
#include "gridse/measurement.hpp"
#include "gridse/powerflow.hpp"

namespace gridse {

enum class EstimatorKind { Scada, Pmu, Hybrid };

enum class Coordinates { Polar, Rectangular };

std::string estimator_name(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& text);

/// PMU estimation is linear in rectangular coordinates; the others are polar.
Coordinates coordinates_for(EstimatorKind kind);

/// Whether a row belongs to the measurement model of an estimator kind.
bool accepts(EstimatorKind kind, const Measurement& m);

/// Bus voltages in an estimator's native coordinates: (theta, V) or (e, f).
struct NativeState {
  Coordinates coords = Coordinates::Polar;
  Eigen::VectorXd first;
  Eigen::VectorXd second;

  static NativeState from_polar(const StateVector& state, Coordinates coords);
  StateVector to_polar() const;
  std::size_t size() const { return static_cast<std::size_t>(first.size()); }
};

/// Maps the state components of a subset of buses to solver columns. In
/// polar coordinates one bus may have its angle pinned (not a column).
class StateLayout {
 public:
  StateLayout(Coordinates coords, std::size_t bus_count, std::vector<std::size_t> buses,
              std::optional<std::size_t> fixed_angle = std::nullopt);

  Coordinates coordinates() const { return coords_; }
  std::span<const std::size_t> buses() const { return buses_; }
  std::optional<std::size_t> fixed_angle() const { return fixed_angle_; }
  bool contains(std::size_t bus) const { return slot_[bus] >= 0; }

  /// Column of a bus component (0: theta or e, 1: V or f); -1 if not a variable.
  Eigen::Index column(std::size_t bus, int component) const;
  Eigen::Index size() const { return size_; }

  Eigen::VectorXd gather(const NativeState& state) const;
  void scatter(const Eigen::VectorXd& x, NativeState& state) const;

 private:
  Coordinates coords_;
  std::vector<std::size_t> buses_;
  std::optional<std::size_t> fixed_angle_;
  std::vector<Eigen::Index> slot_;
  std::vector<Eigen::Index> first_col_;
  std::vector<Eigen::Index> second_col_;
  Eigen::Index size_ = 0;
};

/// Sorted union of the buses entering the given rows.
std::vector<std::size_t> touched_buses(const NetworkModel& model, std::span<const Measurement> rows);

/// Jacobian of `rows` with respect to the layout columns at `state`, with the
/// model values written to `h`. Partials on buses outside the layout are
/// dropped (those buses act as constants).
Eigen::SparseMatrix<double> layout_jacobian(const NetworkModel& model, const StateLayout& layout,
                                            std::span<const Measurement> rows, const NativeState& state,
                                            Eigen::VectorXd& h);

}  // namespace gridse
