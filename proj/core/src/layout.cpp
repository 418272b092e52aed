#include "gridse/layout.hpp"

#include <algorithm>
#include <cmath>

#include "gridse/error.hpp"
#include "gridse/measurement_functions.hpp"

namespace gridse {

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Scada:
      return "scada";
    case EstimatorKind::Pmu:
      return "pmu";
    case EstimatorKind::Hybrid:
      return "hybrid";
  }
  return "scada";
}

EstimatorKind parse_estimator(const std::string& text) {
  if (text == "scada") return EstimatorKind::Scada;
  if (text == "pmu") return EstimatorKind::Pmu;
  if (text == "hybrid") return EstimatorKind::Hybrid;
  throw ModelError("unknown estimator kind '" + text + "' (expected scada, pmu or hybrid)");
}

Coordinates coordinates_for(EstimatorKind kind) {
  return kind == EstimatorKind::Pmu ? Coordinates::Rectangular : Coordinates::Polar;
}

bool accepts(EstimatorKind kind, const Measurement& m) {
  switch (kind) {
    case EstimatorKind::Scada:
      return !is_phasor_kind(m.kind);
    case EstimatorKind::Pmu:
      return is_phasor_kind(m.kind);
    case EstimatorKind::Hybrid:
      return true;
  }
  return false;
}

NativeState NativeState::from_polar(const StateVector& state, Coordinates coords) {
  NativeState s;
  s.coords = coords;
  if (coords == Coordinates::Polar) {
    s.first = state.angle;
    s.second = state.magnitude;
  } else {
    s.first = state.real();
    s.second = state.imag();
  }
  return s;
}

StateVector NativeState::to_polar() const {
  if (coords == Coordinates::Polar) return {second, first};
  return StateVector::from_rectangular(first, second);
}

StateLayout::StateLayout(Coordinates coords, std::size_t bus_count, std::vector<std::size_t> buses,
                         std::optional<std::size_t> fixed_angle)
    : coords_(coords), buses_(std::move(buses)), fixed_angle_(fixed_angle) {
  std::sort(buses_.begin(), buses_.end());
  buses_.erase(std::unique(buses_.begin(), buses_.end()), buses_.end());
  if (!buses_.empty() && buses_.back() >= bus_count) throw ModelError("state layout: bus out of range");
  if (fixed_angle_ && coords_ != Coordinates::Polar) throw ModelError("state layout: only polar angles can be pinned");
  if (fixed_angle_ && !std::binary_search(buses_.begin(), buses_.end(), *fixed_angle_)) fixed_angle_.reset();
  slot_.assign(bus_count, -1);
  first_col_.assign(buses_.size(), -1);
  second_col_.assign(buses_.size(), -1);
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    slot_[buses_[i]] = static_cast<Eigen::Index>(i);
    if (!fixed_angle_ || buses_[i] != *fixed_angle_) first_col_[i] = size_++;
  }
  for (std::size_t i = 0; i < buses_.size(); ++i) second_col_[i] = size_++;
}

Eigen::Index StateLayout::column(std::size_t bus, int component) const {
  const Eigen::Index slot = slot_[bus];
  if (slot < 0) return -1;
  return component == 0 ? first_col_[static_cast<std::size_t>(slot)] : second_col_[static_cast<std::size_t>(slot)];
}

Eigen::VectorXd StateLayout::gather(const NativeState& state) const {
  Eigen::VectorXd x(size_);
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto bus = static_cast<Eigen::Index>(buses_[i]);
    if (first_col_[i] >= 0) x[first_col_[i]] = state.first[bus];
    x[second_col_[i]] = state.second[bus];
  }
  return x;
}

void StateLayout::scatter(const Eigen::VectorXd& x, NativeState& state) const {
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto bus = static_cast<Eigen::Index>(buses_[i]);
    if (first_col_[i] >= 0) state.first[bus] = x[first_col_[i]];
    state.second[bus] = x[second_col_[i]];
  }
}

std::vector<std::size_t> touched_buses(const NetworkModel& model, std::span<const Measurement> rows) {
  std::vector<char> seen(model.bus_count(), 0);
  for (const Measurement& m : rows) {
    for (std::size_t bus : measurement_buses(model, m)) seen[bus] = 1;
  }
  std::vector<std::size_t> buses;
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (seen[k]) buses.push_back(k);
  }
  return buses;
}

Eigen::SparseMatrix<double> layout_jacobian(const NetworkModel& model, const StateLayout& layout,
                                            std::span<const Measurement> rows, const NativeState& state,
                                            Eigen::VectorXd& h) {
  if (state.coords != layout.coordinates()) throw Error("layout jacobian: coordinate mismatch");
  h.resize(static_cast<Eigen::Index>(rows.size()));
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(rows.size() * 6);
  std::vector<Partial> partials;
  const bool polar = layout.coordinates() == Coordinates::Polar;
  const StateVector polar_state = polar ? StateVector{state.second, state.first} : StateVector{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (polar) {
      h[row] = linearize_polar(model, polar_state, rows[i], partials);
    } else {
      linearize_rectangular(model, rows[i], partials);
      double value = 0.0;
      for (const Partial& p : partials) {
        const auto bus = static_cast<Eigen::Index>(p.bus);
        value += p.first * state.first[bus] + p.second * state.second[bus];
      }
      h[row] = value;
    }
    for (const Partial& p : partials) {
      const Eigen::Index c0 = layout.column(p.bus, 0);
      const Eigen::Index c1 = layout.column(p.bus, 1);
      if (c0 >= 0 && p.first != 0.0) triplets.emplace_back(row, c0, p.first);
      if (c1 >= 0 && p.second != 0.0) triplets.emplace_back(row, c1, p.second);
    }
  }
  Eigen::SparseMatrix<double> jac(static_cast<Eigen::Index>(rows.size()), layout.size());
  jac.setFromTriplets(triplets.begin(), triplets.end());
  return jac;
}

}  // namespace gridse
