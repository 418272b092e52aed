#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "gridse/grid.hpp"

namespace gridse {

/// Complex bus voltages in polar form (V in pu, theta in rad).
struct StateVector {
  Eigen::VectorXd magnitude;
  Eigen::VectorXd angle;

  static StateVector flat(std::size_t bus_count);
  static StateVector from_rectangular(const Eigen::VectorXd& real, const Eigen::VectorXd& imag);

  std::size_t size() const { return static_cast<std::size_t>(magnitude.size()); }
  Complex phasor(std::size_t bus) const { return std::polar(magnitude[static_cast<Eigen::Index>(bus)], angle[static_cast<Eigen::Index>(bus)]); }
  Eigen::VectorXd real() const;
  Eigen::VectorXd imag() const;
};

/// Complex power entering a branch at each of its ends (pu).
struct BranchFlow {
  Complex from;
  Complex to;
};

struct OperatingPoint {
  StateVector state;
  Eigen::VectorXd p;  // net injection per bus, pu
  Eigen::VectorXd q;
  std::vector<BranchFlow> flows;
  int iterations = 0;
  double mismatch = 0.0;
};

struct PowerFlowOptions {
  double tolerance = 1e-10;
  int max_iter = 50;
};

/// Newton-Raphson AC power flow from a flat start (generator buses start at
/// their setpoints). Reactive limits are not enforced.
OperatingPoint solve_power_flow(const NetworkModel& model, const PowerFlowOptions& options = {});

/// S_k = V_k * conj(sum_m Y_km V_m) for every bus.
std::vector<Complex> injections(const NetworkModel& model, const StateVector& state);

std::vector<BranchFlow> branch_flows(const NetworkModel& model, const StateVector& state);

/// Complex current entering a branch at the given end.
Complex branch_current(const NetworkModel& model, const StateVector& state, std::size_t branch, bool at_from_end);

}  // namespace gridse
