#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "gridse/grid.hpp"
#include "gridse/layout.hpp"
#include "gridse/measurement.hpp"

namespace gridse {

struct ResidualAnalysis {
  Eigen::VectorXd residual;    // z - h(x)
  Eigen::VectorXd omega;       // diagonal of the residual covariance
  Eigen::VectorXd normalized;  // |r| / sqrt(omega); 0 on critical rows
  std::vector<char> critical;  // omega vanishes relative to sigma^2
  double objective = 0.0;      // sum (r / sigma)^2
  std::size_t rank = 0;        // numerical rank of the weighted Jacobian
  std::ptrdiff_t dof = 0;      // rows - rank
};

/// Residual covariance diagonal R - H G^+ H^T at `state`, from an orthogonal
/// projection onto the column space of W^(1/2) H. Gauge directions need no
/// pinning because only the range of H enters.
ResidualAnalysis analyze_residuals(const NetworkModel& model, const StateLayout& layout,
                                   std::span<const Measurement> rows, const Eigen::VectorXd& values,
                                   const NativeState& state);

/// Same, over every bus the rows touch, without a pinned angle.
ResidualAnalysis analyze_residuals(const NetworkModel& model, std::span<const Measurement> rows,
                                   const Eigen::VectorXd& values, const NativeState& state);

}  // namespace gridse
