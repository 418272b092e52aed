#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gridse/grid.hpp"
#include "gridse/layout.hpp"
#include "gridse/measurement.hpp"

namespace gridse {

/// Quadratic pull sum_c weight_c * (x_c - center_c)^2 on selected columns.
struct Prior {
  std::vector<Eigen::Index> columns;
  Eigen::VectorXd center;
  Eigen::VectorXd weight;
};

struct WlsOptions {
  double tolerance = 1e-8;  // on the infinity norm of the Gauss-Newton step
  int max_iter = 50;
  double huber = 0.0;  // robust threshold in sigma units; 0 selects plain least squares
  std::optional<std::size_t> reference;  // polar angle reference override
};

struct WlsSolution {
  NativeState state;
  double objective = 0.0;  // measurement term at the returned state
  double penalty = 0.0;    // prior term at the returned state
  int iterations = 0;
  bool converged = false;
};

/// Residual weights 1/sigma^2, reduced beyond the Huber threshold when enabled.
Eigen::VectorXd row_weights(std::span<const Measurement> rows, const Eigen::VectorXd& residual, double huber);

/// Sum of squared weighted residuals, or the Huber loss when enabled.
double wls_objective(std::span<const Measurement> rows, const Eigen::VectorXd& residual, double huber = 0.0);

/// Gauss-Newton with step halving on the columns of `layout`; buses outside
/// the layout keep their values from `init`.
WlsSolution solve_wls(const NetworkModel& model, const StateLayout& layout, std::span<const Measurement> rows,
                      const Eigen::VectorXd& values, NativeState init, const WlsOptions& options = {},
                      const Prior* prior = nullptr);

/// H^T W H at a state, with plain 1/sigma^2 weights.
Eigen::SparseMatrix<double> gain_matrix(const NetworkModel& model, const StateLayout& layout,
                                        std::span<const Measurement> rows, const NativeState& state);

/// Diagonal 2x2 blocks of gain^-1 per layout bus, in native coordinates. A
/// pinned angle has zero variance; undetermined directions get a very large one.
std::vector<Eigen::Matrix2d> bus_covariances(const Eigen::SparseMatrix<double>& gain, const StateLayout& layout);

/// Maps a rectangular (e, f) covariance to polar (theta, V).
Eigen::Matrix2d rectangular_to_polar(const Eigen::Matrix2d& cov, double e, double f);

/// Maps a polar (theta, V) covariance to rectangular (e, f).
Eigen::Matrix2d polar_to_rectangular(const Eigen::Matrix2d& cov, double theta, double v);

}  // namespace gridse
