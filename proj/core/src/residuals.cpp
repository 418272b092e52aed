#include "gridse/residuals.hpp"

#include <cmath>
#include <optional>

#include <Eigen/QR>
#include <Eigen/SparseCholesky>

namespace gridse {

namespace {

constexpr double kRankThreshold = 1e-9;
constexpr double kCriticalThreshold = 1e-8;
constexpr double kSparseCriticalThreshold = 1e-6;
constexpr double kDenseWork = 2e8;  // m * n^2 above which leverages come from a sparse factorization

// Diagonal of S (S'S)^-1 S' through a sparse LDLT; empty when S'S is
// numerically singular.
std::optional<Eigen::VectorXd> sparse_leverage(const Eigen::SparseMatrix<double>& scaled) {
  Eigen::SparseMatrix<double> g = scaled.transpose() * scaled;
  g.makeCompressed();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(g);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd d = ldlt.vectorD();
  if (d.size() == 0 || !(d.minCoeff() > kRankThreshold * kRankThreshold * d.maxCoeff())) return std::nullopt;
  const Eigen::MatrixXd st = Eigen::MatrixXd(scaled.transpose());
  const Eigen::MatrixXd x = ldlt.solve(st);
  return Eigen::VectorXd(st.cwiseProduct(x).colwise().sum().transpose());
}

}  // namespace

ResidualAnalysis analyze_residuals(const NetworkModel& model, const StateLayout& layout,
                                   std::span<const Measurement> rows, const Eigen::VectorXd& values,
                                   const NativeState& state) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd h;
  const Eigen::SparseMatrix<double> sparse_jac = layout_jacobian(model, layout, rows, state, h);
  Eigen::VectorXd sigma(m);
  for (Eigen::Index i = 0; i < m; ++i) sigma[i] = rows[static_cast<std::size_t>(i)].sigma;

  ResidualAnalysis out;
  out.residual = values - h;
  out.objective = out.residual.cwiseQuotient(sigma).squaredNorm();
  out.omega = sigma.cwiseAbs2();
  out.normalized = Eigen::VectorXd::Zero(m);
  out.critical.assign(rows.size(), 0);

  const Eigen::SparseMatrix<double> sparse_scaled = sigma.cwiseInverse().asDiagonal() * sparse_jac;
  const auto n = sparse_scaled.cols();
  Eigen::VectorXd leverage = Eigen::VectorXd::Zero(m);
  std::optional<Eigen::VectorXd> fast;
  if (n > 0 && n <= m && static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(n) > kDenseWork) {
    fast = sparse_leverage(sparse_scaled);
  }
  if (fast) {
    leverage = *fast;
    out.rank = static_cast<std::size_t>(n);
  } else if (n > 0) {
    const Eigen::MatrixXd scaled = Eigen::MatrixXd(sparse_scaled);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    qr.setThreshold(kRankThreshold);
    const Eigen::Index rank = qr.rank();
    out.rank = static_cast<std::size_t>(rank);
    if (rank > 0) {
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, rank);
      leverage = q.rowwise().squaredNorm();
    }
  }
  out.dof = static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(out.rank);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double free = 1.0 - leverage[i];
    out.omega[i] *= std::max(free, 0.0);
    if (free < (fast ? kSparseCriticalThreshold : kCriticalThreshold)) {
      out.critical[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    out.normalized[i] = std::abs(out.residual[i]) / std::sqrt(out.omega[i]);
  }
  return out;
}

ResidualAnalysis analyze_residuals(const NetworkModel& model, std::span<const Measurement> rows,
                                   const Eigen::VectorXd& values, const NativeState& state) {
  const StateLayout layout(state.coords, state.size(), touched_buses(model, rows));
  return analyze_residuals(model, layout, rows, values, state);
}

}  // namespace gridse
