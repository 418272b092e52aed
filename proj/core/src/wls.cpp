#include "gridse/wls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

#include "gridse/error.hpp"

namespace gridse {

namespace {

constexpr double kDamping = 1e-12;
constexpr int kMaxHalvings = 30;

double penalty_of(const Prior* prior, const Eigen::VectorXd& x) {
  if (!prior) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < prior->columns.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    const double d = x[prior->columns[i]] - prior->center[j];
    sum += prior->weight[j] * d * d;
  }
  return sum;
}

void add_damping(Eigen::SparseMatrix<double>& g) {
  double largest = 0.0;
  for (Eigen::Index k = 0; k < g.cols(); ++k) largest = std::max(largest, g.coeff(k, k));
  const double mu = kDamping * std::max(largest, 1.0);
  for (Eigen::Index k = 0; k < g.cols(); ++k) g.coeffRef(k, k) += mu;
}

}  // namespace

Eigen::VectorXd row_weights(std::span<const Measurement> rows, const Eigen::VectorXd& residual, double huber) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double s = rows[i].sigma;
    w[row] = 1.0 / (s * s);
    if (huber > 0.0) {
      const double t = std::abs(residual[row]) / s;
      if (t > huber) w[row] *= huber / t;
    }
  }
  return w;
}

double wls_objective(std::span<const Measurement> rows, const Eigen::VectorXd& residual, double huber) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double t = residual[static_cast<Eigen::Index>(i)] / rows[i].sigma;
    if (huber > 0.0 && std::abs(t) > huber) {
      sum += 2.0 * huber * std::abs(t) - huber * huber;
    } else {
      sum += t * t;
    }
  }
  return sum;
}

WlsSolution solve_wls(const NetworkModel& model, const StateLayout& layout, std::span<const Measurement> rows,
                      const Eigen::VectorXd& values, NativeState init, const WlsOptions& options,
                      const Prior* prior) {
  if (values.size() != static_cast<Eigen::Index>(rows.size())) throw Error("wls: value count does not match rows");
  if (!(options.tolerance > 0.0)) throw Error("wls: tolerance must be positive");
  WlsSolution out;
  out.state = std::move(init);
  Eigen::VectorXd x = layout.gather(out.state);
  Eigen::VectorXd h;
  Eigen::SparseMatrix<double> jac = layout_jacobian(model, layout, rows, out.state, h);
  Eigen::VectorXd r = values - h;
  double cost = wls_objective(rows, r, options.huber) + penalty_of(prior, x);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  for (int it = 0; it < options.max_iter; ++it) {
    const Eigen::VectorXd w = row_weights(rows, r, options.huber);
    Eigen::SparseMatrix<double> g = jac.transpose() * w.asDiagonal() * jac;
    Eigen::VectorXd rhs = jac.transpose() * (w.asDiagonal() * r);
    if (prior) {
      for (std::size_t i = 0; i < prior->columns.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        const Eigen::Index c = prior->columns[i];
        g.coeffRef(c, c) += prior->weight[j];
        rhs[c] -= prior->weight[j] * (x[c] - prior->center[j]);
      }
    }
    add_damping(g);
    g.makeCompressed();
    ldlt.compute(g);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("wls: gain matrix factorization failed");
    const Eigen::VectorXd step = ldlt.solve(rhs);
    out.iterations = it + 1;
    const double size = step.size() > 0 ? step.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(size)) throw ConvergenceError("wls: non-finite Gauss-Newton step");

    double alpha = 1.0;
    bool accepted = false;
    NativeState trial = out.state;
    Eigen::VectorXd trial_h, trial_r;
    Eigen::SparseMatrix<double> trial_jac;
    double trial_cost = cost;
    for (int half = 0; half <= kMaxHalvings; ++half, alpha *= 0.5) {
      const Eigen::VectorXd xt = x + alpha * step;
      layout.scatter(xt, trial);
      trial_jac = layout_jacobian(model, layout, rows, trial, trial_h);
      trial_r = values - trial_h;
      trial_cost = wls_objective(rows, trial_r, options.huber) + penalty_of(prior, xt);
      if (trial_cost <= cost * (1.0 + 1e-13) + std::numeric_limits<double>::min()) {
        x = xt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.converged = size < std::sqrt(options.tolerance);
      break;
    }
    out.state = trial;
    jac = std::move(trial_jac);
    r = std::move(trial_r);
    cost = trial_cost;
    if (size < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.penalty = penalty_of(prior, x);
  out.objective = cost - out.penalty;
  return out;
}

Eigen::SparseMatrix<double> gain_matrix(const NetworkModel& model, const StateLayout& layout,
                                        std::span<const Measurement> rows, const NativeState& state) {
  Eigen::VectorXd h;
  const Eigen::SparseMatrix<double> jac = layout_jacobian(model, layout, rows, state, h);
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) w[static_cast<Eigen::Index>(i)] = 1.0 / (rows[i].sigma * rows[i].sigma);
  Eigen::SparseMatrix<double> g = jac.transpose() * w.asDiagonal() * jac;
  return g;
}

std::vector<Eigen::Matrix2d> bus_covariances(const Eigen::SparseMatrix<double>& gain, const StateLayout& layout) {
  std::vector<Eigen::Matrix2d> blocks(layout.buses().size(), Eigen::Matrix2d::Zero());
  if (layout.size() == 0) return blocks;
  Eigen::SparseMatrix<double> g = gain;
  add_damping(g);
  g.makeCompressed();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(g);
  if (ldlt.info() != Eigen::Success) throw ConvergenceError("covariance: gain matrix factorization failed");
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(layout.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::size_t bus = layout.buses()[i];
    const Eigen::Index cols[2] = {layout.column(bus, 0), layout.column(bus, 1)};
    for (int a = 0; a < 2; ++a) {
      if (cols[a] < 0) continue;
      unit[cols[a]] = 1.0;
      const Eigen::VectorXd column = ldlt.solve(unit);
      unit[cols[a]] = 0.0;
      for (int b = 0; b < 2; ++b) {
        if (cols[b] >= 0) blocks[i](b, a) = column[cols[b]];
      }
    }
    blocks[i] = 0.5 * (blocks[i] + blocks[i].transpose()).eval();
  }
  return blocks;
}

Eigen::Matrix2d rectangular_to_polar(const Eigen::Matrix2d& cov, double e, double f) {
  const double v2 = e * e + f * f;
  const double v = std::sqrt(v2);
  Eigen::Matrix2d j;
  j << -f / v2, e / v2, e / v, f / v;
  return j * cov * j.transpose();
}

Eigen::Matrix2d polar_to_rectangular(const Eigen::Matrix2d& cov, double theta, double v) {
  Eigen::Matrix2d j;
  j << -v * std::sin(theta), std::cos(theta), v * std::cos(theta), std::sin(theta);
  return j * cov * j.transpose();
}

}  // namespace gridse
