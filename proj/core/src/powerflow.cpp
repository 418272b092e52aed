#include "gridse/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseLU>

#include "gridse/error.hpp"
#include "network_math.hpp"

namespace gridse {

StateVector StateVector::flat(std::size_t bus_count) {
  const auto n = static_cast<Eigen::Index>(bus_count);
  return {Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n)};
}

StateVector StateVector::from_rectangular(const Eigen::VectorXd& real, const Eigen::VectorXd& imag) {
  StateVector s;
  s.magnitude = (real.array().square() + imag.array().square()).sqrt().matrix();
  s.angle = imag.binaryExpr(real, [](double f, double e) { return std::atan2(f, e); });
  return s;
}

Eigen::VectorXd StateVector::real() const { return (magnitude.array() * angle.array().cos()).matrix(); }

Eigen::VectorXd StateVector::imag() const { return (magnitude.array() * angle.array().sin()).matrix(); }

std::vector<Complex> injections(const NetworkModel& model, const StateVector& state) {
  std::vector<Complex> s(model.bus_count());
  for (std::size_t k = 0; k < model.bus_count(); ++k) {
    s[k] = detail::injection_row(model, state, k, [](std::size_t, Complex, Complex, Complex) {});
  }
  return s;
}

Complex branch_current(const NetworkModel& model, const StateVector& state, std::size_t branch, bool at_from_end) {
  const Branch& br = model.branch(branch);
  const BranchAdmittance& y = model.admittance().branches[branch];
  const Complex vf = state.phasor(br.from);
  const Complex vt = state.phasor(br.to);
  return at_from_end ? y.ff * vf + y.ft * vt : y.tf * vf + y.tt * vt;
}

std::vector<BranchFlow> branch_flows(const NetworkModel& model, const StateVector& state) {
  std::vector<BranchFlow> flows(model.branch_count());
  for (std::size_t l = 0; l < model.branch_count(); ++l) {
    const Branch& br = model.branch(l);
    flows[l].from = state.phasor(br.from) * std::conj(branch_current(model, state, l, true));
    flows[l].to = state.phasor(br.to) * std::conj(branch_current(model, state, l, false));
  }
  return flows;
}

namespace {

struct Unknowns {
  std::vector<Eigen::Index> angle_col;      // -1 for the slack
  std::vector<Eigen::Index> magnitude_col;  // -1 for slack and generator buses
  Eigen::Index count = 0;
};

Unknowns number_unknowns(const NetworkModel& model) {
  const std::size_t n = model.bus_count();
  Unknowns u;
  u.angle_col.assign(n, -1);
  u.magnitude_col.assign(n, -1);
  for (std::size_t k = 0; k < n; ++k) {
    if (model.bus(k).kind != BusKind::Slack) u.angle_col[k] = u.count++;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (model.bus(k).kind == BusKind::Load) u.magnitude_col[k] = u.count++;
  }
  return u;
}

}  // namespace

OperatingPoint solve_power_flow(const NetworkModel& model, const PowerFlowOptions& options) {
  if (!(options.tolerance > 0.0)) throw Error("power flow: tolerance must be positive");
  const std::size_t n = model.bus_count();
  const Unknowns unknowns = number_unknowns(model);

  StateVector state = StateVector::flat(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (model.bus(k).kind != BusKind::Load) state.magnitude[static_cast<Eigen::Index>(k)] = model.bus(k).v_set;
  }

  Eigen::VectorXd mismatch(unknowns.count);
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  double worst = 0.0;
  int iteration = 0;
  for (;; ++iteration) {
    triplets.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::Index pr = unknowns.angle_col[k];
      const Eigen::Index qr = unknowns.magnitude_col[k];
      if (pr < 0 && qr < 0) continue;
      auto add = [&](Eigen::Index row_p, Eigen::Index row_q, std::size_t bus, Complex d_angle, Complex d_mag) {
        const Eigen::Index ca = unknowns.angle_col[bus];
        const Eigen::Index cm = unknowns.magnitude_col[bus];
        if (row_p >= 0 && ca >= 0) triplets.emplace_back(row_p, ca, d_angle.real());
        if (row_p >= 0 && cm >= 0) triplets.emplace_back(row_p, cm, d_mag.real());
        if (row_q >= 0 && ca >= 0) triplets.emplace_back(row_q, ca, d_angle.imag());
        if (row_q >= 0 && cm >= 0) triplets.emplace_back(row_q, cm, d_mag.imag());
      };
      const Complex s = detail::injection_row(model, state, k, [&](std::size_t m, Complex, Complex da, Complex dv) {
        add(pr, qr, m, da, dv);
      });
      const double vk = state.magnitude[static_cast<Eigen::Index>(k)];
      const Complex self = std::conj(detail::self_admittance(model, k)) * vk * vk;
      add(pr, qr, k, Complex(0.0, 1.0) * (s - self), (s + self) / vk);

      const Bus& b = model.bus(k);
      if (pr >= 0) mismatch[pr] = (b.p_gen - b.p_load) - s.real();
      if (qr >= 0) mismatch[qr] = -b.q_load - s.imag();
    }
    worst = unknowns.count > 0 ? mismatch.cwiseAbs().maxCoeff() : 0.0;
    if (worst < options.tolerance) break;
    if (iteration >= options.max_iter || !std::isfinite(worst)) {
      throw ConvergenceError("power flow did not converge in " + std::to_string(options.max_iter) +
                             " iterations (final mismatch " + std::to_string(worst) + " pu)");
    }

    Eigen::SparseMatrix<double> jac(unknowns.count, unknowns.count);
    jac.setFromTriplets(triplets.begin(), triplets.end());
    jac.makeCompressed();
    lu.compute(jac);
    if (lu.info() != Eigen::Success) throw ConvergenceError("power flow: singular Jacobian");
    const Eigen::VectorXd step = lu.solve(mismatch);
    for (std::size_t k = 0; k < n; ++k) {
      const auto bus = static_cast<Eigen::Index>(k);
      if (unknowns.angle_col[k] >= 0) state.angle[bus] += step[unknowns.angle_col[k]];
      if (unknowns.magnitude_col[k] >= 0) state.magnitude[bus] += step[unknowns.magnitude_col[k]];
    }
  }

  OperatingPoint op;
  op.state = state;
  op.iterations = iteration;
  op.mismatch = worst;
  const auto s = injections(model, state);
  op.p.resize(static_cast<Eigen::Index>(n));
  op.q.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    op.p[static_cast<Eigen::Index>(k)] = s[k].real();
    op.q[static_cast<Eigen::Index>(k)] = s[k].imag();
  }
  op.flows = branch_flows(model, state);
  return op;
}

}  // namespace gridse
