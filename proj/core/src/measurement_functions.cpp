#include "gridse/measurement_functions.hpp"

#include <algorithm>
#include <cmath>

#include "gridse/error.hpp"
#include "network_math.hpp"

namespace gridse {

namespace {

constexpr Complex kJ(0.0, 1.0);

struct BranchView {
  std::size_t self;
  std::size_t other;
  Complex y_self;
  Complex y_mutual;
};

BranchView view(const NetworkModel& model, const Measurement& m) {
  const Branch& br = model.branch(m.branch);
  const BranchAdmittance& y = model.admittance().branches[m.branch];
  if (m.end == BranchEnd::From) return {br.from, br.to, y.ff, y.ft};
  return {br.to, br.from, y.tt, y.tf};
}

Complex current(const NetworkModel& model, const StateVector& state, const Measurement& m) {
  const BranchView v = view(model, m);
  return v.y_self * state.phasor(v.self) + v.y_mutual * state.phasor(v.other);
}

}  // namespace

double evaluate(const NetworkModel& model, const StateVector& state, const Measurement& m) {
  const auto k = static_cast<Eigen::Index>(m.bus);
  switch (m.kind) {
    case MeasurementKind::VoltageMagnitude:
      return state.magnitude[k];
    case MeasurementKind::VoltageAngle:
      return state.angle[k];
    case MeasurementKind::ActiveInjection:
    case MeasurementKind::ReactiveInjection: {
      const Complex s = detail::injection_row(model, state, m.bus, [](std::size_t, Complex, Complex, Complex) {});
      return m.kind == MeasurementKind::ActiveInjection ? s.real() : s.imag();
    }
    case MeasurementKind::ActiveFlow:
    case MeasurementKind::ReactiveFlow: {
      const Complex s = state.phasor(view(model, m).self) * std::conj(current(model, state, m));
      return m.kind == MeasurementKind::ActiveFlow ? s.real() : s.imag();
    }
    case MeasurementKind::VoltageReal:
      return state.magnitude[k] * std::cos(state.angle[k]);
    case MeasurementKind::VoltageImag:
      return state.magnitude[k] * std::sin(state.angle[k]);
    case MeasurementKind::CurrentReal:
      return current(model, state, m).real();
    case MeasurementKind::CurrentImag:
      return current(model, state, m).imag();
  }
  return 0.0;
}

Eigen::VectorXd evaluate(const NetworkModel& model, const StateVector& state, std::span<const Measurement> rows) {
  Eigen::VectorXd h(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) h[static_cast<Eigen::Index>(i)] = evaluate(model, state, rows[i]);
  return h;
}

Eigen::VectorXd evaluate_scada(const NetworkModel& model, const StateVector& state, const MeasurementPlan& plan) {
  return evaluate(model, state, plan.entries);
}

double linearize_polar(const NetworkModel& model, const StateVector& state, const Measurement& m,
                       std::vector<Partial>& out) {
  out.clear();
  const auto k = static_cast<Eigen::Index>(m.bus);
  switch (m.kind) {
    case MeasurementKind::VoltageMagnitude:
      out.push_back({m.bus, 0.0, 1.0});
      return state.magnitude[k];
    case MeasurementKind::VoltageAngle:
      out.push_back({m.bus, 1.0, 0.0});
      return state.angle[k];
    case MeasurementKind::ActiveInjection:
    case MeasurementKind::ReactiveInjection: {
      const bool active = m.kind == MeasurementKind::ActiveInjection;
      const Complex s = detail::injection_row(model, state, m.bus, [&](std::size_t j, Complex, Complex da, Complex dv) {
        out.push_back(active ? Partial{j, da.real(), dv.real()} : Partial{j, da.imag(), dv.imag()});
      });
      const double vk = state.magnitude[k];
      const Complex self = std::conj(detail::self_admittance(model, m.bus)) * vk * vk;
      const Complex da = kJ * (s - self);
      const Complex dv = (s + self) / vk;
      out.push_back(active ? Partial{m.bus, da.real(), dv.real()} : Partial{m.bus, da.imag(), dv.imag()});
      return active ? s.real() : s.imag();
    }
    case MeasurementKind::ActiveFlow:
    case MeasurementKind::ReactiveFlow: {
      const BranchView v = view(model, m);
      const auto a = static_cast<Eigen::Index>(v.self);
      const auto b = static_cast<Eigen::Index>(v.other);
      const double va = state.magnitude[a];
      const double vb = state.magnitude[b];
      const Complex coupling = std::conj(v.y_mutual) * std::polar(1.0, state.angle[a] - state.angle[b]);
      const Complex mutual = va * vb * coupling;
      const Complex s = va * va * std::conj(v.y_self) + mutual;
      const Complex da_self = kJ * mutual;
      const Complex dv_self = 2.0 * va * std::conj(v.y_self) + vb * coupling;
      const Complex da_other = -kJ * mutual;
      const Complex dv_other = va * coupling;
      if (m.kind == MeasurementKind::ActiveFlow) {
        out.push_back({v.self, da_self.real(), dv_self.real()});
        out.push_back({v.other, da_other.real(), dv_other.real()});
        return s.real();
      }
      out.push_back({v.self, da_self.imag(), dv_self.imag()});
      out.push_back({v.other, da_other.imag(), dv_other.imag()});
      return s.imag();
    }
    case MeasurementKind::VoltageReal:
    case MeasurementKind::VoltageImag: {
      const double e = state.magnitude[k] * std::cos(state.angle[k]);
      const double f = state.magnitude[k] * std::sin(state.angle[k]);
      if (m.kind == MeasurementKind::VoltageReal) {
        out.push_back({m.bus, -f, std::cos(state.angle[k])});
        return e;
      }
      out.push_back({m.bus, e, std::sin(state.angle[k])});
      return f;
    }
    case MeasurementKind::CurrentReal:
    case MeasurementKind::CurrentImag: {
      const BranchView v = view(model, m);
      const bool real = m.kind == MeasurementKind::CurrentReal;
      Complex i(0.0, 0.0);
      for (const auto& [bus, y] : {std::pair{v.self, v.y_self}, std::pair{v.other, v.y_mutual}}) {
        const Complex unit = std::polar(1.0, state.angle[static_cast<Eigen::Index>(bus)]);
        const Complex term = y * state.magnitude[static_cast<Eigen::Index>(bus)] * unit;
        i += term;
        const Complex da = kJ * term;
        const Complex dv = y * unit;
        out.push_back(real ? Partial{bus, da.real(), dv.real()} : Partial{bus, da.imag(), dv.imag()});
      }
      return real ? i.real() : i.imag();
    }
  }
  return 0.0;
}

void linearize_rectangular(const NetworkModel& model, const Measurement& m, std::vector<Partial>& out) {
  out.clear();
  switch (m.kind) {
    case MeasurementKind::VoltageReal:
      out.push_back({m.bus, 1.0, 0.0});
      return;
    case MeasurementKind::VoltageImag:
      out.push_back({m.bus, 0.0, 1.0});
      return;
    case MeasurementKind::CurrentReal:
    case MeasurementKind::CurrentImag: {
      const BranchView v = view(model, m);
      const bool real = m.kind == MeasurementKind::CurrentReal;
      for (const auto& [bus, y] : {std::pair{v.self, v.y_self}, std::pair{v.other, v.y_mutual}}) {
        out.push_back(real ? Partial{bus, y.real(), -y.imag()} : Partial{bus, y.imag(), y.real()});
      }
      return;
    }
    default:
      throw ModelError("measurement " + measurement_label(m, model) + " is not a phasor component");
  }
}

std::vector<std::size_t> measurement_buses(const NetworkModel& model, const Measurement& m) {
  std::vector<std::size_t> buses;
  if (is_branch_kind(m.kind)) {
    const Branch& br = model.branch(m.branch);
    buses = {br.from, br.to};
  } else if (m.kind == MeasurementKind::ActiveInjection || m.kind == MeasurementKind::ReactiveInjection) {
    const ComplexSparse& y = model.admittance().y;
    for (ComplexSparse::InnerIterator it(y, static_cast<Eigen::Index>(m.bus)); it; ++it) {
      buses.push_back(static_cast<std::size_t>(it.col()));
    }
    if (std::find(buses.begin(), buses.end(), m.bus) == buses.end()) buses.push_back(m.bus);
  } else {
    buses = {m.bus};
  }
  std::sort(buses.begin(), buses.end());
  buses.erase(std::unique(buses.begin(), buses.end()), buses.end());
  return buses;
}

Eigen::SparseMatrix<double> scada_jacobian(const NetworkModel& model, const StateVector& state,
                                           const MeasurementPlan& plan) {
  const std::size_t n = model.bus_count();
  const std::size_t slack = model.slack();
  auto angle_col = [&](std::size_t bus) { return static_cast<Eigen::Index>(bus < slack ? bus : bus - 1); };
  const auto v_offset = static_cast<Eigen::Index>(n - 1);

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<Partial> partials;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    linearize_polar(model, state, plan.entries[i], partials);
    const auto row = static_cast<Eigen::Index>(i);
    for (const Partial& p : partials) {
      if (p.bus != slack && p.first != 0.0) triplets.emplace_back(row, angle_col(p.bus), p.first);
      if (p.second != 0.0) triplets.emplace_back(row, v_offset + static_cast<Eigen::Index>(p.bus), p.second);
    }
  }
  Eigen::SparseMatrix<double> jac(static_cast<Eigen::Index>(plan.size()), static_cast<Eigen::Index>(2 * n - 1));
  jac.setFromTriplets(triplets.begin(), triplets.end());
  return jac;
}

Eigen::SparseMatrix<double> pmu_design_matrix(const NetworkModel& model, const MeasurementPlan& plan) {
  const auto n = static_cast<Eigen::Index>(model.bus_count());
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<Partial> partials;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    linearize_rectangular(model, plan.entries[i], partials);
    const auto row = static_cast<Eigen::Index>(i);
    for (const Partial& p : partials) {
      const auto bus = static_cast<Eigen::Index>(p.bus);
      if (p.first != 0.0) triplets.emplace_back(row, bus, p.first);
      if (p.second != 0.0) triplets.emplace_back(row, n + bus, p.second);
    }
  }
  Eigen::SparseMatrix<double> h(static_cast<Eigen::Index>(plan.size()), 2 * n);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

}  // namespace gridse
