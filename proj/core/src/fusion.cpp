#include "gridse/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

#include "gridse/error.hpp"
#include "gridse/layout.hpp"
#include "gridse/wls.hpp"

namespace gridse {

namespace {

Eigen::Matrix2d complex_map(Complex c) {
  Eigen::Matrix2d m;
  m << c.real(), -c.imag(), c.imag(), c.real();
  return m;
}

struct CurrentReading {
  bool re = false;
  bool im = false;
  double value_re = 0.0;
  double value_im = 0.0;
  double var_re = 0.0;
  double var_im = 0.0;
};

}  // namespace

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Missing:
      return "missing";
    case Provenance::Direct:
      return "direct";
    case Provenance::ExtendedViaBranch:
      return "extended";
  }
  return "missing";
}

std::size_t ExtendedEstimate::support_size() const {
  return static_cast<std::size_t>(
      std::count_if(provenance.begin(), provenance.end(), [](Provenance p) { return p != Provenance::Missing; }));
}

std::size_t ExtendedEstimate::direct_size() const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), Provenance::Direct));
}

ExtendedEstimate extend_state_set(const DistributedEstimate& estimate, const NetworkModel& model,
                                  const MeasurementSet& measurements, const std::vector<char>& companion) {
  const std::size_t n = model.bus_count();
  if (estimate.state.size() != n) throw ModelError("extension: estimate does not match the network");
  ExtendedEstimate out;
  out.kind = estimate.kind;
  out.state = estimate.state;
  out.variance.assign(n, Eigen::Vector2d::Zero());
  out.provenance.assign(n, Provenance::Missing);

  const bool pmu = estimate.kind == EstimatorKind::Pmu;
  for (std::size_t k = 0; k < n; ++k) {
    const bool held = pmu ? estimate.direct[k] : estimate.estimated[k];
    if (!held) continue;
    out.provenance[k] = Provenance::Direct;
    out.variance[k] = estimate.covariance[k].diagonal();
  }

  if (pmu) {
    // (branch, end) -> measured current
    std::vector<std::array<CurrentReading, 2>> readings(model.branch_count());
    for (std::size_t i = 0; i < measurements.size(); ++i) {
      const Measurement& m = measurements.plan.entries[i];
      if (m.kind != MeasurementKind::CurrentReal && m.kind != MeasurementKind::CurrentImag) continue;
      CurrentReading& r = readings[m.branch][m.end == BranchEnd::From ? 0 : 1];
      const double value = measurements.values[static_cast<Eigen::Index>(i)];
      if (m.kind == MeasurementKind::CurrentReal) {
        r.re = true;
        r.value_re = value;
        r.var_re = m.sigma * m.sigma;
      } else {
        r.im = true;
        r.value_im = value;
        r.var_im = m.sigma * m.sigma;
      }
    }
    const std::vector<Provenance> direct = out.provenance;
    for (std::size_t target = 0; target < n; ++target) {
      if (direct[target] != Provenance::Missing) continue;
      double best_trace = std::numeric_limits<double>::infinity();
      for (std::size_t l : model.incident(target)) {
        const Branch& br = model.branch(l);
        const std::size_t source = model.other_end(l, target);
        if (direct[source] != Provenance::Direct) continue;
        const int end = br.from == source ? 0 : 1;
        const CurrentReading& r = readings[l][end];
        if (!r.re || !r.im) continue;
        const BranchAdmittance& y = model.admittance().branches[l];
        const Complex y_self = end == 0 ? y.ff : y.tt;
        const Complex y_mutual = end == 0 ? y.ft : y.tf;
        if (std::abs(y_mutual) == 0.0) continue;
        const Complex vk = estimate.state.phasor(source);
        const Complex current(r.value_re, r.value_im);
        const Complex vm = (current - y_self * vk) / y_mutual;

        const auto ks = static_cast<Eigen::Index>(source);
        const Eigen::Matrix2d cov_k =
            polar_to_rectangular(estimate.covariance[source], estimate.state.angle[ks], estimate.state.magnitude[ks]);
        const Eigen::Matrix2d a = complex_map(-y_self / y_mutual);
        const Eigen::Matrix2d b = complex_map(1.0 / y_mutual);
        Eigen::Matrix2d cov_i = Eigen::Matrix2d::Zero();
        cov_i(0, 0) = r.var_re;
        cov_i(1, 1) = r.var_im;
        const Eigen::Matrix2d cov_m = a * cov_k * a.transpose() + b * cov_i * b.transpose();
        const Eigen::Matrix2d polar = rectangular_to_polar(cov_m, vm.real(), vm.imag());
        if (polar.trace() >= best_trace) continue;
        best_trace = polar.trace();
        const auto kt = static_cast<Eigen::Index>(target);
        out.state.magnitude[kt] = std::abs(vm);
        out.state.angle[kt] = std::arg(vm);
        out.variance[target] = polar.diagonal();
        out.provenance[target] = Provenance::ExtendedViaBranch;
      }
    }
  }

  for (std::size_t k = 0; k < companion.size() && k < n; ++k) {
    if (companion[k] && out.provenance[k] == Provenance::Missing) out.unreachable.push_back(k);
  }
  return out;
}

void align_gauge(ExtendedEstimate& scada, const ExtendedEstimate& pmu, std::size_t slack, double tolerance) {
  if (!scada.supports(slack) || !pmu.supports(slack)) return;
  const auto s = static_cast<Eigen::Index>(slack);
  const double shift = pmu.state.angle[s] - scada.state.angle[s];
  const double var = pmu.variance[slack][0] + scada.variance[slack][0];
  if (std::abs(shift) <= tolerance * std::sqrt(var)) return;
  for (std::size_t k = 0; k < scada.provenance.size(); ++k) {
    if (!scada.supports(k)) continue;
    scada.state.angle[static_cast<Eigen::Index>(k)] += shift;
    scada.variance[k][0] += pmu.variance[slack][0];
  }
}

void combine(double a, double var_a, double b, double var_b, double& value, double& variance, double& weight_a) {
  if (var_a <= 0.0 && var_b <= 0.0) {
    weight_a = 0.5;
  } else if (var_a <= 0.0) {
    weight_a = 1.0;
  } else if (var_b <= 0.0) {
    weight_a = 0.0;
  } else {
    weight_a = (1.0 / var_a) / (1.0 / var_a + 1.0 / var_b);
  }
  value = weight_a * a + (1.0 - weight_a) * b;
  variance = var_a <= 0.0 || var_b <= 0.0 ? 0.0 : 1.0 / (1.0 / var_a + 1.0 / var_b);
}

FusedEstimate fuse(const ExtendedEstimate& scada, const ExtendedEstimate& pmu) {
  const std::size_t n = scada.provenance.size();
  if (pmu.provenance.size() != n) throw ModelError("fusion: estimates cover different networks");
  FusedEstimate out;
  out.state = StateVector::flat(n);
  out.variance.assign(n, Eigen::Vector2d::Zero());
  out.scada_weight.assign(n, Eigen::Vector2d::Zero());
  out.supported.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const bool s = scada.supports(k);
    const bool p = pmu.supports(k);
    if (!s && !p) continue;
    out.supported[k] = 1;
    const double sv[2] = {scada.state.angle[i], scada.state.magnitude[i]};
    const double pv[2] = {pmu.state.angle[i], pmu.state.magnitude[i]};
    double fv[2] = {0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
      if (s && p) {
        combine(sv[c], scada.variance[k][c], pv[c], pmu.variance[k][c], fv[c], out.variance[k][c],
                out.scada_weight[k][c]);
      } else if (s) {
        fv[c] = sv[c];
        out.variance[k][c] = scada.variance[k][c];
        out.scada_weight[k][c] = 1.0;
      } else {
        fv[c] = pv[c];
        out.variance[k][c] = pmu.variance[k][c];
      }
    }
    out.state.angle[i] = fv[0];
    out.state.magnitude[i] = fv[1];
  }
  return out;
}

FusedEstimate fuse_information(const NetworkModel& model, const ExtendedEstimate& scada, const ExtendedEstimate& pmu,
                               const MeasurementSet& scada_rows, const MeasurementSet& pmu_rows) {
  const std::size_t n = model.bus_count();
  if (scada.provenance.size() != n || pmu.provenance.size() != n) {
    throw ModelError("fusion: estimates cover different networks");
  }
  const auto& srows = scada_rows.plan.entries;
  const auto& prows = pmu_rows.plan.entries;
  for (const auto& [rows, est] : {std::pair{&srows, &scada}, std::pair{&prows, &pmu}}) {
    for (std::size_t bus : touched_buses(model, *rows)) {
      if (!est->supports(bus)) throw ObservabilityError("fusion: rows reach bus " + model.bus(bus).id + " outside the estimate");
    }
  }

  FusedEstimate out;
  out.state = StateVector::flat(n);
  out.variance.assign(n, Eigen::Vector2d::Zero());
  out.scada_weight.assign(n, Eigen::Vector2d::Zero());
  out.supported.assign(n, 0);
  std::vector<std::size_t> buses;
  for (std::size_t k = 0; k < n; ++k) {
    if (scada.supports(k) || pmu.supports(k)) buses.push_back(k);
  }
  if (buses.empty()) return out;
  const StateLayout layout(Coordinates::Polar, n, buses);

  // Each side's state on the other's buses only serves as filler; its rows never reach them.
  StateVector xs = scada.state;
  StateVector xp = pmu.state;
  for (std::size_t bus : buses) {
    const auto i = static_cast<Eigen::Index>(bus);
    if (!scada.supports(bus)) {
      xs.angle[i] = pmu.state.angle[i];
      xs.magnitude[i] = pmu.state.magnitude[i];
    }
    if (!pmu.supports(bus)) {
      xp.angle[i] = scada.state.angle[i];
      xp.magnitude[i] = scada.state.magnitude[i];
    }
  }
  const NativeState ns = NativeState::from_polar(xs, Coordinates::Polar);
  const NativeState np = NativeState::from_polar(xp, Coordinates::Polar);
  const Eigen::SparseMatrix<double> gs = gain_matrix(model, layout, srows, ns);
  const Eigen::SparseMatrix<double> gp = gain_matrix(model, layout, prows, np);
  Eigen::SparseMatrix<double> g = gs + gp;
  g.makeCompressed();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(g);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
    throw ObservabilityError("fusion: combined information matrix is singular");
  }
  const Eigen::VectorXd x = ldlt.solve(gs * layout.gather(ns) + gp * layout.gather(np));
  NativeState fused = ns;
  layout.scatter(x, fused);
  out.state = fused.to_polar();

  Eigen::VectorXd unit = Eigen::VectorXd::Zero(layout.size());
  for (std::size_t bus : buses) {
    out.supported[bus] = 1;
    for (int c = 0; c < 2; ++c) {
      const Eigen::Index col = layout.column(bus, c);
      unit[col] = 1.0;
      const Eigen::VectorXd column = ldlt.solve(unit);
      unit[col] = 0.0;
      out.variance[bus][c] = column[col];
      out.scada_weight[bus][c] = gs.col(col).dot(column);
    }
  }
  return out;
}

}  // namespace gridse
