#pragma once

// Shared complex-power kernels used by the power flow and the measurement
// model. Internal to the core library.

#include <cstddef>

#include "gridse/grid.hpp"
#include "gridse/powerflow.hpp"

namespace gridse::detail {

/// Calls visit(m, S_term, dS/dtheta_m, dS/dV_m) for every admittance entry in
/// row k, then returns S_k. Self-derivatives are accumulated by the caller
/// from the returned value: dS_k/dtheta_k = j(S_k - V_k^2 conj(Y_kk)) and
/// dS_k/dV_k = (S_k + V_k^2 conj(Y_kk)) / V_k.
template <typename Visit>
Complex injection_row(const NetworkModel& model, const StateVector& state, std::size_t k, Visit&& visit) {
  const ComplexSparse& y = model.admittance().y;
  const auto row = static_cast<Eigen::Index>(k);
  const double vk = state.magnitude[row];
  const double tk = state.angle[row];
  Complex s(0.0, 0.0);
  for (ComplexSparse::InnerIterator it(y, row); it; ++it) {
    const auto m = static_cast<std::size_t>(it.col());
    const double vm = state.magnitude[it.col()];
    const Complex coupling = std::conj(it.value()) * std::polar(1.0, tk - state.angle[it.col()]);
    const Complex term = vk * vm * coupling;
    s += term;
    if (m != k) visit(m, term, Complex(0.0, -1.0) * term, vk * coupling);
  }
  return s;
}

inline Complex self_admittance(const NetworkModel& model, std::size_t k) {
  return model.admittance().y.coeff(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
}

}  // namespace gridse::detail
