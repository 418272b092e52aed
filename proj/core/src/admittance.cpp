#include "gridse/admittance.hpp"

#include <vector>

#include "gridse/grid.hpp"

namespace gridse {

BranchAdmittance branch_admittance(const Branch& branch) {
  if (!branch.in_service) return {};
  const Complex series = 1.0 / Complex(branch.r, branch.x);
  const Complex charging(0.0, branch.b / 2.0);
  const Complex tap = std::polar(branch.tap, branch.shift);
  BranchAdmittance two_port;
  two_port.tt = series + charging;
  two_port.ff = two_port.tt / (branch.tap * branch.tap);
  two_port.ft = -series / std::conj(tap);
  two_port.tf = -series / tap;
  return two_port;
}

ComplexSparse assemble_admittance(const NetworkModel& model, const std::vector<std::size_t>& branch_subset,
                                  bool include_shunts) {
  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(4 * branch_subset.size() + model.bus_count());
  for (std::size_t l : branch_subset) {
    const Branch& br = model.branch(l);
    if (!br.in_service) continue;
    const BranchAdmittance y = branch_admittance(br);
    const auto f = static_cast<Eigen::Index>(br.from);
    const auto t = static_cast<Eigen::Index>(br.to);
    triplets.emplace_back(f, f, y.ff);
    triplets.emplace_back(f, t, y.ft);
    triplets.emplace_back(t, f, y.tf);
    triplets.emplace_back(t, t, y.tt);
  }
  if (include_shunts) {
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
      const Bus& b = model.bus(i);
      const auto k = static_cast<Eigen::Index>(i);
      triplets.emplace_back(k, k, Complex(b.gs, b.bs));
    }
  }
  const auto n = static_cast<Eigen::Index>(model.bus_count());
  ComplexSparse y(n, n);
  y.setFromTriplets(triplets.begin(), triplets.end());
  y.makeCompressed();
  return y;
}

AdmittanceMatrix build_admittance(const NetworkModel& model) {
  AdmittanceMatrix result;
  std::vector<std::size_t> all(model.branch_count());
  for (std::size_t l = 0; l < all.size(); ++l) all[l] = l;
  result.y = assemble_admittance(model, all, true);
  result.branches.reserve(model.branch_count());
  for (const Branch& br : model.branches()) result.branches.push_back(branch_admittance(br));
  result.shunts.reserve(model.bus_count());
  for (const Bus& b : model.buses()) result.shunts.emplace_back(b.gs, b.bs);
  return result;
}

}  // namespace gridse
