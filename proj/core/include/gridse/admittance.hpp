#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/SparseCore>

namespace gridse {

using Complex = std::complex<double>;

class NetworkModel;
struct Branch;

/// Pi-model two-port of a single branch: I_from = ff*V_from + ft*V_to and
/// I_to = tf*V_from + tt*V_to (all pu).
struct BranchAdmittance {
  Complex ff;
  Complex ft;
  Complex tf;
  Complex tt;
};

using ComplexSparse = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// Node admittance matrix together with the per-branch two-ports it was
/// assembled from. Indices are dense bus/branch indices of the model.
struct AdmittanceMatrix {
  ComplexSparse y;
  std::vector<BranchAdmittance> branches;  // zero two-port for out-of-service branches
  std::vector<Complex> shunts;             // gs + j*bs per bus
};

BranchAdmittance branch_admittance(const Branch& branch);

AdmittanceMatrix build_admittance(const NetworkModel& model);

/// Assembly restricted to a subset of branches (bus shunts are added only when
/// `include_shunts` is set). Summing the matrices of a branch partition plus the
/// shunts reproduces build_admittance.
ComplexSparse assemble_admittance(const NetworkModel& model, const std::vector<std::size_t>& branch_subset,
                                  bool include_shunts);

}  // namespace gridse
