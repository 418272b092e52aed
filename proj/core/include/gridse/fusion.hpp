#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridse/admm.hpp"
#include "gridse/grid.hpp"
#include "gridse/measurement.hpp"
#include "gridse/powerflow.hpp"

namespace gridse {

enum class Provenance { Missing, Direct, ExtendedViaBranch };

std::string provenance_name(Provenance p);

/// A decentralized estimate on a (possibly enlarged) bus support, with
/// per-entry variances (theta, V) and how each bus was obtained.
struct ExtendedEstimate {
  EstimatorKind kind = EstimatorKind::Scada;
  StateVector state;
  std::vector<Eigen::Vector2d> variance;  // per bus: (var theta, var V)
  std::vector<Provenance> provenance;
  std::vector<std::size_t> unreachable;  // companion-support buses no rule could reach

  bool supports(std::size_t bus) const { return provenance.at(bus) != Provenance::Missing; }
  std::size_t support_size() const;
  std::size_t direct_size() const;
};

/// SCADA: identity on the buses the estimate holds. PMU: buses held by their
/// owning area are direct; every other bus adjacent to a direct bus through a
/// branch whose current phasor is measured at the direct end is extended by
/// the branch equation, in a single pass. `companion` lists buses the other
/// estimator supports; those still missing are reported as unreachable.
ExtendedEstimate extend_state_set(const DistributedEstimate& estimate, const NetworkModel& model,
                                  const MeasurementSet& measurements, const std::vector<char>& companion = {});

/// Shifts the SCADA angles so that the slack angle matches the PMU estimate
/// and adds the PMU slack-angle variance to every shifted angle. Frames whose
/// slack angles agree within `tolerance` standard deviations are left as they
/// are, as is every angle when the PMU side does not cover the slack bus.
void align_gauge(ExtendedEstimate& scada, const ExtendedEstimate& pmu, std::size_t slack, double tolerance = 0.0);

struct FusedEstimate {
  StateVector state;
  std::vector<Eigen::Vector2d> variance;
  std::vector<Eigen::Vector2d> scada_weight;  // per bus and component; the PMU weight is 1 - this
  std::vector<char> supported;
};

/// Inverse-variance mean per entry; entries present on one side pass through.
FusedEstimate fuse(const ExtendedEstimate& scada, const ExtendedEstimate& pmu);

/// Combines the two estimates through their full information matrices, built
/// from the rows each side was solved with: the minimizer of
/// (x - xs)' Gs (x - xs) + (x - xp)' Gp (x - xp) in polar coordinates.
/// `scada_weight` holds the diagonal of (Gs + Gp)^-1 Gs. The SCADA angle frame
/// drops out, since Gs carries no absolute angle information. Throws
/// ObservabilityError when the combined information is singular.
FusedEstimate fuse_information(const NetworkModel& model, const ExtendedEstimate& scada, const ExtendedEstimate& pmu,
                               const MeasurementSet& scada_rows, const MeasurementSet& pmu_rows);

/// Inverse-variance combination of two scalars. A zero variance dominates.
void combine(double a, double var_a, double b, double var_b, double& value, double& variance, double& weight_a);

}  // namespace gridse
