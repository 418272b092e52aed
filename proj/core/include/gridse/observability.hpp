#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "gridse/grid.hpp"
#include "gridse/layout.hpp"
#include "gridse/measurement.hpp"

namespace gridse {

struct RankInfo {
  std::size_t rank = 0;
  std::vector<Eigen::Index> free_columns;  // columns touched by the numerical null space
};

/// Numerical rank with singular values below threshold * s_max treated as zero.
RankInfo analyze_rank(const Eigen::SparseMatrix<double>& h, double threshold = 1e-8);

struct ObservabilityScope {
  EstimatorKind kind = EstimatorKind::Hybrid;
  std::optional<std::size_t> area;  // only rows owned by this area; report its buses
};

struct ObservabilityReport {
  bool observable = false;
  std::vector<std::size_t> unobservable;  // sorted bus indices
  std::size_t rank = 0;
  std::size_t columns = 0;
};

/// Rank test of the Jacobian (flat state) or PMU design matrix for the rows in
/// scope. Angles are pinned at one reference bus unless voltage phasors fix
/// the absolute angle.
ObservabilityReport check_observability(const NetworkModel& model, const MeasurementPlan& plan,
                                        const Partition& partition, const ObservabilityScope& scope);

/// Same test for an explicit row set over the given buses.
ObservabilityReport check_rows(const NetworkModel& model, std::span<const Measurement> rows, EstimatorKind kind,
                               std::span<const std::size_t> report_buses);

/// True when some row fixes absolute angles (voltage phasor or angle pseudo-measurement).
bool has_angle_anchor(std::span<const Measurement> rows);

/// Buses whose phasor follows from the PMU rows: PMU buses, then repeated
/// propagation across branches whose current is measured.
std::vector<std::size_t> pmu_estimable_buses(const NetworkModel& model, std::span<const Measurement> rows);

}  // namespace gridse
