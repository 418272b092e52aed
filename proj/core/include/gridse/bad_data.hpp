#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridse/admm.hpp"
#include "gridse/fusion.hpp"
#include "gridse/grid.hpp"
#include "gridse/local_estimators.hpp"
#include "gridse/measurement.hpp"
#include "gridse/residuals.hpp"

namespace gridse {

enum class CorrectionMode { Remove, Replace };

struct BdOptions {
  double alpha = 0.01;     // chi-square significance
  double lambda = 3.0;     // normalized-residual threshold
  double lambda_x = 3.0;   // cross-validation discrepancy threshold
  int max_rounds = 5;
  CorrectionMode mode = CorrectionMode::Remove;
  double replace_inflation = 10.0;  // sigma multiplier for replaced entries
};

struct Detection {
  double statistic = 0.0;
  std::ptrdiff_t dof = 0;
  double threshold = 0.0;
  bool detected = false;
};

/// Detects when the statistic exceeds the chi-square quantile at 1 - alpha.
/// Throws Error when dof <= 0.
Detection chi_square_detect(double statistic, std::ptrdiff_t dof, double alpha);
Detection chi_square_detect(const ResidualAnalysis& analysis, double alpha);

struct Identification {
  std::optional<std::size_t> row;     // position of the largest normalized residual above lambda
  double normalized = 0.0;
  std::vector<std::size_t> critical;  // positions that cannot be tested
};

Identification lnrt_identify(const ResidualAnalysis& analysis, double lambda);

enum class Side { Scada, Pmu, Hybrid };

std::string side_name(Side side);

struct Flag {
  std::size_t id = 0;
  double normalized = 0.0;
  std::size_t area = kNoIndex;
  Side side = Side::Hybrid;
  int round = 0;
  bool cross_validated = false;
  double evidence = 0.0;  // cross-validation score against the flagged side minus the score against the other
};

enum class CorrectionAction { Removed, Replaced };

struct CorrectionRecord {
  std::size_t id = 0;
  CorrectionAction action = CorrectionAction::Removed;
  double original = 0.0;
  double replacement = 0.0;
};

struct AreaDetection {
  std::size_t area = kNoIndex;
  Side side = Side::Hybrid;
  int round = 0;
  Detection detection;
};

struct Suspect {
  std::size_t bus = 0;
  Side side = Side::Scada;
  double discrepancy = 0.0;
  double scada_score = 0.0;
  double pmu_score = 0.0;
  bool unresolved = false;
};

struct BdReport {
  std::vector<AreaDetection> detections;
  std::vector<Flag> flagged;
  std::vector<CorrectionRecord> corrections;
  std::vector<std::size_t> unidentifiable;  // ids of critical rows in areas where detection fired
  std::vector<Suspect> suspects;
  int rounds = 0;

  bool any_detection() const;
  void merge(const BdReport& other);
};

/// Drops (or replaces with h(estimate), sigma inflated) the rows with the given
/// ids. A removal that would leave a bus of `kind` unobservable, globally or
/// inside the owning area when a partition is given, falls back to replacement.
MeasurementSet correct(const NetworkModel& model, const MeasurementSet& measurements, std::span<const std::size_t> ids,
                       const StateVector& estimate, EstimatorKind kind, const BdOptions& options,
                       const Partition* partition = nullptr, std::vector<CorrectionRecord>* log = nullptr);

struct CentralBdpResult {
  LocalEstimate estimate;
  MeasurementSet measurements;
  BdReport report;
};

/// Centralized WLS with the detect / identify / correct loop.
CentralBdpResult wls_with_lnrt(const NetworkModel& model, const MeasurementSet& measurements, const BdOptions& options,
                               const WlsOptions& wls = {});

struct DistributedBdpResult {
  DistributedEstimate estimate;
  MeasurementSet measurements;
  BdReport report;
};

/// Decentralized estimate followed by per-area detection and identification
/// on the area's own rows at its consensus copy; one flag per detecting area
/// per round, then re-estimation.
DistributedBdpResult admm_with_lnrt(const NetworkModel& model, const Partition& partition,
                                    const MeasurementSet& measurements, EstimatorKind kind,
                                    const AdmmOptions& admm, const BdOptions& options);

struct CrossValidation {
  std::vector<Suspect> suspects;
  MeasurementSet scada_pseudo;  // PMU-side states lent to the SCADA side
  MeasurementSet pmu_pseudo;    // SCADA-side states lent to the PMU side
  std::vector<Flag> flags;  // at most one candidate per side, the side with more evidence first
  double statistic = 0.0;   // summed objectives of the re-solved fits
};

/// Compares gauge-aligned extended estimates entry by entry and re-solves the
/// rows of every area of either side, with its neighbors' rows, against the
/// other side's states as pseudo-measurements. A fit blames the side whose
/// rows misfit more than the lent states there: evidence against a side is the
/// largest margin by which its own rows out-misfit the lent states in its fits,
/// or its lent states out-misfit the other side's rows in the other's fits.
/// Buses with a standardized discrepancy above lambda_x become suspects of the
/// side with more evidence nearby. Each side offers as candidate its largest own
/// normalized residual above lambda, taken from a re-solved fit that fails the
/// chi-square test.
CrossValidation cross_validate(const NetworkModel& model, const Partition& partition, const ExtendedEstimate& scada,
                               const ExtendedEstimate& pmu, const MeasurementSet& scada_set,
                               const MeasurementSet& pmu_set, const BdOptions& options);

/// Chi-square test of every area's own rows at an unconstrained local fit
/// started from the area's consensus copy.
std::vector<AreaDetection> detect_areas(const NetworkModel& model, const Partition& partition,
                                        const DistributedEstimate& estimate, const MeasurementSet& measurements,
                                        const BdOptions& options);

/// Pseudo-measurements of the supported states of `source` in the coordinates
/// of `target`, restricted to `buses` when given.
MeasurementSet pseudo_measurements(const ExtendedEstimate& source, EstimatorKind target,
                                   const std::vector<std::size_t>& buses, std::size_t first_id);

}  // namespace gridse
