#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "gridse/grid.hpp"
#include "gridse/powerflow.hpp"

namespace gridse {

inline constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

enum class MeasurementKind {
  VoltageMagnitude,
  VoltageAngle,  // pseudo-measurements only
  ActiveInjection,
  ReactiveInjection,
  ActiveFlow,
  ReactiveFlow,
  VoltageReal,  // PMU voltage phasor, rectangular components
  VoltageImag,
  CurrentReal,  // PMU branch current phasor at the metered end
  CurrentImag,
};

enum class BranchEnd { From, To };

enum class Source { Scada, Pmu, Pseudo };

/// One real-valued row of a measurement plan. A PMU phasor contributes two
/// rows (real and imaginary component).
struct Measurement {
  std::size_t id = 0;  // stable identity inside the originating plan
  MeasurementKind kind = MeasurementKind::VoltageMagnitude;
  std::size_t bus = 0;  // location of bus kinds; metering bus of branch kinds
  std::size_t branch = kNoIndex;
  BranchEnd end = BranchEnd::From;
  double sigma = 0.0;
  std::size_t area = kNoIndex;
  Source source = Source::Scada;
};

bool is_branch_kind(MeasurementKind kind);
bool is_phasor_kind(MeasurementKind kind);
bool is_pmu(const Measurement& m);
std::string kind_key(MeasurementKind kind);

/// Human-readable selector label, e.g. "p_flow@3:from" or "v_re@2".
std::string measurement_label(const Measurement& m, const NetworkModel& model);

struct NoiseLevels {
  double magnitude = 0.004;    // SCADA voltage magnitude
  double power = 0.01;         // SCADA injections and flows
  double pmu_voltage = 0.001;  // per rectangular component
  double pmu_current = 0.001;
};

struct MeasurementPlan {
  std::vector<Measurement> entries;

  std::size_t size() const { return entries.size(); }
  MeasurementPlan filtered(const std::function<bool(const Measurement&)>& keep) const;
};

/// Parse a plan document. SCADA entries without "sigma" and PMU entries
/// without "sigma_v"/"sigma_i" take the given defaults. When a partition is
/// supplied every entry is tagged with the area of its metering bus.
MeasurementPlan load_plan(const nlohmann::json& document, const NetworkModel& model,
                          const Partition* partition = nullptr, const NoiseLevels& defaults = {});
MeasurementPlan load_plan_file(const std::string& path, const NetworkModel& model,
                               const Partition* partition = nullptr, const NoiseLevels& defaults = {});
nlohmann::json plan_to_json(const MeasurementPlan& plan, const NetworkModel& model);

void validate_plan(const MeasurementPlan& plan, const NetworkModel& model);
void assign_areas(MeasurementPlan& plan, const Partition& partition);

/// Replace sigma of every entry by the level for its class.
void apply_noise_levels(MeasurementPlan& plan, const NoiseLevels& levels);

/// Replicates a plan of the base network onto every copy of a tiled network.
MeasurementPlan tile_plan(const MeasurementPlan& base, const NetworkModel& base_model, const NetworkModel& tiled,
                          std::size_t copies);

struct BadDataLabel {
  std::size_t id = 0;
  double original = 0.0;
  double injected = 0.0;
};

struct MeasurementSet {
  MeasurementPlan plan;
  Eigen::VectorXd values;
  std::vector<BadDataLabel> bad;

  std::size_t size() const { return plan.size(); }
  std::optional<std::size_t> position(std::size_t id) const;
  bool is_bad(std::size_t id) const;
  MeasurementSet filtered(const std::function<bool(const Measurement&)>& keep) const;
  MeasurementSet scada() const;
  MeasurementSet pmu() const;
};

/// Noise-free values plus independent Gaussian noise. The draw for each entry
/// depends only on (seed, entry id).
MeasurementSet synthesize(const NetworkModel& model, const MeasurementPlan& plan, const OperatingPoint& truth,
                          std::uint64_t seed);

enum class BadDataMode { Absolute, Sigma, Conforming };

/// `select` is a label, "#<id>", or "random:<class>" where class is one of
/// scada, pmu, pmu_v, or a kind key such as p_flow. Conforming mode perturbs
/// the selected entry and an electrically coupled partner by the same
/// amount (value * sigma of the selected entry).
struct BadDataSpec {
  std::string select;
  BadDataMode mode = BadDataMode::Sigma;
  double value = 0.0;
  std::string partner;  // optional explicit partner for conforming mode
};

std::vector<BadDataSpec> load_bad_data(const nlohmann::json& document);
nlohmann::json bad_data_to_json(std::span<const BadDataSpec> specs);

MeasurementSet inject_bad_data(const NetworkModel& model, const MeasurementSet& set, std::span<const BadDataSpec> specs,
                               std::uint64_t seed);

nlohmann::json measurement_set_to_json(const MeasurementSet& set, const NetworkModel& model);
MeasurementSet measurement_set_from_json(const nlohmann::json& document, const NetworkModel& model);

}  // namespace gridse
