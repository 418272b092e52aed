#pragma once

#include <nlohmann/json.hpp>

#include "gridse/admm.hpp"
#include "gridse/bad_data.hpp"
#include "gridse/dphase.hpp"
#include "gridse/fusion.hpp"
#include "gridse/grid.hpp"
#include "gridse/powerflow.hpp"

namespace gridse {

/// {"bus": [ids], "v": [...], "theta": [...]}, buses in model order.
nlohmann::json state_to_json(const StateVector& state, const NetworkModel& model);
/// Accepts the buses in any order; every bus of the model must appear once.
StateVector state_from_json(const nlohmann::json& document, const NetworkModel& model);

nlohmann::json operating_point_to_json(const OperatingPoint& op, const NetworkModel& model);

nlohmann::json trace_to_json(const AdmmTrace& trace);
nlohmann::json distributed_estimate_to_json(const DistributedEstimate& estimate, const NetworkModel& model);
nlohmann::json extended_estimate_to_json(const ExtendedEstimate& estimate, const NetworkModel& model);
nlohmann::json fused_estimate_to_json(const FusedEstimate& estimate, const NetworkModel& model);

nlohmann::json bd_report_to_json(const BdReport& report);
BdReport bd_report_from_json(const nlohmann::json& document);

/// Full report including every stage artifact that was produced.
nlohmann::json estimation_report_to_json(const EstimationReport& report, const NetworkModel& model);

nlohmann::json admm_options_to_json(const AdmmOptions& options);
AdmmOptions admm_options_from_json(const nlohmann::json& document, AdmmOptions base = {});
nlohmann::json bd_options_to_json(const BdOptions& options);
BdOptions bd_options_from_json(const nlohmann::json& document, BdOptions base = {});
nlohmann::json noise_to_json(const NoiseLevels& levels);
NoiseLevels noise_from_json(const nlohmann::json& document, NoiseLevels base = {});

}  // namespace gridse
