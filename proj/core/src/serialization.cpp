#include "gridse/serialization.hpp"

#include <cmath>
#include <limits>

#include "gridse/error.hpp"
#include "json_util.hpp"

namespace gridse {

using nlohmann::json;
using namespace detail;

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json bus_list(const std::vector<char>& mask, const NetworkModel& model) {
  json out = json::array();
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k]) out.push_back(model.bus(k).id);
  }
  return out;
}

json pair_json(const Eigen::Vector2d& v) { return json::array({v[0], v[1]}); }

json matrix_json(const Eigen::Matrix2d& m) { return json::array({m(0, 0), m(0, 1), m(1, 1)}); }

// Non-finite numbers have no JSON form; they travel as null.
json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_or_nan(const json& value) {
  return value.is_null() ? std::numeric_limits<double>::quiet_NaN() : value.get<double>();
}

const char* action_name(CorrectionAction a) { return a == CorrectionAction::Removed ? "removed" : "replaced"; }

Side parse_side(const std::string& text) {
  if (text == "scada") return Side::Scada;
  if (text == "pmu") return Side::Pmu;
  if (text == "hybrid") return Side::Hybrid;
  throw ModelError("bad-data report: unknown side '" + text + "'");
}

std::size_t index_or_none(const json& value) {
  return value.is_null() ? kNoIndex : value.get<std::size_t>();
}

json index_json(std::size_t index) { return index == kNoIndex ? json(nullptr) : json(index); }

json detection_json(const Detection& d) {
  return {{"statistic", finite_or_null(d.statistic)},
          {"dof", d.dof},
          {"threshold", finite_or_null(d.threshold)},
          {"detected", d.detected}};
}

Detection detection_from(const json& doc) {
  Detection d;
  d.statistic = number_or_nan(doc.at("statistic"));
  d.dof = doc.at("dof").get<std::ptrdiff_t>();
  d.threshold = number_or_nan(doc.at("threshold"));
  d.detected = doc.at("detected").get<bool>();
  return d;
}

}  // namespace

json state_to_json(const StateVector& state, const NetworkModel& model) {
  if (static_cast<std::size_t>(state.magnitude.size()) != model.bus_count()) {
    throw ModelError("state: length does not match the network");
  }
  json ids = json::array();
  for (const Bus& b : model.buses()) ids.push_back(b.id);
  return {{"bus", std::move(ids)}, {"v", vector_json(state.magnitude)}, {"theta", vector_json(state.angle)}};
}

StateVector state_from_json(const json& document, const NetworkModel& model) {
  const json& ids = array_field(document, "bus", "state", false);
  const json& v = array_field(document, "v", "state", false);
  const json& theta = array_field(document, "theta", "state", false);
  if (ids.size() != model.bus_count() || v.size() != ids.size() || theta.size() != ids.size()) {
    throw ModelError("state: length does not match the network");
  }
  StateVector out = StateVector::flat(model.bus_count());
  std::vector<char> seen(model.bus_count(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t k = model.bus_index(id_value(ids[i], "state.bus[" + std::to_string(i) + "]"));
    if (seen[k]) throw ModelError("state.bus[" + std::to_string(i) + "]: duplicate bus");
    seen[k] = 1;
    out.magnitude[static_cast<Eigen::Index>(k)] = v[i].get<double>();
    out.angle[static_cast<Eigen::Index>(k)] = theta[i].get<double>();
  }
  return out;
}

json operating_point_to_json(const OperatingPoint& op, const NetworkModel& model) {
  json flows = json::array();
  for (std::size_t l = 0; l < op.flows.size(); ++l) {
    const Branch& br = model.branch(l);
    flows.push_back({{"branch", l},
                     {"from", model.bus(br.from).id},
                     {"to", model.bus(br.to).id},
                     {"p_from", op.flows[l].from.real()},
                     {"q_from", op.flows[l].from.imag()},
                     {"p_to", op.flows[l].to.real()},
                     {"q_to", op.flows[l].to.imag()}});
  }
  return {{"state", state_to_json(op.state, model)},
          {"p", vector_json(op.p)},
          {"q", vector_json(op.q)},
          {"flows", std::move(flows)},
          {"iterations", op.iterations},
          {"mismatch", op.mismatch}};
}

json trace_to_json(const AdmmTrace& trace) {
  return {{"primal", trace.primal},
          {"dual", trace.dual},
          {"objective", trace.objective},
          {"disagreement", trace.disagreement}};
}

json distributed_estimate_to_json(const DistributedEstimate& estimate, const NetworkModel& model) {
  json areas = json::array();
  for (const LocalEstimate& a : estimate.areas) {
    json buses = json::array();
    json v = json::array();
    json theta = json::array();
    json cov = json::array();
    for (std::size_t i = 0; i < a.buses.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(a.buses[i]);
      buses.push_back(model.bus(a.buses[i]).id);
      v.push_back(a.state.magnitude[k]);
      theta.push_back(a.state.angle[k]);
      cov.push_back(matrix_json(a.covariance[i]));
    }
    areas.push_back({{"area", a.area},
                     {"bus", std::move(buses)},
                     {"v", std::move(v)},
                     {"theta", std::move(theta)},
                     {"covariance", std::move(cov)},
                     {"objective", a.objective},
                     {"iterations", a.iterations},
                     {"converged", a.converged}});
  }
  json cov = json::array();
  for (const Eigen::Matrix2d& c : estimate.covariance) cov.push_back(matrix_json(c));
  json exchanges = json::array();
  for (const auto& [consumer, provider] : estimate.log.exchanges) exchanges.push_back({consumer, provider});
  return {{"kind", estimator_name(estimate.kind)},
          {"state", state_to_json(estimate.state, model)},
          {"estimated", bus_list(estimate.estimated, model)},
          {"direct", bus_list(estimate.direct, model)},
          {"covariance", std::move(cov)},
          {"areas", std::move(areas)},
          {"trace", trace_to_json(estimate.trace)},
          {"exchanges", std::move(exchanges)},
          {"rho_scale", estimate.rho_scale},
          {"iterations", estimate.iterations},
          {"converged", estimate.converged}};
}

json extended_estimate_to_json(const ExtendedEstimate& estimate, const NetworkModel& model) {
  json provenance = json::array();
  json variance = json::array();
  for (std::size_t k = 0; k < estimate.provenance.size(); ++k) {
    provenance.push_back(provenance_name(estimate.provenance[k]));
    variance.push_back(pair_json(estimate.variance[k]));
  }
  json unreachable = json::array();
  for (std::size_t k : estimate.unreachable) unreachable.push_back(model.bus(k).id);
  return {{"kind", estimator_name(estimate.kind)},
          {"state", state_to_json(estimate.state, model)},
          {"variance", std::move(variance)},
          {"provenance", std::move(provenance)},
          {"unreachable", std::move(unreachable)}};
}

json fused_estimate_to_json(const FusedEstimate& estimate, const NetworkModel& model) {
  json variance = json::array();
  json weight = json::array();
  for (std::size_t k = 0; k < estimate.variance.size(); ++k) {
    variance.push_back(pair_json(estimate.variance[k]));
    weight.push_back(pair_json(estimate.scada_weight[k]));
  }
  return {{"state", state_to_json(estimate.state, model)},
          {"variance", std::move(variance)},
          {"scada_weight", std::move(weight)},
          {"supported", bus_list(estimate.supported, model)}};
}

json bd_report_to_json(const BdReport& report) {
  json detections = json::array();
  for (const AreaDetection& d : report.detections) {
    json doc = detection_json(d.detection);
    doc["area"] = index_json(d.area);
    doc["side"] = side_name(d.side);
    doc["round"] = d.round;
    detections.push_back(std::move(doc));
  }
  json flagged = json::array();
  for (const Flag& f : report.flagged) {
    flagged.push_back({{"id", f.id},
                       {"normalized", finite_or_null(f.normalized)},
                       {"area", index_json(f.area)},
                       {"side", side_name(f.side)},
                       {"round", f.round},
                       {"cross_validated", f.cross_validated},
                       {"evidence", finite_or_null(f.evidence)}});
  }
  json corrections = json::array();
  for (const CorrectionRecord& c : report.corrections) {
    corrections.push_back(
        {{"id", c.id}, {"action", action_name(c.action)}, {"original", c.original}, {"replacement", c.replacement}});
  }
  json suspects = json::array();
  for (const Suspect& s : report.suspects) {
    suspects.push_back({{"bus", s.bus},
                        {"side", side_name(s.side)},
                        {"discrepancy", finite_or_null(s.discrepancy)},
                        {"scada_score", finite_or_null(s.scada_score)},
                        {"pmu_score", finite_or_null(s.pmu_score)},
                        {"unresolved", s.unresolved}});
  }
  return {{"detections", std::move(detections)},
          {"flagged", std::move(flagged)},
          {"corrections", std::move(corrections)},
          {"unidentifiable", report.unidentifiable},
          {"suspects", std::move(suspects)},
          {"rounds", report.rounds}};
}

BdReport bd_report_from_json(const json& document) {
  BdReport out;
  try {
    for (const json& doc : document.at("detections")) {
      AreaDetection d;
      d.detection = detection_from(doc);
      d.area = index_or_none(doc.at("area"));
      d.side = parse_side(doc.at("side").get<std::string>());
      d.round = doc.at("round").get<int>();
      out.detections.push_back(d);
    }
    for (const json& doc : document.at("flagged")) {
      Flag f;
      f.id = doc.at("id").get<std::size_t>();
      f.normalized = number_or_nan(doc.at("normalized"));
      f.area = index_or_none(doc.at("area"));
      f.side = parse_side(doc.at("side").get<std::string>());
      f.round = doc.at("round").get<int>();
      f.cross_validated = doc.at("cross_validated").get<bool>();
      f.evidence = number_or_nan(doc.at("evidence"));
      out.flagged.push_back(f);
    }
    for (const json& doc : document.at("corrections")) {
      CorrectionRecord c;
      c.id = doc.at("id").get<std::size_t>();
      c.action = doc.at("action").get<std::string>() == "removed" ? CorrectionAction::Removed : CorrectionAction::Replaced;
      c.original = doc.at("original").get<double>();
      c.replacement = doc.at("replacement").get<double>();
      out.corrections.push_back(c);
    }
    out.unidentifiable = document.at("unidentifiable").get<std::vector<std::size_t>>();
    for (const json& doc : document.at("suspects")) {
      Suspect s;
      s.bus = doc.at("bus").get<std::size_t>();
      s.side = parse_side(doc.at("side").get<std::string>());
      s.discrepancy = number_or_nan(doc.at("discrepancy"));
      s.scada_score = number_or_nan(doc.at("scada_score"));
      s.pmu_score = number_or_nan(doc.at("pmu_score"));
      s.unresolved = doc.at("unresolved").get<bool>();
      out.suspects.push_back(s);
    }
    out.rounds = document.at("rounds").get<int>();
  } catch (const json::exception& e) {
    throw ModelError(std::string("bad-data report: ") + e.what());
  }
  return out;
}

json estimation_report_to_json(const EstimationReport& report, const NetworkModel& model) {
  json variance = json::array();
  for (const Eigen::Vector2d& v : report.variance) variance.push_back(pair_json(v));
  json out = {{"strategy", strategy_name(report.strategy)},
              {"state", state_to_json(report.state, model)},
              {"estimated", bus_list(report.estimated, model)},
              {"variance", std::move(variance)},
              {"bad_data", bd_report_to_json(report.bad_data)},
              {"iterations", report.iterations},
              {"converged", report.converged}};
  if (!report.ok()) {
    out["error"] = report.error;
    out["failed_stage"] = report.failed_stage;
  }
  if (report.scada) out["scada"] = distributed_estimate_to_json(*report.scada, model);
  if (report.pmu) out["pmu"] = distributed_estimate_to_json(*report.pmu, model);
  if (report.hybrid) out["hybrid"] = distributed_estimate_to_json(*report.hybrid, model);
  if (report.scada_extended) out["scada_extended"] = extended_estimate_to_json(*report.scada_extended, model);
  if (report.pmu_extended) out["pmu_extended"] = extended_estimate_to_json(*report.pmu_extended, model);
  if (report.fused) out["fused"] = fused_estimate_to_json(*report.fused, model);
  return out;
}

json admm_options_to_json(const AdmmOptions& options) {
  return {{"rho", options.rho},
          {"epsilon", options.epsilon},
          {"max_iter", options.max_iter},
          {"local_tolerance", options.local.tolerance},
          {"local_max_iter", options.local.max_iter},
          {"verify_observability", options.verify_observability}};
}

AdmmOptions admm_options_from_json(const json& document, AdmmOptions base) {
  const std::string where = "admm";
  if (!document.is_object()) throw ModelError(where + ": expected an object");
  base.rho = number_or(document, "rho", base.rho, where);
  base.epsilon = number_or(document, "epsilon", base.epsilon, where);
  base.max_iter = static_cast<int>(number_or(document, "max_iter", base.max_iter, where));
  base.local.tolerance = number_or(document, "local_tolerance", base.local.tolerance, where);
  base.local.max_iter = static_cast<int>(number_or(document, "local_max_iter", base.local.max_iter, where));
  if (document.contains("verify_observability")) {
    if (!document.at("verify_observability").is_boolean()) {
      throw ModelError(where + ".verify_observability: expected a boolean");
    }
    base.verify_observability = document.at("verify_observability").get<bool>();
  }
  if (!(base.rho > 0.0)) throw ModelError(where + ".rho: must be positive");
  if (!(base.epsilon > 0.0)) throw ModelError(where + ".epsilon: must be positive");
  if (base.max_iter < 1) throw ModelError(where + ".max_iter: must be at least 1");
  return base;
}

json bd_options_to_json(const BdOptions& options) {
  return {{"alpha", options.alpha},
          {"lambda", options.lambda},
          {"lambda_x", options.lambda_x},
          {"max_rounds", options.max_rounds},
          {"mode", options.mode == CorrectionMode::Remove ? "remove" : "replace"},
          {"replace_inflation", options.replace_inflation}};
}

BdOptions bd_options_from_json(const json& document, BdOptions base) {
  const std::string where = "bdp";
  if (!document.is_object()) throw ModelError(where + ": expected an object");
  base.alpha = number_or(document, "alpha", base.alpha, where);
  base.lambda = number_or(document, "lambda", base.lambda, where);
  base.lambda_x = number_or(document, "lambda_x", base.lambda_x, where);
  base.max_rounds = static_cast<int>(number_or(document, "max_rounds", base.max_rounds, where));
  base.replace_inflation = number_or(document, "replace_inflation", base.replace_inflation, where);
  const std::string mode = string_or(document, "mode", base.mode == CorrectionMode::Remove ? "remove" : "replace", where);
  if (mode == "remove") {
    base.mode = CorrectionMode::Remove;
  } else if (mode == "replace") {
    base.mode = CorrectionMode::Replace;
  } else {
    throw ModelError(where + ".mode: expected remove or replace");
  }
  if (!(base.alpha > 0.0 && base.alpha < 1.0)) throw ModelError(where + ".alpha: must lie in (0, 1)");
  if (!(base.lambda > 0.0)) throw ModelError(where + ".lambda: must be positive");
  if (base.max_rounds < 0) throw ModelError(where + ".max_rounds: must not be negative");
  return base;
}

json noise_to_json(const NoiseLevels& levels) {
  return {{"v", levels.magnitude}, {"power", levels.power}, {"pmu_v", levels.pmu_voltage}, {"pmu_i", levels.pmu_current}};
}

NoiseLevels noise_from_json(const json& document, NoiseLevels base) {
  const std::string where = "noise";
  if (!document.is_object()) throw ModelError(where + ": expected an object");
  base.magnitude = number_or(document, "v", base.magnitude, where);
  base.power = number_or(document, "power", base.power, where);
  base.pmu_voltage = number_or(document, "pmu_v", base.pmu_voltage, where);
  base.pmu_current = number_or(document, "pmu_i", base.pmu_current, where);
  for (double s : {base.magnitude, base.power, base.pmu_voltage, base.pmu_current}) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ModelError(where + ": sigmas must be positive");
  }
  return base;
}

}  // namespace gridse
