#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridse/grid.hpp"
#include "gridse/harness.hpp"
#include "gridse/measurement.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/powerflow.hpp"

namespace gridse::testing {

struct Fourteen {
  NetworkModel model = load_case_file(resolve_fixture("ieee14.json"));
  Partition partition = load_partition_file(resolve_fixture("ieee14_4area.json"), model);
  MeasurementPlan plan = load_plan_file(resolve_fixture("ieee14_plan.json"), model, &partition);
  OperatingPoint truth = solve_power_flow(model);
};

inline const Fourteen& fourteen() {
  static const Fourteen f;
  return f;
}

// Two buses joined by one lossless line of reactance x.
inline nlohmann::json two_bus_case(double p_load_mw, double q_load_mvar = 0.0, double x = 0.1) {
  return {
      {"base_mva", 100.0},
      {"buses",
       {{{"id", "1"}, {"kind", "slack"}, {"gs", 0.0}, {"bs", 0.0}, {"base_kv", 0.0}},
        {{"id", "2"}, {"kind", "load"}, {"gs", 0.0}, {"bs", 0.0}, {"base_kv", 0.0}}}},
      {"branches",
       {{{"from", "1"}, {"to", "2"}, {"r", 0.0}, {"x", x}, {"b", 0.0}, {"tap", 1.0}, {"shift", 0.0}, {"status", 1}}}},
      {"loads", {{{"bus", "2"}, {"p", p_load_mw}, {"q", q_load_mvar}}}},
      {"gens", {{{"bus", "1"}, {"p", 0.0}, {"vset", 1.0}}}},
  };
}

// Three-bus triangle with losses, line charging and a generator bus.
inline nlohmann::json three_bus_case() {
  auto branch = [](const char* a, const char* b, double r, double x, double ch) {
    return nlohmann::json{{"from", a}, {"to", b}, {"r", r}, {"x", x}, {"b", ch}, {"tap", 1.0}, {"shift", 0.0},
                          {"status", 1}};
  };
  return {
      {"base_mva", 100.0},
      {"buses",
       {{{"id", "1"}, {"kind", "slack"}, {"gs", 0.0}, {"bs", 0.0}, {"base_kv", 0.0}},
        {{"id", "2"}, {"kind", "generator"}, {"gs", 0.0}, {"bs", 0.0}, {"base_kv", 0.0}},
        {{"id", "3"}, {"kind", "load"}, {"gs", 0.0}, {"bs", 0.05}, {"base_kv", 0.0}}}},
      {"branches", {branch("1", "2", 0.02, 0.06, 0.03), branch("1", "3", 0.08, 0.24, 0.025),
                    branch("2", "3", 0.06, 0.18, 0.02)}},
      {"loads", {{{"bus", "2"}, {"p", 20.0}, {"q", 10.0}}, {{"bus", "3"}, {"p", 45.0}, {"q", 15.0}}}},
      {"gens", {{{"bus", "1"}, {"p", 0.0}, {"vset", 1.05}}, {{"bus", "2"}, {"p", 40.0}, {"vset", 1.02}}}},
  };
}

inline double max_state_error(const StateVector& a, const StateVector& b, const std::vector<std::size_t>& buses) {
  double worst = 0.0;
  for (std::size_t k : buses) {
    const auto i = static_cast<Eigen::Index>(k);
    worst = std::max({worst, std::abs(a.magnitude[i] - b.magnitude[i]), std::abs(a.angle[i] - b.angle[i])});
  }
  return worst;
}

inline std::vector<std::size_t> every_bus(const NetworkModel& model) {
  std::vector<std::size_t> out(model.bus_count());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = k;
  return out;
}

inline MeasurementSet noise_free(const NetworkModel& model, const MeasurementPlan& plan, const OperatingPoint& truth) {
  MeasurementSet set = synthesize(model, plan, truth, 1);
  set.values = evaluate(model, truth.state, set.plan.entries);
  return set;
}

}  // namespace gridse::testing
