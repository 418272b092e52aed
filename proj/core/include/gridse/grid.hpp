#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gridse/admittance.hpp"

namespace gridse {

enum class BusKind { Slack, Generator, Load };

struct Bus {
  std::string id;
  BusKind kind = BusKind::Load;
  double gs = 0.0;  // shunt conductance, pu on system base
  double bs = 0.0;  // shunt susceptance, pu on system base
  double base_kv = 0.0;
  double p_load = 0.0;  // pu
  double q_load = 0.0;  // pu
  double p_gen = 0.0;   // pu
  double v_set = 1.0;   // pu, meaningful for slack and generator buses
};

struct Branch {
  std::size_t from = 0;
  std::size_t to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;      // total line charging, pu
  double tap = 1.0;    // off-nominal ratio at the from end
  double shift = 0.0;  // phase shift, rad
  bool in_service = true;
};

/// Physical grid in per-unit on the system base. Immutable once constructed;
/// the constructor enforces every structural invariant.
class NetworkModel {
 public:
  NetworkModel(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches);

  double base_mva() const { return base_mva_; }
  std::span<const Bus> buses() const { return buses_; }
  std::span<const Branch> branches() const { return branches_; }
  const Bus& bus(std::size_t index) const { return buses_.at(index); }
  const Branch& branch(std::size_t index) const { return branches_.at(index); }
  std::size_t bus_count() const { return buses_.size(); }
  std::size_t branch_count() const { return branches_.size(); }
  std::size_t slack() const { return slack_; }

  std::optional<std::size_t> find_bus(std::string_view id) const;
  std::size_t bus_index(std::string_view id) const;  // throws ModelError

  /// In-service branches incident to a bus.
  std::span<const std::size_t> incident(std::size_t bus) const { return incident_[bus]; }
  std::size_t other_end(std::size_t branch, std::size_t bus) const;

  const AdmittanceMatrix& admittance() const { return admittance_; }

 private:
  double base_mva_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::size_t slack_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> incident_;
  AdmittanceMatrix admittance_;
};

/// Parse a case document (MW / MVAr / degrees) into a per-unit model.
NetworkModel load_case(const nlohmann::json& document);
NetworkModel load_case_file(const std::string& path);
nlohmann::json case_to_json(const NetworkModel& model);

/// Bus-disjoint areas covering the network, with derived boundary buses and
/// the area adjacency induced by in-service tie branches.
class Partition {
 public:
  struct Area {
    std::string name;
    std::vector<std::size_t> buses;  // sorted dense indices
  };

  Partition(const NetworkModel& model, std::vector<Area> areas);

  static Partition single_area(const NetworkModel& model);

  std::size_t area_count() const { return areas_.size(); }
  const Area& area(std::size_t k) const { return areas_.at(k); }
  std::span<const Area> areas() const { return areas_; }
  std::size_t area_of(std::size_t bus) const { return area_of_.at(bus); }
  std::span<const std::size_t> boundary(std::size_t k) const { return boundary_.at(k); }
  std::span<const std::size_t> neighbors(std::size_t k) const { return neighbors_.at(k); }
  bool is_boundary(std::size_t bus) const { return is_boundary_.at(bus); }
  bool are_neighbors(std::size_t a, std::size_t b) const;

 private:
  std::vector<Area> areas_;
  std::vector<std::size_t> area_of_;
  std::vector<std::vector<std::size_t>> boundary_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<bool> is_boundary_;
};

Partition load_partition(const nlohmann::json& document, const NetworkModel& model);
Partition load_partition_file(const std::string& path, const NetworkModel& model);
nlohmann::json partition_to_json(const Partition& partition, const NetworkModel& model);

struct TieLine {
  std::size_t from_copy = 0;
  std::string from_bus;
  std::size_t to_copy = 0;
  std::string to_bus;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
};

/// Namespaced id of a bus inside a tiled network: "<copy>:<id>".
std::string tiled_bus_id(std::size_t copy, std::string_view base_id);

/// Replicates `base` and joins the copies with tie lines. Copy 0 keeps the
/// slack; the slack buses of the other copies become generator buses.
NetworkModel tile_network(const NetworkModel& base, std::size_t copies, std::span<const TieLine> ties);

/// One area per copy of a tiled network.
Partition tiled_partition(const NetworkModel& tiled, std::size_t copies, std::size_t base_bus_count);

}  // namespace gridse
