#include "gridse/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>

#include <nlohmann/json.hpp>

#include "gridse/error.hpp"
#include "json_util.hpp"

namespace gridse {

using nlohmann::json;

using namespace detail;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string kind_name(BusKind kind) {
  switch (kind) {
    case BusKind::Slack:
      return "slack";
    case BusKind::Generator:
      return "generator";
    case BusKind::Load:
      return "load";
  }
  return "load";
}

BusKind parse_kind(const std::string& text, const std::string& where) {
  if (text == "slack") return BusKind::Slack;
  if (text == "generator") return BusKind::Generator;
  if (text == "load") return BusKind::Load;
  throw ModelError(where + ": unknown bus kind '" + text + "'");
}

}  // namespace

NetworkModel::NetworkModel(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches)
    : base_mva_(base_mva), buses_(std::move(buses)), branches_(std::move(branches)) {
  if (!(base_mva_ > 0.0)) throw ModelError("base_mva: must be positive");
  if (buses_.empty()) throw ModelError("buses: network has no buses");

  std::size_t slack_count = 0;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const Bus& b = buses_[i];
    const std::string where = "buses[" + std::to_string(i) + "]";
    if (!index_.emplace(b.id, i).second) throw ModelError(where + ".id: duplicate bus id '" + b.id + "'");
    if (b.kind == BusKind::Slack) {
      slack_ = i;
      ++slack_count;
    }
    if (!(b.v_set > 0.0)) throw ModelError(where + ": voltage setpoint must be positive");
  }
  if (slack_count != 1) {
    throw ModelError("buses: expected exactly one slack bus, found " + std::to_string(slack_count));
  }

  incident_.assign(buses_.size(), {});
  for (std::size_t l = 0; l < branches_.size(); ++l) {
    const Branch& br = branches_[l];
    const std::string where = "branches[" + std::to_string(l) + "]";
    if (br.from >= buses_.size() || br.to >= buses_.size()) throw ModelError(where + ": unknown bus");
    if (br.from == br.to) throw ModelError(where + ": branch connects a bus to itself");
    if (br.r < 0.0) throw ModelError(where + ".r: must be non-negative");
    if (br.x == 0.0) throw ModelError(where + ".x: must be non-zero");
    if (!(br.tap > 0.0)) throw ModelError(where + ".tap: must be positive");
    if (br.in_service) {
      incident_[br.from].push_back(l);
      incident_[br.to].push_back(l);
    }
  }

  std::vector<bool> seen(buses_.size(), false);
  std::queue<std::size_t> frontier;
  frontier.push(slack_);
  seen[slack_] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t k = frontier.front();
    frontier.pop();
    for (std::size_t l : incident_[k]) {
      const std::size_t m = other_end(l, k);
      if (!seen[m]) {
        seen[m] = true;
        ++reached;
        frontier.push(m);
      }
    }
  }
  if (reached != buses_.size()) {
    const auto it = std::find(seen.begin(), seen.end(), false);
    throw ModelError("network is disconnected: bus '" + buses_[static_cast<std::size_t>(it - seen.begin())].id +
                     "' is unreachable from the slack bus");
  }

  admittance_ = build_admittance(*this);
}

std::optional<std::size_t> NetworkModel::find_bus(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t NetworkModel::bus_index(std::string_view id) const {
  if (auto found = find_bus(id)) return *found;
  throw ModelError("unknown bus '" + std::string(id) + "'");
}

std::size_t NetworkModel::other_end(std::size_t branch, std::size_t bus) const {
  const Branch& br = branches_.at(branch);
  return br.from == bus ? br.to : br.from;
}

NetworkModel load_case(const json& document) {
  if (!document.is_object()) throw ModelError("case: expected a JSON object");
  const double base = number(document, "base_mva", "case");

  std::vector<Bus> buses;
  std::unordered_map<std::string, std::size_t> index;
  const json& bus_docs = array_field(document, "buses", "case", false);
  for (std::size_t i = 0; i < bus_docs.size(); ++i) {
    const std::string where = "buses[" + std::to_string(i) + "]";
    const json& doc = bus_docs[i];
    Bus b;
    b.id = id_field(doc, "id", where);
    const json& kind = require(doc, "kind", where);
    if (!kind.is_string()) throw ModelError(where + ".kind: expected a string");
    b.kind = parse_kind(kind.get<std::string>(), where + ".kind");
    b.gs = number_or(doc, "gs", 0.0, where) / base;
    b.bs = number_or(doc, "bs", 0.0, where) / base;
    b.base_kv = number_or(doc, "base_kv", 0.0, where);
    if (!index.emplace(b.id, buses.size()).second) {
      throw ModelError(where + ".id: duplicate bus id '" + b.id + "'");
    }
    buses.push_back(std::move(b));
  }

  auto lookup = [&](const std::string& id, const std::string& where) {
    const auto it = index.find(id);
    if (it == index.end()) throw ModelError(where + ": unknown bus '" + id + "'");
    return it->second;
  };

  std::vector<Branch> branches;
  const json& branch_docs = array_field(document, "branches", "case", false);
  for (std::size_t l = 0; l < branch_docs.size(); ++l) {
    const std::string where = "branches[" + std::to_string(l) + "]";
    const json& doc = branch_docs[l];
    Branch br;
    br.from = lookup(id_field(doc, "from", where), where + ".from");
    br.to = lookup(id_field(doc, "to", where), where + ".to");
    br.r = number(doc, "r", where);
    br.x = number(doc, "x", where);
    br.b = number_or(doc, "b", 0.0, where);
    br.tap = number_or(doc, "tap", 1.0, where);
    if (br.tap == 0.0) br.tap = 1.0;
    br.shift = number_or(doc, "shift", 0.0, where) * kDegToRad;
    br.in_service = number_or(doc, "status", 1.0, where) != 0.0;
    branches.push_back(br);
  }

  const json& load_docs = array_field(document, "loads", "case", true);
  for (std::size_t i = 0; i < load_docs.size(); ++i) {
    const std::string where = "loads[" + std::to_string(i) + "]";
    Bus& b = buses[lookup(id_field(load_docs[i], "bus", where), where + ".bus")];
    b.p_load += number_or(load_docs[i], "p", 0.0, where) / base;
    b.q_load += number_or(load_docs[i], "q", 0.0, where) / base;
  }

  const json& gen_docs = array_field(document, "gens", "case", true);
  for (std::size_t i = 0; i < gen_docs.size(); ++i) {
    const std::string where = "gens[" + std::to_string(i) + "]";
    Bus& b = buses[lookup(id_field(gen_docs[i], "bus", where), where + ".bus")];
    b.p_gen += number_or(gen_docs[i], "p", 0.0, where) / base;
    if (gen_docs[i].contains("vset")) b.v_set = number(gen_docs[i], "vset", where);
  }

  return NetworkModel(base, std::move(buses), std::move(branches));
}

NetworkModel load_case_file(const std::string& path) {
  return load_case(read_json_file(path, "case file"));
}

json case_to_json(const NetworkModel& model) {
  const double base = model.base_mva();
  json doc;
  doc["base_mva"] = base;
  doc["buses"] = json::array();
  doc["loads"] = json::array();
  doc["gens"] = json::array();
  for (const Bus& b : model.buses()) {
    doc["buses"].push_back(
        {{"id", b.id}, {"kind", kind_name(b.kind)}, {"gs", b.gs * base}, {"bs", b.bs * base}, {"base_kv", b.base_kv}});
    if (b.p_load != 0.0 || b.q_load != 0.0) {
      doc["loads"].push_back({{"bus", b.id}, {"p", b.p_load * base}, {"q", b.q_load * base}});
    }
    if (b.kind != BusKind::Load) {
      doc["gens"].push_back({{"bus", b.id}, {"p", b.p_gen * base}, {"vset", b.v_set}});
    }
  }
  doc["branches"] = json::array();
  for (const Branch& br : model.branches()) {
    doc["branches"].push_back({{"from", model.bus(br.from).id},
                               {"to", model.bus(br.to).id},
                               {"r", br.r},
                               {"x", br.x},
                               {"b", br.b},
                               {"tap", br.tap},
                               {"shift", br.shift / kDegToRad},
                               {"status", br.in_service ? 1 : 0}});
  }
  return doc;
}

Partition::Partition(const NetworkModel& model, std::vector<Area> areas) : areas_(std::move(areas)) {
  constexpr std::size_t unassigned = static_cast<std::size_t>(-1);
  if (areas_.empty()) throw ModelError("areas: partition has no areas");
  area_of_.assign(model.bus_count(), unassigned);
  for (std::size_t k = 0; k < areas_.size(); ++k) {
    Area& area = areas_[k];
    std::sort(area.buses.begin(), area.buses.end());
    for (std::size_t bus : area.buses) {
      if (bus >= model.bus_count()) throw ModelError("areas[" + std::to_string(k) + "]: unknown bus index");
      if (area_of_[bus] != unassigned) {
        throw ModelError("areas[" + std::to_string(k) + "]: bus '" + model.bus(bus).id + "' already belongs to area '" +
                         areas_[area_of_[bus]].name + "'");
      }
      area_of_[bus] = k;
    }
  }
  for (std::size_t bus = 0; bus < model.bus_count(); ++bus) {
    if (area_of_[bus] == unassigned) throw ModelError("areas: bus '" + model.bus(bus).id + "' is not covered by any area");
  }

  boundary_.assign(areas_.size(), {});
  is_boundary_.assign(model.bus_count(), false);
  std::vector<std::set<std::size_t>> adjacency(areas_.size());
  for (const Branch& br : model.branches()) {
    if (!br.in_service) continue;
    const std::size_t a = area_of_[br.from];
    const std::size_t b = area_of_[br.to];
    if (a == b) continue;
    is_boundary_[br.from] = true;
    is_boundary_[br.to] = true;
    adjacency[a].insert(b);
    adjacency[b].insert(a);
  }
  for (std::size_t bus = 0; bus < model.bus_count(); ++bus) {
    if (is_boundary_[bus]) boundary_[area_of_[bus]].push_back(bus);
  }
  neighbors_.resize(areas_.size());
  for (std::size_t k = 0; k < areas_.size(); ++k) neighbors_[k].assign(adjacency[k].begin(), adjacency[k].end());
}

Partition Partition::single_area(const NetworkModel& model) {
  Area all{"all", {}};
  for (std::size_t i = 0; i < model.bus_count(); ++i) all.buses.push_back(i);
  return Partition(model, {std::move(all)});
}

bool Partition::are_neighbors(std::size_t a, std::size_t b) const {
  const auto& list = neighbors_.at(a);
  return std::binary_search(list.begin(), list.end(), b);
}

Partition load_partition(const json& document, const NetworkModel& model) {
  const json& area_docs = array_field(document, "areas", "partition", false);
  std::vector<Partition::Area> areas;
  std::vector<std::string> owner(model.bus_count());
  for (std::size_t k = 0; k < area_docs.size(); ++k) {
    const std::string where = "areas[" + std::to_string(k) + "]";
    Partition::Area area;
    const json& name = require(area_docs[k], "name", where);
    area.name = name.is_string() ? name.get<std::string>() : name.dump();
    const json& bus_docs = array_field(area_docs[k], "buses", where, false);
    for (std::size_t i = 0; i < bus_docs.size(); ++i) {
      const std::string item = where + ".buses[" + std::to_string(i) + "]";
      const std::string id = id_value(bus_docs[i], item);
      const auto bus = model.find_bus(id);
      if (!bus) throw ModelError(item + ": unknown bus '" + id + "'");
      if (!owner[*bus].empty()) {
        throw ModelError(item + ": bus '" + id + "' overlaps with area '" + owner[*bus] + "'");
      }
      owner[*bus] = area.name;
      area.buses.push_back(*bus);
    }
    areas.push_back(std::move(area));
  }
  return Partition(model, std::move(areas));
}

Partition load_partition_file(const std::string& path, const NetworkModel& model) {
  return load_partition(read_json_file(path, "partition file"), model);
}

json partition_to_json(const Partition& partition, const NetworkModel& model) {
  json areas = json::array();
  for (const auto& area : partition.areas()) {
    json ids = json::array();
    for (std::size_t bus : area.buses) ids.push_back(model.bus(bus).id);
    areas.push_back({{"name", area.name}, {"buses", ids}});
  }
  return {{"areas", areas}};
}

std::string tiled_bus_id(std::size_t copy, std::string_view base_id) {
  return std::to_string(copy) + ":" + std::string(base_id);
}

NetworkModel tile_network(const NetworkModel& base, std::size_t copies, std::span<const TieLine> ties) {
  if (copies == 0) throw ModelError("tile: copies must be positive");
  const std::size_t n = base.bus_count();
  std::vector<Bus> buses;
  buses.reserve(copies * n);
  std::vector<Branch> branches;
  branches.reserve(copies * base.branch_count() + ties.size());
  for (std::size_t c = 0; c < copies; ++c) {
    for (const Bus& b : base.buses()) {
      Bus copy = b;
      copy.id = tiled_bus_id(c, b.id);
      if (c > 0 && copy.kind == BusKind::Slack) copy.kind = BusKind::Generator;
      buses.push_back(std::move(copy));
    }
    for (const Branch& br : base.branches()) {
      Branch copy = br;
      copy.from += c * n;
      copy.to += c * n;
      branches.push_back(copy);
    }
  }
  for (std::size_t t = 0; t < ties.size(); ++t) {
    const TieLine& tie = ties[t];
    const std::string where = "ties[" + std::to_string(t) + "]";
    if (tie.from_copy >= copies) throw ModelError(where + ".from_copy: copy out of range");
    if (tie.to_copy >= copies) throw ModelError(where + ".to_copy: copy out of range");
    const auto from = base.find_bus(tie.from_bus);
    const auto to = base.find_bus(tie.to_bus);
    if (!from) throw ModelError(where + ".from_bus: unknown bus '" + tie.from_bus + "'");
    if (!to) throw ModelError(where + ".to_bus: unknown bus '" + tie.to_bus + "'");
    Branch br;
    br.from = tie.from_copy * n + *from;
    br.to = tie.to_copy * n + *to;
    br.r = tie.r;
    br.x = tie.x;
    br.b = tie.b;
    branches.push_back(br);
  }
  return NetworkModel(base.base_mva(), std::move(buses), std::move(branches));
}

Partition tiled_partition(const NetworkModel& tiled, std::size_t copies, std::size_t base_bus_count) {
  if (copies * base_bus_count != tiled.bus_count()) throw ModelError("tile: bus count does not match copies");
  std::vector<Partition::Area> areas;
  for (std::size_t c = 0; c < copies; ++c) {
    Partition::Area area{"copy" + std::to_string(c), {}};
    for (std::size_t i = 0; i < base_bus_count; ++i) area.buses.push_back(c * base_bus_count + i);
    areas.push_back(std::move(area));
  }
  return Partition(tiled, std::move(areas));
}

}  // namespace gridse
