#include "gridse/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "gridse/error.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/rng.hpp"
#include "json_util.hpp"

namespace gridse {

using nlohmann::json;
using namespace detail;

namespace {

constexpr std::uint64_t kSelectionStream = 0x5E1EC7ULL << 20;

struct KindName {
  MeasurementKind kind;
  const char* key;
};

constexpr KindName kKindNames[] = {
    {MeasurementKind::VoltageMagnitude, "v"},   {MeasurementKind::VoltageAngle, "theta"},
    {MeasurementKind::ActiveInjection, "p_inj"}, {MeasurementKind::ReactiveInjection, "q_inj"},
    {MeasurementKind::ActiveFlow, "p_flow"},     {MeasurementKind::ReactiveFlow, "q_flow"},
    {MeasurementKind::VoltageReal, "v_re"},      {MeasurementKind::VoltageImag, "v_im"},
    {MeasurementKind::CurrentReal, "i_re"},      {MeasurementKind::CurrentImag, "i_im"},
};

std::optional<MeasurementKind> kind_from_key(const std::string& key) {
  for (const KindName& k : kKindNames) {
    if (key == k.key) return k.kind;
  }
  return std::nullopt;
}

const char* source_name(Source s) {
  switch (s) {
    case Source::Scada:
      return "scada";
    case Source::Pmu:
      return "pmu";
    case Source::Pseudo:
      return "pseudo";
  }
  return "scada";
}

Source parse_source(const std::string& text, const std::string& where) {
  if (text == "scada") return Source::Scada;
  if (text == "pmu") return Source::Pmu;
  if (text == "pseudo") return Source::Pseudo;
  throw ModelError(where + ": unknown source '" + text + "'");
}

BranchEnd parse_end(const json& doc, const std::string& where) {
  const std::string text = string_or(doc, "end", "from", where);
  if (text == "from") return BranchEnd::From;
  if (text == "to") return BranchEnd::To;
  throw ModelError(where + ".end: expected 'from' or 'to'");
}

std::size_t parse_branch(const json& value, const NetworkModel& model, const std::string& where) {
  if (value.is_number_integer()) {
    const auto index = value.get<long long>();
    if (index < 0 || static_cast<std::size_t>(index) >= model.branch_count()) {
      throw ModelError(where + ": branch " + std::to_string(index) + " does not exist");
    }
    return static_cast<std::size_t>(index);
  }
  if (value.is_array() && value.size() == 2) {
    const std::size_t a = model.bus_index(id_value(value[0], where + "[0]"));
    const std::size_t b = model.bus_index(id_value(value[1], where + "[1]"));
    for (std::size_t l = 0; l < model.branch_count(); ++l) {
      const Branch& br = model.branch(l);
      if (br.in_service && ((br.from == a && br.to == b) || (br.from == b && br.to == a))) return l;
    }
    throw ModelError(where + ": no in-service branch joins the given buses");
  }
  throw ModelError(where + ": expected a branch index or a [from, to] pair");
}

std::size_t lookup_bus(const NetworkModel& model, const std::string& id, const std::string& where) {
  const auto bus = model.find_bus(id);
  if (!bus) throw ModelError(where + ": unknown bus '" + id + "'");
  return *bus;
}

std::size_t parse_area(const json& doc, const Partition* partition, const std::string& where) {
  if (!doc.contains("area")) return kNoIndex;
  const json& value = doc.at("area");
  if (value.is_number_integer()) {
    const auto index = value.get<long long>();
    if (index < 0) throw ModelError(where + ".area: negative area index");
    if (partition && static_cast<std::size_t>(index) >= partition->area_count()) {
      throw ModelError(where + ".area: area index out of range");
    }
    return static_cast<std::size_t>(index);
  }
  if (value.is_string()) {
    if (!partition) return kNoIndex;
    for (std::size_t k = 0; k < partition->area_count(); ++k) {
      if (partition->area(k).name == value.get<std::string>()) return k;
    }
    throw ModelError(where + ".area: unknown area '" + value.get<std::string>() + "'");
  }
  throw ModelError(where + ".area: expected an area name or index");
}

std::size_t metering_bus(const NetworkModel& model, std::size_t branch, BranchEnd end) {
  const Branch& br = model.branch(branch);
  return end == BranchEnd::From ? br.from : br.to;
}

double level_for(const Measurement& m, const NoiseLevels& levels) {
  switch (m.kind) {
    case MeasurementKind::VoltageMagnitude:
    case MeasurementKind::VoltageAngle:
      return levels.magnitude;
    case MeasurementKind::VoltageReal:
    case MeasurementKind::VoltageImag:
      return levels.pmu_voltage;
    case MeasurementKind::CurrentReal:
    case MeasurementKind::CurrentImag:
      return levels.pmu_current;
    default:
      return levels.power;
  }
}

bool in_class(const Measurement& m, const std::string& cls) {
  if (cls == "scada") return m.source == Source::Scada;
  if (cls == "pmu") return m.source == Source::Pmu;
  if (cls == "pmu_v") return m.kind == MeasurementKind::VoltageReal || m.kind == MeasurementKind::VoltageImag;
  if (cls == "pmu_i") return m.kind == MeasurementKind::CurrentReal || m.kind == MeasurementKind::CurrentImag;
  const auto kind = kind_from_key(cls);
  if (!kind) throw ModelError("bad data: unknown selector class '" + cls + "'");
  return m.kind == *kind;
}

// Same-type partner metered at the same bus: an injection pairs with a flow
// leaving that bus and vice versa.
std::optional<std::size_t> conforming_partner(const MeasurementSet& set, std::size_t pos) {
  const Measurement& primary = set.plan.entries[pos];
  MeasurementKind wanted;
  switch (primary.kind) {
    case MeasurementKind::ActiveInjection:
      wanted = MeasurementKind::ActiveFlow;
      break;
    case MeasurementKind::ReactiveInjection:
      wanted = MeasurementKind::ReactiveFlow;
      break;
    case MeasurementKind::ActiveFlow:
      wanted = MeasurementKind::ActiveInjection;
      break;
    case MeasurementKind::ReactiveFlow:
      wanted = MeasurementKind::ReactiveInjection;
      break;
    default:
      return std::nullopt;
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Measurement& m = set.plan.entries[i];
    if (i != pos && m.kind == wanted && m.bus == primary.bus && m.source == primary.source) return i;
  }
  return std::nullopt;
}

std::size_t resolve(const NetworkModel& model, const MeasurementSet& set, const std::string& selector,
                    bool need_partner, std::mt19937_64& rng) {
  if (selector.empty()) throw ModelError("bad data: empty selector");
  if (selector.rfind("random:", 0) == 0) {
    const std::string cls = selector.substr(7);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const Measurement& m = set.plan.entries[i];
      if (!in_class(m, cls) || set.is_bad(m.id)) continue;
      if (need_partner && !conforming_partner(set, i)) continue;
      candidates.push_back(i);
    }
    if (candidates.empty()) throw ModelError("bad data: selector '" + selector + "' matches no measurement");
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return candidates[pick(rng)];
  }
  if (selector[0] == '#') {
    std::size_t id = 0;
    try {
      id = static_cast<std::size_t>(std::stoull(selector.substr(1)));
    } catch (const std::exception&) {
      throw ModelError("bad data: malformed selector '" + selector + "'");
    }
    const auto pos = set.position(id);
    if (!pos) throw ModelError("bad data: selector '" + selector + "' matches no measurement");
    return *pos;
  }
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (measurement_label(set.plan.entries[i], model) != selector) continue;
    if (found) throw ModelError("bad data: selector '" + selector + "' is ambiguous");
    found = i;
  }
  if (!found) throw ModelError("bad data: selector '" + selector + "' matches no measurement");
  return *found;
}

void perturb(MeasurementSet& set, std::size_t pos, double delta) {
  const std::size_t id = set.plan.entries[pos].id;
  const auto i = static_cast<Eigen::Index>(pos);
  auto label = std::find_if(set.bad.begin(), set.bad.end(), [&](const BadDataLabel& b) { return b.id == id; });
  if (label == set.bad.end()) {
    set.bad.push_back({id, set.values[i], set.values[i] + delta});
  } else {
    label->injected += delta;
  }
  set.values[i] += delta;
}

}  // namespace

bool is_branch_kind(MeasurementKind kind) {
  return kind == MeasurementKind::ActiveFlow || kind == MeasurementKind::ReactiveFlow ||
         kind == MeasurementKind::CurrentReal || kind == MeasurementKind::CurrentImag;
}

bool is_phasor_kind(MeasurementKind kind) {
  return kind == MeasurementKind::VoltageReal || kind == MeasurementKind::VoltageImag ||
         kind == MeasurementKind::CurrentReal || kind == MeasurementKind::CurrentImag;
}

bool is_pmu(const Measurement& m) { return m.source == Source::Pmu; }

std::string kind_key(MeasurementKind kind) {
  for (const KindName& k : kKindNames) {
    if (k.kind == kind) return k.key;
  }
  return "?";
}

std::string measurement_label(const Measurement& m, const NetworkModel& model) {
  std::string label = m.source == Source::Pseudo ? "pseudo:" : "";
  label += kind_key(m.kind) + "@";
  if (is_branch_kind(m.kind)) {
    label += std::to_string(m.branch) + (m.end == BranchEnd::From ? ":from" : ":to");
  } else {
    label += model.bus(m.bus).id;
  }
  return label;
}

MeasurementPlan MeasurementPlan::filtered(const std::function<bool(const Measurement&)>& keep) const {
  MeasurementPlan out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out.entries), keep);
  return out;
}

void validate_plan(const MeasurementPlan& plan, const NetworkModel& model) {
  std::unordered_set<std::size_t> ids;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Measurement& m = plan.entries[i];
    const std::string where = "entries[" + std::to_string(i) + "]";
    if (!ids.insert(m.id).second) throw ModelError(where + ".id: duplicate measurement id");
    if (!(m.sigma > 0.0) || !std::isfinite(m.sigma)) throw ModelError(where + ".sigma: must be positive");
    if (is_phasor_kind(m.kind) && m.source == Source::Scada) {
      throw ModelError(where + ": phasor components cannot come from SCADA");
    }
    if (!is_phasor_kind(m.kind) && m.source == Source::Pmu) {
      throw ModelError(where + ": PMU rows must be phasor components");
    }
    if (m.kind == MeasurementKind::VoltageAngle && m.source != Source::Pseudo) {
      throw ModelError(where + ": angle rows are only valid as pseudo-measurements");
    }
    if (m.bus >= model.bus_count()) throw ModelError(where + ".bus: bus does not exist");
    if (is_branch_kind(m.kind)) {
      if (m.branch >= model.branch_count()) throw ModelError(where + ".branch: branch does not exist");
      if (!model.branch(m.branch).in_service) throw ModelError(where + ".branch: branch is out of service");
      if (metering_bus(model, m.branch, m.end) != m.bus) {
        throw ModelError(where + ".bus: does not match the metered branch end");
      }
    }
  }
}

void assign_areas(MeasurementPlan& plan, const Partition& partition) {
  for (Measurement& m : plan.entries) m.area = partition.area_of(m.bus);
}

void apply_noise_levels(MeasurementPlan& plan, const NoiseLevels& levels) {
  for (Measurement& m : plan.entries) m.sigma = level_for(m, levels);
}

MeasurementPlan load_plan(const json& document, const NetworkModel& model, const Partition* partition,
                          const NoiseLevels& defaults) {
  MeasurementPlan plan;
  std::vector<std::size_t> tags;
  auto push = [&](Measurement m, std::size_t tag) {
    m.id = plan.entries.size();
    plan.entries.push_back(m);
    tags.push_back(tag);
  };

  const json& scada = array_field(document, "scada", "plan", true);
  for (std::size_t i = 0; i < scada.size(); ++i) {
    const json& doc = scada[i];
    const std::string where = "scada[" + std::to_string(i) + "]";
    const std::string key = string_or(doc, "kind", "", where);
    const auto kind = kind_from_key(key);
    if (!kind || is_phasor_kind(*kind) || *kind == MeasurementKind::VoltageAngle) {
      throw ModelError(where + ".kind: unknown SCADA kind '" + key + "'");
    }
    Measurement m;
    m.kind = *kind;
    m.source = Source::Scada;
    if (is_branch_kind(m.kind)) {
      m.branch = parse_branch(require(doc, "branch", where), model, where + ".branch");
      m.end = parse_end(doc, where);
      m.bus = metering_bus(model, m.branch, m.end);
    } else {
      m.bus = lookup_bus(model, id_field(doc, "bus", where), where + ".bus");
    }
    m.sigma = number_or(doc, "sigma", level_for(m, defaults), where);
    push(m, parse_area(doc, partition, where));
  }

  const json& pmus = array_field(document, "pmu", "plan", true);
  for (std::size_t i = 0; i < pmus.size(); ++i) {
    const json& doc = pmus[i];
    const std::string where = "pmu[" + std::to_string(i) + "]";
    const std::size_t bus = lookup_bus(model, id_field(doc, "bus", where), where + ".bus");
    const double sigma_v = number_or(doc, "sigma_v", defaults.pmu_voltage, where);
    const double sigma_i = number_or(doc, "sigma_i", defaults.pmu_current, where);
    const std::size_t tag = parse_area(doc, partition, where);
    for (MeasurementKind kind : {MeasurementKind::VoltageReal, MeasurementKind::VoltageImag}) {
      Measurement m;
      m.kind = kind;
      m.source = Source::Pmu;
      m.bus = bus;
      m.sigma = sigma_v;
      push(m, tag);
    }
    const json& currents = array_field(doc, "currents", where, true);
    for (std::size_t c = 0; c < currents.size(); ++c) {
      const std::string item = where + ".currents[" + std::to_string(c) + "]";
      const std::size_t branch = parse_branch(currents[c], model, item);
      const Branch& br = model.branch(branch);
      if (br.from != bus && br.to != bus) throw ModelError(item + ": branch is not incident to the PMU bus");
      for (MeasurementKind kind : {MeasurementKind::CurrentReal, MeasurementKind::CurrentImag}) {
        Measurement m;
        m.kind = kind;
        m.source = Source::Pmu;
        m.bus = bus;
        m.branch = branch;
        m.end = br.from == bus ? BranchEnd::From : BranchEnd::To;
        m.sigma = sigma_i;
        push(m, tag);
      }
    }
  }

  validate_plan(plan, model);
  if (partition) {
    assign_areas(plan, *partition);
    for (std::size_t i = 0; i < plan.size(); ++i) {
      if (tags[i] != kNoIndex && tags[i] != plan.entries[i].area) {
        throw ModelError("plan: " + measurement_label(plan.entries[i], model) + " is tagged with area '" +
                         partition->area(tags[i]).name + "' but is metered in area '" +
                         partition->area(plan.entries[i].area).name + "'");
      }
    }
  } else {
    for (std::size_t i = 0; i < plan.size(); ++i) plan.entries[i].area = tags[i];
  }
  return plan;
}

MeasurementPlan load_plan_file(const std::string& path, const NetworkModel& model, const Partition* partition,
                               const NoiseLevels& defaults) {
  return load_plan(read_json_file(path, "plan file"), model, partition, defaults);
}

json plan_to_json(const MeasurementPlan& plan, const NetworkModel& model) {
  json scada = json::array();
  json pmu = json::array();
  std::map<std::size_t, std::size_t> pmu_slot;
  for (const Measurement& m : plan.entries) {
    if (m.source == Source::Scada) {
      json doc = {{"kind", kind_key(m.kind)}, {"sigma", m.sigma}};
      if (is_branch_kind(m.kind)) {
        doc["branch"] = m.branch;
        doc["end"] = m.end == BranchEnd::From ? "from" : "to";
      } else {
        doc["bus"] = model.bus(m.bus).id;
      }
      if (m.area != kNoIndex) doc["area"] = m.area;
      scada.push_back(std::move(doc));
      continue;
    }
    if (m.source != Source::Pmu) continue;
    auto [it, fresh] = pmu_slot.try_emplace(m.bus, pmu.size());
    if (fresh) {
      json doc = {{"bus", model.bus(m.bus).id}, {"currents", json::array()}};
      if (m.area != kNoIndex) doc["area"] = m.area;
      pmu.push_back(std::move(doc));
    }
    json& doc = pmu[it->second];
    if (m.kind == MeasurementKind::VoltageReal) doc["sigma_v"] = m.sigma;
    if (m.kind == MeasurementKind::CurrentReal) {
      doc["currents"].push_back(m.branch);
      doc["sigma_i"] = m.sigma;
    }
  }
  return {{"scada", scada}, {"pmu", pmu}};
}

MeasurementPlan tile_plan(const MeasurementPlan& base, const NetworkModel& base_model, const NetworkModel& tiled,
                          std::size_t copies) {
  const std::size_t n = base_model.bus_count();
  const std::size_t b = base_model.branch_count();
  if (tiled.bus_count() != copies * n || tiled.branch_count() < copies * b) {
    throw ModelError("tile plan: tiled network does not match the base network");
  }
  MeasurementPlan out;
  out.entries.reserve(copies * base.size());
  for (std::size_t c = 0; c < copies; ++c) {
    for (Measurement m : base.entries) {
      m.id = out.entries.size();
      m.bus += c * n;
      if (m.branch != kNoIndex) m.branch += c * b;
      m.area = kNoIndex;
      out.entries.push_back(m);
    }
  }
  validate_plan(out, tiled);
  return out;
}

std::optional<std::size_t> MeasurementSet::position(std::size_t id) const {
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan.entries[i].id == id) return i;
  }
  return std::nullopt;
}

bool MeasurementSet::is_bad(std::size_t id) const {
  return std::any_of(bad.begin(), bad.end(), [&](const BadDataLabel& b) { return b.id == id; });
}

MeasurementSet MeasurementSet::filtered(const std::function<bool(const Measurement&)>& keep) const {
  MeasurementSet out;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (!keep(plan.entries[i])) continue;
    out.plan.entries.push_back(plan.entries[i]);
    rows.push_back(static_cast<Eigen::Index>(i));
  }
  out.values = values(rows);
  for (const BadDataLabel& b : bad) {
    if (out.position(b.id)) out.bad.push_back(b);
  }
  return out;
}

MeasurementSet MeasurementSet::scada() const {
  return filtered([](const Measurement& m) { return m.source == Source::Scada; });
}

MeasurementSet MeasurementSet::pmu() const {
  return filtered([](const Measurement& m) { return m.source == Source::Pmu; });
}

MeasurementSet synthesize(const NetworkModel& model, const MeasurementPlan& plan, const OperatingPoint& truth,
                          std::uint64_t seed) {
  MeasurementSet set;
  set.plan = plan;
  set.values = evaluate(model, truth.state, plan.entries);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    auto stream = make_stream(seed, plan.entries[i].id);
    std::normal_distribution<double> noise(0.0, plan.entries[i].sigma);
    set.values[static_cast<Eigen::Index>(i)] += noise(stream);
  }
  return set;
}

std::vector<BadDataSpec> load_bad_data(const json& document) {
  const json& list = document.is_array() ? document : array_field(document, "bad_data", "bad data", false);
  std::vector<BadDataSpec> specs;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& doc = list[i];
    const std::string where = "bad_data[" + std::to_string(i) + "]";
    BadDataSpec s;
    s.select = string_or(doc, "select", "", where);
    if (s.select.empty()) throw ModelError(where + ": missing field 'select'");
    const std::string mode = string_or(doc, "mode", "sigma", where);
    if (mode == "absolute") {
      s.mode = BadDataMode::Absolute;
    } else if (mode == "sigma") {
      s.mode = BadDataMode::Sigma;
    } else if (mode == "conforming") {
      s.mode = BadDataMode::Conforming;
    } else {
      throw ModelError(where + ".mode: expected absolute, sigma or conforming");
    }
    s.value = number(doc, "value", where);
    s.partner = string_or(doc, "partner", "", where);
    specs.push_back(std::move(s));
  }
  return specs;
}

json bad_data_to_json(std::span<const BadDataSpec> specs) {
  json list = json::array();
  for (const BadDataSpec& s : specs) {
    const char* mode = s.mode == BadDataMode::Absolute ? "absolute" : s.mode == BadDataMode::Sigma ? "sigma" : "conforming";
    json doc = {{"select", s.select}, {"mode", mode}, {"value", s.value}};
    if (!s.partner.empty()) doc["partner"] = s.partner;
    list.push_back(std::move(doc));
  }
  return list;
}

MeasurementSet inject_bad_data(const NetworkModel& model, const MeasurementSet& set, std::span<const BadDataSpec> specs,
                               std::uint64_t seed) {
  MeasurementSet out = set;
  for (std::size_t t = 0; t < specs.size(); ++t) {
    const BadDataSpec& s = specs[t];
    auto rng = make_stream(seed, kSelectionStream + t);
    const bool conforming = s.mode == BadDataMode::Conforming;
    const std::size_t pos = resolve(model, out, s.select, conforming && s.partner.empty(), rng);
    const double sigma = out.plan.entries[pos].sigma;
    const double delta = s.mode == BadDataMode::Absolute ? s.value : s.value * sigma;
    if (conforming) {
      std::size_t partner = 0;
      if (s.partner.empty()) {
        const auto found = conforming_partner(out, pos);
        if (!found) {
          throw ModelError("bad data: " + measurement_label(out.plan.entries[pos], model) +
                           " has no conforming partner");
        }
        partner = *found;
      } else {
        partner = resolve(model, out, s.partner, false, rng);
      }
      if (partner == pos) throw ModelError("bad data: conforming partner equals the primary entry");
      perturb(out, partner, delta);
    }
    perturb(out, pos, delta);
  }
  return out;
}

json measurement_set_to_json(const MeasurementSet& set, const NetworkModel& model) {
  json rows = json::array();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Measurement& m = set.plan.entries[i];
    json doc = {{"id", m.id},
                {"label", measurement_label(m, model)},
                {"kind", kind_key(m.kind)},
                {"bus", model.bus(m.bus).id},
                {"sigma", m.sigma},
                {"source", source_name(m.source)},
                {"value", set.values[static_cast<Eigen::Index>(i)]}};
    if (is_branch_kind(m.kind)) {
      doc["branch"] = m.branch;
      doc["end"] = m.end == BranchEnd::From ? "from" : "to";
    }
    if (m.area != kNoIndex) doc["area"] = m.area;
    rows.push_back(std::move(doc));
  }
  json bad = json::array();
  for (const BadDataLabel& b : set.bad) {
    const auto pos = set.position(b.id);
    bad.push_back({{"id", b.id},
                   {"label", pos ? measurement_label(set.plan.entries[*pos], model) : std::string()},
                   {"original", b.original},
                   {"injected", b.injected}});
  }
  return {{"measurements", rows}, {"bad", bad}};
}

MeasurementSet measurement_set_from_json(const json& document, const NetworkModel& model) {
  MeasurementSet set;
  const json& rows = array_field(document, "measurements", "measurement set", false);
  set.values.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& doc = rows[i];
    const std::string where = "measurements[" + std::to_string(i) + "]";
    Measurement m;
    m.id = static_cast<std::size_t>(number(doc, "id", where));
    const std::string key = string_or(doc, "kind", "", where);
    const auto kind = kind_from_key(key);
    if (!kind) throw ModelError(where + ".kind: unknown kind '" + key + "'");
    m.kind = *kind;
    m.source = parse_source(string_or(doc, "source", "scada", where), where + ".source");
    m.bus = lookup_bus(model, id_field(doc, "bus", where), where + ".bus");
    if (is_branch_kind(m.kind)) {
      m.branch = parse_branch(require(doc, "branch", where), model, where + ".branch");
      m.end = parse_end(doc, where);
    }
    m.sigma = number(doc, "sigma", where);
    if (doc.contains("area")) m.area = static_cast<std::size_t>(number(doc, "area", where));
    const double value = number(doc, "value", where);
    if (!std::isfinite(value)) throw ModelError(where + ".value: must be finite");
    set.values[static_cast<Eigen::Index>(i)] = value;
    set.plan.entries.push_back(m);
  }
  validate_plan(set.plan, model);
  const json& bad = array_field(document, "bad", "measurement set", true);
  for (std::size_t i = 0; i < bad.size(); ++i) {
    const std::string where = "bad[" + std::to_string(i) + "]";
    BadDataLabel b;
    b.id = static_cast<std::size_t>(number(bad[i], "id", where));
    if (!set.position(b.id)) throw ModelError(where + ".id: unknown measurement id");
    b.original = number(bad[i], "original", where);
    b.injected = number(bad[i], "injected", where);
    set.bad.push_back(b);
  }
  return set;
}

}  // namespace gridse
