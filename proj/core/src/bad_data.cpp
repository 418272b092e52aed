#include "gridse/bad_data.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "gridse/error.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/observability.hpp"
#include "gridse/wls.hpp"

namespace gridse {

namespace {

struct RowBlock {
  std::vector<Measurement> rows;
  Eigen::VectorXd values;
};

RowBlock select_rows(const MeasurementSet& set, const std::function<bool(const Measurement&)>& keep) {
  RowBlock block;
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!keep(set.plan.entries[i])) continue;
    block.rows.push_back(set.plan.entries[i]);
    idx.push_back(static_cast<Eigen::Index>(i));
  }
  block.values = set.values(idx);
  return block;
}

void append(RowBlock& block, const MeasurementSet& extra) {
  const auto old = block.values.size();
  block.values.conservativeResize(old + static_cast<Eigen::Index>(extra.size()));
  for (std::size_t i = 0; i < extra.size(); ++i) {
    block.rows.push_back(extra.plan.entries[i]);
    block.values[old + static_cast<Eigen::Index>(i)] = extra.values[static_cast<Eigen::Index>(i)];
  }
}

bool covers(const std::vector<std::size_t>& sorted, std::size_t bus) {
  return std::binary_search(sorted.begin(), sorted.end(), bus);
}

std::size_t next_id(const MeasurementSet& set) {
  std::size_t id = 0;
  for (const Measurement& m : set.plan.entries) id = std::max(id, m.id + 1);
  return id;
}

// Unconstrained WLS on one area's rows from its consensus copy, so that the
// residual statistics refer to the area's own least-squares fit.
ResidualAnalysis local_fit(const NetworkModel& model, const RowBlock& block, Coordinates coords,
                           const StateVector& start) {
  const std::vector<std::size_t> buses = touched_buses(model, block.rows);
  std::optional<std::size_t> pinned;
  if (coords == Coordinates::Polar && !has_angle_anchor(block.rows)) {
    pinned = covers(buses, model.slack()) ? model.slack() : buses.front();
  }
  const StateLayout layout(coords, model.bus_count(), buses, pinned);
  WlsOptions wls;
  wls.tolerance = 1e-9;
  const WlsSolution sol = solve_wls(model, layout, block.rows, block.values, NativeState::from_polar(start, coords), wls);
  return analyze_residuals(model, layout, block.rows, block.values, sol.state);
}

struct AugmentedArea {
  std::size_t area = 0;
  std::vector<std::size_t> buses;
  double own_score = 0.0;     // largest normalized residual among the side's own rows
  std::size_t own_id = 0;
  double pseudo_score = 0.0;  // largest normalized residual among the lent states
  bool detected = false;      // chi-square test of the augmented fit
  double statistic = 0.0;
};

// Re-solves the rows of every area together with its neighbors' rows, with the
// other side's states on all of those buses as pseudo-measurements.
std::vector<AugmentedArea> augment_side(const NetworkModel& model, const Partition& partition,
                                        const ExtendedEstimate& own, const ExtendedEstimate& other,
                                        const MeasurementSet& set, EstimatorKind kind,
                                        double alpha) {
  std::vector<AugmentedArea> out;
  const Coordinates coords = coordinates_for(kind);
  const std::size_t first_pseudo = next_id(set);
  for (std::size_t a = 0; a < partition.area_count(); ++a) {
    const auto nb = partition.neighbors(a);
    RowBlock block = select_rows(set, [&](const Measurement& m) {
      if (!accepts(kind, m) || m.source == Source::Pseudo) return false;
      const std::size_t owner = row_owner(m, partition);
      return owner == a || std::find(nb.begin(), nb.end(), owner) != nb.end();
    });
    if (block.rows.empty()) continue;
    const std::size_t own_count = block.rows.size();
    AugmentedArea rec;
    rec.area = a;
    rec.buses = touched_buses(model, block.rows);
    append(block, pseudo_measurements(other, kind, rec.buses, first_pseudo));

    std::optional<std::size_t> pinned;
    if (coords == Coordinates::Polar && !has_angle_anchor(block.rows)) pinned = rec.buses.front();
    const StateLayout layout(coords, model.bus_count(), rec.buses, pinned);
    WlsOptions wls;
    wls.tolerance = 1e-9;
    const WlsSolution sol =
        solve_wls(model, layout, block.rows, block.values, NativeState::from_polar(own.state, coords), wls);
    const ResidualAnalysis analysis = analyze_residuals(model, layout, block.rows, block.values, sol.state);
    rec.detected = analysis.dof > 0 && chi_square_detect(analysis, alpha).detected;
    rec.statistic = analysis.objective;
    for (std::size_t i = 0; i < block.rows.size(); ++i) {
      const double r = analysis.normalized[static_cast<Eigen::Index>(i)];
      if (i < own_count && r > rec.own_score) {
        rec.own_score = r;
        rec.own_id = block.rows[i].id;
      } else if (i >= own_count) {
        rec.pseudo_score = std::max(rec.pseudo_score, r);
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// Evidence against one side: in its own fits its rows misfit more than the
// lent states, or in the other side's fits its lent states misfit more than
// that side's rows.
double evidence(const std::vector<AugmentedArea>& own, const std::vector<AugmentedArea>& other,
                const std::function<bool(const AugmentedArea&)>& relevant) {
  double score = -std::numeric_limits<double>::infinity();
  for (const AugmentedArea& a : own) {
    if (relevant(a)) score = std::max(score, a.own_score - a.pseudo_score);
  }
  for (const AugmentedArea& a : other) {
    if (relevant(a)) score = std::max(score, a.pseudo_score - a.own_score);
  }
  return std::isfinite(score) ? score : 0.0;
}

}  // namespace

Detection chi_square_detect(double statistic, std::ptrdiff_t dof, double alpha) {
  if (dof <= 0) throw Error("chi-square test: no redundancy (" + std::to_string(dof) + " degrees of freedom)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("chi-square test: alpha must lie in (0, 1)");
  const boost::math::chi_squared_distribution<double> dist(static_cast<double>(dof));
  Detection d;
  d.statistic = statistic;
  d.dof = dof;
  d.threshold = boost::math::quantile(dist, 1.0 - alpha);
  d.detected = statistic > d.threshold;
  return d;
}

Detection chi_square_detect(const ResidualAnalysis& analysis, double alpha) {
  return chi_square_detect(analysis.objective, analysis.dof, alpha);
}

Identification lnrt_identify(const ResidualAnalysis& analysis, double lambda) {
  Identification out;
  double best = 0.0;
  for (Eigen::Index i = 0; i < analysis.normalized.size(); ++i) {
    const auto row = static_cast<std::size_t>(i);
    if (analysis.critical[row]) {
      out.critical.push_back(row);
      continue;
    }
    if (analysis.normalized[i] > best) {
      best = analysis.normalized[i];
      out.row = row;
    }
  }
  out.normalized = best;
  if (best <= lambda) out.row.reset();
  return out;
}

std::string side_name(Side side) {
  switch (side) {
    case Side::Scada:
      return "scada";
    case Side::Pmu:
      return "pmu";
    case Side::Hybrid:
      return "hybrid";
  }
  return "hybrid";
}

bool BdReport::any_detection() const {
  return std::any_of(detections.begin(), detections.end(), [](const AreaDetection& d) { return d.detection.detected; }) ||
         !flagged.empty();
}

void BdReport::merge(const BdReport& other) {
  detections.insert(detections.end(), other.detections.begin(), other.detections.end());
  flagged.insert(flagged.end(), other.flagged.begin(), other.flagged.end());
  corrections.insert(corrections.end(), other.corrections.begin(), other.corrections.end());
  for (std::size_t id : other.unidentifiable) {
    if (std::find(unidentifiable.begin(), unidentifiable.end(), id) == unidentifiable.end()) unidentifiable.push_back(id);
  }
  suspects.insert(suspects.end(), other.suspects.begin(), other.suspects.end());
  rounds += other.rounds;
}

MeasurementSet correct(const NetworkModel& model, const MeasurementSet& measurements, std::span<const std::size_t> ids,
                       const StateVector& estimate, EstimatorKind kind, const BdOptions& options,
                       const Partition* partition, std::vector<CorrectionRecord>* log) {
  MeasurementSet out = measurements;
  std::vector<std::size_t> all_buses(model.bus_count());
  for (std::size_t k = 0; k < all_buses.size(); ++k) all_buses[k] = k;

  for (std::size_t id : ids) {
    const auto pos = out.position(id);
    if (!pos) throw Error("correction: unknown measurement id " + std::to_string(id));
    const Measurement flagged = out.plan.entries[*pos];
    CorrectionRecord rec;
    rec.id = id;
    rec.original = out.values[static_cast<Eigen::Index>(*pos)];

    bool removable = options.mode == CorrectionMode::Remove;
    if (removable) {
      const MeasurementSet before = out.filtered([&](const Measurement& m) { return accepts(kind, m); });
      const MeasurementSet after = before.filtered([&](const Measurement& m) { return m.id != id; });
      const std::vector<std::size_t> seen = touched_buses(model, before.plan.entries);
      const ObservabilityReport prior = check_rows(model, before.plan.entries, kind, seen);
      const ObservabilityReport post = check_rows(model, after.plan.entries, kind, seen);
      removable = post.unobservable.size() <= prior.unobservable.size();
      if (removable && partition) {
        const std::size_t area = row_owner(flagged, *partition);
        const MeasurementSet local =
            after.filtered([&](const Measurement& m) { return row_owner(m, *partition) == area; });
        const MeasurementSet local_before =
            before.filtered([&](const Measurement& m) { return row_owner(m, *partition) == area; });
        const auto local_buses = touched_buses(model, local.plan.entries);
        const ObservabilityReport lp =
            check_rows(model, local_before.plan.entries, kind, touched_buses(model, local_before.plan.entries));
        const ObservabilityReport la = check_rows(model, local.plan.entries, kind, local_buses);
        removable = local.size() > 0 && (la.observable || !lp.observable);
      }
    }
    if (removable) {
      out = out.filtered([&](const Measurement& m) { return m.id != id; });
      rec.action = CorrectionAction::Removed;
    } else {
      const auto i = static_cast<Eigen::Index>(*pos);
      out.values[i] = evaluate(model, estimate, flagged);
      out.plan.entries[*pos].sigma *= options.replace_inflation;
      rec.action = CorrectionAction::Replaced;
      rec.replacement = out.values[i];
    }
    if (log) log->push_back(rec);
  }
  return out;
}

CentralBdpResult wls_with_lnrt(const NetworkModel& model, const MeasurementSet& measurements, const BdOptions& options,
                               const WlsOptions& wls) {
  CentralBdpResult out;
  out.measurements = measurements;
  const StateVector flat = StateVector::flat(model.bus_count());
  out.estimate = wls_estimate(model, out.measurements, flat, wls);
  for (int round = 1; round <= options.max_rounds; ++round) {
    const auto& rows = out.measurements.plan.entries;
    const NativeState state = NativeState::from_polar(out.estimate.state, Coordinates::Polar);
    const ResidualAnalysis analysis = analyze_residuals(model, rows, out.measurements.values, state);
    AreaDetection det;
    det.round = round;
    det.detection = chi_square_detect(analysis, options.alpha);
    out.report.detections.push_back(det);
    if (!det.detection.detected) break;
    const Identification id = lnrt_identify(analysis, options.lambda);
    for (std::size_t c : id.critical) out.report.unidentifiable.push_back(rows[c].id);
    if (!id.row) break;
    Flag f;
    f.id = rows[*id.row].id;
    f.normalized = id.normalized;
    f.round = round;
    out.report.flagged.push_back(f);
    const std::size_t ids[] = {f.id};
    out.measurements = correct(model, out.measurements, ids, out.estimate.state, EstimatorKind::Hybrid, options,
                               nullptr, &out.report.corrections);
    out.report.rounds = round;
    out.estimate = wls_estimate(model, out.measurements, out.estimate.state, wls);
  }
  std::sort(out.report.unidentifiable.begin(), out.report.unidentifiable.end());
  out.report.unidentifiable.erase(std::unique(out.report.unidentifiable.begin(), out.report.unidentifiable.end()),
                                  out.report.unidentifiable.end());
  return out;
}

std::vector<AreaDetection> detect_areas(const NetworkModel& model, const Partition& partition,
                                        const DistributedEstimate& estimate, const MeasurementSet& measurements,
                                        const BdOptions& options) {
  std::vector<AreaDetection> out;
  const EstimatorKind kind = estimate.kind;
  const Side side = kind == EstimatorKind::Scada ? Side::Scada : kind == EstimatorKind::Pmu ? Side::Pmu : Side::Hybrid;
  for (const LocalEstimate& local : estimate.areas) {
    const RowBlock block = select_rows(measurements, [&](const Measurement& m) {
      return accepts(kind, m) && row_owner(m, partition) == local.area;
    });
    if (block.rows.empty()) continue;
    const ResidualAnalysis analysis = local_fit(model, block, coordinates_for(kind), local.state);
    if (analysis.dof <= 0) continue;
    AreaDetection det;
    det.area = local.area;
    det.side = side;
    det.detection = chi_square_detect(analysis, options.alpha);
    out.push_back(det);
  }
  return out;
}

DistributedBdpResult admm_with_lnrt(const NetworkModel& model, const Partition& partition,
                                    const MeasurementSet& measurements, EstimatorKind kind,
                                    const AdmmOptions& admm, const BdOptions& options) {
  DistributedBdpResult out;
  out.measurements = measurements;
  out.estimate = run_admm(model, partition, out.measurements, kind, admm);
  const Coordinates coords = coordinates_for(kind);
  const Side side = kind == EstimatorKind::Scada ? Side::Scada : kind == EstimatorKind::Pmu ? Side::Pmu : Side::Hybrid;
  for (int round = 1; round <= options.max_rounds; ++round) {
    std::vector<std::size_t> ids;
    for (const LocalEstimate& local : out.estimate.areas) {
      const RowBlock block = select_rows(out.measurements, [&](const Measurement& m) {
        return accepts(kind, m) && row_owner(m, partition) == local.area;
      });
      if (block.rows.empty()) continue;
      const ResidualAnalysis analysis = local_fit(model, block, coords, local.state);
      if (analysis.dof <= 0) continue;
      AreaDetection det;
      det.area = local.area;
      det.side = side;
      det.round = round;
      det.detection = chi_square_detect(analysis, options.alpha);
      out.report.detections.push_back(det);
      if (!det.detection.detected) continue;
      const Identification id = lnrt_identify(analysis, options.lambda);
      for (std::size_t c : id.critical) out.report.unidentifiable.push_back(block.rows[c].id);
      if (!id.row) continue;
      Flag f;
      f.id = block.rows[*id.row].id;
      f.normalized = id.normalized;
      f.area = local.area;
      f.side = side;
      f.round = round;
      out.report.flagged.push_back(f);
      ids.push_back(f.id);
    }
    if (ids.empty()) break;
    out.measurements = correct(model, out.measurements, ids, out.estimate.state, kind, options, &partition,
                               &out.report.corrections);
    out.report.rounds = round;
    const StateVector warm = out.estimate.state;
    out.estimate = run_admm(model, partition, out.measurements, kind, admm, &warm);
  }
  std::sort(out.report.unidentifiable.begin(), out.report.unidentifiable.end());
  out.report.unidentifiable.erase(std::unique(out.report.unidentifiable.begin(), out.report.unidentifiable.end()),
                                  out.report.unidentifiable.end());
  return out;
}

MeasurementSet pseudo_measurements(const ExtendedEstimate& source, EstimatorKind target,
                                   const std::vector<std::size_t>& buses, std::size_t first_id) {
  MeasurementSet out;
  std::vector<double> values;
  std::size_t id = first_id;
  auto add = [&](MeasurementKind kind, std::size_t bus, double value, double variance) {
    Measurement m;
    m.id = id++;
    m.kind = kind;
    m.bus = bus;
    m.sigma = std::sqrt(std::max(variance, 1e-14));
    m.source = Source::Pseudo;
    out.plan.entries.push_back(m);
    values.push_back(value);
  };
  std::vector<std::size_t> list = buses;
  if (list.empty()) {
    for (std::size_t k = 0; k < source.provenance.size(); ++k) list.push_back(k);
  }
  for (std::size_t bus : list) {
    if (!source.supports(bus)) continue;
    const auto k = static_cast<Eigen::Index>(bus);
    const double theta = source.state.angle[k];
    const double v = source.state.magnitude[k];
    if (coordinates_for(target) == Coordinates::Polar) {
      add(MeasurementKind::VoltageAngle, bus, theta, source.variance[bus][0]);
      add(MeasurementKind::VoltageMagnitude, bus, v, source.variance[bus][1]);
    } else {
      Eigen::Matrix2d polar = Eigen::Matrix2d::Zero();
      polar(0, 0) = source.variance[bus][0];
      polar(1, 1) = source.variance[bus][1];
      const Eigen::Matrix2d rect = polar_to_rectangular(polar, theta, v);
      add(MeasurementKind::VoltageReal, bus, v * std::cos(theta), rect(0, 0));
      add(MeasurementKind::VoltageImag, bus, v * std::sin(theta), rect(1, 1));
    }
  }
  out.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return out;
}

CrossValidation cross_validate(const NetworkModel& model, const Partition& partition, const ExtendedEstimate& scada,
                               const ExtendedEstimate& pmu, const MeasurementSet& scada_set,
                               const MeasurementSet& pmu_set, const BdOptions& options) {
  const std::size_t n = model.bus_count();
  if (scada.provenance.size() != n || pmu.provenance.size() != n) {
    throw ModelError("cross-validation: estimates do not match the network");
  }
  CrossValidation out;
  std::vector<std::size_t> discrepant;
  std::vector<double> gap(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (!scada.supports(k) || !pmu.supports(k)) continue;
    const auto i = static_cast<Eigen::Index>(k);
    const double diff[2] = {scada.state.angle[i] - pmu.state.angle[i], scada.state.magnitude[i] - pmu.state.magnitude[i]};
    for (int c = 0; c < 2; ++c) {
      const double var = scada.variance[k][c] + pmu.variance[k][c];
      if (var <= 0.0) continue;
      gap[k] = std::max(gap[k], std::abs(diff[c]) / std::sqrt(var));
    }
    if (gap[k] > options.lambda_x) discrepant.push_back(k);
  }
  const auto scada_areas = augment_side(model, partition, scada, pmu, scada_set, EstimatorKind::Scada, options.alpha);
  const auto pmu_areas = augment_side(model, partition, pmu, scada, pmu_set, EstimatorKind::Pmu, options.alpha);
  for (const auto* side : {&scada_areas, &pmu_areas}) {
    for (const AugmentedArea& a : *side) out.statistic += a.statistic;
  }

  for (std::size_t bus : discrepant) {
    const auto near = [&](const AugmentedArea& a) { return covers(a.buses, bus); };
    Suspect s;
    s.bus = bus;
    s.discrepancy = gap[bus];
    s.scada_score = evidence(scada_areas, pmu_areas, near);
    s.pmu_score = evidence(pmu_areas, scada_areas, near);
    s.side = s.scada_score >= s.pmu_score ? Side::Scada : Side::Pmu;
    s.unresolved = !(std::max(s.scada_score, s.pmu_score) > 0.0);
    out.suspects.push_back(s);
  }

  const auto any = [](const AugmentedArea&) { return true; };
  const double scada_score = evidence(scada_areas, pmu_areas, any);
  const double pmu_score = evidence(pmu_areas, scada_areas, any);
  const bool scada_first = scada_score >= pmu_score;
  for (const Side side : {scada_first ? Side::Scada : Side::Pmu, scada_first ? Side::Pmu : Side::Scada}) {
    const auto& areas = side == Side::Scada ? scada_areas : pmu_areas;
    const AugmentedArea* best = nullptr;
    for (const AugmentedArea& a : areas) {
      if (a.detected && (!best || a.own_score > best->own_score)) best = &a;
    }
    if (!best || !(best->own_score > options.lambda)) continue;
    Flag f;
    f.id = best->own_id;
    f.normalized = best->own_score;
    f.area = best->area;
    f.side = side;
    f.cross_validated = true;
    f.evidence = side == Side::Scada ? scada_score - pmu_score : pmu_score - scada_score;
    out.flags.push_back(f);
  }

  // The cleaner side lends its states on the buses where the other side is suspect.
  std::vector<std::size_t> lend_to_scada, lend_to_pmu;
  for (const Suspect& s : out.suspects) (s.side == Side::Scada ? lend_to_scada : lend_to_pmu).push_back(s.bus);
  if (!lend_to_scada.empty()) {
    out.scada_pseudo = pseudo_measurements(pmu, EstimatorKind::Scada, lend_to_scada, next_id(scada_set));
  }
  if (!lend_to_pmu.empty()) {
    out.pmu_pseudo = pseudo_measurements(scada, EstimatorKind::Pmu, lend_to_pmu, next_id(pmu_set));
  }
  return out;
}

}  // namespace gridse
