#include "gridse/dphase.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <optional>

#include "gridse/error.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/observability.hpp"

namespace gridse {

namespace {

std::vector<Eigen::Vector2d> diagonals(const std::vector<Eigen::Matrix2d>& cov) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(cov.size());
  for (const auto& c : cov) out.push_back(c.diagonal());
  return out;
}

void fill_from(EstimationReport& report, const DistributedEstimate& est) {
  report.state = est.state;
  report.estimated = est.estimated;
  report.variance = diagonals(est.covariance);
  report.iterations += est.iterations;
  report.converged = est.converged;
}

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Dphase:
      return "DPHASE";
    case Strategy::NoBdp:
      return "DSE-without-BDP";
    case Strategy::Lnrt:
      return "DSE-LNRT";
    case Strategy::Rdse:
      return "RDSE";
  }
  return "DPHASE";
}

Strategy parse_strategy(const std::string& text) {
  std::string key = text;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "dphase") return Strategy::Dphase;
  if (key == "no-bdp" || key == "dse-without-bdp" || key == "nobdp") return Strategy::NoBdp;
  if (key == "lnrt" || key == "dse-lnrt") return Strategy::Lnrt;
  if (key == "rdse") return Strategy::Rdse;
  throw Error("unknown strategy '" + text + "'");
}

EstimationReport run_dphase(const NetworkModel& model, const Partition& partition, const MeasurementSet& measurements,
                            const DphaseOptions& options) {
  EstimationReport report;
  report.strategy = Strategy::Dphase;
  report.state = StateVector::flat(model.bus_count());
  std::string stage = "validate";
  try {
    MeasurementSet scada_set = measurements.scada();
    MeasurementSet pmu_set = measurements.pmu();
    if (pmu_set.size() == 0) throw ObservabilityError("dphase: no PMU measurements");

    stage = "estimate";
    DistributedEstimate scada_est;
    DistributedEstimate pmu_est;
    if (!options.cross_validation) {
      auto run_side = [&](const MeasurementSet& set, EstimatorKind kind) {
        return admm_with_lnrt(model, partition, set, kind, options.admm, options.bd);
      };
      DistributedBdpResult s = run_side(scada_set, EstimatorKind::Scada);
      DistributedBdpResult p = run_side(pmu_set, EstimatorKind::Pmu);
      report.bad_data.merge(s.report);
      report.bad_data.merge(p.report);
      scada_set = std::move(s.measurements);
      pmu_set = std::move(p.measurements);
      scada_est = std::move(s.estimate);
      pmu_est = std::move(p.estimate);
    } else if (options.concurrent) {
      auto pmu_job = std::async(std::launch::async, [&] {
        return run_admm(model, partition, pmu_set, EstimatorKind::Pmu, options.admm);
      });
      scada_est = run_admm(model, partition, scada_set, EstimatorKind::Scada, options.admm);
      pmu_est = pmu_job.get();
    } else {
      scada_est = run_admm(model, partition, scada_set, EstimatorKind::Scada, options.admm);
      pmu_est = run_admm(model, partition, pmu_set, EstimatorKind::Pmu, options.admm);
    }
    report.iterations = scada_est.iterations + pmu_est.iterations;

    auto extend_both = [&](const DistributedEstimate& s_est, const DistributedEstimate& p_est,
                           const MeasurementSet& s_set, const MeasurementSet& p_set, ExtendedEstimate& s,
                           ExtendedEstimate& p) {
      s = extend_state_set(s_est, model, s_set);
      p = extend_state_set(p_est, model, p_set);
      std::vector<char> s_support(model.bus_count()), p_support(model.bus_count());
      for (std::size_t k = 0; k < model.bus_count(); ++k) {
        s_support[k] = s.supports(k);
        p_support[k] = p.supports(k);
      }
      s = extend_state_set(s_est, model, s_set, p_support);
      p = extend_state_set(p_est, model, p_set, s_support);
      align_gauge(s, p, model.slack(), options.fusion == FusionRule::PerEntry ? options.bd.lambda_x : 0.0);
    };
    auto fuse_sides = [&](const ExtendedEstimate& s, const ExtendedEstimate& p, const MeasurementSet& s_set,
                          const MeasurementSet& p_set) {
      if (options.fusion == FusionRule::Information) {
        try {
          return fuse_information(model, s, p, s_set, p_set);
        } catch (const ObservabilityError&) {
        }
      }
      return fuse(s, p);
    };

    ExtendedEstimate scada_ext, pmu_ext;
    stage = "cross-validate";
    extend_both(scada_est, pmu_est, scada_set, pmu_set, scada_ext, pmu_ext);

    // Every round tries each candidate and keeps the one that lowers the
    // objective of the fused state over both row sets the most, by at least
    // lambda^2.
    auto fused_misfit = [&](const ExtendedEstimate& s_ext, const ExtendedEstimate& p_ext, const MeasurementSet& s_set,
                            const MeasurementSet& p_set) {
      const StateVector x = fuse_sides(s_ext, p_ext, s_set, p_set).state;
      double total = 0.0;
      for (const MeasurementSet* set : {&s_set, &p_set}) {
        total += wls_objective(set->plan.entries, set->values - evaluate(model, x, set->plan.entries));
      }
      return total;
    };
    struct Trial {
      Flag flag;
      MeasurementSet set;
      DistributedEstimate est;
      ExtendedEstimate scada_ext, pmu_ext;
      std::vector<CorrectionRecord> corrections;
      double misfit = 0.0;
    };
    for (int round = 1; options.cross_validation && round <= options.bd.max_rounds; ++round) {
      for (const DistributedEstimate* est : {&scada_est, &pmu_est}) {
        for (AreaDetection det : detect_areas(model, partition, *est, est == &scada_est ? scada_set : pmu_set, options.bd)) {
          det.round = round;
          report.bad_data.detections.push_back(det);
        }
      }
      const CrossValidation cv = cross_validate(model, partition, scada_ext, pmu_ext, scada_set, pmu_set, options.bd);
      report.bad_data.suspects.insert(report.bad_data.suspects.end(), cv.suspects.begin(), cv.suspects.end());
      if (cv.flags.empty()) break;

      const double misfit = fused_misfit(scada_ext, pmu_ext, scada_set, pmu_set);
      std::optional<Trial> best;
      for (const Flag& f : cv.flags) {
        const bool scada_flag = f.side == Side::Scada;
        const DistributedEstimate& est = scada_flag ? scada_est : pmu_est;
        Trial t;
        t.flag = f;
        t.flag.round = round;
        const std::size_t ids[] = {f.id};
        t.set = correct(model, scada_flag ? scada_set : pmu_set, ids, est.state, est.kind, options.bd, &partition,
                        &t.corrections);
        t.est = run_admm(model, partition, t.set, est.kind, options.admm, &est.state);
        report.iterations += t.est.iterations;
        const MeasurementSet& s_set = scada_flag ? t.set : scada_set;
        const MeasurementSet& p_set = scada_flag ? pmu_set : t.set;
        extend_both(scada_flag ? t.est : scada_est, scada_flag ? pmu_est : t.est, s_set, p_set, t.scada_ext, t.pmu_ext);
        t.misfit = fused_misfit(t.scada_ext, t.pmu_ext, s_set, p_set);
        if (!best || t.misfit < best->misfit) best = std::move(t);
      }
      if (!(best->misfit < misfit - options.bd.lambda * options.bd.lambda)) break;
      report.bad_data.flagged.push_back(best->flag);
      report.bad_data.corrections.insert(report.bad_data.corrections.end(), best->corrections.begin(),
                                         best->corrections.end());
      report.bad_data.rounds = round;
      if (best->flag.side == Side::Scada) {
        scada_set = std::move(best->set);
        scada_est = std::move(best->est);
      } else {
        pmu_set = std::move(best->set);
        pmu_est = std::move(best->est);
      }
      scada_ext = std::move(best->scada_ext);
      pmu_ext = std::move(best->pmu_ext);
    }

    stage = "fuse";
    FusedEstimate fused = fuse_sides(scada_ext, pmu_ext, scada_set, pmu_set);
    report.state = fused.state;
    report.estimated = fused.supported;
    report.variance = fused.variance;
    report.converged = scada_est.converged && pmu_est.converged;
    report.scada = std::move(scada_est);
    report.pmu = std::move(pmu_est);
    report.scada_extended = std::move(scada_ext);
    report.pmu_extended = std::move(pmu_ext);
    report.fused = std::move(fused);
  } catch (const Error& e) {
    report.error = e.what();
    report.failed_stage = stage;
  }
  return report;
}

EstimationReport run_baseline(Strategy strategy, const NetworkModel& model, const Partition& partition,
                              const MeasurementSet& measurements, const BaselineOptions& options) {
  if (strategy == Strategy::Dphase) throw Error("run_baseline: DPHASE is not a baseline");
  EstimationReport report;
  report.strategy = strategy;
  report.state = StateVector::flat(model.bus_count());
  try {
    if (strategy == Strategy::Lnrt) {
      DistributedBdpResult r =
          admm_with_lnrt(model, partition, measurements, EstimatorKind::Hybrid, options.admm, options.bd);
      report.bad_data = std::move(r.report);
      fill_from(report, r.estimate);
      report.hybrid = std::move(r.estimate);
    } else {
      DistributedEstimate est = run_admm(model, partition, measurements, EstimatorKind::Hybrid, options.admm);
      if (strategy == Strategy::Rdse) {
        // Huber weights from a flat start stall far from the optimum.
        AdmmOptions admm = options.admm;
        admm.local.huber = options.huber;
        const int first = est.iterations;
        est = run_admm(model, partition, measurements, EstimatorKind::Hybrid, admm, &est.state);
        est.iterations += first;
      }
      fill_from(report, est);
      report.hybrid = std::move(est);
    }
  } catch (const Error& e) {
    report.error = e.what();
    report.failed_stage = "estimate";
  }
  return report;
}

EstimationReport run_strategy(Strategy strategy, const NetworkModel& model, const Partition& partition,
                              const MeasurementSet& measurements, const StrategyOptions& options) {
  if (strategy == Strategy::Dphase) {
    DphaseOptions d;
    d.admm = options.admm;
    d.bd = options.bd;
    d.concurrent = options.concurrent;
    return run_dphase(model, partition, measurements, d);
  }
  BaselineOptions b;
  b.admm = options.admm;
  b.bd = options.bd;
  b.huber = options.huber;
  return run_baseline(strategy, model, partition, measurements, b);
}

}  // namespace gridse
