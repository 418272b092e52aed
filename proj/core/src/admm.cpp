#include "gridse/admm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <future>
#include <memory>
#include <string>

#include "gridse/error.hpp"
#include "gridse/measurement_functions.hpp"
#include "gridse/observability.hpp"

namespace gridse {

namespace {

struct SharedEntry {
  std::size_t bus = 0;
  int component = 0;
  std::vector<std::size_t> holders;  // area problem slots, ascending
  double z = 0.0;
  double rho = 0.0;
};

struct AreaProblem {
  std::size_t area = 0;
  std::vector<Measurement> rows;
  Eigen::VectorXd values;
  std::unique_ptr<StateLayout> layout;
  NativeState local;
  std::vector<std::size_t> entries;  // shared entry indices
  std::vector<Eigen::Index> columns;
  Eigen::VectorXd dual;
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
};

double native_value(const NativeState& s, std::size_t bus, int component) {
  const auto k = static_cast<Eigen::Index>(bus);
  return component == 0 ? s.first[k] : s.second[k];
}

void set_native(NativeState& s, std::size_t bus, int component, double value) {
  const auto k = static_cast<Eigen::Index>(bus);
  (component == 0 ? s.first[k] : s.second[k]) = value;
}

void solve_area(const NetworkModel& model, AreaProblem& p, const std::vector<SharedEntry>& shared,
                const WlsOptions& local) {
  Prior prior;
  prior.columns = p.columns;
  prior.center.resize(static_cast<Eigen::Index>(p.entries.size()));
  prior.weight.resize(static_cast<Eigen::Index>(p.entries.size()));
  for (std::size_t i = 0; i < p.entries.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    prior.center[j] = shared[p.entries[i]].z - p.dual[j];
    prior.weight[j] = shared[p.entries[i]].rho;
  }
  WlsOptions opts = local;
  opts.reference.reset();
  WlsSolution sol = solve_wls(model, *p.layout, p.rows, p.values, p.local, opts, p.entries.empty() ? nullptr : &prior);
  p.local = std::move(sol.state);
  p.objective = sol.objective;
  p.iterations += sol.iterations;
  p.converged = sol.converged;
}

}  // namespace

std::size_t row_owner(const Measurement& m, const Partition& partition) {
  return m.area != kNoIndex ? m.area : partition.area_of(m.bus);
}

DistributedEstimate run_admm(const NetworkModel& model, const Partition& partition, const MeasurementSet& measurements,
                             EstimatorKind kind, const AdmmOptions& options, const StateVector* warm_start) {
  if (!(options.rho > 0.0)) throw Error("admm: rho must be positive");
  if (!(options.epsilon > 0.0)) throw Error("admm: epsilon must be positive");
  if (options.max_iter < 1) throw Error("admm: max_iter must be at least 1");
  const std::size_t n = model.bus_count();
  const Coordinates coords = coordinates_for(kind);

  std::vector<Measurement> all_rows;
  std::vector<Eigen::Index> all_index;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    if (!accepts(kind, measurements.plan.entries[i])) continue;
    all_rows.push_back(measurements.plan.entries[i]);
    all_index.push_back(static_cast<Eigen::Index>(i));
  }
  if (all_rows.empty()) throw ObservabilityError("unobservable: no " + estimator_name(kind) + " measurements");
  const Eigen::VectorXd all_values = measurements.values(all_index);

  std::vector<std::size_t> every_bus(n);
  for (std::size_t k = 0; k < n; ++k) every_bus[k] = k;
  if (options.verify_observability) {
    const ObservabilityReport report = check_rows(model, all_rows, kind, every_bus);
    if (!report.observable) {
      std::string list;
      for (std::size_t i = 0; i < report.unobservable.size() && i < 8; ++i) {
        list += (i ? ", " : "") + model.bus(report.unobservable[i]).id;
      }
      throw ObservabilityError("unobservable: " + estimator_name(kind) + " measurements leave buses " + list +
                               (report.unobservable.size() > 8 ? ", ..." : "") + " undetermined");
    }
  }
  for (const Measurement& m : all_rows) {
    if (m.area != kNoIndex && m.area >= partition.area_count()) {
      throw ModelError("admm: measurement tagged with area " + std::to_string(m.area) + " but the partition has " +
                       std::to_string(partition.area_count()) + " areas");
    }
  }
  const bool anchored = has_angle_anchor(all_rows);
  const std::optional<std::size_t> pinned =
      coords == Coordinates::Polar && !anchored ? std::optional<std::size_t>(model.slack()) : std::nullopt;

  const StateVector start_polar = warm_start ? *warm_start : StateVector::flat(n);
  const NativeState start = NativeState::from_polar(start_polar, coords);

  std::vector<AreaProblem> problems;
  for (std::size_t a = 0; a < partition.area_count(); ++a) {
    AreaProblem p;
    p.area = a;
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < all_rows.size(); ++i) {
      const Measurement& m = all_rows[i];
      if (row_owner(m, partition) != a) continue;
      p.rows.push_back(m);
      idx.push_back(static_cast<Eigen::Index>(i));
    }
    if (p.rows.empty()) continue;
    p.values = all_values(idx);
    p.layout = std::make_unique<StateLayout>(coords, n, touched_buses(model, p.rows), pinned);
    p.local = start;
    problems.push_back(std::move(p));
  }

  std::vector<std::vector<std::size_t>> holders(n);
  for (std::size_t s = 0; s < problems.size(); ++s) {
    for (std::size_t bus : problems[s].layout->buses()) holders[bus].push_back(s);
  }
  std::vector<SharedEntry> shared;
  for (std::size_t bus = 0; bus < n; ++bus) {
    if (holders[bus].size() < 2) continue;
    for (int c = 0; c < 2; ++c) {
      if (c == 0 && pinned && *pinned == bus) continue;
      SharedEntry e;
      e.bus = bus;
      e.component = c;
      e.holders = holders[bus];
      e.z = native_value(start, bus, c);
      shared.push_back(e);
    }
  }

  DistributedEstimate out;
  out.kind = kind;
  std::vector<double> diag_min(shared.size(), std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < problems.size(); ++s) {
    AreaProblem& p = problems[s];
    const Eigen::SparseMatrix<double> g = gain_matrix(model, *p.layout, p.rows, p.local);
    for (std::size_t e = 0; e < shared.size(); ++e) {
      if (!std::binary_search(shared[e].holders.begin(), shared[e].holders.end(), s)) continue;
      const Eigen::Index col = p.layout->column(shared[e].bus, shared[e].component);
      p.entries.push_back(e);
      p.columns.push_back(col);
      const double d = g.coeff(col, col);
      if (d > 0.0) diag_min[e] = std::min(diag_min[e], d);
    }
    p.dual = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.entries.size()));
    // The owning area of a bus aggregates its copies; every other holder
    // exchanges with the owner only.
    for (std::size_t e : p.entries) {
      const std::size_t owner = partition.area_of(shared[e].bus);
      if (owner == p.area) continue;
      out.log.exchanges.insert({p.area, owner});
      out.log.exchanges.insert({owner, p.area});
    }
  }
  double positive_sum = 0.0;
  std::size_t positive_count = 0;
  for (std::size_t e = 0; e < shared.size(); ++e) {
    shared[e].rho = std::isfinite(diag_min[e]) ? diag_min[e] : 0.0;
    if (shared[e].rho > 0.0) {
      positive_sum += shared[e].rho;
      ++positive_count;
    }
  }
  const double fallback = positive_count ? positive_sum / static_cast<double>(positive_count) : 1.0;
  double rho_total = 0.0;
  for (SharedEntry& e : shared) {
    if (!(e.rho > 0.0)) e.rho = fallback;
    e.rho *= options.rho;
    rho_total += e.rho;
  }
  out.rho_scale = shared.empty() ? 0.0 : rho_total / static_cast<double>(shared.size());

  NativeState assembled = start;
  auto assemble = [&]() {
    for (std::size_t bus = 0; bus < n; ++bus) {
      if (holders[bus].size() == 1) {
        const NativeState& local = problems[holders[bus][0]].local;
        for (int c = 0; c < 2; ++c) set_native(assembled, bus, c, native_value(local, bus, c));
      }
    }
    for (const SharedEntry& e : shared) set_native(assembled, e.bus, e.component, e.z);
  };

  std::vector<double> z_prev(shared.size());
  for (int it = 1; it <= options.max_iter; ++it) {
    if (options.concurrent && problems.size() > 1) {
      std::vector<std::future<void>> jobs;
      for (AreaProblem& p : problems) {
        jobs.push_back(std::async(std::launch::async, [&, pp = &p] { solve_area(model, *pp, shared, options.local); }));
      }
      for (auto& job : jobs) job.get();
    } else {
      for (AreaProblem& p : problems) solve_area(model, p, shared, options.local);
    }

    for (std::size_t e = 0; e < shared.size(); ++e) {
      z_prev[e] = shared[e].z;
      double sum = 0.0;
      for (std::size_t s : shared[e].holders) {
        const AreaProblem& p = problems[s];
        const auto slot = static_cast<Eigen::Index>(std::find(p.entries.begin(), p.entries.end(), e) - p.entries.begin());
        sum += native_value(p.local, shared[e].bus, shared[e].component) + p.dual[slot];
      }
      shared[e].z = sum / static_cast<double>(shared[e].holders.size());
    }

    double primal_sq = 0.0;
    double dual_sq = 0.0;
    std::vector<double> disagreement(partition.area_count(), 0.0);
    for (AreaProblem& p : problems) {
      for (std::size_t i = 0; i < p.entries.size(); ++i) {
        const SharedEntry& e = shared[p.entries[i]];
        const double gap = native_value(p.local, e.bus, e.component) - e.z;
        p.dual[static_cast<Eigen::Index>(i)] += gap;
        primal_sq += gap * gap;
        const double dz = e.z - z_prev[p.entries[i]];
        dual_sq += dz * dz;
        disagreement[p.area] = std::max(disagreement[p.area], std::abs(gap));
      }
    }
    assemble();
    const StateVector polar = assembled.to_polar();
    const Eigen::VectorXd r = all_values - evaluate(model, polar, all_rows);
    const double primal = std::sqrt(primal_sq);
    const double dual = options.rho * std::sqrt(dual_sq);
    out.trace.primal.push_back(primal);
    out.trace.dual.push_back(dual);
    out.trace.objective.push_back(wls_objective(all_rows, r, options.local.huber));
    out.trace.disagreement.push_back(std::move(disagreement));
    out.iterations = it;
    if (std::max(primal, dual) < options.epsilon) {
      out.converged = true;
      break;
    }
  }

  out.state = assembled.to_polar();
  out.estimated.assign(n, 0);
  out.direct.assign(n, 0);
  std::vector<std::size_t> estimated;
  for (std::size_t bus = 0; bus < n; ++bus) {
    if (holders[bus].empty()) continue;
    out.estimated[bus] = 1;
    estimated.push_back(bus);
    const std::size_t owner = partition.area_of(bus);
    for (std::size_t s : holders[bus]) {
      if (problems[s].area == owner) out.direct[bus] = 1;
    }
  }

  const StateLayout global(coords, n, estimated, pinned);
  const auto native_cov = bus_covariances(gain_matrix(model, global, all_rows, assembled), global);
  out.covariance.assign(n, Eigen::Matrix2d::Zero());
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const std::size_t bus = estimated[i];
    const auto k = static_cast<Eigen::Index>(bus);
    out.covariance[bus] = coords == Coordinates::Polar
                              ? native_cov[i]
                              : rectangular_to_polar(native_cov[i], assembled.first[k], assembled.second[k]);
  }

  for (AreaProblem& p : problems) {
    LocalEstimate est;
    est.area = p.area;
    est.kind = kind;
    est.buses.assign(p.layout->buses().begin(), p.layout->buses().end());
    est.state = p.local.to_polar();
    const auto cov = bus_covariances(gain_matrix(model, *p.layout, p.rows, p.local), *p.layout);
    for (std::size_t i = 0; i < est.buses.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(est.buses[i]);
      est.covariance.push_back(coords == Coordinates::Polar
                                   ? cov[i]
                                   : rectangular_to_polar(cov[i], p.local.first[k], p.local.second[k]));
    }
    est.objective = p.objective;
    est.iterations = p.iterations;
    est.converged = p.converged;
    out.areas.push_back(std::move(est));
  }
  return out;
}

ResidualSeries consensus_residuals(const AdmmTrace& trace) {
  return {trace.primal, trace.dual, trace.objective};
}

}  // namespace gridse
