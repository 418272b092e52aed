#include "gridse/observability.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/OrderingMethods>
#include <Eigen/SVD>
#include <Eigen/SparseQR>

#include "gridse/measurement_functions.hpp"

namespace gridse {

namespace {

constexpr Eigen::Index kDenseLimit = 800;

RankInfo dense_rank(const Eigen::MatrixXd& dense, double threshold) {
  RankInfo info;
  const Eigen::Index cols = dense.cols();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? threshold * s[0] : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff && s[i] > 0.0) ++info.rank;
  }
  const auto r = static_cast<Eigen::Index>(info.rank);
  if (r == cols) return info;
  const Eigen::MatrixXd null = svd.matrixV().rightCols(cols - r);
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (null.row(c).cwiseAbs().maxCoeff() > 1e-6) info.free_columns.push_back(c);
  }
  return info;
}

}  // namespace

RankInfo analyze_rank(const Eigen::SparseMatrix<double>& h, double threshold) {
  const Eigen::Index cols = h.cols();
  RankInfo info;
  if (cols == 0) return info;
  if (h.rows() == 0 || h.nonZeros() == 0) {
    for (Eigen::Index c = 0; c < cols; ++c) info.free_columns.push_back(c);
    return info;
  }
  if (cols > kDenseLimit) {
    Eigen::SparseMatrix<double> a = h;
    a.makeCompressed();
    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    double largest = 0.0;
    for (Eigen::Index k = 0; k < a.outerSize(); ++k) largest = std::max(largest, a.col(k).norm());
    qr.setPivotThreshold(threshold * largest);
    qr.compute(a);
    if (qr.info() == Eigen::Success && static_cast<Eigen::Index>(qr.rank()) == cols) {
      info.rank = static_cast<std::size_t>(cols);
      return info;
    }
  }
  return dense_rank(Eigen::MatrixXd(h), threshold);
}

bool has_angle_anchor(std::span<const Measurement> rows) {
  return std::any_of(rows.begin(), rows.end(), [](const Measurement& m) {
    return m.kind == MeasurementKind::VoltageReal || m.kind == MeasurementKind::VoltageImag ||
           m.kind == MeasurementKind::VoltageAngle;
  });
}

ObservabilityReport check_rows(const NetworkModel& model, std::span<const Measurement> rows, EstimatorKind kind,
                               std::span<const std::size_t> report_buses) {
  std::vector<Measurement> selected;
  for (const Measurement& m : rows) {
    if (accepts(kind, m)) selected.push_back(m);
  }
  const Coordinates coords = coordinates_for(kind);
  const std::vector<std::size_t> buses = touched_buses(model, selected);
  std::optional<std::size_t> pinned;
  if (coords == Coordinates::Polar && !has_angle_anchor(selected) && !buses.empty()) {
    pinned = std::binary_search(buses.begin(), buses.end(), model.slack()) ? model.slack() : buses.front();
  }
  const StateLayout layout(coords, model.bus_count(), buses, pinned);
  const NativeState flat = NativeState::from_polar(StateVector::flat(model.bus_count()), coords);
  Eigen::VectorXd h;
  const Eigen::SparseMatrix<double> jac = layout_jacobian(model, layout, selected, flat, h);
  const RankInfo info = analyze_rank(jac);

  std::vector<char> free(model.bus_count(), 0);
  for (std::size_t k = 0; k < model.bus_count(); ++k) free[k] = !layout.contains(k);
  for (Eigen::Index c : info.free_columns) {
    for (std::size_t bus : buses) {
      if (layout.column(bus, 0) == c || layout.column(bus, 1) == c) free[bus] = 1;
    }
  }
  ObservabilityReport report;
  report.rank = info.rank;
  report.columns = static_cast<std::size_t>(layout.size());
  for (std::size_t bus : report_buses) {
    if (free[bus]) report.unobservable.push_back(bus);
  }
  std::sort(report.unobservable.begin(), report.unobservable.end());
  report.observable = report.unobservable.empty();
  return report;
}

ObservabilityReport check_observability(const NetworkModel& model, const MeasurementPlan& plan,
                                        const Partition& partition, const ObservabilityScope& scope) {
  std::vector<Measurement> rows;
  std::vector<std::size_t> report_buses;
  if (scope.area) {
    for (const Measurement& m : plan.entries) {
      const std::size_t owner = m.area != kNoIndex ? m.area : partition.area_of(m.bus);
      if (owner == *scope.area) rows.push_back(m);
    }
    const auto& own = partition.area(*scope.area).buses;
    report_buses.assign(own.begin(), own.end());
  } else {
    rows = plan.entries;
    for (std::size_t k = 0; k < model.bus_count(); ++k) report_buses.push_back(k);
  }
  return check_rows(model, rows, scope.kind, report_buses);
}

std::vector<std::size_t> pmu_estimable_buses(const NetworkModel& model, std::span<const Measurement> rows) {
  const std::size_t n = model.bus_count();
  std::vector<char> has_re(n, 0), has_im(n, 0);
  std::vector<char> cur_re(model.branch_count(), 0), cur_im(model.branch_count(), 0);
  for (const Measurement& m : rows) {
    switch (m.kind) {
      case MeasurementKind::VoltageReal:
        has_re[m.bus] = 1;
        break;
      case MeasurementKind::VoltageImag:
        has_im[m.bus] = 1;
        break;
      case MeasurementKind::CurrentReal:
        cur_re[m.branch] = 1;
        break;
      case MeasurementKind::CurrentImag:
        cur_im[m.branch] = 1;
        break;
      default:
        break;
    }
  }
  std::vector<char> known(n, 0);
  for (std::size_t k = 0; k < n; ++k) known[k] = has_re[k] && has_im[k];
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t l = 0; l < model.branch_count(); ++l) {
      if (!cur_re[l] || !cur_im[l]) continue;
      const Branch& br = model.branch(l);
      if (known[br.from] != known[br.to]) {
        known[br.from] = known[br.to] = 1;
        changed = true;
      }
    }
  }
  std::vector<std::size_t> buses;
  for (std::size_t k = 0; k < n; ++k) {
    if (known[k]) buses.push_back(k);
  }
  return buses;
}

}  // namespace gridse
