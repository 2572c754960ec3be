#include "staircase/staggered.hpp"

#include "staircase/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace staircase {

namespace {

int locate(const std::vector<Index>& starts, Index value) {
  // starts is a k+1 prefix array; returns the 1-based bucket of value.
  auto it = std::upper_bound(starts.begin(), starts.end(), value);
  return static_cast<int>(it - starts.begin());
}

double max_abs_residual(const ResidualMatrix& res) {
  double m = res.E_a.cwiseAbs().maxCoeff();
  m = std::max(m, res.E_b.cwiseAbs().maxCoeff());
  m = std::max(m, res.E_c.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

int StaircasePartition::group_of_row(Index row) const { return locate(group_starts, row); }

int StaircasePartition::stage_of_time(Index time) const { return locate(stage_starts, time); }

StaircasePartition build_staircase(const AdoptionSchedule& schedule, Index n_times) {
  const Index n = schedule.n_units();
  if (n < 1 || n_times < 1) {
    throw DataError("build_staircase: panel must have at least one unit and one period");
  }

  std::set<Index> distinct;
  bool any_never = false;
  for (Index u = 0; u < n; ++u) {
    const Index a = schedule.adoption[u];
    if (a == AdoptionSchedule::kNeverTreated) {
      any_never = true;
      continue;
    }
    if (a == 0) {
      throw DataError("build_staircase: unit " + std::to_string(u) +
                      " adopts at the first period and has no pre-treatment observations");
    }
    if (a < 0 || a >= n_times) {
      throw DataError("build_staircase: unit " + std::to_string(u) +
                      " has adoption time outside the panel");
    }
    distinct.insert(a);
  }
  if (!any_never) {
    throw DataError("build_staircase: design has no never-treated unit, which is unsupported");
  }

  StaircasePartition part;
  part.boundaries.assign(distinct.begin(), distinct.end());
  part.k = 1 + static_cast<int>(part.boundaries.size());

  // Group 1 = never treated; group i >= 2 adopts at boundaries[k - i], so
  // later adopters come first. Stable within a group by input order.
  std::vector<std::vector<Index>> buckets(part.k + 1);
  for (Index u = 0; u < n; ++u) {
    const Index a = schedule.adoption[u];
    if (a == AdoptionSchedule::kNeverTreated) {
      buckets[1].push_back(u);
    } else {
      const auto pos = std::lower_bound(part.boundaries.begin(), part.boundaries.end(), a) -
                       part.boundaries.begin();
      buckets[part.k - static_cast<int>(pos)].push_back(u);
    }
  }

  part.position.assign(n, -1);
  part.group_starts = {0};
  for (int g = 1; g <= part.k; ++g) {
    part.group_sizes.push_back(static_cast<Index>(buckets[g].size()));
    for (Index u : buckets[g]) {
      part.position[u] = static_cast<Index>(part.order.size());
      part.order.push_back(u);
    }
    part.group_starts.push_back(static_cast<Index>(part.order.size()));
  }

  part.stage_starts = {0};
  for (Index b : part.boundaries) part.stage_starts.push_back(b);
  part.stage_starts.push_back(n_times);
  for (int j = 0; j < part.k; ++j) {
    part.stage_lengths.push_back(part.stage_starts[j + 1] - part.stage_starts[j]);
  }
  return part;
}

FourBlockProblem extract_subproblem(const Matrix& Y, const StaircasePartition& part,
                                    int i0, int j0) {
  const int k = part.k;
  if (i0 < 1 || i0 > k || j0 <= k + 1 - i0 || j0 > k) {
    throw std::domain_error("extract_subproblem: block (" + std::to_string(i0) + ", " +
                            std::to_string(j0) + ") is not a treated block of a k=" +
                            std::to_string(k) + " staircase");
  }
  if (Y.rows() != part.n_units() || Y.cols() != part.n_times()) {
    throw std::invalid_argument("extract_subproblem: matrix does not match the partition");
  }
  const int k1 = k + 1 - j0;
  const int k2 = k + 1 - i0;
  const Index n1 = part.group_starts[k1];
  const Index n2 = part.group_starts[i0] - n1;
  const Index t1 = part.stage_starts[k2];
  const Index t2 = part.stage_starts[j0] - t1;

  FourBlockProblem p;
  p.Y_a.resize(n1, t1);
  p.Y_b.resize(n1, t2);
  p.Y_c.resize(n2, t1);
  for (Index r = 0; r < n1; ++r) {
    const Index u = part.order[r];
    p.Y_a.row(r) = Y.row(u).segment(0, t1);
    p.Y_b.row(r) = Y.row(u).segment(t1, t2);
  }
  for (Index r = 0; r < n2; ++r) {
    const Index u = part.order[n1 + r];
    p.Y_c.row(r) = Y.row(u).segment(0, t1);
  }
  return p;
}

InferenceGrid::InferenceGrid(Matrix observed, AdoptionSchedule schedule,
                             StaircasePartition partition, int rank, double alpha)
    : observed_(std::move(observed)),
      schedule_(std::move(schedule)),
      partition_(std::move(partition)),
      rank_(rank),
      alpha_(alpha) {
  const Index n = observed_.rows();
  const Index t = observed_.cols();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  point_ = Matrix::Constant(n, t, nan);
  variance_ = Matrix::Constant(n, t, nan);
  lower_ = Matrix::Constant(n, t, nan);
  upper_ = Matrix::Constant(n, t, nan);
  source_.setConstant(n, t, -1);
}

CellInference InferenceGrid::cell(Index unit, Index time) const {
  if (unit < 0 || unit >= n_units() || time < 0 || time >= n_times() || !has(unit, time)) {
    throw std::domain_error("InferenceGrid: cell (" + std::to_string(unit) + ", " +
                            std::to_string(time) + ") is observed, not imputed");
  }
  CellInference ci;
  ci.point = point_(unit, time);
  ci.variance = variance_(unit, time);
  ci.lower = lower_(unit, time);
  ci.upper = upper_(unit, time);
  ci.alpha = alpha_;
  return ci;
}

void InferenceGrid::insert(Index unit, Index time, const CellInference& ci, int subproblem) {
  if (source_(unit, time) >= 0) {
    throw std::logic_error("InferenceGrid: cell (" + std::to_string(unit) + ", " +
                           std::to_string(time) + ") written by two sub-problems");
  }
  point_(unit, time) = ci.point;
  variance_(unit, time) = ci.variance;
  lower_(unit, time) = ci.lower;
  upper_(unit, time) = ci.upper;
  source_(unit, time) = subproblem;
}

void InferenceGrid::finalize() const {
  for (Index u = 0; u < n_units(); ++u) {
    for (Index t = 0; t < n_times(); ++t) {
      const bool unobserved = schedule_.treated(u, t);
      if (unobserved != (source_(u, t) >= 0)) {
        throw std::logic_error("InferenceGrid: sub-problems did not tile the unobserved "
                               "region exactly (cell " +
                               std::to_string(u) + ", " + std::to_string(t) + ")");
      }
    }
  }
}

InferenceGrid staggered_conf(const Matrix& Y, const AdoptionSchedule& schedule,
                             int rank, double alpha) {
  if (Y.rows() != schedule.n_units()) {
    throw DataError("staggered_conf: schedule does not match the panel rows");
  }
  if (!Y.allFinite()) {
    throw DataError("staggered_conf: panel contains non-finite entries");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("staggered_conf: alpha must lie strictly inside (0, 1)");
  }

  StaircasePartition part = build_staircase(schedule, Y.cols());
  InferenceGrid grid(Y, schedule, part, rank, alpha);
  const int k = part.k;

  for (int i0 = 2; i0 <= k; ++i0) {
    for (int j0 = k + 2 - i0; j0 <= k; ++j0) {
      const int k1 = k + 1 - j0;
      const int k2 = k + 1 - i0;
      FourBlockProblem problem = extract_subproblem(Y, part, i0, j0);

      FourBlockFit fit;
      try {
        fit = four_block_estimate(problem, rank);
      } catch (const NumericError& e) {
        throw NumericError("sub-problem (i0=" + std::to_string(i0) + ", j0=" +
                           std::to_string(j0) + ") with N1_eff=" +
                           std::to_string(problem.n1()) + ", T1_eff=" +
                           std::to_string(problem.t1()) + ": " + e.what());
      }

      SubproblemInference sub;
      sub.i0 = i0;
      sub.j0 = j0;
      sub.residuals = estimate_residuals(problem, fit);
      sub.d_row_units.assign(part.order.begin() + part.group_starts[k1],
                             part.order.begin() + part.group_starts[i0]);
      sub.d_col_time0 = part.stage_starts[k2];
      sub.target_row_begin = part.group_starts[i0 - 1] - part.group_starts[k1];
      sub.isnr_advisory =
          max_abs_residual(sub.residuals) / fit.left_singular_values[rank - 1] *
          std::sqrt(static_cast<double>(problem.n() * problem.t()) /
                    static_cast<double>(std::min(problem.n1(), problem.t1())));
      sub.fit = std::move(fit);

      const int sub_index = static_cast<int>(grid.subproblems().size());
      const Index target_col_begin = part.stage_starts[j0 - 1] - part.stage_starts[k2];
      for (Index a = 0; a < part.group_sizes[i0 - 1]; ++a) {
        const Index d_row = sub.target_row_begin + a;
        const Index unit = sub.d_row_units[d_row];
        for (Index b = 0; b < part.stage_lengths[j0 - 1]; ++b) {
          const Index d_col = target_col_begin + b;
          const Index time = part.stage_starts[j0 - 1] + b;
          const double var = cell_variance(sub.fit, sub.residuals,
                                           problem.n1() + d_row, problem.t1() + d_col);
          grid.insert(unit, time, cell_ci(sub.fit.M_hat_d(d_row, d_col), var, alpha),
                      sub_index);
        }
      }
      grid.add_subproblem(std::move(sub));
    }
  }

  grid.finalize();
  return grid;
}

CellInference ite(const InferenceGrid& grid, Index unit, Index time) {
  const CellInference m = grid.cell(unit, time);  // throws for observed cells
  const double y = grid.observed()(unit, time);
  CellInference out;
  out.point = y - m.point;
  out.variance = m.variance;
  out.lower = y - m.upper;
  out.upper = y - m.lower;
  out.alpha = m.alpha;
  return out;
}

CellInference weighted_effect(const InferenceGrid& grid, const Vector& weights, Index time) {
  if (weights.size() != grid.n_units()) {
    throw std::invalid_argument("weighted_effect: one weight per unit required");
  }
  if (!weights.allFinite()) {
    throw std::invalid_argument("weighted_effect: weights must be finite");
  }
  if (time < 0 || time >= grid.n_times()) {
    throw std::domain_error("weighted_effect: time index outside the panel");
  }

  double point = 0.0;
  bool any_treated = false;
  for (Index u = 0; u < grid.n_units(); ++u) {
    if (!grid.schedule().treated(u, time)) continue;
    any_treated = true;
    point += weights[u] * (grid.observed()(u, time) - grid.cell(u, time).point);
  }
  if (!any_treated) {
    throw std::domain_error("weighted_effect: no unit is treated at time " +
                            std::to_string(time));
  }

  // Every treated cell at this time lives in a sub-problem with the stage of
  // `time` as its last stage; variances add across sub-problems under the
  // independence approximation.
  const int j0 = grid.partition().stage_of_time(time);
  double variance = 0.0;
  for (const SubproblemInference& sub : grid.subproblems()) {
    if (sub.j0 != j0) continue;
    Vector c1 = Vector::Zero(sub.fit.n2());
    for (Index r = sub.target_row_begin; r < static_cast<Index>(sub.d_row_units.size()); ++r) {
      c1[r] = weights[sub.d_row_units[r]];
    }
    Vector c2 = Vector::Zero(sub.fit.t2());
    c2[time - sub.d_col_time0] = 1.0;
    variance += bilinear_variance(sub.fit, sub.residuals, c1, c2);
  }

  CellInference ci = cell_ci(point, variance, grid.alpha());
  return ci;
}

CellInference atet(const InferenceGrid& grid, Index time) {
  if (time < 0 || time >= grid.n_times()) {
    throw std::domain_error("atet: time index outside the panel");
  }
  Index n_treated = 0;
  for (Index u = 0; u < grid.n_units(); ++u) {
    if (grid.schedule().treated(u, time)) ++n_treated;
  }
  if (n_treated == 0) {
    throw std::domain_error("atet: no unit is treated at time " + std::to_string(time));
  }
  Vector w = Vector::Zero(grid.n_units());
  for (Index u = 0; u < grid.n_units(); ++u) {
    if (grid.schedule().treated(u, time)) w[u] = 1.0 / static_cast<double>(n_treated);
  }
  return weighted_effect(grid, w, time);
}

namespace {

void classify(double lower, double upper, ReportRow& row) {
  if (lower > 0.0) {
    ++row.positive;
  } else if (upper < 0.0) {
    ++row.negative;
  } else {
    ++row.null_effects;
  }
}

}  // namespace

std::vector<ReportRow> significance_report(const InferenceGrid& grid, double alpha,
                                           bool per_year,
                                           const std::optional<Vector>& scale_weights) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("significance_report: alpha must lie strictly inside (0, 1)");
  }
  if (scale_weights && scale_weights->size() != grid.n_units()) {
    throw std::invalid_argument("significance_report: one scale weight per unit required");
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);

  std::vector<ReportRow> rows;
  if (per_year) {
    for (Index t = 0; t < grid.n_times(); ++t) {
      ReportRow row;
      row.time = t;
      bool any = false;
      for (Index u = 0; u < grid.n_units(); ++u) {
        if (!grid.schedule().treated(u, t)) continue;
        any = true;
        const CellInference eff = ite(grid, u, t);
        const double half = z * std::sqrt(eff.variance);
        classify(eff.point - half, eff.point + half, row);
      }
      if (!any) continue;
      const CellInference avg = atet(grid, t);
      row.atet = avg.point;
      row.atet_se = std::sqrt(avg.variance);
      if (scale_weights) {
        const CellInference pop = weighted_effect(grid, *scale_weights, t);
        row.population_effect = pop.point;
        row.population_se = std::sqrt(pop.variance);
      }
      rows.push_back(row);
    }
    return rows;
  }

  // Pooled report: counts over every treated cell, and the mean effect over
  // all treated cells with its variance accumulated per sub-problem.
  ReportRow row;
  row.time = -1;
  Index n_cells = 0;
  double effect_sum = 0.0;
  for (Index u = 0; u < grid.n_units(); ++u) {
    for (Index t = 0; t < grid.n_times(); ++t) {
      if (!grid.schedule().treated(u, t)) continue;
      ++n_cells;
      const CellInference eff = ite(grid, u, t);
      effect_sum += eff.point;
      const double half = z * std::sqrt(eff.variance);
      classify(eff.point - half, eff.point + half, row);
    }
  }
  if (n_cells == 0) return rows;
  row.atet = effect_sum / static_cast<double>(n_cells);

  double variance = 0.0;
  double pop_point = 0.0;
  double pop_variance = 0.0;
  for (const SubproblemInference& sub : grid.subproblems()) {
    const Index target_rows = static_cast<Index>(sub.d_row_units.size()) - sub.target_row_begin;
    const Index target_cols = grid.partition().stage_lengths[sub.j0 - 1];
    Vector c1 = Vector::Zero(sub.fit.n2());
    Vector c2 = Vector::Zero(sub.fit.t2());
    for (Index r = 0; r < target_rows; ++r) {
      c1[sub.target_row_begin + r] = 1.0 / static_cast<double>(n_cells);
    }
    for (Index c = sub.fit.t2() - target_cols; c < sub.fit.t2(); ++c) c2[c] = 1.0;
    variance += bilinear_variance(sub.fit, sub.residuals, c1, c2);
    if (scale_weights) {
      Vector p1 = Vector::Zero(sub.fit.n2());
      for (Index r = 0; r < target_rows; ++r) {
        p1[sub.target_row_begin + r] = (*scale_weights)[sub.d_row_units[sub.target_row_begin + r]];
      }
      pop_variance += bilinear_variance(sub.fit, sub.residuals, p1, c2);
    }
  }
  row.atet_se = std::sqrt(variance);
  if (scale_weights) {
    for (Index u = 0; u < grid.n_units(); ++u) {
      for (Index t = 0; t < grid.n_times(); ++t) {
        if (!grid.schedule().treated(u, t)) continue;
        pop_point += (*scale_weights)[u] * (grid.observed()(u, t) - grid.cell(u, t).point);
      }
    }
    row.population_effect = pop_point;
    row.population_se = std::sqrt(pop_variance);
  }
  rows.push_back(row);
  return rows;
}

}  // namespace staircase
