#pragma once

#include "staircase/fourblock.hpp"
#include "staircase/types.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace staircase {

/// Per-unit first treated time, 0-based; kNeverTreated marks non-adopters.
/// A valid schedule has at least one never-treated unit and every finite
/// adoption time in [1, T-1], so each adopter has pre-treatment data.
struct AdoptionSchedule {
  static constexpr Index kNeverTreated = std::numeric_limits<Index>::max();

  std::vector<Index> adoption;

  Index n_units() const { return static_cast<Index>(adoption.size()); }
  bool treated(Index unit, Index time) const { return time >= adoption[unit]; }
  bool never_treated(Index unit) const { return adoption[unit] == kNeverTreated; }
};

/// Group/stage decomposition of a staggered design.
///
/// Group 1 holds the never-treated units; group i >= 2 adopts at
/// boundaries[k - i] (so later adopters sit higher). Stage j covers times
/// [boundaries[j-2], boundaries[j-1]) with boundaries[-1] = 0 and
/// boundaries[k-1] = T. A cell in (group i, stage j) is observed iff
/// j <= k + 1 - i. Groups and stages are 1-based throughout, matching the
/// block indices (i0, j0) used below.
struct StaircasePartition {
  int k = 0;
  std::vector<Index> group_sizes;    // k entries
  std::vector<Index> stage_lengths;  // k entries
  std::vector<Index> position;       // original unit -> staircase row
  std::vector<Index> order;          // staircase row -> original unit
  std::vector<Index> boundaries;     // k-1 distinct adoption times, ascending
  std::vector<Index> group_starts;   // k+1 prefix sums over staircase rows
  std::vector<Index> stage_starts;   // k+1 prefix sums over time

  Index n_units() const { return group_starts.back(); }
  Index n_times() const { return stage_starts.back(); }
  /// 1-based group of a staircase row / stage of a time index.
  int group_of_row(Index row) const;
  int stage_of_time(Index time) const;
  bool observed(int group, int stage) const { return stage <= k + 1 - group; }
};

/// Sorts units into staircase order: never-treated first, then adopters by
/// adoption time descending, stable by original index within a group.
/// Throws DataError when no unit is never-treated, when a unit adopts at
/// time 0 (no pre-treatment data), or when an adoption time falls outside
/// the panel.
StaircasePartition build_staircase(const AdoptionSchedule& schedule, Index n_times);

/// Four-block problem targeting block (i0, j0) of the staircase, for
/// i0 in [1, k] and j0 in (k+1-i0, k]. With k1 = k+1-j0 and k2 = k+1-i0:
/// Y_a = groups 1..k1 x stages 1..k2, Y_b = groups 1..k1 x stages k2+1..j0,
/// Y_c = groups k1+1..i0 x stages 1..k2. Y is in original row order.
FourBlockProblem extract_subproblem(const Matrix& Y, const StaircasePartition& part,
                                    int i0, int j0);

/// One fitted sub-problem retained for aggregated (bilinear) inference.
struct SubproblemInference {
  int i0 = 0;
  int j0 = 0;
  FourBlockFit fit;
  ResidualMatrix residuals;
  std::vector<Index> d_row_units;  // hidden-block rows -> original units
  Index d_col_time0 = 0;           // first time index of the hidden block
  Index target_row_begin = 0;      // rows of the hidden block owned by group i0
  double isnr_advisory = 0.0;
};

/// Point estimates, variances and confidence intervals for every unobserved
/// cell, indexed by original unit and time. Each cell is produced by exactly
/// one sub-problem (asserted during assembly).
class InferenceGrid {
 public:
  InferenceGrid(Matrix observed, AdoptionSchedule schedule, StaircasePartition partition,
                int rank, double alpha);

  bool has(Index unit, Index time) const { return source_(unit, time) >= 0; }
  CellInference cell(Index unit, Index time) const;

  Index n_units() const { return observed_.rows(); }
  Index n_times() const { return observed_.cols(); }
  const Matrix& observed() const { return observed_; }
  const AdoptionSchedule& schedule() const { return schedule_; }
  const StaircasePartition& partition() const { return partition_; }
  int rank() const { return rank_; }
  double alpha() const { return alpha_; }
  const std::vector<SubproblemInference>& subproblems() const { return subproblems_; }
  /// Index into subproblems() that produced cell (unit, time), -1 if observed.
  int source(Index unit, Index time) const { return source_(unit, time); }

  void insert(Index unit, Index time, const CellInference& ci, int subproblem);
  void add_subproblem(SubproblemInference sub) { subproblems_.push_back(std::move(sub)); }
  /// Verifies the sub-problems tiled the unobserved region exactly once.
  void finalize() const;

 private:
  Matrix observed_;
  AdoptionSchedule schedule_;
  StaircasePartition partition_;
  int rank_;
  double alpha_;
  Matrix point_, variance_, lower_, upper_;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> source_;
  std::vector<SubproblemInference> subproblems_;
};

/// Full inference pass over a staggered panel: builds the staircase, fits
/// every four-block sub-problem, and fills per-cell intervals at level alpha.
/// Rank must satisfy r <= min(N1_eff, T1_eff) in every sub-problem; failures
/// are reported with the offending (i0, j0) and its effective dimensions.
InferenceGrid staggered_conf(const Matrix& Y, const AdoptionSchedule& schedule,
                             int rank, double alpha);

/// Treatment-effect interval for a treated cell: the observed outcome minus
/// the counterfactual interval, reflected so lower/upper stay ordered.
CellInference ite(const InferenceGrid& grid, Index unit, Index time);

/// Weighted treatment effect sum_i w_i * ite(i, t) over units treated at t.
/// The variance sums each contributing sub-problem's bilinear variance;
/// cross-sub-problem covariances are ignored (independence approximation).
CellInference weighted_effect(const InferenceGrid& grid, const Vector& weights, Index time);

/// Average treatment effect on the treated at time t.
CellInference atet(const InferenceGrid& grid, Index time);

/// One significance-report row: counts of treated units whose ITE interval
/// at the report level lies above / below / across zero, the ATET and its
/// standard error, and optionally a weighted population effect.
struct ReportRow {
  Index time = 0;
  int positive = 0;
  int negative = 0;
  int null_effects = 0;
  double atet = 0.0;
  double atet_se = 0.0;
  std::optional<double> population_effect;
  std::optional<double> population_se;
};

/// Per-time significance counts and aggregate effects at level alpha.
/// With per_year = false a single pooled row (time = -1) averages over all
/// treated cells instead.
std::vector<ReportRow> significance_report(const InferenceGrid& grid, double alpha,
                                           bool per_year,
                                           const std::optional<Vector>& scale_weights);

}  // namespace staircase
