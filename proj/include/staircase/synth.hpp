#pragma once

#include "staircase/staggered.hpp"
#include "staircase/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace staircase {

/// Factor-model parameters driving the semi-synthetic generator: means and
/// covariances of the scaled factor rows, plus the residual noise variance.
struct FactorModelParams {
  int rank = 0;
  Vector u_mean;
  Vector v_mean;
  Matrix u_cov;
  Matrix v_cov;
  double noise_var = 0.0;
};

/// Fits the generator parameters to a panel: rank-r SVD of Y, factors scaled
/// by the square roots of the singular values, row means/covariances of the
/// scaled factors, and residual variance |Y - UV'|_F^2 / (NT). Covariances
/// use the sample (n-1) normalization.
FactorModelParams fit_factor_model(const Matrix& Y, int rank);

/// How synthetic adoption times are drawn. By default times are uniform
/// integers in [lo_frac * T', hi_frac * T'] (1-based), draws beyond the panel
/// become never-treated, and draws below 2 are clamped to 2 so every adopter
/// keeps pre-treatment data. With raw_time_range the interval is indexed by
/// the unit count N' instead and no clamping is applied.
struct TreatmentTimeRule {
  double lo_frac = 0.7;
  double hi_frac = 1.3;
  bool raw_time_range = false;
};

/// One synthetic panel: noisy outcomes, the noiseless ground truth (rank at
/// most r), and a drawn adoption schedule. Deterministic given (seed, stream).
struct SyntheticPanel {
  Matrix Y;
  Matrix M_star;
  AdoptionSchedule schedule;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Draws phi_i ~ N(v_mean, v_cov), mu_t ~ N(u_mean, u_cov), noise with
/// variance noise_var, and sets Y[i,t] = <phi_i, mu_t> + eps[i,t]. Note the
/// role swap: unit factors come from the v-side statistics and time factors
/// from the u-side, mirroring how the parameters are fitted.
SyntheticPanel generate_panel(const FactorModelParams& params, Index n_units, Index n_times,
                              std::uint64_t seed, std::uint64_t stream = 0,
                              const TreatmentTimeRule& rule = TreatmentTimeRule{});

/// Simulation configuration shared by the experiments. The four-block design
/// treats units [n1, N) from column t1 on; the staggered design draws random
/// schedules via the treatment rule.
struct ExperimentConfig {
  Index n_units = 200;
  Index n_times = 200;
  Index n1 = 100;
  Index t1 = 100;
  std::string design = "fourblock";  // "fourblock" | "staggered"
  int rank = 2;
  double alpha = 0.05;
  int reps = 1000;
  std::uint64_t seed = 0;
  double noise_sd = 0.1;
  Vector u_mean;  // empty -> default_factor_params(rank)
  Vector v_mean;
  Matrix u_cov;
  Matrix v_cov;
  TreatmentTimeRule treatment;
};

/// Simulation defaults: means with a dominant first factor and weaker
/// alternating components, isotropic row covariance 0.25 I.
FactorModelParams default_factor_params(int rank);

struct CoverageResult {
  int reps = 0;
  double alpha = 0.0;
  double ite_coverage = 0.0;
  double ite_coverage_se = 0.0;
  double atet_coverage = 0.0;
  double atet_coverage_se = 0.0;
  double avg_ci_width_ite = 0.0;
  double avg_ci_width_atet = 0.0;
  double mse_ite = 0.0;
  double mse_atet = 0.0;
};

/// Per replication: generate a panel, run the full inference pass, and test
/// whether each interval contains its ground truth (entrywise and ATET).
/// Hit rates come with binomial standard errors over replications.
CoverageResult coverage_experiment(const ExperimentConfig& cfg);

struct PowerCurvePoint {
  double alpha = 0.0;
  double power = 0.0;
};

struct PowerResult {
  std::vector<PowerCurvePoint> points;
  double effect_size = 0.0;
  std::string target;
  int reps = 0;
};

/// Size-vs-power curve via a two-step calibration: (1) from null
/// replications, take the empirical critical multiplier of |estimate -
/// truth| / SE at each size alpha; (2) report the rejection rate once a
/// treatment effect of the given magnitude is injected. Because the
/// estimator never reads treated-cell outcomes, injection shifts each null
/// statistic by effect / SE exactly, so both steps share one set of draws
/// and the curve is monotone in alpha by construction.
/// target is "ite" (per-cell statistics) or "atet" (per-time statistics).
PowerResult power_experiment(const ExperimentConfig& cfg, double effect_size,
                             const std::vector<double>& alphas, const std::string& target);

struct GammaAccuracyResult {
  int reps = 0;
  double median_rel_error = 0.0;
};

/// Accuracy of the variance estimates: pooled median of
/// |gamma_hat - gamma_star| / gamma_star over unobserved cells and
/// replications, with gamma_star computed from the true factors.
GammaAccuracyResult gamma_accuracy_experiment(const ExperimentConfig& cfg);

}  // namespace staircase
