#include "staircase/synth.hpp"

#include "staircase/lowrank.hpp"
#include "staircase/parallel.hpp"
#include "staircase/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace staircase {

namespace {

// Interval membership with a tiny slack so exact-reconstruction runs, whose
// intervals degenerate to a point, still count their own truth as covered.
bool covers(double lower, double upper, double truth) {
  const double eps = 1e-9 * (1.0 + std::abs(truth));
  return truth >= lower - eps && truth <= upper + eps;
}

double binomial_se(double p, int n) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

template <typename Fn>
void run_replication(int rep, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError("replication " + std::to_string(rep) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("replication " + std::to_string(rep) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("replication " + std::to_string(rep) + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("replication " + std::to_string(rep) + ": " + e.what());
  }
}

FactorModelParams effective_params(const ExperimentConfig& cfg) {
  FactorModelParams params;
  if (cfg.u_mean.size() == 0) {
    params = default_factor_params(cfg.rank);
  } else {
    params.rank = cfg.rank;
    params.u_mean = cfg.u_mean;
    params.v_mean = cfg.v_mean;
    params.u_cov = cfg.u_cov;
    params.v_cov = cfg.v_cov;
    if (params.v_mean.size() != cfg.rank || params.u_mean.size() != cfg.rank) {
      throw ConfigError("experiment: factor means must have length rank");
    }
  }
  if (!(cfg.noise_sd >= 0.0)) {
    throw ConfigError("experiment: noise sd must be nonnegative");
  }
  params.noise_var = cfg.noise_sd * cfg.noise_sd;
  return params;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.design != "fourblock" && cfg.design != "staggered") {
    throw ConfigError("experiment: design must be \"fourblock\" or \"staggered\"");
  }
  if (cfg.reps < 1) throw ConfigError("experiment: reps must be at least 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("experiment: alpha must lie strictly inside (0, 1)");
  }
  if (cfg.design == "fourblock" &&
      (cfg.n1 < 1 || cfg.n1 >= cfg.n_units || cfg.t1 < 1 || cfg.t1 >= cfg.n_times)) {
    throw ConfigError("experiment: four-block split must leave both sides non-empty");
  }
}

AdoptionSchedule four_block_schedule(Index n_units, Index n1, Index t1) {
  AdoptionSchedule s;
  s.adoption.assign(n_units, AdoptionSchedule::kNeverTreated);
  for (Index u = n1; u < n_units; ++u) s.adoption[u] = t1;
  return s;
}

// One generated panel plus the schedule the experiment actually analyzes.
struct RepDraw {
  SyntheticPanel panel;
  AdoptionSchedule schedule;
};

RepDraw draw_rep(const ExperimentConfig& cfg, const FactorModelParams& params, int rep) {
  RepDraw d;
  d.panel = generate_panel(params, cfg.n_units, cfg.n_times, cfg.seed,
                           static_cast<std::uint64_t>(rep), cfg.treatment);
  d.schedule = cfg.design == "fourblock"
                   ? four_block_schedule(cfg.n_units, cfg.n1, cfg.t1)
                   : d.panel.schedule;
  return d;
}

}  // namespace

FactorModelParams fit_factor_model(const Matrix& Y, int rank) {
  TruncatedSvd svd = truncated_svd(Y, rank);
  const Matrix u_scaled = svd.U * svd.S.cwiseSqrt().asDiagonal();
  const Matrix v_scaled = svd.V * svd.S.cwiseSqrt().asDiagonal();

  FactorModelParams params;
  params.rank = rank;
  params.u_mean = u_scaled.colwise().mean();
  params.v_mean = v_scaled.colwise().mean();

  auto row_cov = [](const Matrix& rows, const Vector& mean) {
    const Index n = rows.rows();
    if (n < 2) return Matrix::Zero(rows.cols(), rows.cols()).eval();
    Matrix centered = rows.rowwise() - mean.transpose();
    return Matrix((centered.transpose() * centered) / static_cast<double>(n - 1));
  };
  params.u_cov = row_cov(u_scaled, params.u_mean);
  params.v_cov = row_cov(v_scaled, params.v_mean);
  params.noise_var = (Y - svd.reconstruction()).squaredNorm() /
                     static_cast<double>(Y.rows() * Y.cols());
  return params;
}

SyntheticPanel generate_panel(const FactorModelParams& params, Index n_units, Index n_times,
                              std::uint64_t seed, std::uint64_t stream,
                              const TreatmentTimeRule& rule) {
  if (params.rank < 1) throw ConfigError("generate_panel: rank must be positive");
  if (n_units < 1 || n_times < 1) {
    throw ConfigError("generate_panel: panel dimensions must be positive");
  }
  if (!(params.noise_var >= 0.0)) {
    throw ConfigError("generate_panel: noise variance must be nonnegative");
  }

  CounterRng rng(seed, stream);
  GaussianSampler unit_factors(params.v_mean, params.v_cov);
  GaussianSampler time_factors(params.u_mean, params.u_cov);
  if (unit_factors.dim() != params.rank || time_factors.dim() != params.rank) {
    throw ConfigError("generate_panel: factor parameters disagree with the rank");
  }

  Matrix phi(n_units, params.rank);
  for (Index i = 0; i < n_units; ++i) phi.row(i) = unit_factors.draw(rng).transpose();
  Matrix mu(n_times, params.rank);
  for (Index t = 0; t < n_times; ++t) mu.row(t) = time_factors.draw(rng).transpose();

  SyntheticPanel panel;
  panel.seed = seed;
  panel.stream = stream;
  panel.M_star = phi * mu.transpose();
  panel.Y = panel.M_star;
  const double noise_sd = std::sqrt(params.noise_var);
  for (Index i = 0; i < n_units; ++i) {
    for (Index t = 0; t < n_times; ++t) {
      panel.Y(i, t) += noise_sd * rng.next_gaussian();
    }
  }

  // Adoption times are 1-based while drawing, matching how panels are usually
  // described; the schedule stores them 0-based.
  const double basis = static_cast<double>(rule.raw_time_range ? n_units : n_times);
  const long lo = static_cast<long>(std::ceil(rule.lo_frac * basis));
  const long hi = static_cast<long>(std::floor(rule.hi_frac * basis));
  if (hi < lo) throw ConfigError("generate_panel: empty treatment-time range");
  panel.schedule.adoption.assign(n_units, AdoptionSchedule::kNeverTreated);
  for (Index i = 0; i < n_units; ++i) {
    const double u = rng.next_double();
    long draw = lo + static_cast<long>(u * static_cast<double>(hi - lo + 1));
    draw = std::min(draw, hi);
    if (!rule.raw_time_range) draw = std::max<long>(draw, 2);
    if (draw > static_cast<long>(n_times)) continue;  // beyond the panel: never treated
    panel.schedule.adoption[i] = static_cast<Index>(draw - 1);
  }
  return panel;
}

FactorModelParams default_factor_params(int rank) {
  if (rank < 1) throw ConfigError("default_factor_params: rank must be positive");
  FactorModelParams params;
  params.rank = rank;
  params.u_mean = Vector::Zero(rank);
  params.v_mean = Vector::Zero(rank);
  params.u_mean[0] = 1.0;
  params.v_mean[0] = 1.0;
  for (int j = 1; j < rank; ++j) {
    params.u_mean[j] = (j % 2 == 1) ? 0.4 : -0.4;
    params.v_mean[j] = (j % 2 == 1) ? -0.4 : 0.4;
  }
  params.u_cov = 0.25 * Matrix::Identity(rank, rank);
  params.v_cov = 0.25 * Matrix::Identity(rank, rank);
  params.noise_var = 0.01;
  return params;
}

CoverageResult coverage_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const FactorModelParams params = effective_params(cfg);

  struct RepStats {
    double ite_hits = 0.0, ite_cells = 0.0;
    double atet_hits = 0.0, atet_targets = 0.0;
    double ite_width = 0.0, atet_width = 0.0;
    double ite_sq_err = 0.0, atet_sq_err = 0.0;
  };
  std::vector<RepStats> stats(cfg.reps);

  parallel_for(cfg.reps, effective_threads(), [&](int rep) {
    run_replication(rep, [&] {
      RepDraw d = draw_rep(cfg, params, rep);
      InferenceGrid grid = staggered_conf(d.panel.Y, d.schedule, cfg.rank, cfg.alpha);
      RepStats& s = stats[rep];

      for (Index u = 0; u < grid.n_units(); ++u) {
        for (Index t = 0; t < grid.n_times(); ++t) {
          if (!grid.has(u, t)) continue;
          const CellInference ci = grid.cell(u, t);
          const double truth = d.panel.M_star(u, t);
          s.ite_cells += 1.0;
          s.ite_hits += covers(ci.lower, ci.upper, truth) ? 1.0 : 0.0;
          s.ite_width += ci.upper - ci.lower;
          s.ite_sq_err += (ci.point - truth) * (ci.point - truth);
        }
      }

      for (Index t = 0; t < grid.n_times(); ++t) {
        Index n_treated = 0;
        double truth = 0.0;
        for (Index u = 0; u < grid.n_units(); ++u) {
          if (!d.schedule.treated(u, t)) continue;
          ++n_treated;
          truth += d.panel.Y(u, t) - d.panel.M_star(u, t);
        }
        if (n_treated == 0) continue;
        truth /= static_cast<double>(n_treated);
        const CellInference est = atet(grid, t);
        s.atet_targets += 1.0;
        s.atet_hits += covers(est.lower, est.upper, truth) ? 1.0 : 0.0;
        s.atet_width += est.upper - est.lower;
        s.atet_sq_err += (est.point - truth) * (est.point - truth);
      }
    });
  });

  RepStats total;
  for (const RepStats& s : stats) {
    total.ite_hits += s.ite_hits;
    total.ite_cells += s.ite_cells;
    total.atet_hits += s.atet_hits;
    total.atet_targets += s.atet_targets;
    total.ite_width += s.ite_width;
    total.atet_width += s.atet_width;
    total.ite_sq_err += s.ite_sq_err;
    total.atet_sq_err += s.atet_sq_err;
  }

  CoverageResult out;
  out.reps = cfg.reps;
  out.alpha = cfg.alpha;
  out.ite_coverage = total.ite_hits / total.ite_cells;
  out.atet_coverage = total.atet_hits / total.atet_targets;
  out.ite_coverage_se = binomial_se(out.ite_coverage, cfg.reps);
  out.atet_coverage_se = binomial_se(out.atet_coverage, cfg.reps);
  out.avg_ci_width_ite = total.ite_width / total.ite_cells;
  out.avg_ci_width_atet = total.atet_width / total.atet_targets;
  out.mse_ite = total.ite_sq_err / total.ite_cells;
  out.mse_atet = total.atet_sq_err / total.atet_targets;
  return out;
}

PowerResult power_experiment(const ExperimentConfig& cfg, double effect_size,
                             const std::vector<double>& alphas, const std::string& target) {
  validate_config(cfg);
  if (!std::isfinite(effect_size)) {
    throw ConfigError("power_experiment: effect size must be finite");
  }
  if (target != "ite" && target != "atet") {
    throw ConfigError("power_experiment: target must be \"ite\" or \"atet\"");
  }
  if (alphas.empty()) throw ConfigError("power_experiment: need at least one size alpha");
  double min_alpha = 1.0;
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("power_experiment: sizes must lie strictly inside (0, 1)");
    }
    min_alpha = std::min(min_alpha, a);
  }
  const int min_reps = static_cast<int>(std::ceil(5.0 / min_alpha));
  if (cfg.reps < min_reps) {
    throw ConfigError("power_experiment: " + std::to_string(cfg.reps) +
                      " reps are too few for alpha=" + std::to_string(min_alpha) +
                      "; need at least " + std::to_string(min_reps));
  }

  const FactorModelParams params = effective_params(cfg);

  // Target layout comes from replication 0; all replications of a design
  // share it (four-block by construction, staggered would not, so the latter
  // is rejected for power runs).
  if (cfg.design != "fourblock") {
    throw ConfigError("power_experiment: only the four-block design is supported");
  }
  const Index n_stats = target == "ite" ? (cfg.n_units - cfg.n1) * (cfg.n_times - cfg.t1)
                                        : (cfg.n_times - cfg.t1);

  Matrix z_null(n_stats, cfg.reps);   // statistic under no effect
  Matrix inv_se(n_stats, cfg.reps);   // 1 / SE, to shift statistics by the effect

  parallel_for(cfg.reps, effective_threads(), [&](int rep) {
    run_replication(rep, [&] {
      RepDraw d = draw_rep(cfg, params, rep);
      InferenceGrid grid = staggered_conf(d.panel.Y, d.schedule, cfg.rank, cfg.alpha);
      Index s = 0;
      if (target == "ite") {
        for (Index u = cfg.n1; u < cfg.n_units; ++u) {
          for (Index t = cfg.t1; t < cfg.n_times; ++t) {
            const CellInference eff = ite(grid, u, t);
            const double se = std::sqrt(eff.variance);
            z_null(s, rep) = se > 0.0 ? eff.point / se : 0.0;
            inv_se(s, rep) = se > 0.0 ? 1.0 / se : 1e300;
            ++s;
          }
        }
      } else {
        for (Index t = cfg.t1; t < cfg.n_times; ++t) {
          const CellInference eff = atet(grid, t);
          const double se = std::sqrt(eff.variance);
          z_null(s, rep) = se > 0.0 ? eff.point / se : 0.0;
          inv_se(s, rep) = se > 0.0 ? 1.0 / se : 1e300;
          ++s;
        }
      }
    });
  });

  PowerResult out;
  out.effect_size = effect_size;
  out.target = target;
  out.reps = cfg.reps;

  std::vector<double> abs_null(cfg.reps);
  std::vector<std::vector<double>> critical(n_stats);
  for (Index s = 0; s < n_stats; ++s) {
    for (int r = 0; r < cfg.reps; ++r) abs_null[r] = std::abs(z_null(s, r));
    std::sort(abs_null.begin(), abs_null.end());
    critical[s].reserve(alphas.size());
    for (double a : alphas) {
      int idx = static_cast<int>(std::ceil((1.0 - a) * cfg.reps)) - 1;
      idx = std::clamp(idx, 0, cfg.reps - 1);
      critical[s].push_back(abs_null[idx]);
    }
  }

  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    double rejections = 0.0;
    for (Index s = 0; s < n_stats; ++s) {
      for (int r = 0; r < cfg.reps; ++r) {
        const double stat = std::abs(z_null(s, r) + effect_size * inv_se(s, r));
        if (stat > critical[s][ai]) rejections += 1.0;
      }
    }
    out.points.push_back({alphas[ai], rejections / static_cast<double>(n_stats * cfg.reps)});
  }
  return out;
}

GammaAccuracyResult gamma_accuracy_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.design != "fourblock") {
    throw ConfigError("gamma_accuracy_experiment: only the four-block design is supported");
  }
  const FactorModelParams params = effective_params(cfg);
  if (!(params.noise_var > 0.0)) {
    throw ConfigError("gamma_accuracy_experiment: needs positive noise variance");
  }

  const Index n2 = cfg.n_units - cfg.n1;
  const Index t2 = cfg.n_times - cfg.t1;
  std::vector<std::vector<double>> rel_errors(cfg.reps);

  parallel_for(cfg.reps, effective_threads(), [&](int rep) {
    run_replication(rep, [&] {
      RepDraw d = draw_rep(cfg, params, rep);
      InferenceGrid grid = staggered_conf(d.panel.Y, d.schedule, cfg.rank, cfg.alpha);

      // Oracle variance on the same grid, from the true factors. With
      // homoskedastic noise it splits into row and column projection norms;
      // oracle_cell_variance validates this fast path in the tests.
      TruncatedSvd truth = truncated_svd(d.panel.M_star, cfg.rank);
      const auto U1 = truth.U.topRows(cfg.n1);
      const auto V1 = truth.V.topRows(cfg.t1);
      const Matrix row_proj = truth.U.bottomRows(n2) *
                              (U1.transpose() * U1).ldlt().solve(U1.transpose());
      const Matrix col_proj = truth.V.bottomRows(t2) *
                              (V1.transpose() * V1).ldlt().solve(V1.transpose());
      const Vector row_norms = row_proj.rowwise().squaredNorm();
      const Vector col_norms = col_proj.rowwise().squaredNorm();

      std::vector<double>& errs = rel_errors[rep];
      errs.reserve(n2 * t2);
      for (Index i = 0; i < n2; ++i) {
        for (Index t = 0; t < t2; ++t) {
          const double gamma_star = params.noise_var * (row_norms[i] + col_norms[t]);
          const double gamma_hat = grid.cell(cfg.n1 + i, cfg.t1 + t).variance;
          errs.push_back(std::abs(gamma_hat - gamma_star) / gamma_star);
        }
      }
    });
  });

  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(cfg.reps) * n2 * t2);
  for (const auto& errs : rel_errors) pooled.insert(pooled.end(), errs.begin(), errs.end());

  GammaAccuracyResult out;
  out.reps = cfg.reps;
  const std::size_t mid = pooled.size() / 2;
  std::nth_element(pooled.begin(), pooled.begin() + mid, pooled.end());
  out.median_rel_error = pooled[mid];
  return out;
}

}  // namespace staircase
