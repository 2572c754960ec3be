#pragma once

#include "staircase/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace staircase::cli {

/// Parsed simulation request. Modes: "coverage" (interval coverage, widths
/// and MSEs), "power" (size-vs-power curve), "variance" (accuracy of the
/// variance estimates against the oracle).
struct SimulationConfig {
  std::string mode = "coverage";
  ExperimentConfig experiment;
  double effect_size = 0.0;              // power
  std::vector<double> alphas;            // power sizes
  std::string target = "ite";            // power target
};

/// Reads the JSON config. Keys (defaults in parentheses):
///   mode ("coverage"), design ("fourblock"), N, T, N1, T1, rank (2),
///   alpha (0.05), reps, seed (0), noise {kind: "gaussian", sd},
///   factors {u_mean, v_mean, u_cov, v_cov} (built-in defaults when absent;
///   a covariance may be a scalar c for c*I, an array for a diagonal, or a
///   matrix), treatment {lo_frac, hi_frac, raw_time_range},
///   effect_size, alphas, target ("ite").
SimulationConfig parse_simulation_config(const std::filesystem::path& path);

/// Runs the requested experiment and writes results.csv (one row per
/// condition) and summary.json into out_dir. Byte-stable for a fixed config.
void run_simulation(const SimulationConfig& cfg, const std::string& out_dir);

}  // namespace staircase::cli
