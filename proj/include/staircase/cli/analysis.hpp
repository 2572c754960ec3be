#pragma once

#include "staircase/panel.hpp"
#include "staircase/staggered.hpp"

#include <optional>
#include <string>
#include <vector>

namespace staircase::cli {

/// Settings for one real-data analysis run.
struct RunConfig {
  std::string panel_csv;
  std::string adoption_csv;
  std::optional<std::string> weights_csv;
  std::string rank = "auto";  // "auto" or a positive integer
  double alpha = 0.05;
  int moving_average = 1;  // odd window; 1 disables smoothing
  std::vector<std::string> exclude_times;
  std::string out_dir;
};

/// Centered moving average per row with the window truncated at the edges;
/// window must be odd and at most T. Window 1 is the identity.
Matrix preprocess_moving_average(const Matrix& Y, int window);

/// Runs the full pipeline: ingest, optional smoothing, rank choice (the
/// scree vector is always printed so `auto` can be overridden), inference,
/// and report emission. Writes into cfg.out_dir:
///   series.csv          observed outcomes, counterfactuals with intervals,
///                       and treatment effects with intervals per unit/time
///   report.csv          per-year significance counts, ATET and SE, and the
///                       weighted population effect when weights were given
///   report_rounded.csv  the same table at reading precision
///   run.json            run metadata and per-sub-problem diagnostics
/// Outputs are byte-stable for fixed inputs.
void run_analysis(const RunConfig& cfg);

}  // namespace staircase::cli
