#include "staircase/cli/analysis.hpp"

#include "staircase/cli/csv.hpp"
#include "staircase/cli/ingest.hpp"
#include "staircase/lowrank.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace staircase::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

int parse_rank(const std::string& text, const Vector& scree, Index max_feasible) {
  if (text == "auto") {
    return select_rank(scree, static_cast<int>(max_feasible));
  }
  try {
    std::size_t pos = 0;
    const int r = std::stoi(text, &pos);
    if (pos == text.size() && r >= 1) return r;
  } catch (const std::exception&) {
  }
  throw ConfigError("rank must be `auto` or a positive integer, got '" + text + "'");
}

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Matrix preprocess_moving_average(const Matrix& Y, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("moving-average window must be odd and positive, got " +
                      std::to_string(window));
  }
  if (window > Y.cols()) {
    throw ConfigError("moving-average window exceeds the number of time periods");
  }
  if (window == 1) return Y;
  const int half = (window - 1) / 2;
  Matrix out(Y.rows(), Y.cols());
  for (Index i = 0; i < Y.rows(); ++i) {
    for (Index t = 0; t < Y.cols(); ++t) {
      const Index lo = std::max<Index>(0, t - half);
      const Index hi = std::min<Index>(Y.cols() - 1, t + half);
      out(i, t) = Y.row(i).segment(lo, hi - lo + 1).mean();
    }
  }
  return out;
}

void run_analysis(const RunConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("alpha must lie strictly inside (0, 1)");
  }
  std::filesystem::create_directories(cfg.out_dir);

  std::vector<std::string> original_times;
  PanelData panel = read_panel_csv(cfg.panel_csv, cfg.exclude_times, &original_times);
  AdoptionSchedule schedule = read_adoption_csv(cfg.adoption_csv, panel, original_times);
  if (cfg.weights_csv) {
    panel.weights = read_weights_csv(*cfg.weights_csv, panel);
  }
  panel.Y = preprocess_moving_average(panel.Y, cfg.moving_average);

  const Index max_rank = std::min(panel.n_units(), panel.n_times());
  const Vector scree = truncated_svd(panel.Y, static_cast<int>(max_rank)).S;
  const int rank = parse_rank(cfg.rank, scree, max_rank);

  std::cout << "scree:";
  for (Index i = 0; i < scree.size(); ++i) std::cout << ' ' << format_rounded(scree[i]);
  std::cout << "\nrank: " << rank << (cfg.rank == "auto" ? " (auto)" : "") << "\n";

  InferenceGrid grid = staggered_conf(panel.Y, schedule, rank, cfg.alpha);

  // Per-unit time series: the data behind counterfactual trajectory plots.
  std::vector<CsvRow> series;
  series.push_back({"unit", "time", "observed", "counterfactual", "cf_lower", "cf_upper",
                    "ite", "ite_lower", "ite_upper"});
  for (Index u = 0; u < panel.n_units(); ++u) {
    for (Index t = 0; t < panel.n_times(); ++t) {
      CsvRow row = {panel.units[u], panel.times[t], format_full(panel.Y(u, t))};
      if (grid.has(u, t)) {
        const CellInference m = grid.cell(u, t);
        const CellInference eff = ite(grid, u, t);
        row.insert(row.end(),
                   {format_full(m.point), format_full(m.lower), format_full(m.upper),
                    format_full(eff.point), format_full(eff.lower), format_full(eff.upper)});
      } else {
        row.insert(row.end(), {"", "", "", "", "", ""});
      }
      series.push_back(row);
    }
  }
  write_csv(std::filesystem::path(cfg.out_dir) / "series.csv", series);

  const std::optional<Vector> weights =
      panel.weights ? std::optional<Vector>(*panel.weights) : std::nullopt;
  const std::vector<ReportRow> report = significance_report(grid, cfg.alpha, true, weights);

  auto render_report = [&](bool rounded) {
    auto fmt = [&](double v) { return rounded ? format_rounded(v) : format_full(v); };
    std::vector<CsvRow> rows;
    rows.push_back({"time", "positive", "negative", "null", "atet", "atet_se",
                    "population_effect", "population_se"});
    for (const ReportRow& r : report) {
      CsvRow row = {panel.times[r.time], std::to_string(r.positive),
                    std::to_string(r.negative), std::to_string(r.null_effects),
                    fmt(r.atet), fmt(r.atet_se)};
      row.push_back(r.population_effect ? fmt(*r.population_effect) : "");
      row.push_back(r.population_se ? fmt(*r.population_se) : "");
      rows.push_back(row);
    }
    return rows;
  };
  write_csv(std::filesystem::path(cfg.out_dir) / "report.csv", render_report(false));
  write_csv(std::filesystem::path(cfg.out_dir) / "report_rounded.csv", render_report(true));

  ordered_json meta;
  meta["panel"] = cfg.panel_csv;
  meta["adoption"] = cfg.adoption_csv;
  meta["n_units"] = panel.n_units();
  meta["n_times"] = panel.n_times();
  meta["excluded_times"] = cfg.exclude_times;
  meta["moving_average"] = cfg.moving_average;
  meta["alpha"] = cfg.alpha;
  meta["rank_requested"] = cfg.rank;
  meta["rank_used"] = rank;
  meta["scree"] = to_std(scree);
  meta["weights"] = panel.weights.has_value();
  meta["groups"] = grid.partition().k;
  ordered_json subs = ordered_json::array();
  for (const SubproblemInference& sub : grid.subproblems()) {
    ordered_json s;
    s["i0"] = sub.i0;
    s["j0"] = sub.j0;
    s["n1_eff"] = sub.fit.n1;
    s["t1_eff"] = sub.fit.t1;
    s["n2_eff"] = sub.fit.n2();
    s["t2_eff"] = sub.fit.t2();
    s["left_singular_values"] = to_std(sub.fit.left_singular_values);
    s["isnr_advisory"] = sub.isnr_advisory;
    subs.push_back(s);
  }
  meta["subproblems"] = subs;
  meta["notes"] = ordered_json::array(
      {"aggregated standard errors sum per-sub-problem variances and ignore "
       "cross-sub-problem covariance",
       "isnr_advisory is a plug-in diagnostic (max residual over the r-th left "
       "singular value, scaled by sqrt(NT/min(N1,T1))); small is good"});

  std::ofstream out(std::filesystem::path(cfg.out_dir) / "run.json", std::ios::binary);
  out << meta.dump(2) << '\n';
}

}  // namespace staircase::cli
