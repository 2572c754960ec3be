#include "staircase/cli/analysis.hpp"
#include "staircase/cli/csv.hpp"
#include "staircase/cli/ingest.hpp"
#include "staircase/cli/simulation.hpp"
#include "staircase/types.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{
      "staircase: counterfactual estimation and confidence intervals for panel data\n"
      "under staggered adoption. Set STAIRCASE_THREADS to cap simulation workers."};
  app.require_subcommand(1);

  staircase::cli::RunConfig run_cfg;
  std::string weights_path;
  CLI::App* analyze =
      app.add_subcommand("analyze", "Estimate counterfactuals, effects and intervals "
                                    "from panel and adoption CSVs");
  analyze->add_option("--panel", run_cfg.panel_csv, "Wide panel CSV: unit,<time labels...>")
      ->required();
  analyze->add_option("--adoption", run_cfg.adoption_csv,
                      "Adoption CSV: unit,<time label or `never`>")
      ->required();
  analyze->add_option("--rank", run_cfg.rank, "Model rank, or `auto` for the spectral-gap pick")
      ->capture_default_str();
  analyze->add_option("--alpha", run_cfg.alpha, "Miscoverage level of the intervals")
      ->capture_default_str();
  analyze
      ->add_option("--moving-average", run_cfg.moving_average,
                   "Odd centered smoothing window (1 = off)")
      ->capture_default_str();
  analyze
      ->add_option("--exclude-times", run_cfg.exclude_times,
                   "Comma-separated time labels to drop before the analysis")
      ->delimiter(',');
  analyze->add_option("--weights", weights_path,
                      "Per-unit weights CSV for the population-effect column");
  analyze->add_option("--out", run_cfg.out_dir, "Output directory")->required();

  std::string sim_config;
  std::string sim_out;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Run Monte-Carlo coverage/power/variance experiments "
                                     "from a JSON config");
  simulate->add_option("--config", sim_config, "JSON experiment config")->required();
  simulate->add_option("--out", sim_out, "Output directory")->required();

  std::string long_csv;
  std::string wide_out;
  CLI::App* convert = app.add_subcommand(
      "convert", "Convert a long-format CSV (unit,time,value) to the wide panel layout");
  convert->add_option("--long", long_csv, "Long-format input CSV")->required();
  convert->add_option("--out", wide_out, "Wide-format output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analyze->parsed()) {
      if (!weights_path.empty()) run_cfg.weights_csv = weights_path;
      staircase::cli::run_analysis(run_cfg);
    } else if (simulate->parsed()) {
      staircase::cli::run_simulation(staircase::cli::parse_simulation_config(sim_config),
                                     sim_out);
    } else if (convert->parsed()) {
      staircase::cli::write_panel_csv(wide_out, staircase::cli::long_to_wide(long_csv));
    }
  } catch (const staircase::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const staircase::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const staircase::NumericError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
