#pragma once

#include "staircase/panel.hpp"
#include "staircase/staggered.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace staircase::cli {

/// Wide panel CSV: header `unit,<label1>,<label2>,...` with strictly
/// increasing time labels (numeric order when every label parses as a
/// number, lexicographic otherwise), one row per unit, every cell a real.
/// Labels in `exclude_times` are dropped; any other empty or unparsable cell
/// is an error listing the offending cells.
PanelData read_panel_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& exclude_times,
                         std::vector<std::string>* original_times = nullptr);

/// Adoption CSV: header `unit,adoption`, exactly one row per panel unit,
/// adoption either a panel time label or the literal `never`. Labels naming
/// an excluded column shift to the next retained column; adoption past the
/// last retained column becomes never-treated.
AdoptionSchedule read_adoption_csv(const std::filesystem::path& path, const PanelData& panel,
                                   const std::vector<std::string>& original_times);

/// Weights CSV: header `unit,weight`, one finite weight per panel unit.
Vector read_weights_csv(const std::filesystem::path& path, const PanelData& panel);

/// Emits a panel back to the wide CSV layout with full-precision values, so
/// read_panel_csv(write_panel_csv(p)) reproduces the matrix bit for bit.
void write_panel_csv(const std::filesystem::path& path, const PanelData& panel);

/// Converts a long-format CSV (header `unit,time,value`) to the wide layout.
/// Every (unit, time) pair must appear exactly once.
PanelData long_to_wide(const std::filesystem::path& path);

}  // namespace staircase::cli
