#include "staircase/cli/ingest.hpp"

#include "staircase/cli/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace staircase::cli {

namespace {

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(text, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == text.size() && std::isfinite(out);
}

// Strictly increasing labels: numerically when all parse, else by string.
void check_time_order(const std::vector<std::string>& labels) {
  std::vector<double> numeric(labels.size());
  bool all_numeric = true;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    all_numeric = all_numeric && parse_double(labels[i], numeric[i]);
  }
  for (std::size_t i = 1; i < labels.size(); ++i) {
    const bool ok = all_numeric ? numeric[i - 1] < numeric[i] : labels[i - 1] < labels[i];
    if (!ok) {
      throw DataError("panel: time labels must be strictly increasing; '" + labels[i - 1] +
                      "' is not before '" + labels[i] + "'");
    }
  }
}

}  // namespace

PanelData read_panel_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& exclude_times,
                         std::vector<std::string>* original_times) {
  const std::vector<CsvRow> rows = read_csv(path);
  if (rows.empty() || rows[0].size() < 2) {
    throw DataError("panel " + path.string() + ": need a header with a unit column and at "
                    "least one time column");
  }
  const CsvRow& header = rows[0];
  std::vector<std::string> all_times(header.begin() + 1, header.end());
  check_time_order(all_times);
  if (original_times) *original_times = all_times;

  std::set<std::string> exclude(exclude_times.begin(), exclude_times.end());
  for (const std::string& label : exclude) {
    if (std::find(all_times.begin(), all_times.end(), label) == all_times.end()) {
      throw ConfigError("excluded time '" + label + "' is not a column of " + path.string());
    }
  }

  std::vector<std::size_t> keep;
  PanelData panel;
  for (std::size_t j = 0; j < all_times.size(); ++j) {
    if (exclude.count(all_times[j])) continue;
    keep.push_back(j);
    panel.times.push_back(all_times[j]);
  }
  if (panel.times.empty()) {
    throw DataError("panel " + path.string() + ": every time column was excluded");
  }

  const Index n = static_cast<Index>(rows.size()) - 1;
  if (n < 1) throw DataError("panel " + path.string() + ": no unit rows");
  panel.Y.resize(n, static_cast<Index>(keep.size()));

  std::set<std::string> seen;
  std::string bad_cells;
  for (Index i = 0; i < n; ++i) {
    const CsvRow& row = rows[i + 1];
    if (row.size() != header.size()) {
      throw DataError("panel " + path.string() + ": row " + std::to_string(i + 2) + " has " +
                      std::to_string(row.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    if (!seen.insert(row[0]).second) {
      throw DataError("panel " + path.string() + ": duplicate unit id '" + row[0] + "'");
    }
    panel.units.push_back(row[0]);
    for (std::size_t c = 0; c < keep.size(); ++c) {
      double v;
      if (!parse_double(row[keep[c] + 1], v)) {
        bad_cells += (bad_cells.empty() ? "" : ", ") + row[0] + "/" + all_times[keep[c]];
      } else {
        panel.Y(i, static_cast<Index>(c)) = v;
      }
    }
  }
  if (!bad_cells.empty()) {
    throw DataError("panel " + path.string() + ": missing or non-numeric cells in "
                    "non-excluded columns: " + bad_cells);
  }
  return panel;
}

AdoptionSchedule read_adoption_csv(const std::filesystem::path& path, const PanelData& panel,
                                   const std::vector<std::string>& original_times) {
  const std::vector<CsvRow> rows = read_csv(path);
  if (rows.empty() || rows[0].size() < 2) {
    throw DataError("adoption " + path.string() + ": need a header `unit,adoption`");
  }

  std::map<std::string, std::string> label_by_unit;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 2) {
      throw DataError("adoption " + path.string() + ": row " + std::to_string(i + 1) +
                      " is incomplete");
    }
    if (!label_by_unit.emplace(rows[i][0], rows[i][1]).second) {
      throw DataError("adoption " + path.string() + ": unit '" + rows[i][0] +
                      "' appears more than once");
    }
  }

  // Positions of the retained columns within the original header, to shift
  // adoption at an excluded column onto the next retained one.
  std::vector<std::size_t> retained_pos;
  for (const std::string& label : panel.times) {
    const auto it = std::find(original_times.begin(), original_times.end(), label);
    retained_pos.push_back(static_cast<std::size_t>(it - original_times.begin()));
  }

  AdoptionSchedule schedule;
  for (Index u = 0; u < panel.n_units(); ++u) {
    const auto it = label_by_unit.find(panel.units[u]);
    if (it == label_by_unit.end()) {
      throw DataError("adoption " + path.string() + ": no row for panel unit '" +
                      panel.units[u] + "'");
    }
    const std::string& label = it->second;
    if (label == "never") {
      schedule.adoption.push_back(AdoptionSchedule::kNeverTreated);
    } else {
      const auto pos_it = std::find(original_times.begin(), original_times.end(), label);
      if (pos_it == original_times.end()) {
        throw DataError("adoption " + path.string() + ": '" + label + "' for unit '" +
                        panel.units[u] + "' is neither a panel time label nor `never`");
      }
      const std::size_t pos = static_cast<std::size_t>(pos_it - original_times.begin());
      const auto first_kept = std::lower_bound(retained_pos.begin(), retained_pos.end(), pos);
      schedule.adoption.push_back(first_kept == retained_pos.end()
                                      ? AdoptionSchedule::kNeverTreated
                                      : static_cast<Index>(first_kept - retained_pos.begin()));
    }
    label_by_unit.erase(it);
  }
  if (!label_by_unit.empty()) {
    throw DataError("adoption " + path.string() + ": unit '" + label_by_unit.begin()->first +
                    "' is not in the panel");
  }
  return schedule;
}

Vector read_weights_csv(const std::filesystem::path& path, const PanelData& panel) {
  const std::vector<CsvRow> rows = read_csv(path);
  if (rows.empty() || rows[0].size() < 2) {
    throw DataError("weights " + path.string() + ": need a header `unit,weight`");
  }
  std::map<std::string, double> by_unit;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double v;
    if (rows[i].size() < 2 || !parse_double(rows[i][1], v)) {
      throw DataError("weights " + path.string() + ": row " + std::to_string(i + 1) +
                      " has no finite weight");
    }
    if (!by_unit.emplace(rows[i][0], v).second) {
      throw DataError("weights " + path.string() + ": unit '" + rows[i][0] +
                      "' appears more than once");
    }
  }
  Vector w(panel.n_units());
  for (Index u = 0; u < panel.n_units(); ++u) {
    const auto it = by_unit.find(panel.units[u]);
    if (it == by_unit.end()) {
      throw DataError("weights " + path.string() + ": no weight for unit '" +
                      panel.units[u] + "'");
    }
    w[u] = it->second;
  }
  return w;
}

void write_panel_csv(const std::filesystem::path& path, const PanelData& panel) {
  std::vector<CsvRow> rows;
  CsvRow header = {"unit"};
  header.insert(header.end(), panel.times.begin(), panel.times.end());
  rows.push_back(header);
  for (Index i = 0; i < panel.n_units(); ++i) {
    CsvRow row = {panel.units[i]};
    for (Index j = 0; j < panel.n_times(); ++j) row.push_back(format_full(panel.Y(i, j)));
    rows.push_back(row);
  }
  write_csv(path, rows);
}

PanelData long_to_wide(const std::filesystem::path& path) {
  const std::vector<CsvRow> rows = read_csv(path);
  if (rows.empty() || rows[0].size() < 3) {
    throw DataError("long panel " + path.string() + ": need a header `unit,time,value`");
  }
  std::vector<std::string> units;
  std::vector<std::string> times;
  std::map<std::pair<std::string, std::string>, double> cells;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 3) {
      throw DataError("long panel " + path.string() + ": row " + std::to_string(i + 1) +
                      " is incomplete");
    }
    double v;
    if (!parse_double(rows[i][2], v)) {
      throw DataError("long panel " + path.string() + ": row " + std::to_string(i + 1) +
                      " has no finite value");
    }
    if (std::find(units.begin(), units.end(), rows[i][0]) == units.end()) {
      units.push_back(rows[i][0]);
    }
    if (std::find(times.begin(), times.end(), rows[i][1]) == times.end()) {
      times.push_back(rows[i][1]);
    }
    if (!cells.emplace(std::make_pair(rows[i][0], rows[i][1]), v).second) {
      throw DataError("long panel " + path.string() + ": duplicate cell " + rows[i][0] + "/" +
                      rows[i][1]);
    }
  }
  bool all_numeric = true;
  for (const std::string& t : times) {
    double v;
    all_numeric = all_numeric && parse_double(t, v);
  }
  std::sort(times.begin(), times.end(), [&](const std::string& a, const std::string& b) {
    if (!all_numeric) return a < b;
    double va, vb;
    parse_double(a, va);
    parse_double(b, vb);
    return va < vb;
  });
  check_time_order(times);

  PanelData panel;
  panel.units = units;
  panel.times = times;
  panel.Y.resize(static_cast<Index>(units.size()), static_cast<Index>(times.size()));
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      const auto it = cells.find(std::make_pair(units[i], times[j]));
      if (it == cells.end()) {
        throw DataError("long panel " + path.string() + ": missing cell " + units[i] + "/" +
                        times[j]);
      }
      panel.Y(static_cast<Index>(i), static_cast<Index>(j)) = it->second;
    }
  }
  return panel;
}

}  // namespace staircase::cli
