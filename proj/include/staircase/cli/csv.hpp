#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace staircase::cli {

using CsvRow = std::vector<std::string>;

/// Reads a whole CSV file. Handles quoted fields, embedded commas and CRLF
/// endings. Throws DataError when the file cannot be opened.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

/// Writes rows with '\n' endings, quoting fields only when required, so
/// output bytes are stable across runs and platforms.
void write_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows);

/// 17 significant digits; round-trips a double exactly.
std::string format_full(double value);

/// 4 significant digits, for the human-readable companion tables.
std::string format_rounded(double value);

}  // namespace staircase::cli
