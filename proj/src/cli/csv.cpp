#include "staircase/cli/csv.hpp"

#include "staircase/types.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace staircase::cli {

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool row_open = false;

  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
    row_open = false;
  };

  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    row_open = true;
    switch (c) {
      case '"': quoted = true; break;
      case ',': end_field(); break;
      case '\r': break;
      case '\n': end_row(); break;
      default: field.push_back(c);
    }
  }
  if (row_open || !field.empty()) end_row();
  return rows;
}

void write_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  for (const CsvRow& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      const std::string& f = row[i];
      if (f.find_first_of(",\"\n\r") != std::string::npos) {
        out << '"';
        for (char c : f) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      } else {
        out << f;
      }
    }
    out << '\n';
  }
}

std::string format_full(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string format_rounded(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", value);
  return buf;
}

}  // namespace staircase::cli
