#pragma once

// CSV convention shared by every file the tools emit:
//
//   # columns: <name> [<unit>], <name> [<unit>], ...; normalization=<x>; params=<k=v ...>
//   # <free comment lines>
//   <v>,<v>,...
//
// Floats use 17 significant digits so files round-trip bit-exactly.

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace coulomb_hbt::csv {

struct Column {
  std::string name;
  std::string unit;  // "1" for dimensionless
};

using Params = std::vector<std::pair<std::string, std::string>>;

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Table {
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;
  std::optional<double> normalization;
  Params params;
  std::vector<std::string> comments;
};

inline void write(std::ostream& os, const Table& table) {
  os << "# columns: ";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) os << ", ";
    os << table.columns[i].name << " [" << table.columns[i].unit << "]";
  }
  if (table.normalization) os << "; normalization=" << format_double(*table.normalization);
  if (!table.params.empty()) {
    os << "; params=";
    for (std::size_t i = 0; i < table.params.size(); ++i) {
      if (i) os << ' ';
      os << table.params[i].first << '=' << table.params[i].second;
    }
  }
  os << '\n';
  for (const auto& c : table.comments) os << "# " << c << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << format_double(row[i]);
    }
    os << '\n';
  }
}

inline std::string to_string(const Table& table) {
  std::ostringstream os;
  write(os, table);
  return os.str();
}

/// Numeric rows of a CSV in the convention above; comment lines are skipped.
inline std::vector<std::vector<double>> read_rows(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace coulomb_hbt::csv
