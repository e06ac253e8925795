#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "schedopt/error.hpp"

namespace schedopt::csv {

/// Column-major numeric table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return columns[i];
    }
    throw InvalidInput("csv: no column named '" + name + "'");
  }
};

inline std::string format_number(double value) {
  // Shortest representation that parses back to the same double.
  char buffer[32];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw InvalidInput("csv: cannot format number");
  return std::string(buffer, end);
}

inline void write(std::ostream& os, const Table& table) {
  detail::require<InvalidInput>(table.header.size() == table.columns.size(),
                                "csv: header/column count mismatch");
  const std::size_t n = table.rows();
  for (const auto& col : table.columns) {
    detail::require<InvalidInput>(col.size() == n, "csv: ragged columns");
  }
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    os << (i ? "," : "") << table.header[i];
  }
  os << '\n';
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      os << (c ? "," : "") << format_number(table.columns[c][r]);
    }
    os << '\n';
  }
}

inline void write_file(const std::filesystem::path& path, const Table& table) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("csv: cannot open " + path.string() + " for writing");
  write(os, table);
}

inline Table read(std::istream& is) {
  Table table;
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("csv: empty input");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  table.columns.resize(table.header.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t c = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end && c < table.columns.size()) {
      const char* comma = std::find(p, end, ',');
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(p, comma, value);
      if (ec != std::errc() || ptr != comma) throw InvalidInput("csv: malformed number in '" + line + "'");
      table.columns[c++].push_back(value);
      p = comma + 1;
    }
    if (c != table.columns.size()) throw InvalidInput("csv: short row '" + line + "'");
  }
  return table;
}

inline Table read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("csv: cannot open " + path.string());
  return read(is);
}

}  // namespace schedopt::csv
