#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace epi {

// Shortest round-trip decimal representation; '.' separator, no locale.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    throw std::runtime_error("csv: missing column '" + name + "'");
  }
  std::vector<double> col(const std::string& name) const {
    int j = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(j));
    return out;
  }
};

inline void write_csv(std::ostream& os, const CsvTable& table) {
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j) os << ',';
    os << table.header[j];
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) os << ',';
      os << format_double(row[j]);
    }
    os << '\n';
  }
}

inline void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("csv: cannot open for writing: " + path);
  write_csv(os, table);
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.header.size());
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size())
      throw std::runtime_error("csv: ragged row");
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("csv: cannot open: " + path);
  return read_csv(is);
}

}  // namespace epi
