#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsestein/datagen/dataset_io.hpp"
#include "sparsestein/error.hpp"

namespace sparsestein::pipeline {

/// Numeric CSV table with a header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw std::out_of_range("table has no column '" + name + "'");
  }
  std::vector<double> values(std::size_t col) const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.at(col));
    return v;
  }
  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw std::invalid_argument("row width differs from the header");
    rows.push_back(std::move(row));
  }
};

inline void write_table(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << datagen::detail::format_double(r[i]);
    os << '\n';
  }
}

inline Table read_table(std::istream& is) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = datagen::detail::split(line, ',');
    if (t.columns.empty()) {
      for (auto f : fields) t.columns.emplace_back(f);
      continue;
    }
    if (fields.size() != t.columns.size())
      throw ParseError("expected " + std::to_string(t.columns.size()) + " fields", lineno);
    std::vector<double> row;
    for (auto f : fields) row.push_back(datagen::detail::parse_double(f, lineno));
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw ParseError("table is empty", lineno);
  return t;
}

inline void save_table(const std::string& path, const Table& t) {
  std::ostringstream ss;
  write_table(ss, t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << ss.str();
}

inline Table load_table(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open table '" + path + "'");
  return read_table(f);
}

}  // namespace sparsestein::pipeline
