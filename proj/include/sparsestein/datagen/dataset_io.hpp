#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sparsestein/dataset.hpp"
#include "sparsestein/error.hpp"

namespace sparsestein::datagen {

inline constexpr int kDatasetSchema = 1;

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ParseError("not a number: '" + std::string(s) + "'", line);
  return v;
}

inline std::uint64_t parse_uint(std::string_view s, std::size_t line) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ParseError("not an unsigned integer: '" + std::string(s) + "'", line);
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

inline NoiseKind parse_noise_kind(std::string_view s, std::size_t line) {
  if (s == "none") return NoiseKind::None;
  if (s == "multiplicative") return NoiseKind::Multiplicative;
  if (s == "additive") return NoiseKind::Additive;
  throw ParseError("unknown noise kind '" + std::string(s) + "'", line);
}

}  // namespace detail

/// Header of `# key: value` lines, one column-name line, then one CSV row per record.
inline void write_dataset(std::ostream& os, const Dataset& d) {
  if (d.size() == 0) throw std::invalid_argument("refusing to write an empty dataset");
  if (d.inputs.size() != d.size() * d.input_width() || d.outputs.size() != d.size() * d.output_width())
    throw std::invalid_argument("dataset blocks do not match their column counts");
  os << "# schema: " << kDatasetSchema << '\n';
  os << "# generator: " << d.generator << '\n';
  for (const auto& [k, v] : d.params) os << "# param." << k << ": " << detail::format_double(v) << '\n';
  os << "# noise.kind: " << to_string(d.noise.kind) << '\n';
  os << "# noise.level: " << detail::format_double(d.noise.level) << '\n';
  os << "# noise.seed: " << d.noise.seed << '\n';
  os << "# seed: " << d.seed << '\n';
  os << "# inputs: " << d.input_width() << '\n';
  os << "# count: " << d.size() << '\n';
  bool first = true;
  for (const auto* cols : {&d.input_columns, &d.output_columns})
    for (const auto& c : *cols) {
      os << (first ? "" : ",") << c;
      first = false;
    }
  os << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    first = true;
    for (auto block : {d.input(i), d.output(i)})
      for (double v : block) {
        os << (first ? "" : ",") << detail::format_double(v);
        first = false;
      }
    os << '\n';
  }
}

inline Dataset read_dataset(std::istream& is) {
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  bool have_schema = false, have_inputs = false, have_count = false;
  std::size_t n_inputs = 0, count = 0;
  std::vector<std::string> columns;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) != 0) {
      for (auto c : detail::split(line, ',')) columns.emplace_back(c);
      break;
    }
    const auto colon = line.find(": ");
    if (colon == std::string::npos) throw ParseError("header line without 'key: value'", lineno);
    const std::string key = line.substr(2, colon - 2);
    const std::string_view value = std::string_view(line).substr(colon + 2);
    if (key == "schema") {
      const auto v = detail::parse_uint(value, lineno);
      if (v != static_cast<std::uint64_t>(kDatasetSchema))
        throw SchemaMismatch("dataset schema " + std::string(value) + ", expected " + std::to_string(kDatasetSchema));
      have_schema = true;
    } else if (key == "generator") {
      d.generator = std::string(value);
    } else if (key.rfind("param.", 0) == 0) {
      d.params.emplace_back(key.substr(6), detail::parse_double(value, lineno));
    } else if (key == "noise.kind") {
      d.noise.kind = detail::parse_noise_kind(value, lineno);
    } else if (key == "noise.level") {
      d.noise.level = detail::parse_double(value, lineno);
    } else if (key == "noise.seed") {
      d.noise.seed = detail::parse_uint(value, lineno);
    } else if (key == "seed") {
      d.seed = detail::parse_uint(value, lineno);
    } else if (key == "inputs") {
      n_inputs = detail::parse_uint(value, lineno);
      have_inputs = true;
    } else if (key == "count") {
      count = detail::parse_uint(value, lineno);
      have_count = true;
    } else {
      throw ParseError("unknown header key '" + key + "'", lineno);
    }
  }
  if (!have_schema) throw SchemaMismatch("dataset has no schema header");
  if (!have_inputs || !have_count) throw ParseError("dataset header is missing 'inputs' or 'count'", lineno);
  if (columns.empty()) throw ParseError("dataset has no column line", lineno);
  if (n_inputs == 0 || n_inputs >= columns.size())
    throw ParseError("input column count does not fit the column line", lineno);
  d.input_columns.assign(columns.begin(), columns.begin() + static_cast<std::ptrdiff_t>(n_inputs));
  d.output_columns.assign(columns.begin() + static_cast<std::ptrdiff_t>(n_inputs), columns.end());
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != columns.size())
      throw ParseError("expected " + std::to_string(columns.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       lineno);
    for (std::size_t k = 0; k < fields.size(); ++k)
      (k < n_inputs ? d.inputs : d.outputs).push_back(detail::parse_double(fields[k], lineno));
    ++rows;
  }
  if (rows != count)
    throw ParseError("header declares " + std::to_string(count) + " records, found " + std::to_string(rows), lineno);
  if (rows == 0) throw ParseError("dataset has no records", lineno);
  return d;
}

inline void save_dataset(const std::string& path, const Dataset& d) {
  std::ostringstream ss;
  write_dataset(ss, d);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << ss.str();
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return read_dataset(f);
}

}  // namespace sparsestein::datagen
