#pragma once

// Line-delimited JSON: one record per sample.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/inference/svgd.hpp"

namespace sparsestein::inference {

inline constexpr int kSamplesSchema = 1;

inline void write_samples(std::ostream& os, const PosteriorSamples& s) {
  for (std::size_t i = 0; i < s.count(); ++i) {
    const auto v = s.sample(i);
    nlohmann::json j;
    j["schema"] = kSamplesSchema;
    j["method"] = s.method;
    j["seed"] = s.seed;
    j["iterations"] = s.iterations;
    j["index"] = i;
    if (std::isfinite(s.acceptance)) j["acceptance"] = s.acceptance;
    j["values"] = std::vector<double>(v.begin(), v.end());
    os << j.dump() << '\n';
  }
}

inline PosteriorSamples read_samples(std::istream& is) {
  PosteriorSamples s;
  std::vector<std::vector<double>> cols;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed sample record: ") + e.what(), lineno);
    }
    if (j.value("schema", -1) != kSamplesSchema) throw SchemaMismatch("sample record schema mismatch");
    s.method = j.at("method").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.iterations = j.at("iterations").get<std::size_t>();
    if (j.contains("acceptance")) s.acceptance = j["acceptance"].get<double>();
    cols.push_back(j.at("values").get<std::vector<double>>());
    if (cols.back().size() != cols.front().size()) throw ParseError("sample records differ in length", lineno);
  }
  if (cols.empty()) throw ParseError("no sample records", lineno);
  s.particles.resize(static_cast<Eigen::Index>(cols.front().size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < cols[c].size(); ++r)
      s.particles(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cols[c][r];
  return s;
}

inline void save_samples(const std::string& path, const PosteriorSamples& s) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_samples(os, s);
}

inline PosteriorSamples load_samples(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return read_samples(is);
}

}  // namespace sparsestein::inference
