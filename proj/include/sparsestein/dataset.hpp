#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sparsestein {

enum class NoiseKind { None, Multiplicative, Additive };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Multiplicative: return "multiplicative";
    case NoiseKind::Additive: return "additive";
    case NoiseKind::None: break;
  }
  return "none";
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::None;
  double level = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const NoiseSpec&) const = default;
};

/// Input/output records stored row-major, plus the provenance needed to
/// regenerate them.
struct Dataset {
  std::string generator;
  std::vector<std::pair<std::string, double>> params;
  NoiseSpec noise;
  std::uint64_t seed = 0;
  std::vector<std::string> input_columns;
  std::vector<std::string> output_columns;
  std::vector<double> inputs;
  std::vector<double> outputs;

  std::size_t input_width() const { return input_columns.size(); }
  std::size_t output_width() const { return output_columns.size(); }
  std::size_t size() const { return input_width() ? inputs.size() / input_width() : 0; }

  std::span<const double> input(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * input_width(), input_width());
  }
  std::span<const double> output(std::size_t i) const {
    return std::span<const double>(outputs).subspan(i * output_width(), output_width());
  }
  std::span<double> output(std::size_t i) {
    return std::span<double>(outputs).subspan(i * output_width(), output_width());
  }

  bool operator==(const Dataset&) const = default;
};

inline const std::vector<std::string>& hyperelastic_input_columns() {
  static const std::vector<std::string> cols{"F11", "F12", "F13", "F21", "F22", "F23", "F31", "F32", "F33"};
  return cols;
}
inline const std::vector<std::string>& hyperelastic_output_columns() {
  static const std::vector<std::string> cols{"S11", "S22", "S33", "S12", "S13", "S23"};
  return cols;
}
inline const std::vector<std::string>& mechchem_input_columns() {
  static const std::vector<std::string> cols{"E11", "E22", "E12", "c"};
  return cols;
}
inline const std::vector<std::string>& mechchem_output_columns() {
  static const std::vector<std::string> cols{"S11", "S22", "S12", "mu"};
  return cols;
}

}  // namespace sparsestein
