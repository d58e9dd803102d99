#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sparsestein::models {

/// Flat trainable parameters plus the mask of entries that survive pruning.
struct ParamVector {
  std::vector<double> values;
  std::vector<bool> active;

  ParamVector() = default;
  explicit ParamVector(std::vector<double> v) : values(std::move(v)), active(values.size(), true) {}
  ParamVector(std::vector<double> v, std::vector<bool> mask) : values(std::move(v)), active(std::move(mask)) {
    if (active.size() != values.size()) throw std::invalid_argument("mask length differs from parameter count");
  }

  std::size_t size() const { return values.size(); }

  std::size_t active_count() const {
    std::size_t n = 0;
    for (bool a : active) n += a ? 1 : 0;
    return n;
  }

  std::vector<std::size_t> active_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < active.size(); ++i)
      if (active[i]) idx.push_back(i);
    return idx;
  }

  /// Full-length vector with masked-off entries exactly zero.
  std::vector<double> materialized() const {
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i)
      if (active[i]) out[i] = values[i];
    return out;
  }

  std::vector<double> compact() const {
    std::vector<double> out;
    out.reserve(active_count());
    for (std::size_t i = 0; i < values.size(); ++i)
      if (active[i]) out.push_back(values[i]);
    return out;
  }

  /// Writes `compact_values` back onto the active entries.
  void assign_compact(std::span<const double> compact_values) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!active[i]) {
        values[i] = 0.0;
        continue;
      }
      if (k >= compact_values.size()) throw std::invalid_argument("compact vector too short");
      values[i] = compact_values[k++];
    }
    if (k != compact_values.size()) throw std::invalid_argument("compact vector too long");
  }
};

}  // namespace sparsestein::models
