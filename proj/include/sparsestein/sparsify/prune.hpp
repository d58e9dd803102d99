#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/models/param_vector.hpp"
#include "sparsestein/models/spec_io.hpp"
#include "sparsestein/sparsify/gates.hpp"

namespace sparsestein::sparsify {

/// Parameters surviving test-time gating, stored compactly.
struct SparseModel {
  std::size_t full_size = 0;
  std::vector<std::size_t> active_indices;
  std::vector<double> compact_params;
  std::vector<double> gates;  // test-time gate values of every parameter at freeze time

  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::size_t epochs = 0;

  std::vector<bool> mask() const {
    std::vector<bool> m(full_size, false);
    for (std::size_t i : active_indices) m.at(i) = true;
    return m;
  }

  models::ParamVector materialized() const {
    std::vector<double> v(full_size, 0.0);
    for (std::size_t k = 0; k < active_indices.size(); ++k) v.at(active_indices[k]) = compact_params[k];
    return models::ParamVector(std::move(v), mask());
  }
};

/// theta = theta_bar * z_hat restricted to {z_hat > 0}.
inline SparseModel prune(const models::ParamVector& theta_bar, const std::vector<double>& z) {
  if (theta_bar.size() != z.size()) throw std::invalid_argument("one gate per parameter required");
  SparseModel s;
  s.full_size = z.size();
  s.gates = z;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] > 0.0 && theta_bar.active[i]) {
      s.active_indices.push_back(i);
      s.compact_params.push_back(theta_bar.values[i] * z[i]);
    }
  if (s.active_indices.empty()) throw AllPruned("every gate is closed");
  return s;
}

inline SparseModel prune(const models::ParamVector& theta_bar, const GateState& g) {
  if (theta_bar.size() != g.size()) throw std::invalid_argument("one gate per parameter required");
  const auto z = deterministic_gates(g);
  return prune(theta_bar, z);
}

inline nlohmann::json to_json(const SparseModel& s, const models::ModelSpec& origin) {
  nlohmann::json j;
  j["schema"] = models::kModelSchema;
  j["model"] = models::to_json(origin);
  j["full_size"] = s.full_size;
  j["active_indices"] = s.active_indices;
  j["compact_params"] = s.compact_params;
  j["gates"] = s.gates;
  j["provenance"] = {{"seed", s.seed}, {"lambda", s.lambda}, {"epochs", s.epochs}};
  return j;
}

inline SparseModel sparse_model_from_json(const nlohmann::json& j, models::ModelSpec* origin = nullptr) {
  models::check_schema(j, models::kModelSchema);
  SparseModel s;
  if (origin) *origin = models::model_spec_from_json(j.at("model"));
  s.full_size = j.at("full_size").get<std::size_t>();
  s.active_indices = j.at("active_indices").get<std::vector<std::size_t>>();
  s.compact_params = j.at("compact_params").get<std::vector<double>>();
  s.gates = j.value("gates", std::vector<double>{});
  if (s.active_indices.size() != s.compact_params.size())
    throw SchemaMismatch("active index and parameter counts differ");
  const auto& p = j.at("provenance");
  s.seed = p.at("seed").get<std::uint64_t>();
  s.lambda = p.at("lambda").get<double>();
  s.epochs = p.at("epochs").get<std::size_t>();
  return s;
}

}  // namespace sparsestein::sparsify
