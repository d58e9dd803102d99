#pragma once

// Structured-text (JSON) form of model specifications and parameter sets.

#include <cstddef>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/models/networks.hpp"
#include "sparsestein/models/observables.hpp"

namespace sparsestein::models {

inline constexpr int kModelSchema = 1;

struct ModelSpec {
  std::variant<IcnnSpec, MlpSpec> arch;
  std::vector<bool> active;  // empty means every parameter is active

  std::size_t num_params() const {
    return std::visit([](const auto& s) { return s.num_params(); }, arch);
  }

  std::vector<bool> active_mask() const { return active.empty() ? std::vector<bool>(num_params(), true) : active; }

  bool is_icnn() const { return std::holds_alternative<IcnnSpec>(arch); }

  std::shared_ptr<const ObservableModel> build() const {
    if (const auto* icnn = std::get_if<IcnnSpec>(&arch)) return std::make_shared<HyperelasticModel>(*icnn, active_mask());
    return std::make_shared<MechchemModel>(std::get<MlpSpec>(arch), active_mask());
  }
};

inline nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["schema"] = kModelSchema;
  j["activation"] = "softplus";
  if (const auto* icnn = std::get_if<IcnnSpec>(&spec.arch)) {
    j["architecture"] = "icnn";
    j["inputs"] = icnn->inputs;
    j["hidden"] = icnn->hidden;
    j["bias"] = false;
    j["constrain_first_layer"] = icnn->constrain_first_layer;
  } else {
    const auto& mlp = std::get<MlpSpec>(spec.arch);
    j["architecture"] = "mlp";
    j["inputs"] = mlp.inputs;
    j["hidden"] = mlp.hidden;
    j["bias"] = true;
  }
  j["num_params"] = spec.num_params();
  if (!spec.active.empty()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < spec.active.size(); ++i)
      if (spec.active[i]) idx.push_back(i);
    j["active"] = idx;
  }
  return j;
}

inline void check_schema(const nlohmann::json& j, int expected) {
  if (!j.contains("schema") || !j["schema"].is_number_integer())
    throw SchemaMismatch("document has no integer schema version");
  const int found = j["schema"].get<int>();
  if (found != expected)
    throw SchemaMismatch("schema version " + std::to_string(found) + ", expected " + std::to_string(expected));
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  check_schema(j, kModelSchema);
  ModelSpec spec;
  const std::string arch = j.at("architecture").get<std::string>();
  if (j.value("activation", "softplus") != "softplus") throw SchemaMismatch("unsupported activation");
  if (arch == "icnn") {
    IcnnSpec s;
    s.inputs = j.at("inputs").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    s.constrain_first_layer = j.value("constrain_first_layer", false);
    spec.arch = s;
  } else if (arch == "mlp") {
    MlpSpec s;
    s.inputs = j.at("inputs").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    spec.arch = s;
  } else {
    throw SchemaMismatch("unknown architecture '" + arch + "'");
  }
  if (j.contains("active")) {
    spec.active.assign(spec.num_params(), false);
    for (std::size_t i : j["active"].get<std::vector<std::size_t>>()) spec.active.at(i) = true;
  }
  return spec;
}

/// A model specification plus its full-length parameter values.
struct ModelFile {
  ModelSpec spec;
  std::vector<double> values;

  ParamVector params() const { return ParamVector(values, spec.active_mask()); }
};

inline nlohmann::json to_json(const ModelFile& f) {
  nlohmann::json j;
  j["schema"] = kModelSchema;
  j["model"] = to_json(f.spec);
  j["params"] = f.values;
  return j;
}

inline ModelFile model_file_from_json(const nlohmann::json& j) {
  check_schema(j, kModelSchema);
  ModelFile f;
  f.spec = model_spec_from_json(j.at("model"));
  f.values = j.at("params").get<std::vector<double>>();
  if (f.values.size() != f.spec.num_params()) throw SchemaMismatch("parameter count does not match architecture");
  return f;
}

}  // namespace sparsestein::models
