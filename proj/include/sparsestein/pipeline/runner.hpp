#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/pipeline/config.hpp"
#include "sparsestein/pipeline/experiment.hpp"
#include "sparsestein/pipeline/hashing.hpp"

namespace sparsestein::pipeline {

inline constexpr int kManifestSchema = 1;
inline constexpr const char* kManifestFile = "manifest.json";

/// A stage that could not complete. Artifacts of earlier stages are kept.
struct StageFailure : Error {
  StageFailure(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage(stage) {}
  std::string stage;
};

struct StageRecord {
  std::string name;
  std::string key;
  std::map<std::string, std::string> outputs;  // relative path -> git blob hash
  double seconds = 0.0;
  bool reused = false;  // not executed by this invocation
};

struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
  void put(StageRecord r) {
    for (auto& s : stages)
      if (s.name == r.name) {
        s = std::move(r);
        return;
      }
    stages.push_back(std::move(r));
  }
  /// Every artifact hash, keyed by relative path.
  std::map<std::string, std::string> artifacts() const {
    std::map<std::string, std::string> out;
    for (const auto& s : stages) out.insert(s.outputs.begin(), s.outputs.end());
    return out;
  }
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["schema"] = kManifestSchema;
  j["config_hash"] = m.config_hash;
  j["seeds"] = m.seeds;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : m.stages)
    j["stages"].push_back({{"name", s.name}, {"key", s.key}, {"outputs", s.outputs}, {"seconds", s.seconds}});
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  if (j.value("schema", -1) != kManifestSchema) throw SchemaMismatch("manifest schema mismatch");
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.name = s.at("name").get<std::string>();
    r.key = s.at("key").get<std::string>();
    r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
    r.seconds = s.at("seconds").get<double>();
    m.stages.push_back(std::move(r));
  }
  return m;
}

inline RunManifest load_manifest(const fs::path& dir) {
  return manifest_from_json(nlohmann::json::parse(read_file((dir / kManifestFile).string())));
}

struct StageDef {
  std::string name;
  std::vector<std::string> config_sections;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::function<void(const ExperimentConfig&, const fs::path&)> run;
};

inline const std::vector<std::string>& seed_streams() {
  static const std::vector<std::string> names{"generate", "noise", "init", "gates", "l0", "particles", "sample", "truth"};
  return names;
}

/// Every stage available for this config, in execution order.
inline std::vector<StageDef> stage_catalog(const ExperimentConfig& c) {
  using namespace paths;
  if (c.problem == Problem::GaussianDemo)
    return {{"demo", {"problem", "seed", "demo"}, {}, {kDemoSamples, kDemoTable, kDemoSummary}, stage_demo}};
  std::vector<StageDef> out;
  out.push_back({"generate", {"problem", "seed", "data"}, {}, {kData}, stage_generate});
  std::vector<std::string> map_out{kMap, kLoss};
  if (c.regularizer.p == 0) map_out.push_back(kGates);
  out.push_back({"map", {"problem", "seed", "data", "architecture", "regularizer", "map", "sparsify"}, {kData}, map_out,
                 stage_map});
  if (c.regularizer.p == 0)
    out.push_back({"sparsify", {"seed", "regularizer", "map"}, {kMap, kGates}, {kSparse, kSparseModel}, stage_sparsify});
  const std::string model = final_model_path(c);
  out.push_back({"sample", {"problem", "seed", "data", "regularizer", "sparsify", "inference"}, {kData, model},
                 {kSamples}, stage_sample});
  std::vector<std::string> eval_out{kPath, kSummary};
  if (c.problem == Problem::Mechanochemistry) eval_out.push_back(kMuCurve);
  out.push_back({"evaluate", {"problem", "seed", "data", "evaluate"}, {model, kSamples}, eval_out, stage_evaluate});
  out.push_back({"plot", {"problem", "evaluate"}, {kPath}, {kPathPlot}, stage_plot});
  out.push_back({"lcurve",
                 {"problem", "seed", "data", "architecture", "regularizer", "map", "sparsify", "lcurve", "evaluate"},
                 {kData},
                 {kLCurve, kLCurveSummary},
                 stage_lcurve});
  return out;
}

/// Stages executed by a full run; the L-curve joins only when a grid is configured.
inline std::vector<std::string> default_stages(const ExperimentConfig& c) {
  std::vector<std::string> names;
  for (const auto& s : stage_catalog(c))
    if (s.name != "lcurve" || !c.lcurve.grid.empty()) names.push_back(s.name);
  return names;
}

inline std::string config_hash(const ExperimentConfig& c) { return sha1_hex(to_json(c).dump()); }

/// Content key of a stage: its config sections plus the hashes of its inputs.
inline std::string stage_key(const ExperimentConfig& c, const StageDef& s, const fs::path& dir) {
  const nlohmann::json full = to_json(c);
  nlohmann::json j;
  j["stage"] = s.name;
  for (const auto& sec : s.config_sections) j["config"][sec] = full.at(sec);
  for (const auto& in : s.inputs) j["inputs"][in] = file_hash((dir / in).string());
  return sha1_hex(j.dump());
}

namespace detail {

inline bool outputs_intact(const StageRecord& r, const fs::path& dir) {
  for (const auto& [rel, hash] : r.outputs) {
    const fs::path p = dir / rel;
    if (!fs::exists(p) || file_hash(p.string()) != hash) return false;
  }
  return true;
}

inline void save_manifest(const RunManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(dir / kManifestFile, to_json(m));
}

}  // namespace detail

/// Runs the named stages in catalog order inside `dir`, skipping any whose key
/// and recorded outputs are unchanged since the previous run there.
inline RunManifest run_stages(const ExperimentConfig& c, const fs::path& dir, const std::vector<std::string>& names) {
  const auto catalog = stage_catalog(c);
  for (const auto& n : names)
    if (std::none_of(catalog.begin(), catalog.end(), [&](const StageDef& s) { return s.name == n; }))
      throw std::invalid_argument("stage '" + n + "' does not apply to this configuration");

  RunManifest previous;
  if (fs::exists(dir / kManifestFile)) {
    try {
      previous = load_manifest(dir);
    } catch (const std::exception&) {
      previous = {};
    }
  }
  RunManifest m;
  m.config_hash = config_hash(c);
  for (const auto& s : seed_streams()) m.seeds[s] = derive_seed(c.seed, s);
  for (StageRecord r : previous.stages)
    if (std::find(names.begin(), names.end(), r.name) == names.end()) {
      r.reused = true;
      m.put(std::move(r));
    }

  for (const auto& stage : catalog) {
    if (std::find(names.begin(), names.end(), stage.name) == names.end()) continue;
    for (const auto& in : stage.inputs)
      if (!fs::exists(dir / in)) {
        detail::save_manifest(m, dir);
        throw StageFailure(stage.name, "missing input '" + in + "'");
      }
    const std::string key = stage_key(c, stage, dir);
    if (const StageRecord* old = previous.find(stage.name);
        old && old->key == key && old->outputs.size() == stage.outputs.size() && detail::outputs_intact(*old, dir)) {
      StageRecord r = *old;
      r.reused = true;
      m.put(std::move(r));
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      stage.run(c, dir);
    } catch (const std::exception& e) {
      detail::save_manifest(m, dir);
      throw StageFailure(stage.name, e.what());
    }
    StageRecord r;
    r.name = stage.name;
    r.key = key;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& out : stage.outputs) {
      if (!fs::exists(dir / out)) {
        detail::save_manifest(m, dir);
        throw StageFailure(stage.name, "did not produce '" + out + "'");
      }
      r.outputs[out] = file_hash((dir / out).string());
    }
    m.put(std::move(r));
    detail::save_manifest(m, dir);
  }
  const auto rank = [&](const StageRecord& r) {
    return std::find_if(catalog.begin(), catalog.end(), [&](const StageDef& s) { return s.name == r.name; }) -
           catalog.begin();
  };
  std::stable_sort(m.stages.begin(), m.stages.end(),
                   [&](const StageRecord& a, const StageRecord& b) { return rank(a) < rank(b); });
  detail::save_manifest(m, dir);
  return m;
}

inline RunManifest run_pipeline(const ExperimentConfig& c) { return run_stages(c, c.output, default_stages(c)); }

}  // namespace sparsestein::pipeline
