#pragma once

#include <yaml-cpp/yaml.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsestein/dataset.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/inference/hmc.hpp"

namespace sparsestein::pipeline {

enum class Problem { Hyperelasticity, Mechanochemistry, GaussianDemo };
enum class Method { None, Svgd, Psvgd, Hmc };

inline const char* to_string(Problem p) {
  switch (p) {
    case Problem::Hyperelasticity: return "hyperelasticity";
    case Problem::Mechanochemistry: return "mechanochemistry";
    case Problem::GaussianDemo: break;
  }
  return "gaussian-demo";
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Svgd: return "svgd";
    case Method::Psvgd: return "psvgd";
    case Method::Hmc: return "hmc";
    case Method::None: break;
  }
  return "none";
}

struct DataConfig {
  std::size_t count = 80;
  double epsilon = 0.2;
  NoiseSpec noise{NoiseKind::Multiplicative, 0.1, 0};
};

struct ArchitectureConfig {
  std::vector<std::size_t> hidden;
  bool constrain_first_layer = false;
};

struct RegularizerConfig {
  int p = 2;
  double lambda = 0.0;
  std::size_t mc_samples = 1;
};

struct MapStageConfig {
  double lr = 0.005;
  double decay = 1.0;
  std::size_t epochs = 2000;
};

struct SparsifyConfig {
  double prior_lambda = 0.01;
  double gate_init_stdev = 0.01;
};

struct InferenceConfig {
  Method method = Method::Svgd;
  std::size_t particles = 10;
  std::size_t iterations = 1000;
  double lr = 0.01;
  double decay = 1.0;
  double init_scale = 0.01;
  double bandwidth = 0.0;
  double threshold = 0.99;
  inference::HmcConfig hmc;
};

struct EvaluateConfig {
  std::size_t path_points = 1000;
  std::size_t truth_samples = 1000;
  std::string observable;
};

struct LCurveConfig {
  std::vector<double> grid;
  double tolerance = 0.01;
};

struct DemoConfig {
  Eigen::MatrixXd precision;
  Eigen::VectorXd mean;
  double l1 = 1.0;
  std::size_t particles = 100;
  std::size_t iterations = 1000;
  double lr = 0.05;
  double init_scale = 1.0;
};

struct ExperimentConfig {
  Problem problem = Problem::Hyperelasticity;
  std::uint64_t seed = 0;
  std::string output = "runs/default";
  std::size_t threads = 1;
  DataConfig data;
  ArchitectureConfig architecture;
  RegularizerConfig regularizer;
  MapStageConfig map;
  SparsifyConfig sparsify;
  InferenceConfig inference;
  EvaluateConfig evaluate;
  LCurveConfig lcurve;
  DemoConfig demo;
};

/// Levenshtein distance, used for "did you mean" hints.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::optional<std::string> closest_key(const std::string& key, const std::vector<std::string>& allowed) {
  std::optional<std::string> best;
  std::size_t best_d = 3;
  for (const auto& a : allowed) {
    const std::size_t d = edit_distance(key, a);
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

namespace detail {

inline std::size_t line_of(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? static_cast<std::size_t>(m.line) + 1 : 0;
}

/// Typed access to one YAML mapping; rejects keys it was not asked about.
class Section {
 public:
  Section(YAML::Node node, std::string path, std::vector<std::string> allowed)
      : node_(std::move(node)), path_(std::move(path)), allowed_(std::move(allowed)) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ValidationError(path_.empty() ? "<root>" : path_, "expected a mapping", line_of(node_));
    if (!node_ || node_.IsNull()) return;
    std::set<std::string> seen;
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const std::string key = it->first.as<std::string>();
      if (!seen.insert(key).second) throw ValidationError(qualified(key), "duplicate key", line_of(it->first));
      if (std::find(allowed_.begin(), allowed_.end(), key) != allowed_.end()) continue;
      std::string what = "unknown key";
      if (auto hint = closest_key(key, allowed_)) what += "; did you mean '" + *hint + "'?";
      throw ValidationError(qualified(key), what, line_of(it->first));
    }
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }
  YAML::Node raw(const std::string& key) const { return has(key) ? node_[key] : YAML::Node(); }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  Section child(const std::string& key, std::vector<std::string> allowed) const {
    return Section(raw(key), qualified(key), std::move(allowed));
  }

  template <class T>
  void get(const std::string& key, T& out) const {
    if (!has(key)) return;
    const YAML::Node n = node_[key];
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ValidationError(qualified(key), "has the wrong type", line_of(n));
    }
  }

  std::size_t line(const std::string& key) const { return has(key) ? line_of(node_[key]) : 0; }

 private:
  YAML::Node node_;
  std::string path_;
  std::vector<std::string> allowed_;
};

inline NoiseKind noise_kind(const std::string& s, const std::string& key, std::size_t line) {
  if (s == "none") return NoiseKind::None;
  if (s == "multiplicative") return NoiseKind::Multiplicative;
  if (s == "additive") return NoiseKind::Additive;
  throw ValidationError(key, "must be one of none, multiplicative, additive", line);
}

inline void require(bool ok, const Section& s, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError(s.qualified(key), what, s.line(key));
}

}  // namespace detail

inline std::string default_observable(Problem p) {
  return p == Problem::Mechanochemistry ? "mu" : "S11";
}

inline ExperimentConfig parse_config_node(const YAML::Node& root) {
  using detail::require;
  using detail::Section;
  const Section top(root, "",
                    {"problem", "seed", "output", "threads", "data", "architecture", "regularizer", "map", "sparsify",
                     "inference", "evaluate", "lcurve", "demo"});
  ExperimentConfig c;
  std::string problem = "hyperelasticity";
  top.get("problem", problem);
  if (problem == "hyperelasticity") c.problem = Problem::Hyperelasticity;
  else if (problem == "mechanochemistry") c.problem = Problem::Mechanochemistry;
  else if (problem == "gaussian-demo") c.problem = Problem::GaussianDemo;
  else
    throw ValidationError("problem", "must be one of hyperelasticity, mechanochemistry, gaussian-demo",
                          top.line("problem"));
  top.get("seed", c.seed);
  top.get("output", c.output);
  top.get("threads", c.threads);
  require(c.threads >= 1, top, "threads", "must be at least 1");
  const bool mech = c.problem == Problem::Mechanochemistry;

  const Section data = top.child("data", {"count", "epsilon", "noise"});
  data.get("count", c.data.count);
  data.get("epsilon", c.data.epsilon);
  require(c.data.count >= 1, data, "count", "must be at least 1");
  require(c.data.epsilon >= 0.0 && c.data.epsilon < 1.0, data, "epsilon", "must lie in [0, 1)");
  const Section noise = data.child("noise", {"kind", "level"});
  std::string kind = to_string(c.data.noise.kind);
  noise.get("kind", kind);
  c.data.noise.kind = detail::noise_kind(kind, noise.qualified("kind"), noise.line("kind"));
  noise.get("level", c.data.noise.level);
  require(c.data.noise.level >= 0.0, noise, "level", "must be non-negative");

  const Section arch = top.child("architecture", {"hidden", "constrain_first_layer"});
  c.architecture.hidden = mech ? std::vector<std::size_t>{4, 16, 4} : std::vector<std::size_t>{30, 30};
  arch.get("hidden", c.architecture.hidden);
  arch.get("constrain_first_layer", c.architecture.constrain_first_layer);
  require(!c.architecture.hidden.empty(), arch, "hidden", "needs at least one layer");
  for (std::size_t w : c.architecture.hidden) require(w >= 1, arch, "hidden", "layer widths must be positive");

  const Section reg = top.child("regularizer", {"p", "lambda", "mc_samples"});
  reg.get("p", c.regularizer.p);
  reg.get("lambda", c.regularizer.lambda);
  reg.get("mc_samples", c.regularizer.mc_samples);
  require(c.regularizer.p >= 0 && c.regularizer.p <= 2, reg, "p", "must be 0, 1 or 2");
  require(c.regularizer.lambda >= 0.0, reg, "lambda", "must be non-negative");
  require(c.regularizer.mc_samples >= 1, reg, "mc_samples", "must be at least 1");

  const Section map = top.child("map", {"lr", "decay", "epochs"});
  map.get("lr", c.map.lr);
  map.get("decay", c.map.decay);
  map.get("epochs", c.map.epochs);
  require(c.map.lr > 0.0, map, "lr", "must be positive");
  require(c.map.decay > 0.0 && c.map.decay <= 1.0, map, "decay", "must lie in (0, 1]");

  const Section sp = top.child("sparsify", {"prior_lambda", "gate_init_stdev"});
  sp.get("prior_lambda", c.sparsify.prior_lambda);
  sp.get("gate_init_stdev", c.sparsify.gate_init_stdev);
  require(c.sparsify.prior_lambda >= 0.0, sp, "prior_lambda", "must be non-negative");
  require(c.sparsify.gate_init_stdev >= 0.0, sp, "gate_init_stdev", "must be non-negative");

  const Section inf = top.child("inference", {"method", "particles", "iterations", "lr", "decay", "init_scale",
                                              "bandwidth", "threshold", "hmc"});
  std::string method = to_string(c.inference.method);
  inf.get("method", method);
  if (method == "svgd") c.inference.method = Method::Svgd;
  else if (method == "psvgd") c.inference.method = Method::Psvgd;
  else if (method == "hmc") c.inference.method = Method::Hmc;
  else if (method == "none") c.inference.method = Method::None;
  else
    throw ValidationError(inf.qualified("method"), "must be one of svgd, psvgd, hmc, none", inf.line("method"));
  inf.get("particles", c.inference.particles);
  inf.get("iterations", c.inference.iterations);
  inf.get("lr", c.inference.lr);
  inf.get("decay", c.inference.decay);
  inf.get("init_scale", c.inference.init_scale);
  inf.get("bandwidth", c.inference.bandwidth);
  inf.get("threshold", c.inference.threshold);
  require(c.inference.particles >= 1, inf, "particles", "must be at least 1");
  require(c.inference.lr > 0.0, inf, "lr", "must be positive");
  require(c.inference.decay > 0.0 && c.inference.decay <= 1.0, inf, "decay", "must lie in (0, 1]");
  require(c.inference.init_scale >= 0.0, inf, "init_scale", "must be non-negative");
  require(c.inference.bandwidth >= 0.0, inf, "bandwidth", "must be non-negative (0 selects the median rule)");
  require(c.inference.threshold > 0.0 && c.inference.threshold <= 1.0, inf, "threshold", "must lie in (0, 1]");
  const Section hmc = inf.child("hmc", {"step_size", "leapfrog_steps", "samples", "burn_in", "thin"});
  hmc.get("step_size", c.inference.hmc.step_size);
  hmc.get("leapfrog_steps", c.inference.hmc.leapfrog_steps);
  hmc.get("samples", c.inference.hmc.samples);
  hmc.get("burn_in", c.inference.hmc.burn_in);
  hmc.get("thin", c.inference.hmc.thin);
  require(c.inference.hmc.step_size >= 0.0, hmc, "step_size", "must be non-negative");
  require(c.inference.hmc.leapfrog_steps >= 1, hmc, "leapfrog_steps", "must be at least 1");
  require(c.inference.hmc.samples >= 1, hmc, "samples", "must be at least 1");
  require(c.inference.hmc.thin >= 1, hmc, "thin", "must be at least 1");

  const Section ev = top.child("evaluate", {"path_points", "truth_samples", "observable"});
  ev.get("path_points", c.evaluate.path_points);
  ev.get("truth_samples", c.evaluate.truth_samples);
  c.evaluate.observable = default_observable(c.problem);
  ev.get("observable", c.evaluate.observable);
  require(c.evaluate.path_points >= 2, ev, "path_points", "must be at least 2");
  require(c.evaluate.truth_samples >= 1, ev, "truth_samples", "must be at least 1");
  if (c.problem != Problem::GaussianDemo) {
    const auto& cols = mech ? mechchem_output_columns() : hyperelastic_output_columns();
    if (std::find(cols.begin(), cols.end(), c.evaluate.observable) == cols.end())
      throw ValidationError(ev.qualified("observable"), "is not an output column of this problem", ev.line("observable"));
  }

  const Section lc = top.child("lcurve", {"grid", "tolerance"});
  lc.get("grid", c.lcurve.grid);
  lc.get("tolerance", c.lcurve.tolerance);
  for (double l : c.lcurve.grid) require(l > 0.0, lc, "grid", "entries must be positive");
  require(c.lcurve.tolerance >= 0.0, lc, "tolerance", "must be non-negative");

  const Section demo = top.child("demo", {"precision", "mean", "l1", "particles", "iterations", "lr", "init_scale"});
  std::vector<std::vector<double>> precision{{2, 1, 0}, {1, 2, 0}, {0, 0, 0.025}};
  std::vector<double> mean{1, 2, 3};
  demo.get("precision", precision);
  demo.get("mean", mean);
  demo.get("l1", c.demo.l1);
  demo.get("particles", c.demo.particles);
  demo.get("iterations", c.demo.iterations);
  demo.get("lr", c.demo.lr);
  demo.get("init_scale", c.demo.init_scale);
  const auto n = static_cast<Eigen::Index>(mean.size());
  require(n >= 1 && n <= 3, demo, "mean", "must have between 1 and 3 entries");
  require(static_cast<Eigen::Index>(precision.size()) == n, demo, "precision", "must be square and match the mean");
  c.demo.precision.resize(n, n);
  c.demo.mean.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(static_cast<Eigen::Index>(precision[static_cast<std::size_t>(i)].size()) == n, demo, "precision",
            "must be square and match the mean");
    c.demo.mean(i) = mean[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j)
      c.demo.precision(i, j) = precision[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  require((c.demo.precision - c.demo.precision.transpose()).cwiseAbs().maxCoeff() == 0.0, demo, "precision",
          "must be symmetric");
  require(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.demo.precision).eigenvalues().minCoeff() > 0.0, demo,
          "precision", "must be positive definite");
  require(c.demo.l1 >= 0.0, demo, "l1", "must be non-negative");
  require(c.demo.particles >= 1, demo, "particles", "must be at least 1");
  require(c.demo.lr > 0.0, demo, "lr", "must be positive");
  require(c.demo.init_scale >= 0.0, demo, "init_scale", "must be non-negative");

  if (c.inference.method == Method::Psvgd) {
    const double prior = c.regularizer.p == 0 ? c.sparsify.prior_lambda : c.regularizer.lambda;
    if (c.regularizer.p == 1) throw ValidationError("inference.method", "psvgd needs a Gaussian prior (p = 0 or 2)");
    if (!(prior > 0.0))
      throw ValidationError(c.regularizer.p == 0 ? "sparsify.prior_lambda" : "regularizer.lambda",
                            "psvgd needs a positive prior weight");
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line >= 0 ? static_cast<std::size_t>(e.mark.line) + 1 : 0);
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  return parse_config_node(root);
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical JSON form of every field that influences numeric results.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["problem"] = to_string(c.problem);
  j["seed"] = c.seed;
  j["data"] = {{"count", c.data.count},
               {"epsilon", c.data.epsilon},
               {"noise", {{"kind", to_string(c.data.noise.kind)}, {"level", c.data.noise.level}}}};
  j["architecture"] = {{"hidden", c.architecture.hidden}, {"constrain_first_layer", c.architecture.constrain_first_layer}};
  j["regularizer"] = {{"p", c.regularizer.p}, {"lambda", c.regularizer.lambda}, {"mc_samples", c.regularizer.mc_samples}};
  j["map"] = {{"lr", c.map.lr}, {"decay", c.map.decay}, {"epochs", c.map.epochs}};
  j["sparsify"] = {{"prior_lambda", c.sparsify.prior_lambda}, {"gate_init_stdev", c.sparsify.gate_init_stdev}};
  j["inference"] = {{"method", to_string(c.inference.method)},
                    {"particles", c.inference.particles},
                    {"iterations", c.inference.iterations},
                    {"lr", c.inference.lr},
                    {"decay", c.inference.decay},
                    {"init_scale", c.inference.init_scale},
                    {"bandwidth", c.inference.bandwidth},
                    {"threshold", c.inference.threshold},
                    {"hmc",
                     {{"step_size", c.inference.hmc.step_size},
                      {"leapfrog_steps", c.inference.hmc.leapfrog_steps},
                      {"samples", c.inference.hmc.samples},
                      {"burn_in", c.inference.hmc.burn_in},
                      {"thin", c.inference.hmc.thin}}}};
  j["evaluate"] = {{"path_points", c.evaluate.path_points},
                   {"truth_samples", c.evaluate.truth_samples},
                   {"observable", c.evaluate.observable}};
  j["lcurve"] = {{"grid", c.lcurve.grid}, {"tolerance", c.lcurve.tolerance}};
  std::vector<std::vector<double>> precision;
  for (Eigen::Index i = 0; i < c.demo.precision.rows(); ++i) {
    precision.emplace_back();
    for (Eigen::Index k = 0; k < c.demo.precision.cols(); ++k) precision.back().push_back(c.demo.precision(i, k));
  }
  j["demo"] = {{"precision", precision},
               {"mean", std::vector<double>(c.demo.mean.data(), c.demo.mean.data() + c.demo.mean.size())},
               {"l1", c.demo.l1},
               {"particles", c.demo.particles},
               {"iterations", c.demo.iterations},
               {"lr", c.demo.lr},
               {"init_scale", c.demo.init_scale}};
  return j;
}

}  // namespace sparsestein::pipeline
