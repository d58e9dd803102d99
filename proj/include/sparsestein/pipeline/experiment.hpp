#pragma once

// Pipeline stages. Each stage reads only the files listed for it in the
// runner and writes its outputs under the run directory.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsestein/datagen/dataset_io.hpp"
#include "sparsestein/datagen/sampling.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/inference/density.hpp"
#include "sparsestein/inference/hmc.hpp"
#include "sparsestein/inference/map.hpp"
#include "sparsestein/inference/psvgd.hpp"
#include "sparsestein/inference/samples_io.hpp"
#include "sparsestein/inference/svgd.hpp"
#include "sparsestein/metrics/distance.hpp"
#include "sparsestein/metrics/lcurve.hpp"
#include "sparsestein/metrics/pushforward.hpp"
#include "sparsestein/models/spec_io.hpp"
#include "sparsestein/pipeline/config.hpp"
#include "sparsestein/pipeline/hashing.hpp"
#include "sparsestein/pipeline/plot.hpp"
#include "sparsestein/pipeline/table.hpp"
#include "sparsestein/sparsify/prune.hpp"

namespace sparsestein::pipeline {

namespace fs = std::filesystem;

namespace paths {
inline constexpr const char* kData = "data/train.csv";
inline constexpr const char* kMap = "model/map.json";
inline constexpr const char* kLoss = "model/loss.csv";
inline constexpr const char* kGates = "model/gates.json";
inline constexpr const char* kSparse = "model/sparse.json";
inline constexpr const char* kSparseModel = "model/sparse_model.json";
inline constexpr const char* kSamples = "posterior/samples.jsonl";
inline constexpr const char* kPath = "eval/path.csv";
inline constexpr const char* kSummary = "eval/summary.json";
inline constexpr const char* kMuCurve = "eval/mu_curve.csv";
inline constexpr const char* kPathPlot = "eval/path.svg";
inline constexpr const char* kLCurve = "lcurve/lcurve.csv";
inline constexpr const char* kLCurveSummary = "lcurve/summary.json";
inline constexpr const char* kDemoSamples = "demo/samples.jsonl";
inline constexpr const char* kDemoTable = "demo/marginals.csv";
inline constexpr const char* kDemoSummary = "demo/summary.json";
}  // namespace paths

/// Model consumed by sampling and evaluation: the pruned model for L0, else the MAP.
inline std::string final_model_path(const ExperimentConfig& c) {
  return c.regularizer.p == 0 ? paths::kSparseModel : paths::kMap;
}

namespace detail {

inline fs::path prepare(const fs::path& dir, const std::string& rel) {
  const fs::path p = dir / rel;
  fs::create_directories(p.parent_path());
  return p;
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  f << text;
}

inline nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p.string()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed JSON in '" + p.string() + "': " + e.what());
  }
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline bool is_mech(const ExperimentConfig& c) { return c.problem == Problem::Mechanochemistry; }

inline datagen::PathKind path_kind(const ExperimentConfig& c) {
  return is_mech(c) ? datagen::PathKind::Mechchem : datagen::PathKind::Uniaxial;
}

inline std::vector<double> truth_outputs(const ExperimentConfig& c, std::span<const double> inputs) {
  return is_mech(c) ? datagen::mechchem_outputs(inputs) : datagen::gent_outputs(inputs);
}

inline std::size_t observable_index(const ExperimentConfig& c) {
  const auto& cols = is_mech(c) ? mechchem_output_columns() : hyperelastic_output_columns();
  return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), c.evaluate.observable) - cols.begin());
}

inline void require_model_problem(const ExperimentConfig& c) {
  if (c.problem == Problem::GaussianDemo) throw std::invalid_argument("stage needs a data-driven problem");
}

}  // namespace detail

inline models::ModelSpec model_spec(const ExperimentConfig& c) {
  detail::require_model_problem(c);
  models::ModelSpec s;
  if (detail::is_mech(c)) s.arch = models::MlpSpec{4, c.architecture.hidden};
  else s.arch = models::IcnnSpec{3, c.architecture.hidden, c.architecture.constrain_first_layer};
  return s;
}

inline inference::AdamConfig adam_config(double lr, double decay) {
  inference::AdamConfig a;
  a.lr = lr;
  a.decay = decay;
  return a;
}

/// Prior used for sampling: Gaussian with the post-pruning weight for L0, else the regularizer itself.
inline inference::PriorSpec sampling_prior(const ExperimentConfig& c) {
  if (c.regularizer.p == 0) return {2, c.sparsify.prior_lambda};
  return {c.regularizer.p, c.regularizer.lambda};
}

/// Pooled R^2 of a model against the noiseless truth along the validation path.
/// Hyperelasticity pools the normal stresses; mechanochemistry pools every observable.
inline double path_r2(const ExperimentConfig& c, const models::ObservableModel& model, std::span<const double> theta) {
  const auto path = datagen::validation_path(detail::path_kind(c), c.evaluate.path_points);
  const auto truth = detail::truth_outputs(c, path.inputs);
  std::vector<double> pred(truth.size());
  model.observe(theta, path.inputs, pred);
  const std::size_t w = model.num_observables();
  const std::size_t used = detail::is_mech(c) ? w : 3;
  std::vector<double> y, yhat;
  for (std::size_t i = 0; i < path.size(); ++i)
    for (std::size_t k = 0; k < used; ++k) {
      y.push_back(truth[i * w + k]);
      yhat.push_back(pred[i * w + k]);
    }
  return metrics::r2_score(y, yhat);
}

// ---------------------------------------------------------------- generate

inline void stage_generate(const ExperimentConfig& c, const fs::path& dir) {
  detail::require_model_problem(c);
  NoiseSpec noise = c.data.noise;
  noise.seed = derive_seed(c.seed, "noise");
  const std::uint64_t seed = derive_seed(c.seed, "generate");
  const Dataset d = detail::is_mech(c) ? datagen::mechchem_dataset(c.data.count, c.data.epsilon, seed, noise)
                                       : datagen::gent_dataset(c.data.count, c.data.epsilon, seed, noise);
  datagen::save_dataset(detail::prepare(dir, paths::kData).string(), d);
}

// ---------------------------------------------------------------- MAP / L0 training

struct TrainResult {
  models::ModelFile map;                   // theta (p = 1, 2) or theta_bar (p = 0)
  std::vector<double> loss;
  std::optional<sparsify::GateState> gates;  // p = 0 only
};

inline TrainResult train(const ExperimentConfig& c, const Dataset& data, double lambda) {
  const models::ModelSpec spec = model_spec(c);
  const auto model = spec.build();
  const auto weights = inference::likelihood_weights(data, c.data.noise);
  const std::vector<double> init = std::visit(
      [&](const auto& s) { return models::initialize(s, derive_seed(c.seed, "init")).values; }, spec.arch);
  inference::MapConfig mc;
  mc.adam = adam_config(c.map.lr, c.map.decay);
  mc.epochs = c.map.epochs;
  TrainResult r;
  r.map.spec = spec;
  if (c.regularizer.p == 0) {
    const auto gates = sparsify::GateState::initialize(init.size(), derive_seed(c.seed, "gates"), c.sparsify.gate_init_stdev);
    const sparsify::RegularizerSpec reg{0, lambda, c.regularizer.mc_samples};
    auto l0 = inference::train_l0(*model, data, weights, init, gates, reg, mc, derive_seed(c.seed, "l0"));
    r.map.values = std::move(l0.theta_bar);
    r.loss = std::move(l0.loss_trace);
    r.gates = std::move(l0.gates);
  } else {
    const inference::LogPosterior post(model, data, weights, {c.regularizer.p, lambda});
    r.map.values = inference::train_map(post, init, mc, &r.loss);
  }
  return r;
}

inline nlohmann::json gates_to_json(const sparsify::GateState& g) {
  return {{"log_alpha", g.log_alpha}, {"gamma", g.gamma}, {"zeta", g.zeta}, {"beta", g.beta}};
}

inline sparsify::GateState gates_from_json(const nlohmann::json& j) {
  sparsify::GateState g;
  g.log_alpha = j.at("log_alpha").get<std::vector<double>>();
  g.gamma = j.at("gamma").get<double>();
  g.zeta = j.at("zeta").get<double>();
  g.beta = j.at("beta").get<double>();
  return g;
}

inline void stage_map(const ExperimentConfig& c, const fs::path& dir) {
  const Dataset data = datagen::load_dataset((dir / paths::kData).string());
  const TrainResult r = train(c, data, c.regularizer.lambda);
  detail::write_json(detail::prepare(dir, paths::kMap), models::to_json(r.map));
  Table loss{{"epoch", "loss"}, {}};
  for (std::size_t e = 0; e < r.loss.size(); ++e) loss.add({static_cast<double>(e), r.loss[e]});
  save_table(detail::prepare(dir, paths::kLoss).string(), loss);
  if (r.gates) detail::write_json(detail::prepare(dir, paths::kGates), gates_to_json(*r.gates));
}

/// Pruned model as a full-length parameter file whose mask marks the survivors.
inline models::ModelFile pruned_model_file(const models::ModelSpec& origin, const sparsify::SparseModel& s) {
  models::ModelFile f;
  f.spec = origin;
  f.spec.active = s.mask();
  f.values = s.materialized().values;
  return f;
}

inline void stage_sparsify(const ExperimentConfig& c, const fs::path& dir) {
  if (c.regularizer.p != 0) throw std::invalid_argument("sparsify stage needs regularizer.p = 0");
  const auto map = models::model_file_from_json(detail::read_json(dir / paths::kMap));
  const auto gates = gates_from_json(detail::read_json(dir / paths::kGates));
  sparsify::SparseModel s = sparsify::prune(map.params(), gates);
  s.seed = c.seed;
  s.lambda = c.regularizer.lambda;
  s.epochs = c.map.epochs;
  detail::write_json(detail::prepare(dir, paths::kSparse), sparsify::to_json(s, map.spec));
  detail::write_json(detail::prepare(dir, paths::kSparseModel), models::to_json(pruned_model_file(map.spec, s)));
}

// ---------------------------------------------------------------- sampling

inline inference::PosteriorSamples sample_posterior(const ExperimentConfig& c, const models::ModelFile& mf,
                                                    const Dataset& data) {
  const auto model = mf.spec.build();
  const std::vector<double> theta0 = mf.params().compact();
  const inference::LogPosterior post(model, data, inference::likelihood_weights(data, c.data.noise), sampling_prior(c));
  const std::uint64_t seed = derive_seed(c.seed, "sample");
  inference::SvgdConfig sc;
  sc.iterations = c.inference.iterations;
  sc.adam = adam_config(c.inference.lr, c.inference.decay);
  sc.bandwidth = c.inference.bandwidth;
  sc.threads = c.threads;
  const auto init = [&] {
    return inference::jittered_ensemble(theta0, c.inference.particles, c.inference.init_scale,
                                        derive_seed(c.seed, "particles"));
  };
  switch (c.inference.method) {
    case Method::Svgd:
      return inference::svgd_run(post, init(), sc, seed);
    case Method::Psvgd: {
      const Eigen::Map<const Eigen::VectorXd> anchor(theta0.data(), static_cast<Eigen::Index>(theta0.size()));
      const auto proj = inference::active_subspace(post.gauss_newton_hessian(theta0), post.prior_variance(), anchor,
                                                   c.inference.threshold);
      return inference::psvgd_run(post, proj, init(), sc, seed);
    }
    case Method::Hmc:
      return inference::hmc_run(post, theta0, c.inference.hmc, seed);
    case Method::None:
      break;
  }
  inference::PosteriorSamples s;
  s.method = "map";
  s.seed = seed;
  s.particles = Eigen::Map<const Eigen::VectorXd>(theta0.data(), static_cast<Eigen::Index>(theta0.size()));
  return s;
}

inline void stage_sample(const ExperimentConfig& c, const fs::path& dir) {
  const Dataset data = datagen::load_dataset((dir / paths::kData).string());
  const auto mf = models::model_file_from_json(detail::read_json(dir / final_model_path(c)));
  inference::save_samples(detail::prepare(dir, paths::kSamples).string(), sample_posterior(c, mf, data));
}

// ---------------------------------------------------------------- evaluation

struct PathEvaluation {
  Table table;  // gamma, mean, stdev, w1, truth_mean, truth_stdev, map
  double map_r2 = 0.0;
  double mean_w1 = 0.0;
};

/// Push-forward of `samples` along the validation path, compared per point with
/// noisy draws of the ground truth.
inline PathEvaluation evaluate_path(const ExperimentConfig& c, const models::ModelFile& mf,
                                    const inference::PosteriorSamples& samples) {
  const auto model = mf.spec.build();
  const auto theta0 = mf.params().compact();
  const auto path = datagen::validation_path(detail::path_kind(c), c.evaluate.path_points);
  const std::size_t obs = detail::observable_index(c);
  const std::size_t w = model->num_observables();
  const auto pf = metrics::pushforward(samples, *model, path.inputs, obs, c.threads);
  const auto truth = detail::truth_outputs(c, path.inputs);
  std::vector<double> map_pred(truth.size());
  model->observe(theta0, path.inputs, map_pred);

  std::vector<double> clean(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) clean[i] = truth[i * w + obs];
  std::vector<std::vector<double>> draws(path.size(), std::vector<double>(c.evaluate.truth_samples));
  const std::uint64_t truth_seed = derive_seed(c.seed, "truth");
  for (std::size_t k = 0; k < c.evaluate.truth_samples; ++k) {
    std::vector<double> y = clean;
    datagen::apply_noise(y, {c.data.noise.kind, c.data.noise.level, truth_seed + k});
    for (std::size_t i = 0; i < path.size(); ++i) draws[i][k] = y[i];
  }

  PathEvaluation ev;
  ev.table.columns = {"gamma", "mean", "stdev", "w1", "truth_mean", "truth_stdev", "map"};
  double total = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const metrics::EmpiricalDist td(std::move(draws[i]));
    const double w1 = metrics::w1_distance(pf.per_input[i], td);
    total += w1;
    ev.table.add({path.gamma[i], pf.mean[i], pf.stdev[i], w1, td.mean(), td.stdev(), map_pred[i * w + obs]});
  }
  ev.mean_w1 = total / static_cast<double>(path.size());
  ev.map_r2 = path_r2(c, *model, theta0);
  return ev;
}

/// Chemical potential of a model and of the truth at zero strain over c in [0, 1].
inline Table mu_curve(const models::ModelFile& mf, std::size_t points = 101) {
  const auto model = mf.spec.build();
  const auto theta = mf.params().compact();
  std::vector<double> inputs;
  for (std::size_t k = 0; k < points; ++k)
    inputs.insert(inputs.end(), {0.0, 0.0, 0.0, static_cast<double>(k) / static_cast<double>(points - 1)});
  std::vector<double> pred(points * 4);
  model->observe(theta, inputs, pred);
  const auto truth = datagen::mechchem_outputs(inputs);
  Table t{{"c", "mu_map", "mu_truth"}, {}};
  for (std::size_t k = 0; k < points; ++k) t.add({inputs[4 * k + 3], pred[4 * k + 3], truth[4 * k + 3]});
  return t;
}

inline void stage_evaluate(const ExperimentConfig& c, const fs::path& dir) {
  const auto mf = models::model_file_from_json(detail::read_json(dir / final_model_path(c)));
  const auto samples = inference::load_samples((dir / paths::kSamples).string());
  const PathEvaluation ev = evaluate_path(c, mf, samples);
  save_table(detail::prepare(dir, paths::kPath).string(), ev.table);
  nlohmann::json s;
  s["problem"] = to_string(c.problem);
  s["method"] = samples.method;
  s["observable"] = c.evaluate.observable;
  s["samples"] = samples.count();
  s["map_r2"] = ev.map_r2;
  s["mean_w1"] = ev.mean_w1;
  s["active_count"] = mf.params().active_count();
  s["total_params"] = mf.values.size();
  if (std::isfinite(samples.acceptance)) s["acceptance"] = samples.acceptance;
  detail::write_json(detail::prepare(dir, paths::kSummary), s);
  if (detail::is_mech(c)) save_table(detail::prepare(dir, paths::kMuCurve).string(), mu_curve(mf));
}

inline void stage_plot(const ExperimentConfig& c, const fs::path& dir) {
  PlotOptions opt;
  opt.kind = PlotKind::Band;
  opt.x = "gamma";
  opt.overlay = {"truth_mean"};
  opt.title = std::string(to_string(c.problem)) + ": " + c.evaluate.observable + " mean +/- 2 stdev";
  emit_plot((dir / paths::kPath).string(), detail::prepare(dir, paths::kPathPlot).string(), opt);
}

// ---------------------------------------------------------------- L-curve

/// Trains at one lambda and scores the result on the validation path.
inline metrics::LCurvePoint lcurve_point(const ExperimentConfig& c, const Dataset& data, double lambda) {
  TrainResult r = train(c, data, lambda);
  metrics::LCurvePoint p;
  p.lambda = lambda;
  models::ModelFile final_model = r.map;
  if (r.gates) final_model = pruned_model_file(r.map.spec, sparsify::prune(r.map.params(), *r.gates));
  const auto model = final_model.spec.build();
  p.test_r2 = path_r2(c, *model, final_model.params().compact());
  p.active_count = final_model.params().active_count();
  return p;
}

inline void stage_lcurve(const ExperimentConfig& c, const fs::path& dir) {
  if (c.lcurve.grid.empty()) throw std::invalid_argument("lcurve.grid is empty");
  const Dataset data = datagen::load_dataset((dir / paths::kData).string());
  const auto curve = metrics::lcurve_sweep(
      c.lcurve.grid, [&](double l) { return lcurve_point(c, data, l); }, c.lcurve.tolerance);
  Table t{{"lambda", "r2", "active"}, {}};
  for (const auto& p : curve.points) t.add({p.lambda, p.test_r2, static_cast<double>(p.active_count)});
  save_table(detail::prepare(dir, paths::kLCurve).string(), t);
  detail::write_json(detail::prepare(dir, paths::kLCurveSummary),
                     {{"lambda_star", curve.lambda_star}, {"p", c.regularizer.p}, {"tolerance", c.lcurve.tolerance}});
}

// ---------------------------------------------------------------- Gaussian demo

/// Marginals of exp(-1/2 (x - m)^T L (x - m) - l1 ||x||_1) by midpoint-rule
/// integration on a tensor grid (dimension <= 3), returned as `count` quantiles each.
inline std::vector<std::vector<double>> demo_reference_quantiles(const DemoConfig& d, std::size_t count = 1000,
                                                                 std::size_t cells = 161) {
  const Eigen::Index n = d.mean.size();
  if (n < 1 || n > 3) throw std::invalid_argument("reference marginals need dimension 1 to 3");
  const Eigen::MatrixXd cov = d.precision.inverse();
  std::vector<double> lo(3, 0.0), step(3, 1.0);
  std::vector<std::size_t> m(3, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sd = std::sqrt(cov(i, i));
    const double a = std::min(0.0, d.mean(i)) - 8.0 * sd, b = std::max(0.0, d.mean(i)) + 8.0 * sd;
    m[static_cast<std::size_t>(i)] = cells;
    step[static_cast<std::size_t>(i)] = (b - a) / static_cast<double>(cells);
    lo[static_cast<std::size_t>(i)] = a;
  }
  const inference::GaussianL1Density density(d.precision, d.mean, d.l1);
  std::vector<std::vector<double>> marg(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) marg[static_cast<std::size_t>(i)].assign(cells, 0.0);
  // Log densities are shifted by their value at the mean to avoid underflow.
  const double ref = density.log_density({d.mean.data(), static_cast<std::size_t>(n)}, {});
  std::vector<double> x(static_cast<std::size_t>(n));
  for (std::size_t a = 0; a < m[0]; ++a)
    for (std::size_t b = 0; b < m[1]; ++b)
      for (std::size_t e = 0; e < m[2]; ++e) {
        const std::size_t idx[3] = {a, b, e};
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto k = static_cast<std::size_t>(i);
          x[k] = lo[k] + (static_cast<double>(idx[k]) + 0.5) * step[k];
        }
        const double p = std::exp(density.log_density(x, {}) - ref);
        for (Eigen::Index i = 0; i < n; ++i) marg[static_cast<std::size_t>(i)][idx[i]] += p;
      }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    std::vector<double> cdf(cells + 1, 0.0);
    for (std::size_t j = 0; j < cells; ++j) cdf[j + 1] = cdf[j] + marg[k][j];
    for (auto& v : cdf) v /= cdf.back();
    for (std::size_t q = 0; q < count; ++q) {
      const double u = (static_cast<double>(q) + 0.5) / static_cast<double>(count);
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const std::size_t j = static_cast<std::size_t>(it - cdf.begin()) - 1;
      const double frac = (u - cdf[j]) / (cdf[j + 1] - cdf[j]);
      out[k].push_back(lo[k] + (static_cast<double>(j) + frac) * step[k]);
    }
  }
  return out;
}

inline inference::PosteriorSamples run_demo(const ExperimentConfig& c) {
  inference::SvgdConfig sc;
  sc.iterations = c.demo.iterations;
  sc.adam = adam_config(c.demo.lr, 1.0);
  sc.threads = c.threads;
  const std::vector<double> origin(static_cast<std::size_t>(c.demo.mean.size()), 0.0);
  const auto init = inference::jittered_ensemble(origin, c.demo.particles, c.demo.init_scale, derive_seed(c.seed, "particles"));
  return inference::sparsifying_prior_svgd(c.demo.precision, c.demo.mean, c.demo.l1, init, sc, derive_seed(c.seed, "sample"));
}

inline void stage_demo(const ExperimentConfig& c, const fs::path& dir) {
  const auto samples = run_demo(c);
  inference::save_samples(detail::prepare(dir, paths::kDemoSamples).string(), samples);
  const auto ref = demo_reference_quantiles(c.demo);
  Table t{{"coordinate", "mean", "stdev", "w1", "ref_mean", "ref_stdev"}, {}};
  nlohmann::json s;
  s["particles"] = samples.count();
  s["iterations"] = samples.iterations;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    std::vector<double> coord(samples.count());
    for (std::size_t k = 0; k < coord.size(); ++k)
      coord[k] = samples.particles(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    const metrics::EmpiricalDist pd(std::move(coord));
    const metrics::EmpiricalDist rd(ref[i]);
    const double w1 = metrics::w1_distance(pd, rd);
    t.add({static_cast<double>(i + 1), pd.mean(), pd.stdev(), w1, rd.mean(), rd.stdev()});
    s["w1"].push_back(w1);
  }
  save_table(detail::prepare(dir, paths::kDemoTable).string(), t);
  detail::write_json(detail::prepare(dir, paths::kDemoSummary), s);
}

}  // namespace sparsestein::pipeline
