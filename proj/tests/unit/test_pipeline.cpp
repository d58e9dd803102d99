#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sparsestein/pipeline/config.hpp"
#include "sparsestein/pipeline/experiment.hpp"
#include "sparsestein/pipeline/hashing.hpp"
#include "sparsestein/pipeline/plot.hpp"
#include "sparsestein/pipeline/runner.hpp"
#include "sparsestein/pipeline/table.hpp"

using namespace sparsestein;
using namespace sparsestein::pipeline;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() / ("sparsestein-test-" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ValidationError validation_error(const std::string& yaml) {
  try {
    parse_config_text(yaml);
  } catch (const ValidationError& e) {
    return e;
  }
  ADD_FAILURE() << "no ValidationError for:\n" << yaml;
  return ValidationError("", "");
}

// Small budgets so a full pipeline finishes in seconds.
ExperimentConfig tiny(const std::string& extra = "") {
  return parse_config_text(R"(
problem: hyperelasticity
seed: 7
data: {count: 16}
architecture: {hidden: [4, 4]}
map: {lr: 0.02, epochs: 60}
inference: {particles: 4, iterations: 15, lr: 0.01}
evaluate: {path_points: 40, truth_samples: 60}
)" + extra);
}

void write(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, MinimalHyperelasticityGetsDefaults) {
  const auto c = parse_config_text("problem: hyperelasticity\n");
  EXPECT_EQ(c.problem, Problem::Hyperelasticity);
  EXPECT_EQ(c.data.count, 80u);
  EXPECT_DOUBLE_EQ(c.data.epsilon, 0.2);
  EXPECT_EQ(c.data.noise.kind, NoiseKind::Multiplicative);
  EXPECT_DOUBLE_EQ(c.data.noise.level, 0.1);
  EXPECT_EQ(c.architecture.hidden, (std::vector<std::size_t>{30, 30}));
  EXPECT_EQ(c.regularizer.p, 2);
  EXPECT_EQ(c.inference.method, Method::Svgd);
  EXPECT_EQ(c.inference.particles, 10u);
  EXPECT_EQ(c.evaluate.observable, "S11");
  EXPECT_EQ(c.threads, 1u);
}

TEST(Config, MechanochemistryDefaults) {
  const auto c = parse_config_text("problem: mechanochemistry\n");
  EXPECT_EQ(c.architecture.hidden, (std::vector<std::size_t>{4, 16, 4}));
  EXPECT_EQ(c.evaluate.observable, "mu");
}

TEST(Config, EmptyDocumentIsValid) { EXPECT_EQ(parse_config_text("").problem, Problem::Hyperelasticity); }

TEST(Config, NegativeLambdaNamesTheKey) {
  const auto e = validation_error("problem: hyperelasticity\nregularizer:\n  p: 1\n  lambda: -1\n");
  EXPECT_EQ(e.key, "regularizer.lambda");
  EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos);
  EXPECT_EQ(e.line, 4u);
}

TEST(Config, UnknownKeyGetsSuggestion) {
  const auto e = validation_error("inference:\n  particlez: 5\n");
  EXPECT_EQ(e.key, "inference.particlez");
  EXPECT_EQ(e.line, 2u);
  EXPECT_NE(std::string(e.what()).find("did you mean 'particles'"), std::string::npos);
}

TEST(Config, UnknownKeyWithoutCloseMatch) {
  const auto e = validation_error("zzzzzz: 1\n");
  EXPECT_EQ(std::string(e.what()).find("did you mean"), std::string::npos);
}

TEST(Config, DuplicateKeyRejected) {
  const auto e = validation_error("seed: 1\nseed: 2\n");
  EXPECT_EQ(e.key, "seed");
  EXPECT_EQ(e.line, 2u);
}

TEST(Config, ZeroParticlesRejected) { EXPECT_EQ(validation_error("inference: {particles: 0}\n").key, "inference.particles"); }

TEST(Config, WrongTypeRejected) { EXPECT_EQ(validation_error("data: {count: many}\n").key, "data.count"); }

TEST(Config, BadEnumsRejected) {
  EXPECT_EQ(validation_error("problem: elasticity\n").key, "problem");
  EXPECT_EQ(validation_error("inference: {method: mcmc}\n").key, "inference.method");
  EXPECT_EQ(validation_error("data: {noise: {kind: pink}}\n").key, "data.noise.kind");
  EXPECT_EQ(validation_error("evaluate: {observable: mu}\n").key, "evaluate.observable");
}

TEST(Config, PsvgdNeedsGaussianPrior) {
  EXPECT_EQ(validation_error("regularizer: {p: 1, lambda: 1}\ninference: {method: psvgd}\n").key, "inference.method");
  EXPECT_EQ(validation_error("regularizer: {p: 2, lambda: 0}\ninference: {method: psvgd}\n").key, "regularizer.lambda");
  EXPECT_EQ(validation_error("regularizer: {p: 0}\nsparsify: {prior_lambda: 0}\ninference: {method: psvgd}\n").key,
            "sparsify.prior_lambda");
  EXPECT_NO_THROW(parse_config_text("regularizer: {p: 0, lambda: 1}\ninference: {method: psvgd}\n"));
}

TEST(Config, DemoPrecisionValidated) {
  EXPECT_EQ(validation_error("demo: {precision: [[1, 2], [2, 1]], mean: [0, 0]}\n").key, "demo.precision");
  EXPECT_EQ(validation_error("demo: {precision: [[1, 0], [1, 1]], mean: [0, 0]}\n").key, "demo.precision");
  EXPECT_EQ(validation_error("demo: {precision: [[1]], mean: [0, 0]}\n").key, "demo.precision");
}

TEST(Config, MalformedYamlReportsLine) {
  try {
    parse_config_text("problem: hyperelasticity\ndata: {count: [1, 2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GE(e.line, 2u);
  }
}

TEST(Config, MissingFileIsParseError) { EXPECT_THROW(parse_config("/nonexistent/config.yaml"), ParseError); }

TEST(Config, HashIgnoresOutputAndThreads) {
  const auto a = parse_config_text("output: a\nthreads: 1\n");
  const auto b = parse_config_text("output: b\nthreads: 4\n");
  const auto c = parse_config_text("seed: 1\n");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Config, EditDistance) {
  EXPECT_EQ(edit_distance("particlez", "particles"), 1u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
}

// ---------------------------------------------------------------- hashing

TEST(Hashing, KnownDigests) {
  EXPECT_EQ(sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Hashing, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(3, "generate"), derive_seed(3, "generate"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m : {0u, 1u, 2u})
    for (const auto& s : seed_streams()) seen.insert(derive_seed(m, s));
  EXPECT_EQ(seen.size(), 3 * seed_streams().size());
}

// ---------------------------------------------------------------- tables

TEST(Table, RoundTrip) {
  Table t{{"x", "y"}, {}};
  t.add({0.1, -2.5e-300});
  t.add({1.0 / 3.0, std::numeric_limits<double>::infinity()});
  std::stringstream ss;
  write_table(ss, t);
  const Table u = read_table(ss);
  EXPECT_EQ(u.columns, t.columns);
  EXPECT_EQ(u.rows, t.rows);
  EXPECT_EQ(u.column("y"), 1u);
  EXPECT_THROW(u.column("z"), std::out_of_range);
}

TEST(Table, RejectsRaggedRowsAndEmptyInput) {
  std::stringstream ragged("a,b\n1,2\n3\n");
  try {
    read_table(ragged);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3u);
  }
  std::stringstream empty("");
  EXPECT_THROW(read_table(empty), ParseError);
  Table t{{"a"}, {}};
  EXPECT_THROW(t.add({1.0, 2.0}), std::invalid_argument);
}

// ---------------------------------------------------------------- plots

TEST(Plot, EmptyTableIsAnError) {
  EXPECT_THROW(render_svg(Table{{"x", "y"}, {}}, {}), ParseError);
  TempDir dir;
  write(dir.path / "t.csv", "");
  EXPECT_THROW(emit_plot((dir.path / "t.csv").string(), (dir.path / "t.svg").string(), {}), ParseError);
}

TEST(Plot, DeterministicAndWellFormed) {
  Table t{{"gamma", "mean", "stdev", "truth_mean"}, {}};
  for (int i = 0; i < 20; ++i) t.add({i * 0.1, std::sin(i * 0.1), 0.1, std::sin(i * 0.1) + 0.01});
  PlotOptions band;
  band.kind = PlotKind::Band;
  band.overlay = {"truth_mean"};
  band.title = "a < b & c";
  const std::string a = render_svg(t, band);
  EXPECT_EQ(a, render_svg(t, band));
  EXPECT_EQ(a.rfind("<svg ", 0), 0u);
  EXPECT_EQ(a.substr(a.size() - 7), "</svg>\n");
  EXPECT_NE(a.find("<polygon"), std::string::npos);
  EXPECT_NE(a.find("a &lt; b &amp; c"), std::string::npos);
  const std::string line = render_svg(t, {});
  EXPECT_EQ(line.find("<polygon"), std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t p = line.find("<polyline"); p != std::string::npos; p = line.find("<polyline", p + 1)) ++polylines;
  EXPECT_EQ(polylines, 3u);
}

TEST(Plot, SkipsNonFinitePointsAndHandlesLogAxis) {
  Table t{{"lambda", "r2"}, {}};
  t.add({0.01, 0.99});
  t.add({1.0, -std::numeric_limits<double>::infinity()});
  t.add({100.0, 0.5});
  PlotOptions opt;
  opt.log_x = true;
  const std::string svg = render_svg(t, opt);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
  Table flat{{"x", "y"}, {{1.0, 2.0}}};
  EXPECT_NO_THROW(render_svg(flat, {}));
  EXPECT_THROW(render_svg(t, [] {
                 PlotOptions o;
                 o.y = {"missing"};
                 return o;
               }()),
               std::out_of_range);
}

// ---------------------------------------------------------------- Gaussian demo

TEST(Demo, ReferenceQuantilesMatchGaussianMarginals) {
  DemoConfig d;
  d.precision = Eigen::MatrixXd(2, 2);
  d.precision << 2, 1, 1, 2;
  d.mean = Eigen::Vector2d(1, -2);
  d.l1 = 0.0;
  const auto q = demo_reference_quantiles(d, 2000, 401);
  const Eigen::MatrixXd cov = d.precision.inverse();
  for (int i = 0; i < 2; ++i) {
    const metrics::EmpiricalDist e(q[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(e.mean(), d.mean(i), 1e-3);
    EXPECT_NEAR(e.stdev(), std::sqrt(cov(i, i)), 0.01 * std::sqrt(cov(i, i)));
  }
}

TEST(Demo, PipelineEmitsSamplesAndTable) {
  TempDir dir;
  auto c = parse_config_text("problem: gaussian-demo\ndemo: {particles: 30, iterations: 200}\n");
  c.output = dir.path.string();
  const auto m = run_pipeline(c);
  ASSERT_EQ(m.stages.size(), 1u);
  EXPECT_EQ(m.stages[0].name, "demo");
  EXPECT_EQ(inference::load_samples((dir.path / paths::kDemoSamples).string()).count(), 30u);
  const Table t = load_table((dir.path / paths::kDemoTable).string());
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& r : t.rows) EXPECT_GE(r[t.column("w1")], 0.0);
  EXPECT_EQ(run_pipeline(c).artifacts(), m.artifacts());
}

// ---------------------------------------------------------------- end-to-end pipeline

TEST(Pipeline, TinyRunEmitsEveryArtifact) {
  TempDir dir;
  auto c = tiny();
  c.output = dir.path.string();
  const auto m = run_pipeline(c);
  std::vector<std::string> names;
  for (const auto& s : m.stages) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"generate", "map", "sample", "evaluate", "plot"}));
  for (const auto& [rel, hash] : m.artifacts()) {
    ASSERT_TRUE(fs::exists(dir.path / rel)) << rel;
    EXPECT_EQ(file_hash((dir.path / rel).string()), hash);
  }
  const Table t = load_table((dir.path / paths::kPath).string());
  EXPECT_EQ(t.columns, (std::vector<std::string>{"gamma", "mean", "stdev", "w1", "truth_mean", "truth_stdev", "map"}));
  EXPECT_EQ(t.rows.size(), 40u);
  const auto summary = nlohmann::json::parse(read_file((dir.path / paths::kSummary).string()));
  EXPECT_EQ(summary.at("samples").get<std::size_t>(), 4u);
  EXPECT_TRUE(fs::exists(dir.path / kManifestFile));
  EXPECT_EQ(load_manifest(dir.path).artifacts(), m.artifacts());
  EXPECT_EQ(m.seeds.size(), seed_streams().size());
}

TEST(Pipeline, IdenticalConfigReproducesArtifacts) {
  TempDir a, b;
  auto c = tiny();
  const auto ma = run_stages(c, a.path, default_stages(c));
  c.threads = 3;
  const auto mb = run_stages(c, b.path, default_stages(c));
  EXPECT_EQ(ma.config_hash, mb.config_hash);
  EXPECT_EQ(ma.artifacts(), mb.artifacts());
}

TEST(Pipeline, DifferentSeedChangesData) {
  TempDir a, b;
  const auto ma = run_stages(tiny(), a.path, {"generate"});
  auto other = tiny();
  other.seed = 8;
  const auto mb = run_stages(other, b.path, {"generate"});
  EXPECT_NE(ma.artifacts(), mb.artifacts());
}

TEST(Pipeline, ResumeSkipsUnchangedStages) {
  TempDir dir;
  const auto c = tiny();
  const auto first = run_stages(c, dir.path, default_stages(c));
  const auto second = run_stages(c, dir.path, default_stages(c));
  for (const auto& s : second.stages) EXPECT_TRUE(s.reused) << s.name;
  EXPECT_EQ(first.artifacts(), second.artifacts());

  write(dir.path / paths::kSamples, "tampered\n");
  const auto third = run_stages(c, dir.path, default_stages(c));
  EXPECT_FALSE(third.find("sample")->reused);
  EXPECT_TRUE(third.find("map")->reused);
  EXPECT_TRUE(third.find("evaluate")->reused);
  EXPECT_EQ(third.artifacts(), first.artifacts());

  auto changed = tiny("");
  changed.inference.iterations = 16;
  const auto fourth = run_stages(changed, dir.path, default_stages(changed));
  EXPECT_TRUE(fourth.find("generate")->reused);
  EXPECT_TRUE(fourth.find("map")->reused);
  EXPECT_FALSE(fourth.find("sample")->reused);
  EXPECT_FALSE(fourth.find("evaluate")->reused);
}

TEST(Pipeline, StagesReadOnlyDeclaredInputs) {
  TempDir full;
  const auto c = tiny("regularizer: {p: 0, lambda: 0.01}\n");
  const auto m = run_stages(c, full.path, default_stages(c));
  for (const auto& stage : stage_catalog(c)) {
    if (stage.name == "lcurve") continue;
    TempDir iso;
    for (const auto& in : stage.inputs) {
      fs::create_directories((iso.path / in).parent_path());
      fs::copy_file(full.path / in, iso.path / in);
    }
    stage.run(c, iso.path);
    for (const auto& out : stage.outputs)
      EXPECT_EQ(file_hash((iso.path / out).string()), m.find(stage.name)->outputs.at(out)) << stage.name << " " << out;
  }
}

TEST(Pipeline, FailureNamesStageAndKeepsEarlierArtifacts) {
  TempDir dir;
  const auto c = tiny();
  try {
    run_stages(c, dir.path, {"sample"});
    FAIL();
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage, "sample");
  }
  run_stages(c, dir.path, {"generate", "map"});
  write(dir.path / paths::kMap, "{ not json");
  try {
    run_stages(c, dir.path, {"sample"});
    FAIL();
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage, "sample");
    EXPECT_NE(std::string(e.what()).find("malformed"), std::string::npos);
  }
  EXPECT_TRUE(fs::exists(dir.path / paths::kData));
  const auto m = load_manifest(dir.path);
  EXPECT_NE(m.find("generate"), nullptr);
  EXPECT_EQ(m.find("sample"), nullptr);
}

TEST(Pipeline, UnknownStageRejected) {
  EXPECT_THROW(run_stages(tiny(), fs::temp_directory_path(), {"sparsify"}), std::invalid_argument);
}

TEST(Pipeline, L0RunPrunesAndSamplesCompactModel) {
  TempDir dir;
  const auto c = tiny("regularizer: {p: 0, lambda: 0.01}\n");
  run_stages(c, dir.path, default_stages(c));
  const auto sm = models::model_file_from_json(nlohmann::json::parse(read_file((dir.path / paths::kSparseModel).string())));
  const auto samples = inference::load_samples((dir.path / paths::kSamples).string());
  EXPECT_EQ(static_cast<std::size_t>(samples.particles.rows()), sm.params().active_count());
  EXPECT_LE(sm.params().active_count(), sm.values.size());
}

TEST(Pipeline, PsvgdAndHmcRun) {
  for (const std::string extra :
       {std::string("regularizer: {p: 2, lambda: 0.01}\ninference: {method: psvgd, particles: 4, iterations: 10, threshold: 0.9}\n"),
        std::string("inference: {method: hmc, hmc: {step_size: 0.0001, leapfrog_steps: 3, samples: 5, burn_in: 5}}\n"),
        std::string("inference: {method: none}\n")}) {
    TempDir dir;
    auto c = tiny();
    const auto over = parse_config_text(extra);
    c.inference = over.inference;
    c.regularizer = over.regularizer;
    run_stages(c, dir.path, default_stages(c));
    const auto s = inference::load_samples((dir.path / paths::kSamples).string());
    EXPECT_EQ(s.method, c.inference.method == Method::None ? "map" : to_string(c.inference.method));
  }
}

TEST(Pipeline, MechanochemistryEmitsMuCurve) {
  TempDir dir;
  auto c = parse_config_text(R"(
problem: mechanochemistry
data: {count: 16}
architecture: {hidden: [4, 4]}
map: {epochs: 30}
inference: {particles: 3, iterations: 5}
evaluate: {path_points: 20, truth_samples: 20}
)");
  run_stages(c, dir.path, default_stages(c));
  const Table mu = load_table((dir.path / paths::kMuCurve).string());
  EXPECT_EQ(mu.rows.size(), 101u);
  EXPECT_DOUBLE_EQ(mu.rows.front()[mu.column("mu_truth")], 0.0);
}

TEST(Pipeline, LCurveWritesTableAndLambdaStar) {
  TempDir dir;
  const auto c = tiny("lcurve: {grid: [0.001, 0.001, 10.0]}\n");
  const auto names = default_stages(c);
  EXPECT_EQ(names.back(), "lcurve");
  run_stages(c, dir.path, {"generate", "lcurve"});
  const Table t = load_table((dir.path / paths::kLCurve).string());
  EXPECT_EQ(t.rows.size(), 2u);
  const auto s = nlohmann::json::parse(read_file((dir.path / paths::kLCurveSummary).string()));
  EXPECT_TRUE(s.at("lambda_star").get<double>() == 0.001 || s.at("lambda_star").get<double>() == 10.0);
}
