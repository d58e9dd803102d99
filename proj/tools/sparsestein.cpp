#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sparsestein/error.hpp"
#include "sparsestein/pipeline/config.hpp"
#include "sparsestein/pipeline/plot.hpp"
#include "sparsestein/pipeline/runner.hpp"

namespace ss = sparsestein;
namespace pl = sparsestein::pipeline;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

struct Common {
  std::string config;
  std::string output;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--output", c.output, "Run directory (overrides SPARSESTEIN_OUTPUT and the config)");
  cmd->add_option("-j,--threads", c.threads, "Worker threads (overrides SPARSESTEIN_THREADS and the config)")
      ->check(CLI::PositiveNumber);
}

pl::ExperimentConfig load(const Common& common, const std::string& method_override = "") {
  YAML::Node root;
  try {
    root = YAML::LoadFile(common.config);
  } catch (const YAML::ParserException& e) {
    throw ss::ParseError(e.msg, e.mark.line >= 0 ? static_cast<std::size_t>(e.mark.line) + 1 : 0);
  } catch (const YAML::BadFile&) {
    throw ss::ParseError("cannot open config '" + common.config + "'");
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!method_override.empty() && root.IsMap()) root["inference"]["method"] = method_override;
  pl::ExperimentConfig c = pl::parse_config_node(root);
  if (const char* env = std::getenv("SPARSESTEIN_OUTPUT"); env && *env) c.output = env;
  if (const char* env = std::getenv("SPARSESTEIN_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw ss::ValidationError("SPARSESTEIN_THREADS", "must be a positive integer");
    c.threads = static_cast<std::size_t>(n);
  }
  if (!common.output.empty()) c.output = common.output;
  if (common.threads > 0) c.threads = common.threads;
  return c;
}

void report(const pl::RunManifest& m, const std::string& dir) {
  for (const auto& s : m.stages) {
    std::cout << std::left << std::setw(10) << s.name;
    if (s.reused) std::cout << " reused";
    else std::cout << " " << std::fixed << std::setprecision(2) << s.seconds << " s";
    std::cout << "  (" << s.outputs.size() << " files)\n";
  }
  std::cout << "manifest: " << (std::filesystem::path(dir) / pl::kManifestFile).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparsified Stein variational inference for neural constitutive models"};
  app.require_subcommand(1);

  struct StageCommand {
    std::string name;
    std::string help;
    std::vector<std::string> stages;  // empty: full default pipeline
  };
  const std::vector<StageCommand> stage_commands{
      {"generate", "Generate the synthetic training dataset", {"generate"}},
      {"train-map", "Train the MAP (or L0-gated) network", {"map"}},
      {"sparsify", "Prune the L0-trained network to its active parameters", {"sparsify"}},
      {"sample", "Sample the posterior (svgd, psvgd or hmc)", {"sample"}},
      {"evaluate", "Push the posterior forward along the validation path", {"evaluate"}},
      {"lcurve", "Sweep the penalty weight and record R^2 and active counts", {"lcurve"}},
      {"demo-l1", "Stein sampling of the Gaussian target with an L1 prior", {"demo"}},
      {"run", "Run every pipeline stage, resuming unchanged ones", {}},
  };

  std::vector<Common> commons(stage_commands.size());
  std::vector<CLI::App*> cmds;
  std::string method;
  for (std::size_t i = 0; i < stage_commands.size(); ++i) {
    auto* cmd = app.add_subcommand(stage_commands[i].name, stage_commands[i].help);
    add_common(cmd, commons[i]);
    if (stage_commands[i].name == "sample")
      cmd->add_option("-m,--method", method, "Override inference.method")
          ->check(CLI::IsMember({"svgd", "psvgd", "hmc"}));
    cmds.push_back(cmd);
  }

  std::string table, out, kind = "line", x, title;
  std::vector<std::string> columns;
  bool log_x = false;
  auto* plot = app.add_subcommand("plot", "Render a CSV table as an SVG line or band plot");
  plot->add_option("--table", table, "Input CSV table")->required();
  plot->add_option("--out", out, "Output SVG path")->required();
  plot->add_option("--kind", kind, "line or band")->check(CLI::IsMember({"line", "band"}));
  plot->add_option("--x", x, "x column (default: first column)");
  plot->add_option("--y", columns, "Columns to draw (line plots; default: all others)");
  plot->add_option("--title", title, "Plot title");
  plot->add_flag("--log-x", log_x, "Logarithmic x axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (plot->parsed()) {
    try {
      pl::PlotOptions opt;
      opt.kind = kind == "band" ? pl::PlotKind::Band : pl::PlotKind::Line;
      opt.x = x;
      opt.y = columns;
      opt.title = title;
      opt.log_x = log_x;
      if (opt.kind == pl::PlotKind::Band) {
        const auto t = pl::load_table(table);
        for (const char* overlay : {"truth_mean"})
          if (std::find(t.columns.begin(), t.columns.end(), overlay) != t.columns.end()) opt.overlay.push_back(overlay);
      }
      pl::emit_plot(table, out, opt);
      std::cout << out << "\n";
      return kOk;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kStageFailure;
    }
  }

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (!cmds[i]->parsed()) continue;
    const auto& sc = stage_commands[i];
    pl::ExperimentConfig cfg;
    std::vector<std::string> stages = sc.stages;
    try {
      cfg = load(commons[i], sc.name == "sample" ? method : "");
      if (sc.name == "demo-l1") cfg.problem = pl::Problem::GaussianDemo;
      if (sc.name == "lcurve" && cfg.lcurve.grid.empty())
        throw ss::ValidationError("lcurve.grid", "must list at least one penalty weight");
      if (stages.empty()) stages = pl::default_stages(cfg);
      const auto catalog = pl::stage_catalog(cfg);
      for (const auto& s : stages)
        if (std::none_of(catalog.begin(), catalog.end(), [&](const pl::StageDef& d) { return d.name == s; }))
          throw ss::ValidationError(s == "sparsify" ? "regularizer.p" : "problem",
                                    "stage '" + s + "' does not apply to this configuration");
    } catch (const ss::ParseError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    } catch (const ss::ValidationError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    }
    try {
      report(pl::run_stages(cfg, cfg.output, stages), cfg.output);
      return kOk;
    } catch (const pl::StageFailure& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kStageFailure;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kStageFailure;
    }
  }
  return kConfigError;
}
