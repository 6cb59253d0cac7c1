#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "harnacklab/experiment.hpp"

using namespace harnacklab;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  long seed = -1;
  int resolution = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file");
  cmd->add_option("--preset", opts.preset_name, "built-in preset name");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "seed for randomized ensembles");
  cmd->add_option("--resolution", opts.resolution, "override grid resolution");
  cmd->add_flag("--quiet", opts.quiet, "suppress per-check output");
}

int run(ExperimentKind kind, const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.preset_name.empty()) {
    cfg = preset_config(opts.preset_name);
  } else if (!opts.config_path.empty()) {
    cfg = parse_config_file(opts.config_path);
  } else {
    std::cerr << "error: provide --config or --preset\n";
    return 2;
  }
  cfg.kind = kind;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.resolution > 0) {
    cfg.resolution = opts.resolution;
    cfg.resolution_y = 0;
  }
  if (opts.quiet) cfg.quiet = true;
  cfg = revalidate(std::move(cfg));

  const RunReport report = run_experiment(cfg);
  if (!cfg.quiet) {
    for (const auto& w : cfg.warnings) std::cout << "warning: " << w << '\n';
    for (const auto& c : report.checks) {
      if (!c.ran) continue;
      std::printf("%-28s %s  statistic=%.6g", c.name.c_str(),
                  c.pass ? "PASS" : "FAIL", c.statistic);
      if (c.tolerance != 0.0) std::printf("  tolerance=%.6g", c.tolerance);
      if (!c.detail.empty()) std::printf("  (%s)", c.detail.c_str());
      std::printf("\n");
    }
    std::cout << "report: " << cfg.out_dir << "/report.json  ("
              << static_cast<long>(report.wall_ms) << " ms)\n";
  }
  return report.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for a reaction-diffusion gradient-estimate suite"};
  app.require_subcommand(1);

  struct Sub {
    ExperimentKind kind;
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {ExperimentKind::Simulate, "simulate", "integrate the equation and export the run"},
      {ExperimentKind::Feasibility, "feasibility", "search (gamma, delta) for a regime"},
      {ExperimentKind::VerifyHarnack, "verify-harnack",
       "fit the empirical constant of the gradient bound"},
      {ExperimentKind::Elliptic, "elliptic", "steady state and elliptic estimate"},
      {ExperimentKind::Asymptotics, "asymptotics", "long-time behavior checks"},
      {ExperimentKind::LemmaCheck, "lemma-check",
       "discrete residual of the key inequality"},
      {ExperimentKind::CutoffCheck, "cutoff-check", "cutoff profile properties"},
      {ExperimentKind::Sweep, "sweep", "feasibility region over a K ladder"},
  };

  CommonOpts opts[8];
  for (int i = 0; i < 8; ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, opts[i]);
  }
  CLI::App* presets_cmd = app.add_subcommand("presets", "list the built-in experiments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets_cmd->parsed()) {
      for (const auto& p : presets()) {
        ExperimentKind kind = preset_config(p.name).kind;
        std::printf("%-22s %-14s %s\n", p.name.c_str(), to_string(kind).c_str(),
                    p.description.c_str());
      }
      return 0;
    }
    for (int i = 0; i < 8; ++i) {
      if (app.get_subcommand(subs[i].name)->parsed()) return run(subs[i].kind, opts[i]);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
