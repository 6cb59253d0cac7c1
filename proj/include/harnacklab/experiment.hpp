#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "harnacklab/asymptotics.hpp"
#include "harnacklab/harnack.hpp"

namespace harnacklab {

enum class ExperimentKind {
  Simulate,
  Feasibility,
  VerifyHarnack,
  Elliptic,
  Asymptotics,
  LemmaCheck,
  CutoffCheck,
  Sweep,
};

std::string to_string(ExperimentKind kind);

enum class InitKind { Constant, Sine, File };

/// Flat key-value experiment description with all defaults resolved.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Simulate;

  ModelKind model = ModelKind::Circle;
  double size_x = 6.283185307179586;  // circumference / edge length / radius
  double size_y = 0.0;                // torus second edge (0 = square)
  int resolution = 256;
  int resolution_y = 0;               // torus second resolution (0 = same)
  std::string drift = "none";         // none | sin:<amp> | const:<val> | sinx:<amp>

  double a = 1.0, b = -1.0, p = 2.0;

  double m = 3.0;
  bool K_auto = true;
  double K = 0.0;                     // resolved at validation time

  Regime regime = Regime::DL;

  double final_time = 20.0;
  double cfl = 0.5;
  double dt = 0.0;                    // 0 = CFL-limited
  int record_stride = 0;
  double positivity_floor = 1e-12;
  double elliptic_tol = 1e-8;

  InitKind init = InitKind::Sine;
  double init_value = 0.5;
  double init_amplitude = 0.3;
  int init_mode = 1;
  std::string init_file;

  double ball_radius = kGlobalRadius; // verification / cutoff radius
  double x0 = 0.0, x0_y = 0.0;
  int ensemble = 1;

  int sweep_points = 13;
  double sweep_k_factor = 1.2;

  std::string out_dir = "out";
  std::uint64_t seed = 42;
  int threads = 0;                    // 0 = hardware; HARNACK_LAB_THREADS caps
  bool quiet = false;

  std::vector<std::string> warnings;            // non-fatal validation notes
  std::vector<std::pair<std::string, std::string>> echo;  // resolved key-values
};

/// Parses a flat key-value document (one `key = value` per line, #
/// comments), resolves defaults, validates, and echoes the result.
/// Throws ParseError with line diagnostics, ValidationError on violated
/// equation or regime hypotheses.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Re-runs validation after fields were overridden (CLI flags); refreshes
/// the echo, warnings and the auto-derived K.
ExperimentConfig revalidate(ExperimentConfig cfg);

struct RunReport {
  ExperimentKind kind = ExperimentKind::Simulate;
  std::vector<CheckResult> checks;
  std::map<std::string, double> fitted;
  std::vector<std::string> outputs;   // files written, relative to out_dir
  double wall_ms = 0.0;
  bool all_pass = true;
  std::vector<std::pair<std::string, std::string>> config_echo;
};

/// Dispatches to the named experiment, writes CSV/JSON artifacts under
/// config.out_dir, and returns the report. Exit-code mapping: 0 all checks
/// pass, 1 a check failed, 2 configuration or runtime error (exceptions).
RunReport run_experiment(const ExperimentConfig& config);

struct Preset {
  std::string name;
  std::string description;
  std::string config_text;
};

/// Built-in experiment catalog, one per verified estimate.
const std::vector<Preset>& presets();
ExperimentConfig preset_config(const std::string& name);

/// Deterministic text formatting used by every CSV writer.
std::string format_double(double v);

}  // namespace harnacklab
