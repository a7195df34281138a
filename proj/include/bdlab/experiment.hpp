#pragma once
// Experiment runner: JSON config, solve-then-diagnose pipeline, CSV/JSON outputs
// and a manifest of file hashes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bdlab/suites.hpp"

namespace bdlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

using Coordinates = std::vector<double>;

struct BallSpec {
  Coordinates center;
  double radius = 0.0;
};

struct ExperimentConfig {
  int dimension = 2;
  Coordinates lo, hi;
  std::vector<int> cells;

  std::string integrand = "phi_a";
  double integrand_param = 1.5;

  /// shear, stretch, rigid, bump or custom-file.
  std::string datum = "shear";
  double datum_amplitude = 1.0;
  std::string datum_file;
  std::string datum_field;

  int j_max = 16;
  double tol_scale = 1.0;
  int max_newton = 200;
  bool allow_degenerate = false;
  std::uint64_t seed = 1;

  struct Excess {
    bool enabled = false;
    std::vector<Coordinates> centers;
    double radius = 0.25;
    double alpha_min = 0.25;
    double smallness = 1.0;
  } excess;

  struct Scaling {
    bool enabled = false;
    std::vector<BallSpec> balls;
    /// auto, luxemburg (n = 2) or sobolev (n ≥ 3).
    std::string branch = "auto";
    double spread_limit = 10.0;
  } scaling;

  struct Poincare {
    bool enabled = false;
    std::vector<std::string> families;
    int points_per_decade = 2;
    double lambda = 1.001;
    double spread_limit = 10.0;
  } poincare;

  struct SecondOrder {
    bool enabled = false;
    Coordinates center;
    double radius = 0.25;
    double factor = 3.0;
  } second_order;

  struct Comparison {
    bool enabled = false;
    std::vector<Coordinates> centers;
    double radius = 0.25;
    double alpha = 0.5;
    double lambda_con = 1.001;
    bool dev_alpha = false;
  } comparison;

  struct Uniqueness {
    bool enabled = false;
    double perturbation = 0.1;
    double tolerance = 1e-6;
  } uniqueness;

  /// Write the final field as solution.csv.
  bool write_solution = false;
  std::filesystem::path output_dir = "bdlab-out";
  /// FNV-1a hash of the canonical (key-sorted, fully defaulted) config.
  std::string hash;
};

/// Parses and validates a config. Errors name the offending key path; JSON syntax
/// errors carry the line and column. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct PhaseTiming {
  std::string phase;
  double seconds = 0.0;
};

struct OutputFile {
  std::string name;
  std::uintmax_t bytes = 0;
  std::string hash;
};

struct Assertion {
  std::string check;
  bool passed = true;
  std::string detail;
};

struct RunManifest {
  std::string config_hash;
  std::string version = kArtifactVersion;
  std::vector<PhaseTiming> timings;
  std::vector<OutputFile> files;
  std::vector<Assertion> assertions;

  bool all_passed() const;
  /// 0 when every assertion passed, 2 otherwise.
  int exit_code() const { return all_passed() ? 0 : 2; }
};

/// Solve ladder, enabled diagnostics, then report.json, CSV tables, plot.gp and
/// manifest.json under config.output_dir. Runtime failures propagate as exceptions.
RunManifest run_experiment(const ExperimentConfig& config);

/// Only the convolution-Poincaré sweep over the configured families (and the
/// datum itself), written to poincare_sweep.csv with its own report and manifest.
RunManifest run_poincare_sweep(const ExperimentConfig& config);

/// Plain-text table of suite results, one line per suite.
std::string format_suite_table(const std::vector<SuiteResult>& results);

}  // namespace bdlab
