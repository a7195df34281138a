// Command-line front end: run, selftest, poincare-sweep, ornstein.

#include <cstdio>
#include <iostream>
#include <regex>

#include <CLI11.hpp>

#include "bdlab/experiment.hpp"
#include "bdlab/mesh.hpp"
#include "bdlab/parallel.hpp"

namespace {

int print_manifest(const bdlab::RunManifest& m, const bdlab::ExperimentConfig& c) {
  std::cout << "config " << m.config_hash << " -> " << c.output_dir.string() << "\n";
  for (const auto& a : m.assertions) {
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.check << ": " << a.detail << "\n";
  }
  for (const auto& t : m.timings) std::printf("  %-14s %8.3f s\n", t.phase.c_str(), t.seconds);
  return m.exit_code();
}

bdlab::Grid<2>::Multi parse_cells(const std::string& spec) {
  static const std::regex square(R"((\d+))"), rect(R"((\d+)x(\d+))");
  std::smatch m;
  if (std::regex_match(spec, m, square)) return bdlab::Grid<2>::Multi::Constant(std::stoi(m[1]));
  if (std::regex_match(spec, m, rect)) return {std::stoi(m[1]), std::stoi(m[2])};
  throw bdlab::ConfigError("grid must look like 32 or 32x48, got '" + spec + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for linear-growth functionals of the symmetric gradient"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: BDLAB_THREADS or hardware concurrency)");

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Solve the viscosity ladder and run the configured diagnostics");
  run->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Override the output directory");

  std::uint64_t seed = 20240607;
  bool inject = false;
  auto* self = app.add_subcommand("selftest", "Run the catalog inequality suites with fixed seeds");
  self->add_option("--seed", seed, "Base seed");
  self->add_flag("--inject-v-fault", inject)->group("");

  auto* sweep = app.add_subcommand("poincare-sweep", "Convolution-Poincare sweep over the field families");
  sweep->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Override the output directory");

  std::string grid_spec;
  int iterations = 300, levels = 2;
  auto* orn = app.add_subcommand("ornstein", "Maximize the L1 gradient / symmetric-gradient ratio");
  orn->add_option("grid", grid_spec, "Cells per axis, e.g. 32 or 32x48")->required();
  orn->add_option("--iterations", iterations, "Ascent iterations per level")->check(CLI::PositiveNumber);
  orn->add_option("--levels", levels, "Grid levels including refinements")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share the runtime-error exit code; --help still exits 0.
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (threads > 0) bdlab::set_worker_threads(threads);

  try {
    if (*run || *sweep) {
      bdlab::ExperimentConfig c = bdlab::load_config(config_path);
      if (!out_dir.empty()) c.output_dir = out_dir;
      const bdlab::RunManifest m = *run ? bdlab::run_experiment(c) : bdlab::run_poincare_sweep(c);
      return print_manifest(m, c);
    }
    if (*self) {
      bdlab::SuiteOptions opts;
      opts.seed = seed;
      opts.flip_v_lower_bound = inject;
      const auto results = bdlab::catalog_selftest(opts);
      std::cout << bdlab::format_suite_table(results);
      for (const auto& r : results) {
        if (!r.passed()) return 2;
      }
      return 0;
    }
    if (*orn) {
      const auto cells = parse_cells(grid_spec);
      const auto grid = bdlab::Grid<2>::Make(bdlab::Grid<2>::Point::Zero(), bdlab::Grid<2>::Point::Ones(), cells);
      const auto trace = bdlab::ornstein_probe<2>(grid, iterations, levels);
      for (const auto& l : trace.levels) {
        std::printf("%dx%d start %.6f best %.6f accepted %d\n", l.cells(0), l.cells(1), l.start_ratio, l.ratio,
                    l.accepted_steps);
      }
      return 0;
    }
  } catch (const bdlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
