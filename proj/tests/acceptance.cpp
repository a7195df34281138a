// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bdlab/experiment.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/regularity.hpp"
#include "bdlab/solver.hpp"
#include "bdlab/suites.hpp"
#include "oracles.hpp"

using namespace bdlab;
namespace fs = std::filesystem;

namespace {

using G2 = Grid<2>;
using P2 = G2::Point;
using Sym2 = SymMatrix<double, 2>;

constexpr double kQuadraticEnergyRel = 1e-8;
constexpr int kQuadraticMinStage = 8;
constexpr double kKornSlack = 1e-6;
constexpr int kKornTrials = 1000;
constexpr double kOrnsteinFloor = 2.0;
constexpr double kOrnsteinSlack = 1e-3;
constexpr double kPoincareSpread = 10.0;
constexpr double kPoincareExact = 1e-12;
constexpr double kUniquenessPerVolume = 1e-6;
constexpr double kSecondOrderFactor = 3.0;
constexpr double kSlopeTolerance = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string suite_detail(const SuiteResult& r) {
  std::string d = std::to_string(r.samples) + " checks, " + std::to_string(r.failures) + " failures";
  if (!r.witness.empty()) d += "; first: " + r.witness;
  return d;
}

Outcome suite(SuiteResult (*fn)(const SuiteOptions&)) {
  const SuiteResult r = fn(SuiteOptions{});
  return {r.passed(), suite_detail(r)};
}

Outcome quadratic_oracle() {
  const auto g = G2::Unit(32);
  const auto u0 = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 {
    return P2(std::sin(2 * x(0)) * x(1), x(0) * x(0) - 0.5 * x(1));
  });
  const auto f = quadratic_integrand();
  const double direct = bulk_energy(oracle::quadratic_minimizer(u0), f);
  const auto rep = run_viscosity_ladder(f, g, u0, 16);
  double worst = 0.0;
  for (const auto& s : rep.stages) {
    if (s.j >= kQuadraticMinStage) worst = std::max(worst, std::abs(s.plain_energy - direct) / direct);
  }
  return {worst <= kQuadraticEnergyRel, "max relative energy error at j >= 8: " + fmt(worst)};
}

Outcome korn() {
  bool ok = true;
  std::string d;
  for (int n : {32, 64}) {
    const KornReport r = korn_probe<2>(G2::Unit(n), kKornTrials);
    ok = ok && r.trials == kKornTrials && r.zero_boundary_max <= std::sqrt(2.0) + kKornSlack;
    d += std::to_string(n) + "^2 max " + fmt(r.zero_boundary_max) + "; ";
  }
  return {ok, d + "bound sqrt2 = " + fmt(std::sqrt(2.0))};
}

Outcome ornstein() {
  const auto trace = ornstein_probe<2>(G2::Unit(32), 300, 2);
  const double coarse = trace.levels.at(0).ratio, fine = trace.levels.at(1).ratio;
  return {coarse > kOrnsteinFloor && fine >= coarse - kOrnsteinSlack,
          "32^2 ratio " + fmt(coarse) + ", 64^2 ratio " + fmt(fine)};
}

Outcome poincare() {
  const auto g = G2::Unit(64);
  std::vector<double> maxima;
  std::string d;
  for (const auto& name : poincare_family_names()) {
    double m = 0.0;
    for (const auto& s : poincare_sweep(poincare_family<2>(name, g))) m = std::max(m, s.ratio);
    maxima.push_back(m);
    d += name + " " + fmt(m) + "; ";
  }
  std::vector<double> sorted = maxima;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double spread = sorted.back() / median;

  const auto rigid = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(1 - 2 * x(1), 0.5 + 2 * x(0)); });
  const auto affine = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 {
    return P2(0.7 * x(0) + 0.3 * x(1), 0.3 * x(0) - 1.1 * x(1));
  });
  double exact = 0.0;
  for (const auto& u : {rigid, affine}) {
    for (const auto& s : poincare_sweep(u)) exact = std::max(exact, s.lhs);
  }
  return {spread <= kPoincareSpread && exact <= kPoincareExact,
          d + "max/median " + fmt(spread) + "; rigid/affine max LHS " + fmt(exact)};
}

Outcome uniqueness() {
  const auto g = G2::Unit(64);
  const auto u0 = boundary_preset<2>("shear", g, 1.0);
  const auto f = phi_a(1.5);
  std::vector<DisplacementField<2>> finals;
  for (std::uint64_t seed : {101ULL, 202ULL}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    DisplacementField<2> warm = u0;
    for (int i = 0; i < g->num_nodes(); ++i) {
      if (!g->is_boundary_node(i)) warm.values().col(i) += P2(noise(rng), noise(rng));
    }
    finals.push_back(run_viscosity_ladder<2>(f, g, u0, 16, NewtonOptions{}, warm).final_field());
  }
  const double dist = strain_l1_distance(finals[0], finals[1]);
  const double limit = kUniquenessPerVolume * g->volume();
  return {dist <= limit, "||e(u1) - e(u2)||_1 = " + fmt(dist) + " (limit " + fmt(limit) + ")"};
}

std::pair<double, double> second_order_range(double amplitude) {
  const auto g = G2::Unit(64);
  const auto rep = run_viscosity_ladder(phi_a(1.5), g, boundary_preset<2>("shear", g, amplitude), 16);
  const double r1 = second_order_energy(rep.stages.front(), P2(0.5, 0.5), 0.25).ratio();
  double worst = 1.0;
  for (const auto& s : rep.stages) {
    const double r = second_order_energy(s, P2(0.5, 0.5), 0.25).ratio();
    worst = std::max({worst, r / r1, r1 / r});
  }
  return {r1, worst};
}

Outcome second_order() {
  const auto [r1, worst] = second_order_range(2.0);
  const auto [r1_unit, worst_unit] = second_order_range(1.0);
  return {worst <= kSecondOrderFactor, "shear amplitude 2: j=1 ratio " + fmt(r1) + ", max factor " + fmt(worst) +
                                           " (amplitude 1 for reference: factor " + fmt(worst_unit) + ")"};
}

Outcome excess_decay() {
  bool ok = true;
  std::string d;
  const auto g = G2::Unit(128);
  const P2 c(0.5, 0.5);
  Sym2 z0, M;
  z0(0, 0) = 0.2;
  z0(0, 1) = -0.3;
  M(0, 0) = 0.05;
  M(1, 1) = -0.02;
  M(0, 1) = 0.03;
  for (double alpha : {0.3, 0.5, 0.7}) {
    StrainField<2> e{g, {}};
    for (int q = 0; q < g->num_quad(); ++q) e.samples.push_back(Sym2(z0 + std::pow((g->quad_point(q) - c).norm(), alpha) * M));
    const auto u = DisplacementField<2>::FromFunction(g, [&](const P2& x) -> P2 {
      return P2(0.05 * std::pow((x - c).norm(), 1 + alpha), 0);
    });
    const double s_strain = decay_fit(excess(e, c, 0.4)).slope;
    const double s_field = decay_fit(excess(u, c, 0.4)).slope;
    ok = ok && std::abs(s_strain - 2 * alpha) <= kSlopeTolerance && std::abs(s_field - 2 * alpha) <= kSlopeTolerance;
    d += "alpha " + fmt(alpha) + ": " + fmt(s_strain) + "/" + fmt(s_field) + "; ";
  }
  const auto g64 = G2::Unit(64);
  const auto sol = run_viscosity_ladder(phi_a(1.5), g64, boundary_preset<2>("shear", g64, 1.0), 16);
  const double s_solver = decay_fit(excess(sol.final_field(), c, 0.5)).slope;
  ok = ok && s_solver > 0.0;
  return {ok, d + "solver slope " + fmt(s_solver)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "bdlab_acceptance_determinism";
  fs::remove_all(root);
  const std::string base = R"({
    "resolution": 64, "datum": {"preset": "shear", "amplitude": 2.0}, "solver": {"j_max": 16}, "seed": 7,
    "diagnostics": {
      "excess": {"radius": 0.5},
      "scaling": {"balls": [{"center": [0.5, 0.5], "radius": 0.08}, {"center": [0.45, 0.55], "radius": 0.06}]},
      "poincare": {},
      "second_order": {"radius": 0.25},
      "uniqueness": {}
    },
    "write_solution": true, "output": ")";
  std::vector<std::vector<std::pair<std::string, std::string>>> runs;
  for (int threads : {1, 2, 8, 1}) {
    set_worker_threads(threads);
    const fs::path out = root / ("t" + std::to_string(runs.size()) + "_" + std::to_string(threads));
    run_experiment(parse_config(base + out.string() + "\"}"));
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& entry : fs::directory_iterator(out)) {
      if (entry.path().extension() == ".csv") files.emplace_back(entry.path().filename().string(), slurp(entry.path()));
    }
    std::sort(files.begin(), files.end());
    runs.push_back(files);
  }
  set_worker_threads(0);
  bool ok = runs.front().size() >= 5;
  for (const auto& r : runs) ok = ok && r == runs.front();
  fs::remove_all(root);
  return {ok, std::to_string(runs.front().size()) + " CSV files compared over threads 1, 2, 8 and a repeat"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"v_function_suite", [] { return suite(v_function_suite); }},
      {"shifted_integrand_suite", [] { return suite(shifted_suite); }},
      {"ellipticity_certification", [] { return suite(ellipticity_suite); }},
      {"recession_oracle", [] { return suite(recession_suite); }},
      {"quadratic_oracle", quadratic_oracle},
      {"korn_probe", korn},
      {"ornstein_probe", ornstein},
      {"convolution_poincare_sweep", poincare},
      {"uniqueness_modulo_rigid", uniqueness},
      {"second_order_ladder", second_order},
      {"excess_decay", excess_decay},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
