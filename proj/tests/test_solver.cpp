#include "doctest.h"

#include "bdlab/solver.hpp"
#include "oracles.hpp"

using namespace bdlab;

using G2 = Grid<2>;
using P2 = G2::Point;

namespace {

DisplacementField<2> smooth_datum(std::shared_ptr<const G2> g) {
  return DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 {
    return P2(std::sin(2 * x(0)) * x(1), x(0) * x(0) - 0.5 * x(1));
  });
}

}  // namespace

TEST_CASE("stage tolerance schedule") {
  CHECK(stage_tolerance(1) == 1e-8);
  CHECK(stage_tolerance(1000) == 1e-8);
  CHECK(stage_tolerance(10000) == doctest::Approx(1e-9).epsilon(1e-12));
  CHECK(stage_tolerance(1, 0.5) == 5e-9);
}

TEST_CASE("quadratic stage matches the direct linear solve") {
  const auto g = G2::Unit(16);
  const auto u0 = smooth_datum(g);
  const auto direct = oracle::quadratic_minimizer(u0);
  const DirichletProblem<2> problem(g);
  const auto f = quadratic_integrand();
  const auto stage = solve_stage(f, problem, u0, 1, viscosity_normalizer(problem, u0));
  CHECK((stage.field.values() - direct.values()).norm() <= 1e-10 * direct.values().norm());
  CHECK(stage.plain_energy == doctest::Approx(bulk_energy(direct, f)).epsilon(1e-12));
  CHECK(el_residual(problem, direct, f) <= 1e-10);
  CHECK(stage.el_residual <= stage.tolerance);

  // Every ladder stage has the same minimizer.
  const auto rep = run_viscosity_ladder(f, g, u0, 8);
  REQUIRE(rep.stages.size() == 4);
  for (const auto& s : rep.stages) {
    CHECK(s.plain_energy == doctest::Approx(bulk_energy(direct, f)).epsilon(1e-10));
  }
}

TEST_CASE("stage energy identity and monotone energy trace") {
  const auto g = G2::Unit(12);
  const auto u0 = boundary_preset<2>("shear", g, 1.0);
  const DirichletProblem<2> problem(g);
  const auto f = phi_a(1.5);
  const double a1 = viscosity_normalizer(problem, u0);
  CHECK(a1 >= 1.0);
  const auto stage = solve_stage(f, problem, u0, 2, a1);
  CHECK(stage.weight == doctest::Approx(1.0 / (2 * a1 * 4)));
  const double identity = stage.plain_energy + stage.weight * stage.regularization_mass;
  CHECK(stage.energy == doctest::Approx(identity).epsilon(1e-12));
  CHECK(problem.energy(stage.integrand, u0) ==
        doctest::Approx(problem.energy(f, u0) + stage.weight * problem.regularization_mass(u0)).epsilon(1e-12));
  for (std::size_t k = 1; k < stage.energy_trace.size(); ++k) {
    CHECK(stage.energy_trace[k] <= stage.energy_trace[k - 1]);
  }
  CHECK(stage.field.boundary_mismatch(u0) == 0.0);
}

TEST_CASE("rigid datum is a fixed point of every stage") {
  const auto g = G2::Unit(10);
  const auto u0 = boundary_preset<2>("rigid", g, 0.7);
  for (const auto& f : {phi_a(1.5), area_integrand(), m_big_p(2.0)}) {
    const auto rep = run_viscosity_ladder(f, g, u0, 4);
    for (const auto& s : rep.stages) {
      CHECK((s.field.values() - u0.values()).cwiseAbs().maxCoeff() < 1e-12);
      const double fj0 = s.integrand.value(SymMatrix<double, 2>::Zero());
      CHECK(s.energy == doctest::Approx(g->volume() * fj0).epsilon(1e-12));
      CHECK(s.newton_iterations == 0);
    }
    const DirichletProblem<2> problem(g);
    CHECK(el_residual(problem, u0, f) < 1e-13);
    CHECK(rep.relaxed_energy == doctest::Approx(f.value(SymMatrix<double, 2>::Zero())));
  }
}

TEST_CASE("Euler-Lagrange residual grows linearly in a perturbation") {
  const auto g = G2::Unit(12);
  const auto u0 = smooth_datum(g);
  const auto f = quadratic_integrand();
  const DirichletProblem<2> problem(g);
  const auto v = oracle::quadratic_minimizer(u0);
  const auto bump = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 {
    const double s = std::sin(M_PI * x(0)) * std::sin(M_PI * x(1));
    return P2(s, -0.5 * s);
  });
  const double r1 = el_residual(problem, v + 1e-3 * bump, f);
  const double r2 = el_residual(problem, v + 2e-3 * bump, f);
  CHECK(r1 > 1e-6);
  CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(1e-6));

  const auto fa = phi_a(1.5);
  const auto va = minimize(fa, problem, u0, 1e-11).field;
  const double s1 = el_residual(problem, va + 1e-4 * bump, fa);
  const double s2 = el_residual(problem, va + 2e-4 * bump, fa);
  CHECK(s2 / s1 == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("relaxed energy") {
  const auto g = G2::Unit(8);
  const auto f = area_integrand();
  const auto u0 = DisplacementField<2>::FromFunction(g, [](const P2&) -> P2 { return P2(1, 0); });
  const DisplacementField<2> zero(g);
  CHECK(relaxed_energy(zero, u0, f) == doctest::Approx(1.0 + 2.0 + std::sqrt(2.0)));
  const auto v = smooth_datum(g);
  CHECK(relaxed_energy(v, v, f) == doctest::Approx(bulk_energy(v, f)).epsilon(1e-14));
}

TEST_CASE("area energy is nonincreasing along the ladder") {
  const auto g = G2::Unit(16);
  const auto rep = run_viscosity_ladder(area_integrand(), g, boundary_preset<2>("shear", g, 1.0), 8);
  REQUIRE(rep.stages.size() == 4);
  for (std::size_t k = 1; k < rep.stages.size(); ++k) {
    CHECK(rep.stages[k].plain_energy <= rep.stages[k - 1].plain_energy + 1e-10);
  }
  for (std::size_t k = 0; k < rep.stages.size(); ++k) {
    CHECK(rep.energy_gaps[k] == doctest::Approx(rep.stages[k].energy - rep.stages[k].plain_energy));
    CHECK(rep.stages[k].j == 1 << k);
  }
}

TEST_CASE("Cauchy differences contract for Phi_1.5 with shear data") {
  const auto g = G2::Unit(24);
  const auto rep = run_viscosity_ladder(phi_a(1.5), g, boundary_preset<2>("shear", g, 1.0), 16);
  REQUIRE(rep.cauchy_differences.size() == 4);
  CHECK(rep.cauchy_differences[3] < rep.cauchy_differences[2]);
  CHECK(l1_distance(rep.stages[4].field, rep.stages[3].field) == doctest::Approx(rep.cauchy_differences[3]));
}

TEST_CASE("second-order energy") {
  const auto g = G2::Unit(32);
  const P2 c(0.5, 0.5);
  const auto affine = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(2 * x(0) - x(1), 3 * x(1)); });
  CHECK(second_order_energy<2>(phi_a(1.5), affine, c, 0.2, 2.0, 1).lhs < 1e-24);

  // u = (x², 0): cell-mean strain diag(2x, 0) has forward differences diag(2, 0) along x,
  // and f″ = 2 Id gives LHS = 2·4·|B|.
  const auto para = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(x(0) * x(0), 0); });
  const auto s = second_order_energy<2>(quadratic_integrand(), para, c, 0.2, 2.0, 1);
  CHECK(s.lhs == doctest::Approx(8.0 * M_PI * 0.04).epsilon(0.05));
  CHECK(s.rhs > 0.0);
  CHECK(s.ratio() == doctest::Approx(s.lhs / s.rhs));
  CHECK_THROWS_AS(second_order_energy<2>(phi_a(1.5), para, P2(0.3, 0.5), 0.2, 2.0, 1), DomainError);
}

TEST_CASE("solver guards") {
  const auto g = G2::Unit(8);
  const auto u0 = boundary_preset<2>("shear", g, 1.0);
  CHECK_THROWS_AS(run_viscosity_ladder(m_small_p(1.5), g, u0, 2), PreconditionError);
  NewtonOptions opts;
  opts.allow_degenerate = true;
  const auto rep = run_viscosity_ladder(m_small_p(2.0), g, u0, 2, opts);
  CHECK(rep.stages.size() == 2);
  CHECK_THROWS_AS(boundary_preset<2>("twist", g, 1.0), ConfigError);
  const auto bump = boundary_preset<2>("bump", g, 2.0);
  CHECK(bump.at(P2(0.5, 0.5))(1) == doctest::Approx(2.0));
  CHECK(boundary_preset<2>("stretch", g, 3.0).at(P2(0.5, 0.0))(0) == doctest::Approx(0.75));
}

TEST_CASE("active-cell mask keeps inactive nodes fixed") {
  const auto g = G2::Unit(8);
  std::vector<char> active(g->num_cells(), 0);
  for (int c = 0; c < g->num_cells(); ++c) {
    if ((g->cell_center(c) - P2(0.5, 0.5)).norm() < 0.3) active[c] = 1;
  }
  const DirichletProblem<2> problem(g, active);
  CHECK(problem.num_free() > 0);
  CHECK(problem.num_free() < 2 * 49);
  double vol = 0.0;
  for (char a : active) vol += a ? g->cell_volume() : 0.0;
  CHECK(problem.volume() == doctest::Approx(vol));
  const auto u0 = smooth_datum(g);
  const auto s = minimize(quadratic_integrand(), problem, u0, 1e-10);
  for (int i = 0; i < g->num_nodes(); ++i) {
    bool inner = true;
    for (int c = 0; c < g->num_cells(); ++c) {
      for (int nd : g->cell_nodes(c)) {
        if (nd == i && !active[c]) inner = false;
      }
    }
    if (!inner) CHECK((s.field.values().col(i) - u0.values().col(i)).norm() == 0.0);
  }
}
