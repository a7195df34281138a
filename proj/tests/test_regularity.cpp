#include "doctest.h"

#include "bdlab/regularity.hpp"
#include "bdlab/solver.hpp"
#include "oracles.hpp"

using namespace bdlab;

using G2 = Grid<2>;
using P2 = G2::Point;
using Sym2 = SymMatrix<double, 2>;

namespace {

StrainField<2> strain_from(std::shared_ptr<const G2> g, auto&& fn) {
  StrainField<2> e{g, {}};
  for (int q = 0; q < g->num_quad(); ++q) e.samples.push_back(fn(g->quad_point(q)));
  return e;
}

Sym2 sym(double a, double b, double c) {
  Sym2 s;
  s(0, 0) = a;
  s(1, 1) = b;
  s(0, 1) = c;
  return s;
}

DisplacementField<2> smooth(std::shared_ptr<const G2> g) {
  return DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 {
    return P2(0.3 * std::sin(3 * x(0)) * x(1), 0.2 * x(0) * x(0) - 0.1 * std::cos(2 * x(1)));
  });
}

DisplacementField<2> rigid(std::shared_ptr<const G2> g) {
  return DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(0.4 - 1.3 * x(1), -2 + 1.3 * x(0)); });
}

}  // namespace

TEST_CASE("excess of an affine field vanishes") {
  const auto g = G2::Unit(128);
  const auto u = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(2 * x(0) + x(1), -x(1) + 3); });
  const auto prof = excess(u, P2(0.5, 0.5), 0.4);
  CHECK(prof.levels.size() >= 4);
  for (const auto& l : prof.levels) CHECK(l.phi < 1e-24);
  const auto fit = decay_fit(prof);
  CHECK(fit.exact);
  CHECK(fit.pass);
}

TEST_CASE("excess of a strain jump across the center line") {
  // ε = z₀ on one half, z₀ + δP on the other: both halves deviate by ±δP/2 from the mean.
  const auto g = G2::Unit(64);
  const Sym2 z0 = sym(0.3, -0.1, 0.2), P = sym(1, 2, -0.5);
  const double delta = 0.7;
  const auto e = strain_from(g, [&](const P2& x) { return x(0) > 0.5 ? Sym2(z0 + delta * P) : z0; });
  const auto ball = discrete_ball(*g, P2(0.5, 0.5), 0.25);
  Sym2 mean;
  const auto lvl = ball_excess(e, ball, &mean);
  CHECK((mean - Sym2(z0 + 0.5 * delta * P)).norm() < 1e-13);
  CHECK(lvl.phi == doctest::Approx(ball.volume * v_function(0.5 * delta * P.norm())).epsilon(1e-12));
  CHECK(lvl.phi_tilde == doctest::Approx(lvl.phi / ball.volume));
  CHECK(lvl.volume == doctest::Approx(M_PI * 0.0625).epsilon(0.02));
}

TEST_CASE("excess invariants") {
  const auto g = G2::Unit(64);
  const auto u = smooth(g);
  const P2 c(0.5, 0.5);
  const auto base = excess(u, c, 0.4);
  const auto moved = excess(u + rigid(g), c, 0.4);
  const auto doubled = excess(3.0 * u, c, 0.4);
  REQUIRE(base.levels.size() == moved.levels.size());
  for (std::size_t k = 0; k < base.levels.size(); ++k) {
    CHECK(base.levels[k].phi >= 0.0);
    CHECK(moved.levels[k].phi == doctest::Approx(base.levels[k].phi).epsilon(1e-12));
    CHECK(doubled.levels[k].phi <= 4 * 9 * base.levels[k].phi);
    CHECK(base.levels[k].radius == doctest::Approx(0.4 * std::pow(0.5, k)));
    CHECK(base.levels[k].radius >= 4 * g->max_spacing() * (1 - 1e-12));
  }
  CHECK_THROWS_AS(excess(u, P2(0.2, 0.5), 0.4), DomainError);
}

TEST_CASE("decay fit reproduces the Hoelder exponent of manufactured strains") {
  const auto g = G2::Unit(128);
  const P2 c(0.5, 0.5);
  const Sym2 z0 = sym(0.2, 0.1, -0.3), M = sym(0.05, -0.02, 0.03);
  for (double alpha : {0.3, 0.5, 0.7}) {
    const auto e = strain_from(g, [&](const P2& x) { return Sym2(z0 + std::pow((x - c).norm(), alpha) * M); });
    const auto fit = decay_fit(excess(e, c, 0.4), 0.25);
    CHECK(fit.slope == doctest::Approx(2 * alpha).epsilon(0.1 / (2 * alpha)));
    CHECK(fit.applicable);
    CHECK(fit.pass);
    CHECK(fit.points >= 4);

    const auto u = DisplacementField<2>::FromFunction(g, [&](const P2& x) -> P2 {
      return P2(0.05 * std::pow((x - c).norm(), 1 + alpha), 0);
    });
    CHECK(std::abs(decay_fit(excess(u, c, 0.4)).slope - 2 * alpha) <= 0.1);
  }
}

TEST_CASE("decay fit needs enough levels and honors the smallness threshold") {
  const auto g = G2::Unit(32);
  const auto u = smooth(g);
  CHECK_THROWS_AS(decay_fit(excess(u, P2(0.5, 0.5), 0.2)), PreconditionError);
  const auto big = DisplacementField<2>::FromFunction(G2::Unit(128), [](const P2& x) -> P2 {
    return P2(20 * std::sin(20 * x(0) * x(1)), 0);
  });
  const auto fit = decay_fit(excess(big, P2(0.5, 0.5), 0.4), 0.25, 1e-3);
  CHECK(!fit.applicable);
}

TEST_CASE("regularity predictor") {
  CHECK(RegularityPredictor{3, 1.2}.sobolev_exponent() == doctest::Approx(2.4));
  CHECK(RegularityPredictor{2, 1.5}.luxemburg_exponent() == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS((RegularityPredictor{2, 1.5}.sobolev_exponent()), PreconditionError);
  CHECK(!RegularityPredictor{2, 2.0}.valid());
  CHECK(RegularityPredictor{2, 1.9}.valid());
  CHECK(RegularityPredictor{3, 1.5}.second_order_exponent_bound() == doctest::Approx(1.0));
  CHECK(RegularityPredictor{3, 1.5}.singular_set_dimension_bound() == doctest::Approx(2.0));
  for (int n : {3, 4, 5}) {
    for (double a = 1.01; a < 3.0; a += 0.01) {
      const RegularityPredictor p{n, a};
      CHECK((p.sobolev_exponent() > 1.0) == (a < 1.0 + 2.0 / n));
      CHECK((p.second_order_exponent_bound() > 1.0) == (a < double(n) / (n - 1)));
    }
  }
}

TEST_CASE("Luxemburg norm") {
  // N equal samples c with mass m: λ = c / ln(1 + 1/(N m))^{1/β}.
  for (double beta : {1.0 / 3.0, 0.5, 1.0, 2.0}) {
    const int N = 37;
    const double m = 0.01, c = 2.5;
    const std::vector<double> s(N, c);
    const double exact = c / std::pow(std::log(1 + 1 / (N * m)), 1 / beta);
    CHECK(luxemburg_norm(s, beta, m) == doctest::Approx(exact).epsilon(1e-10));
    CHECK(luxemburg_norm(s, std::vector<double>(N, m), beta) == doctest::Approx(exact).epsilon(1e-10));
  }
  const std::vector<double> s = {0.1, 3.0, 0.0, 1.7, 2.2};
  const double base = luxemburg_norm(s, 0.5, 0.2);
  std::vector<double> scaled, larger;
  for (double x : s) {
    scaled.push_back(7 * x);
    larger.push_back(x + 0.3);
  }
  CHECK(luxemburg_norm(scaled, 0.5, 0.2) == doctest::Approx(7 * base).epsilon(1e-11));
  CHECK(luxemburg_norm(larger, 0.5, 0.2) >= base);
  CHECK(luxemburg_norm(std::vector<double>(4, 0.0), 0.5, 0.2) == 0.0);
}

TEST_CASE("Sobolev scaling check") {
  const auto g = G2::Unit(64);
  const std::vector<std::pair<P2, double>> balls = {{P2(0.5, 0.5), 0.08}, {P2(0.45, 0.55), 0.05}};
  const auto rep = sobolev_scaling_check(rigid(g), 1.5, balls);
  CHECK(rep.luxemburg);
  CHECK(rep.exponent == doctest::Approx(1.0 / 3.0));
  REQUIRE(rep.balls.size() == 2);
  for (const auto& b : rep.balls) {
    CHECK(std::isfinite(b.ratio));
    CHECK(b.lhs > 0.0);
    CHECK(b.rhs >= 1.0);
  }
  const auto s = sobolev_scaling_check(smooth(g), phi_a(1.5), balls);
  CHECK(s.a == 1.5);
  CHECK(s.max_ratio == doctest::Approx(std::max(s.balls[0].ratio, s.balls[1].ratio)));
  CHECK_THROWS_AS(sobolev_scaling_check(smooth(g), 2.0, balls), PreconditionError);
  CHECK_THROWS_AS(sobolev_scaling_check(smooth(g), area_integrand(), balls), PreconditionError);
  CHECK_THROWS_AS((sobolev_scaling_check(smooth(g), 1.5, {{P2(0.5, 0.5), 0.15}})), DomainError);

  const auto g3 = Grid<3>::Unit(16);
  const auto u3 = DisplacementField<3>::FromFunction(g3, [](const Grid<3>::Point& x) -> Grid<3>::Point {
    return Grid<3>::Point(x(1) * x(2), 0.1 * x(0), 0);
  });
  const auto r3 = sobolev_scaling_check(u3, 1.2, {{Grid<3>::Point::Constant(0.5), 0.09}});
  CHECK(!r3.luxemburg);
  CHECK(r3.exponent == doctest::Approx(2.4));
}

TEST_CASE("convolution-Poincare check") {
  const auto g = G2::Unit(32);
  const double h = g->max_spacing();
  const auto affine = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 {
    return P2(2 * x(0) + 0.5 * x(1) + 1, 0.5 * x(0) - x(1));
  });
  for (const auto& u : {rigid(g), affine}) {
    for (double eps : {2 * h, 4 * h}) {
      for (double load : {0.1, 10.0, 1000.0}) CHECK(convolution_poincare_check(u, eps, load).lhs <= 1e-12);
    }
  }
  const auto s = convolution_poincare_check(smooth(g), 2 * h, 5.0);
  CHECK(s.lhs > 0.0);
  const double le = s.load * s.eps;
  CHECK(s.ratio == doctest::Approx(s.lhs / (std::max(le, le * le) * s.rhs_integral)));

  const auto sweep = poincare_sweep(smooth(g), 2);
  CHECK(sweep.size() == 2 * 9);
  for (const auto& p : sweep) {
    CHECK(std::isfinite(p.ratio));
    CHECK(p.load * p.eps >= 1e-2 * (1 - 1e-12));
    CHECK(p.load * p.eps <= 1e2 * (1 + 1e-12));
  }
  for (const auto& name : poincare_family_names()) CHECK(poincare_family<2>(name, g).values().norm() > 0.0);
  CHECK_THROWS_AS(poincare_family<2>("fractal", g), ConfigError);
}

TEST_CASE("mollification scale and comparison diagnostics") {
  CHECK(mollification_scale(2, 1.0, 1e-4, 0.5, 1.001) == doctest::Approx(1e-1 / (48 * std::sqrt(2.0) * 1.001)));
  CHECK(mollification_scale(2, 1.0, 1e-4, 0.5) == doctest::Approx(1.4716e-3).epsilon(1e-4));

  const auto g = G2::Unit(64);
  const auto affine = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(x(1), 2 * x(0)); });
  const auto d = mollification_parameters(affine, P2(0.5, 0.5), 0.4, 0.5);
  CHECK(d.phi_tilde <= kExcessZero);
  CHECK(d.t_alpha == 0.0);

  const auto wild = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(3 * std::sin(30 * x(1)), 0); });
  CHECK_THROWS_AS(mollification_parameters(wild, P2(0.5, 0.5), 0.4, 0.5), PreconditionError);
  CHECK_THROWS_AS(mollification_parameters(smooth(g), P2(0.5, 0.5), 0.4, 0.5), GridTooCoarse);

  const auto fine = G2::Unit(256);
  const auto shear = boundary_preset<2>("shear", fine, 3.0);
  const auto c = mollification_parameters(shear, P2(0.5, 0.5), 0.45, 0.5);
  CHECK(c.eps > 0.0);
  CHECK(c.eps < 0.45);
  CHECK(c.eps == doctest::Approx(mollification_scale(2, 0.45, c.phi_tilde, 0.5)));
  CHECK(c.t_alpha == doctest::Approx(c.sup_term + c.holder_term));
  CHECK(c.predicted == doctest::Approx(std::pow(c.phi_tilde, 0.5 / 4.0)));
}

TEST_CASE("Hoelder data is monotone in the radius") {
  const auto g = G2::Unit(64);
  // ε = diag(x₁, 0): cell-mean differences equal the offset, so the α = 1 seminorm is 1.
  const auto u = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(0.5 * x(0) * x(0), 0); });
  const Sym2 xi0 = sym(0.5, 0, 0);
  const auto [sup, semi] = holder_data(u, xi0, P2(0.5, 0.5), 0.3, 1.0);
  CHECK(semi == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sup == doctest::Approx(0.3).epsilon(0.05));
  double last = 0.0;
  for (double r : {0.05, 0.1, 0.2, 0.4}) {
    const auto [s, h] = holder_data(smooth(g), xi0, P2(0.5, 0.5), r, 0.5);
    const double t = s + std::pow(2.0 * r, 0.5) * h;
    CHECK(t >= last);
    last = t;
  }
}

TEST_CASE("dev_alpha against the dense quadratic solve") {
  const auto g = G2::Unit(16);
  const P2 x0(0.5, 0.5);
  const double r = 0.3;
  std::vector<char> mask(g->num_cells());
  for (int c = 0; c < g->num_cells(); ++c) mask[c] = (g->cell_center(c) - x0).norm() <= r;
  const auto v = smooth(g);
  const Eigen::SparseMatrix<double> K = oracle::quadratic_stiffness(*g, mask);
  const auto best = oracle::quadratic_minimizer(v, mask);
  const double exact = v.dofs().dot(K * Eigen::VectorXd(v.dofs())) - best.dofs().dot(K * Eigen::VectorXd(best.dofs()));
  const auto f = quadratic_integrand();
  CHECK(dev_alpha(v, f, x0, r) == doctest::Approx(exact).epsilon(1e-8));
  CHECK(std::abs(dev_alpha(best, f, x0, r)) <= 1e-10);
  CHECK(dev_alpha(v + rigid(g), f, x0, r) == doctest::Approx(dev_alpha(v, f, x0, r)).epsilon(1e-8));
  const auto fa = phi_a(1.5);
  CHECK(dev_alpha(v, fa, x0, r) >= -1e-10);
  CHECK(dev_alpha(v + rigid(g), fa, x0, r) == doctest::Approx(dev_alpha(v, fa, x0, r)).epsilon(1e-6));
  CHECK_THROWS_AS(dev_alpha(v, f, P2(0.1, 0.5), r), DomainError);
}
