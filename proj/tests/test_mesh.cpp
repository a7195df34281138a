#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "bdlab/field_io.hpp"
#include "bdlab/integrands.hpp"
#include "bdlab/mesh.hpp"

using namespace bdlab;

using G2 = Grid<2>;
using G3 = Grid<3>;
using P2 = G2::Point;
using P3 = G3::Point;

namespace {

DisplacementField<2> random_zero_boundary(std::shared_ptr<const G2> g, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  DisplacementField<2> u(g);
  for (int i = 0; i < g->num_nodes(); ++i) {
    if (!g->is_boundary_node(i)) u.values().col(i) = P2(n(rng), n(rng));
  }
  return u;
}

double squared_l2(const std::vector<Eigen::Matrix2d>& m, double w) {
  double s = 0.0;
  for (const auto& a : m) s += w * a.squaredNorm();
  return s;
}

}  // namespace

TEST_CASE("grid counts and geometry") {
  const auto g = G2::Make(P2(0, 0), P2(2, 1), G2::Multi(4, 2));
  CHECK(g->num_nodes() == 15);
  CHECK(g->num_cells() == 8);
  CHECK(g->num_dofs() == 30);
  CHECK(g->volume() == doctest::Approx(2.0));
  CHECK(g->boundary_nodes().size() == 12);
  CHECK((g->spacing() - P2(0.5, 0.5)).norm() == 0.0);
  CHECK(g->node_index(g->node_multi(7)) == 7);
  CHECK(g->distance_to_boundary(P2(1.0, 0.5)) == doctest::Approx(0.5));
  CHECK(g->distance_to_boundary(P2(-0.5, 0.5)) < 0.0);
  CHECK(g->boundary_faces().size() == 12);
  const auto [cell, ref] = g->locate(P2(1.25, 0.75));
  CHECK((g->cell_origin(cell) - P2(1.0, 0.5)).norm() < 1e-15);
  CHECK((ref - P2(0.5, 0.5)).norm() < 1e-15);
  CHECK_THROWS_AS(G2::Make(P2(0, 0), P2(1, 1), G2::Multi(0, 3)), InvalidParameter);
  CHECK_THROWS_AS(G2::Make(P2(0, 0), P2(0, 1), G2::Multi(2, 3)), InvalidParameter);

  const auto g3 = G3::Unit(3);
  CHECK(g3->num_nodes() == 64);
  CHECK(g3->boundary_nodes().size() == 64 - 8);
  double w = 0.0;
  for (int q = 0; q < G3::kCellQuad; ++q) w += g3->quad_weight();
  CHECK(w == doctest::Approx(g3->cell_volume()));
}

TEST_CASE("strain of affine and bilinear fields is exact") {
  const auto g = G3::Unit(4);
  Eigen::Matrix3d a;
  a << 1, 2, 0, -1, 0.5, 3, 0, 1, -2;
  const auto u = DisplacementField<3>::FromFunction(g, [&](const P3& x) -> P3 { return a * x + P3(1, 2, 3); });
  const auto e = symmetric_gradient(u);
  const auto exact = SymMatrix<double, 3>::FromFull(a);
  for (int q = 0; q < e.size(); ++q) CHECK((e[q] - exact).norm() < 1e-12);
  for (double d : divergence(u)) CHECK(d == doctest::Approx(a.trace()));

  const auto g2 = G2::Unit(5);
  const auto b = DisplacementField<2>::FromFunction(g2, [](const P2& x) -> P2 { return P2(x(0) * x(1), 0.0); });
  const auto grads = full_gradient(b);
  for (int q = 0; q < g2->num_quad(); ++q) {
    const P2 x = g2->quad_point(q);
    CHECK(grads[q](0, 0) == doctest::Approx(x(1)));
    CHECK(grads[q](0, 1) == doctest::Approx(x(0)));
  }
  CHECK((b.at(P2(0.33, 0.71)) - P2(0.33 * 0.71, 0)).norm() < 1e-14);
}

TEST_CASE("rigid fields have zero strain") {
  const auto g = G2::Unit(6);
  const auto u = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(1 - 2 * x(1), -3 + 2 * x(0)); });
  CHECK(symmetric_gradient(u).lp_norm(1.0) < 1e-13);
  CHECK(!korn_ratio_free(u));
}

TEST_CASE("Korn identity for zero-boundary fields") {
  // 2‖ε(φ)‖² = ‖∇φ‖² + ‖div φ‖² on H¹₀, exact for Q1 with the 2×2 Gauss rule.
  std::mt19937_64 rng(9);
  const auto g = G2::Unit(10);
  for (int t = 0; t < 5; ++t) {
    const auto phi = random_zero_boundary(g, rng);
    const double grad2 = squared_l2(full_gradient(phi), g->quad_weight());
    double div2 = 0.0;
    for (double d : divergence(phi)) div2 += g->quad_weight() * d * d;
    const double eps2 = std::pow(symmetric_gradient(phi).lp_norm(2.0), 2);
    CHECK(2 * eps2 == doctest::Approx(grad2 + div2).epsilon(1e-12));
    CHECK(korn_ratio_gradient(phi) <= std::sqrt(2.0) + 1e-12);
  }
  const auto rep = korn_probe<2>(G2::Unit(8), 50, 1);
  CHECK(rep.trials == 50);
  CHECK(rep.zero_boundary_max <= std::sqrt(2.0) + 1e-12);
  CHECK(rep.free_max >= 1.0);
}

TEST_CASE("Gauss-Green on the boundary faces") {
  const auto g = G2::Make(P2(-1, 0), P2(1, 0.5), G2::Multi(8, 4));
  const auto u = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 {
    return P2(std::sin(x(0)) + x(1) * x(1), std::exp(x(0) * x(1)));
  });
  double bulk = 0.0;
  for (double d : divergence(u)) bulk += g->quad_weight() * d;
  const double flux = face_integral(u, [](const P2&, const P2& val, const P2& nu) { return val.dot(nu); });
  CHECK(flux == doctest::Approx(bulk).epsilon(1e-12));
}

TEST_CASE("boundary penalty for a constant datum") {
  // f^∞ = |·|: faces with ν = ±e₁ contribute |e₁⊙e₁| = 1, faces with ν = ±e₂ contribute 1/√2.
  const auto g = G2::Unit(4);
  const DisplacementField<2> zero(g);
  const auto u0 = DisplacementField<2>::FromFunction(g, [](const P2&) -> P2 { return P2(1, 0); });
  CHECK(boundary_penalty(zero, u0, area_integrand()) == doctest::Approx(2.0 + std::sqrt(2.0)));
  CHECK(boundary_penalty(u0, u0, area_integrand()) == 0.0);
  CHECK(boundary_penalty(zero, u0, phi_a(2.0)) == doctest::Approx(M_PI / 2 * (2.0 + std::sqrt(2.0))));
}

TEST_CASE("discrete balls") {
  const auto g = G2::Unit(64);
  const auto b = discrete_ball(*g, P2(0.5, 0.5), 0.25);
  CHECK(b.volume == doctest::Approx(M_PI / 16).epsilon(0.02));
  CHECK(b.volume == doctest::Approx(b.quad.size() * g->quad_weight()));
  CHECK_THROWS_AS(discrete_ball(*g, P2(0.1, 0.5), 0.25), DomainError);
  const auto ann = discrete_annulus(*g, P2(0.5, 0.5), 0.1, 0.25);
  CHECK(ann.volume < b.volume);
  CHECK_THROWS_AS(discrete_annulus(*g, P2(0.5, 0.5), 0.3, 0.2), InvalidParameter);
}

TEST_CASE("mollifier stencils") {
  const auto g = G2::Unit(32);
  const double h = g->max_spacing();
  for (auto kind : {MollifierKind::Indicator, MollifierKind::Bump}) {
    const auto k = make_mollifier(*g, kind, 3 * h);
    double s = 0.0;
    for (double w : k.weights) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(k.support_radius(*g) <= 3 * h * (1 + 1e-12));
  }
  CHECK_THROWS_AS(make_mollifier(*g, MollifierKind::Bump, 0.5 * h), GridTooCoarse);
  CHECK_THROWS_AS(make_mollifier(*g, MollifierKind::Bump, 0.0), InvalidParameter);
}

TEST_CASE("double mollification reproduces rigid and affine fields away from the boundary") {
  const auto g = G2::Unit(32);
  const double eps = 3 * g->max_spacing();
  const auto r = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(0.2 - x(1), 1 + x(0)); });
  const auto a = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(2 * x(0) + x(1), -x(1)); });
  const auto kb = make_mollifier(*g, MollifierKind::Bump, eps);
  const auto ki = make_mollifier(*g, MollifierKind::Indicator, eps);
  for (const auto& u : {r, a}) {
    const auto m = mollify_twice(u, eps);
    for (int i = 0; i < g->num_nodes(); ++i) {
      if (g->distance_to_boundary(g->node_point(i)) < 2.5 * eps) continue;
      CHECK((m.values().col(i) - u.values().col(i)).norm() < 1e-13);
    }
    CHECK(stencil_complete(*g, kb, g->node_index(G2::Multi(16, 16))));
    CHECK(!stencil_complete(*g, ki, 0));
  }
}

TEST_CASE("transfer between grids keeps Q1 fields of the coarse grid") {
  const auto coarse = G2::Unit(4);
  const auto fine = coarse->refined(3);
  const auto u = DisplacementField<2>::FromFunction(coarse, [](const P2& x) -> P2 { return P2(x(0) * x(1), 1 - x(0)); });
  const auto v = transfer(u, fine);
  for (int i = 0; i < fine->num_nodes(); ++i) {
    CHECK((v.values().col(i) - u.at(fine->node_point(i))).norm() < 1e-14);
  }
  CHECK(v.grid().cells()(0) == 12);
}

TEST_CASE("L1 gradient ratio of a rotation plateau exceeds one") {
  const auto g = G2::Unit(16);
  const auto phi = rotation_plateau<2>(g, 2.0);
  for (int i : g->boundary_nodes()) CHECK(phi.values().col(i).norm() == 0.0);
  CHECK(l1_gradient_ratio(phi) > 1.0);
}

TEST_CASE("boundary imposition and field arithmetic") {
  const auto g = G2::Unit(4);
  const auto d = DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return x; });
  DisplacementField<2> u(g);
  u.impose_boundary(d);
  CHECK(u.boundary_mismatch(d) == 0.0);
  CHECK(u.values().col(g->node_index(G2::Multi(2, 2))).norm() == 0.0);
  const auto w = 2.0 * d - d;
  CHECK((w.values() - d.values()).norm() == 0.0);
  const DisplacementField<2> other(G2::Unit(5));
  CHECK_THROWS_AS(u.impose_boundary(other), DomainError);
}

TEST_CASE("field files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "bdlab_field_io_test";
  std::filesystem::create_directories(dir);
  const auto g = G2::Make(P2(-1, 0), P2(1, 2), G2::Multi(5, 3));
  FieldBundle<2> b{g, {"u", "v"}, {}};
  b.fields.push_back(DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(std::sin(x(0)), 1.0 / 3.0); }));
  b.fields.push_back(DisplacementField<2>::FromFunction(g, [](const P2& x) -> P2 { return P2(x(1), -x(0) * 1e-300); }));
  for (auto fmt : {FieldFormat::Csv, FieldFormat::F64le}) {
    const auto path = dir / (fmt == FieldFormat::Csv ? "f.csv" : "f.bin");
    write_fields(path, b, fmt);
    const auto r = read_fields<2>(path);
    REQUIRE(r.names == b.names);
    CHECK((r.grid->cells() == g->cells()).all());
    CHECK((r.grid->lo() - g->lo()).norm() == 0.0);
    for (int k = 0; k < 2; ++k) CHECK((r.fields[k].values() - b.fields[k].values()).norm() == 0.0);
  }
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "{not json\n";
  }
  CHECK_THROWS_AS(read_fields<2>(dir / "bad.csv"), ConfigError);
  CHECK_THROWS_AS(read_fields<2>(dir / "missing.csv"), ConfigError);
  std::filesystem::remove_all(dir);
}
