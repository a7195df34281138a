#include "doctest.h"

#include <random>

#include "bdlab/symcalc.hpp"

using namespace bdlab;

using Sym2 = SymMatrix<double, 2>;
using Sym3 = SymMatrix<double, 3>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

TEST_CASE("packed storage reads both triangles from one slot") {
  Sym3 s;
  s(2, 0) = 4.0;
  CHECK(s(0, 2) == 4.0);
  CHECK(s.packed()(4) == 4.0);
  s(1, 1) = 2.0;
  CHECK(s.packed()(1) == 2.0);
  const Eigen::Matrix3d f = s.full();
  CHECK((f - f.transpose()).norm() == 0.0);
}

TEST_CASE("packed norm equals the Frobenius norm of the full matrix") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    Sym3 a, b;
    for (int k = 0; k < 6; ++k) {
      a.packed()(k) = g(rng);
      b.packed()(k) = g(rng);
    }
    CHECK(a.norm() == doctest::Approx(a.full().norm()).epsilon(1e-14));
    CHECK(frobenius_dot(a, b) == doctest::Approx((a.full().cwiseProduct(b.full())).sum()).epsilon(1e-13));
    CHECK(a.trace() == doctest::Approx(a.full().trace()));
  }
}

TEST_CASE("FromFull keeps the symmetric part") {
  Eigen::Matrix2d m;
  m << 1, 3, -1, 2;
  const Sym2 s = Sym2::FromFull(m);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(1, 1) == 2.0);
  CHECK(s(0, 1) == 1.0);
  Eigen::Matrix2d skew;
  skew << 0, 5, -5, 0;
  CHECK(Sym2::FromFull(skew).norm() == 0.0);
}

TEST_CASE("sym_product examples") {
  const Sym2 s = sym_product<double, 2>(Vec2(1, 0), Vec2(0, 1));
  CHECK(s(0, 0) == 0.0);
  CHECK(s(1, 1) == 0.0);
  CHECK(s(0, 1) == 0.5);
  CHECK(s.squaredNorm() == doctest::Approx(0.5));

  const Sym3 d = sym_product<double, 3>(Vec3(1, 2, 3), Vec3(1, 2, 3));
  CHECK(d(1, 2) == 6.0);
  CHECK(d.norm() == doctest::Approx(14.0));  // |a|² for a ⊙ a

  const Vec3 a(1, -2, 0.5), b(0.3, 4, -1);
  CHECK(sym_product<double, 3>(a, b) == sym_product<double, 3>(b, a));
  // ε of x ↦ (a·x) b is a ⊙ b.
  const Eigen::Matrix3d grad = b * a.transpose();
  CHECK((sym_product<double, 3>(a, b).full() - 0.5 * (grad + grad.transpose())).norm() < 1e-15);
}

TEST_CASE("V function values") {
  CHECK(v_function(1.0) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-15));
  CHECK(v_function(3.0) == doctest::Approx(std::sqrt(10.0) - 1.0).epsilon(1e-15));
  CHECK(v_function(0.0) == 0.0);
  // No cancellation: V(t) = t²/2 − t⁴/8 + ...
  CHECK(v_function(1e-8) == doctest::Approx(5e-17).epsilon(1e-12));
  Sym2 z;
  z(0, 1) = 1.0;  // |z|² = 2
  CHECK(v_function(z) == doctest::Approx(std::sqrt(3.0) - 1.0));
  CHECK(v_quadratic_constant(0.0) == 2.0);
}

TEST_CASE("rigid deformation parameters round trip") {
  RigidDeformation<double, 3>::Params p;
  p << 1, 2, 3, 0.1, -0.2, 0.3;
  const auto r = RigidDeformation<double, 3>::FromParams(p);
  CHECK((r.params() - p).norm() == 0.0);
  CHECK((r.skew() + r.skew().transpose()).norm() == 0.0);
  CHECK(r(Vec3::Zero()) == Vec3(1, 2, 3));
  Eigen::Matrix3d bad = Eigen::Matrix3d::Zero();
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS((RigidDeformation<double, 3>(bad, Vec3::Zero())), DomainError);
}

TEST_CASE("ball lattice mass approximates the ball volume") {
  const auto b2 = ball_lattice<double, 2>(Vec2(0.3, -1), 0.5, 200);
  CHECK(b2.mass() == doctest::Approx(M_PI * 0.25).epsilon(1e-3));
  const auto b3 = ball_lattice<double, 3>(Vec3::Zero(), 1.0, 60);
  CHECK(b3.mass() == doctest::Approx(4.0 * M_PI / 3.0).epsilon(5e-3));
  for (const auto& x : b2.points) CHECK((x - Vec2(0.3, -1)).norm() <= 0.5);
}

TEST_CASE("rigid projection reproduces rigid fields") {
  RigidDeformation<double, 3>::Params p;
  p << -0.5, 2, 1, 0.7, 0.2, -1.1;
  const auto r = RigidDeformation<double, 3>::FromParams(p);
  const auto ball = ball_lattice<double, 3>(Vec3(1, 1, 1), 0.7, 12);
  std::vector<Vec3> values;
  for (const auto& x : ball.points) values.push_back(r(x));
  const auto pr = project_rigid<double, 3>(ball, values);
  CHECK((pr.params() - p).norm() < 1e-12);
}

TEST_CASE("rigid projection is L2-orthogonal") {
  const auto ball = ball_lattice<double, 2>(Vec2(0, 0), 1.0, 40);
  std::vector<Vec2> values;
  for (const auto& x : ball.points) values.emplace_back(x(0) * x(0) + std::sin(3 * x(1)), x(0) * x(1) - 0.3);
  const auto pr = project_rigid<double, 2>(ball, values);
  // Residual is orthogonal to every rigid basis field.
  for (int k = 0; k < kRigidDim<2>; ++k) {
    RigidDeformation<double, 2>::Params e = RigidDeformation<double, 2>::Params::Zero();
    e(k) = 1.0;
    const auto basis = RigidDeformation<double, 2>::FromParams(e);
    double ip = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      ip += ball.weights[i] * (values[i] - pr(ball.points[i])).dot(basis(ball.points[i]));
    }
    CHECK(std::abs(ip) < 1e-12);
  }
}

TEST_CASE("rigid projection rejects degenerate samples") {
  // In 3D the rotation about the common line is invisible on collinear points.
  WeightedSamples<double, 3> line;
  for (int i = 0; i < 10; ++i) {
    line.points.emplace_back(i, 2.0 * i, -1.0 * i);
    line.weights.push_back(1.0);
  }
  std::vector<Vec3> values(10, Vec3(1, 0, 0));
  CHECK_THROWS_AS((project_rigid<double, 3>(line, values)), SingularityError);
  values.pop_back();
  CHECK_THROWS_AS((project_rigid<double, 3>(line, values)), DomainError);

  // In 2D a line still determines translation and rotation.
  WeightedSamples<double, 2> line2;
  std::vector<Vec2> values2;
  for (int i = 0; i < 10; ++i) {
    line2.points.emplace_back(i, 2.0 * i);
    line2.weights.push_back(1.0);
    values2.emplace_back(1.0 - 0.5 * 2.0 * i, 0.5 * i);
  }
  const auto pr = project_rigid<double, 2>(line2, values2);
  CHECK(pr.skew()(0, 1) == doctest::Approx(-0.5));
  CHECK(pr.shift()(0) == doctest::Approx(1.0));
}

TEST_CASE("rigid scaling check for a translation and a rotation") {
  const auto ball = ball_lattice<double, 2>(Vec2(0, 0), 1.0, 100);
  RigidDeformation<double, 2>::Params p;
  p << 3, 4, 0;
  const auto tr = rigid_scaling_check<double, 2>(RigidDeformation<double, 2>::FromParams(p), ball, 1.0, 2.0);
  CHECK(tr.lq_mean == doctest::Approx(5.0));
  CHECK(tr.gradient_term == 0.0);
  REQUIRE(tr.ratio);
  CHECK(*tr.ratio == doctest::Approx(1.0));

  // Rotation about the center: |π(x)| = ω|x|, mean over the unit disc is 2ω/3.
  p << 0, 0, 1;
  const auto rot = rigid_scaling_check<double, 2>(RigidDeformation<double, 2>::FromParams(p), ball, 1.0, 1.0);
  CHECK(rot.l1_mean == doctest::Approx(2.0 / 3.0).epsilon(1e-3));
  CHECK(rot.gradient_term == doctest::Approx(std::sqrt(2.0)));

  const auto zero = rigid_scaling_check<double, 2>(RigidDeformation<double, 2>(), ball, 1.0, 2.0);
  CHECK(!zero.ratio);
}
