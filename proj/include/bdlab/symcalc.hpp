#pragma once
// Small-dimension tensor algebra on symmetric matrices, rigid deformations
// and the reference function V(z) = sqrt(1+|z|^2) - 1.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "bdlab/errors.hpp"

namespace bdlab {

/// Symmetric Dim x Dim matrix stored as its upper triangle.
///
/// Packed order is the diagonal first, then the strict upper triangle row by
/// row: (0,0),(1,1)[,(2,2)],(0,1)[,(0,2),(1,2)]. Both (i,j) and (j,i) read
/// the same slot, so symmetry holds bit-for-bit.
template <class Scalar, int Dim>
class SymMatrix {
  static_assert(Dim == 2 || Dim == 3, "SymMatrix supports n = 2 and n = 3");

 public:
  static constexpr int kSize = Dim * (Dim + 1) / 2;
  using Packed = Eigen::Matrix<Scalar, kSize, 1>;
  using Full = Eigen::Matrix<Scalar, Dim, Dim>;
  using Vector = Eigen::Matrix<Scalar, Dim, 1>;

  SymMatrix() : packed_(Packed::Zero()) {}
  explicit SymMatrix(const Packed& packed) : packed_(packed) {}

  static SymMatrix Zero() { return SymMatrix(); }
  static SymMatrix Identity() {
    SymMatrix s;
    for (int i = 0; i < Dim; ++i) s.packed_(i) = Scalar(1);
    return s;
  }

  /// Symmetric part of an arbitrary square matrix.
  template <class Derived>
  static SymMatrix FromFull(const Eigen::MatrixBase<Derived>& m) {
    SymMatrix s;
    for (int i = 0; i < Dim; ++i) {
      for (int j = i; j < Dim; ++j) {
        s.packed_(index(i, j)) = i == j ? m(i, i) : (m(i, j) + m(j, i)) / Scalar(2);
      }
    }
    return s;
  }

  static constexpr int index(int i, int j) {
    if (i > j) std::swap(i, j);
    if (i == j) return i;
    if constexpr (Dim == 2) {
      return 2;
    } else {
      return i == 0 ? (j == 1 ? 3 : 4) : 5;
    }
  }
  static constexpr bool is_diagonal_slot(int k) { return k < Dim; }

  Scalar operator()(int i, int j) const { return packed_(index(i, j)); }
  Scalar& operator()(int i, int j) { return packed_(index(i, j)); }

  const Packed& packed() const { return packed_; }
  Packed& packed() { return packed_; }

  Full full() const {
    Full m;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  /// Frobenius metric in packed coordinates: <a,b> = a^T W b.
  static Packed metric() {
    Packed w;
    for (int k = 0; k < kSize; ++k) w(k) = is_diagonal_slot(k) ? Scalar(1) : Scalar(2);
    return w;
  }

  Scalar squaredNorm() const {
    Scalar s(0);
    for (int k = 0; k < kSize; ++k) {
      s += (is_diagonal_slot(k) ? Scalar(1) : Scalar(2)) * packed_(k) * packed_(k);
    }
    return s;
  }
  Scalar norm() const { return std::sqrt(squaredNorm()); }
  Scalar trace() const { return packed_.head(Dim).sum(); }

  /// Eigenvalues in ascending order.
  Vector eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Full> es(full(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  SymMatrix& operator+=(const SymMatrix& o) {
    packed_ += o.packed_;
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    packed_ -= o.packed_;
    return *this;
  }
  SymMatrix& operator*=(Scalar s) {
    packed_ *= s;
    return *this;
  }
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator-(const SymMatrix& a) { return SymMatrix(Packed(-a.packed_)); }
  friend SymMatrix operator*(Scalar s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator*(SymMatrix a, Scalar s) { return a *= s; }
  friend SymMatrix operator/(SymMatrix a, Scalar s) { return a *= Scalar(1) / s; }
  friend bool operator==(const SymMatrix& a, const SymMatrix& b) { return a.packed_ == b.packed_; }

 private:
  Packed packed_;
};

template <class Scalar, int Dim>
Scalar frobenius_dot(const SymMatrix<Scalar, Dim>& a, const SymMatrix<Scalar, Dim>& b) {
  return a.packed().dot(SymMatrix<Scalar, Dim>::metric().cwiseProduct(b.packed()));
}

/// a ⊙ b = (a b^T + b a^T) / 2.
template <class Scalar, int Dim>
SymMatrix<Scalar, Dim> sym_product(const Eigen::Matrix<Scalar, Dim, 1>& a,
                                   const Eigen::Matrix<Scalar, Dim, 1>& b) {
  SymMatrix<Scalar, Dim> s;
  for (int i = 0; i < Dim; ++i) {
    for (int j = i; j < Dim; ++j) {
      s(i, j) = i == j ? a(i) * b(i) : (a(i) * b(j) + a(j) * b(i)) / Scalar(2);
    }
  }
  return s;
}

/// V(t) = sqrt(1+t^2) - 1 evaluated without cancellation near t = 0.
template <class Scalar>
Scalar v_function(Scalar t) {
  const Scalar t2 = t * t;
  return t2 / (std::sqrt(Scalar(1) + t2) + Scalar(1));
}

template <class Scalar, int Dim>
Scalar v_function(const SymMatrix<Scalar, Dim>& z) {
  const Scalar t2 = z.squaredNorm();
  return t2 / (std::sqrt(Scalar(1) + t2) + Scalar(1));
}

/// Constant c(l) with |z|^2 / c <= V(z) <= c |z|^2 whenever |z| <= l.
/// V(z) = |z|^2 / (sqrt(1+|z|^2)+1) gives c(l) = sqrt(1+l^2) + 1.
template <class Scalar>
Scalar v_quadratic_constant(Scalar ell) {
  return std::sqrt(Scalar(1) + ell * ell) + Scalar(1);
}

/// Number of parameters of the rigid deformations x -> Ax + b in dimension Dim.
template <int Dim>
inline constexpr int kRigidDim = Dim + Dim * (Dim - 1) / 2;

/// x -> A x + b with A skew-symmetric.
template <class Scalar, int Dim>
class RigidDeformation {
 public:
  using Vector = Eigen::Matrix<Scalar, Dim, 1>;
  using Full = Eigen::Matrix<Scalar, Dim, Dim>;
  static constexpr int kParams = kRigidDim<Dim>;
  using Params = Eigen::Matrix<Scalar, kParams, 1>;

  RigidDeformation() : skew_(Full::Zero()), shift_(Vector::Zero()) {}

  /// Throws DomainError if `skew` is not skew-symmetric.
  RigidDeformation(const Full& skew, const Vector& shift) : skew_(skew), shift_(shift) {
    if ((skew + skew.transpose()).cwiseAbs().maxCoeff() != Scalar(0)) {
      throw DomainError("RigidDeformation: matrix is not skew-symmetric");
    }
  }

  /// Parameters ordered as (b_1..b_n, ω_(0,1)[, ω_(0,2), ω_(1,2)]) with A(i,j) = ω, A(j,i) = -ω.
  static RigidDeformation FromParams(const Params& p) {
    RigidDeformation r;
    r.shift_ = p.template head<Dim>();
    int k = Dim;
    for (int i = 0; i < Dim; ++i) {
      for (int j = i + 1; j < Dim; ++j, ++k) {
        r.skew_(i, j) = p(k);
        r.skew_(j, i) = -p(k);
      }
    }
    return r;
  }

  Params params() const {
    Params p;
    p.template head<Dim>() = shift_;
    int k = Dim;
    for (int i = 0; i < Dim; ++i)
      for (int j = i + 1; j < Dim; ++j, ++k) p(k) = skew_(i, j);
    return p;
  }

  Vector operator()(const Vector& x) const { return skew_ * x + shift_; }
  const Full& skew() const { return skew_; }
  const Vector& shift() const { return shift_; }
  /// The full gradient; its symmetric part vanishes.
  const Full& gradient() const { return skew_; }

 private:
  Full skew_;
  Vector shift_;
};

/// Weighted point cloud standing in for a ball (quadrature points and masses).
template <class Scalar, int Dim>
struct WeightedSamples {
  using Vector = Eigen::Matrix<Scalar, Dim, 1>;
  std::vector<Vector> points;
  std::vector<Scalar> weights;

  Scalar mass() const {
    Scalar m(0);
    for (Scalar w : weights) m += w;
    return m;
  }
};

/// Midpoints of a per_axis^Dim lattice on the bounding cube that fall inside
/// the closed ball, each weighted by its lattice cell volume.
template <class Scalar, int Dim>
WeightedSamples<Scalar, Dim> ball_lattice(const Eigen::Matrix<Scalar, Dim, 1>& center, Scalar radius,
                                          int per_axis) {
  WeightedSamples<Scalar, Dim> s;
  const Scalar h = Scalar(2) * radius / Scalar(per_axis);
  const Scalar cell = std::pow(h, Scalar(Dim));
  Eigen::Array<int, Dim, 1> idx = Eigen::Array<int, Dim, 1>::Zero();
  while (true) {
    Eigen::Matrix<Scalar, Dim, 1> x;
    for (int d = 0; d < Dim; ++d) x(d) = center(d) - radius + (Scalar(idx(d)) + Scalar(0.5)) * h;
    if ((x - center).norm() <= radius) {
      s.points.push_back(x);
      s.weights.push_back(cell);
    }
    int d = 0;
    while (d < Dim && ++idx(d) == per_axis) idx(d++) = 0;
    if (d == Dim) break;
  }
  return s;
}

/// L²-orthogonal projection of sampled values onto the rigid deformations.
///
/// Solves the kRigidDim normal equations in coordinates centered at the
/// weighted centroid. The result does not depend on any exponent q.
/// Throws SingularityError when the samples cannot determine a rigid motion
/// (e.g. all points collinear).
template <class Scalar, int Dim>
RigidDeformation<Scalar, Dim> project_rigid(const WeightedSamples<Scalar, Dim>& samples,
                                            std::span<const Eigen::Matrix<Scalar, Dim, 1>> values) {
  using Vector = Eigen::Matrix<Scalar, Dim, 1>;
  using Full = Eigen::Matrix<Scalar, Dim, Dim>;
  constexpr int P = kRigidDim<Dim>;
  using Gram = Eigen::Matrix<Scalar, P, P>;
  using Rhs = Eigen::Matrix<Scalar, P, 1>;

  const std::size_t n = samples.points.size();
  if (values.size() != n || samples.weights.size() != n) {
    throw DomainError("project_rigid: sample and value counts differ");
  }
  if (n < static_cast<std::size_t>(P)) {
    throw SingularityError("project_rigid: fewer samples than rigid parameters");
  }
  const Scalar mass = samples.mass();
  Vector centroid = Vector::Zero();
  for (std::size_t i = 0; i < n; ++i) centroid += samples.weights[i] * samples.points[i];
  centroid /= mass;

  // Basis: translations e_d, then infinitesimal rotations E_k y with E_k = e_i e_j^T - e_j e_i^T.
  auto basis = [](const Vector& y) {
    Eigen::Matrix<Scalar, Dim, P> phi = Eigen::Matrix<Scalar, Dim, P>::Zero();
    phi.template leftCols<Dim>().setIdentity();
    int k = Dim;
    for (int i = 0; i < Dim; ++i) {
      for (int j = i + 1; j < Dim; ++j, ++k) {
        phi(i, k) = y(j);
        phi(j, k) = -y(i);
      }
    }
    return phi;
  };

  Gram gram = Gram::Zero();
  Rhs rhs = Rhs::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const auto phi = basis(samples.points[i] - centroid);
    gram.noalias() += samples.weights[i] * phi.transpose() * phi;
    rhs.noalias() += samples.weights[i] * phi.transpose() * values[i];
  }

  Eigen::SelfAdjointEigenSolver<Gram> es(gram);
  const Scalar lo = es.eigenvalues()(0);
  const Scalar hi = es.eigenvalues()(P - 1);
  if (!(hi > Scalar(0)) || lo <= Scalar(1e-12) * hi) {
    throw SingularityError("project_rigid: singular normal equations (degenerate sample set)");
  }
  const Rhs c = es.eigenvectors() *
                (es.eigenvectors().transpose() * rhs).cwiseQuotient(es.eigenvalues());

  Full skew = Full::Zero();
  int k = Dim;
  for (int i = 0; i < Dim; ++i) {
    for (int j = i + 1; j < Dim; ++j, ++k) {
      skew(i, j) = c(k);
      skew(j, i) = -c(k);
    }
  }
  const Vector shift = c.template head<Dim>() - skew * centroid;
  return RigidDeformation<Scalar, Dim>(skew, shift);
}

template <class Scalar, int Dim>
struct RigidScalingReport {
  Scalar lq_mean;        ///< (mean |π|^q)^{1/q}
  Scalar gradient_term;  ///< r (mean |∇π|^q)^{1/q}
  Scalar l1_mean;        ///< mean |π|
  /// (lq_mean + gradient_term) / l1_mean; empty when π vanishes on the samples.
  std::optional<Scalar> ratio;
};

/// Both sides of the norm-equivalence inequality for a rigid deformation on a ball.
template <class Scalar, int Dim>
RigidScalingReport<Scalar, Dim> rigid_scaling_check(const RigidDeformation<Scalar, Dim>& pi,
                                                    const WeightedSamples<Scalar, Dim>& ball,
                                                    Scalar radius, Scalar q) {
  const Scalar mass = ball.mass();
  Scalar lq(0), l1(0);
  for (std::size_t i = 0; i < ball.points.size(); ++i) {
    const Scalar v = pi(ball.points[i]).norm();
    lq += ball.weights[i] * std::pow(v, q);
    l1 += ball.weights[i] * v;
  }
  RigidScalingReport<Scalar, Dim> rep;
  rep.lq_mean = std::pow(lq / mass, Scalar(1) / q);
  rep.gradient_term = radius * pi.gradient().norm();  // |∇π| is constant on the ball
  rep.l1_mean = l1 / mass;
  if (rep.l1_mean > Scalar(0)) rep.ratio = (rep.lq_mean + rep.gradient_term) / rep.l1_mean;
  return rep;
}

}  // namespace bdlab
