#pragma once
// Convex integrands of linear growth acting on symmetric matrices.
//
// Every catalog member is radial, f(z) = g(|z|), so value, gradient and
// Hessian follow from the profile g and its first two derivatives:
//   f'(z)            = g'(t) z / t
//   <f''(z)ξ, ξ>     = g''(t) (ẑ:ξ)^2 + g'(t)/t (|ξ|^2 - (ẑ:ξ)^2),   t = |z|.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bdlab/errors.hpp"
#include "bdlab/symcalc.hpp"

namespace bdlab {

/// g(t), g'(t), g''(t) and g'(t)/t (with its limit g''(0) at t = 0).
struct RadialValues {
  double g = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d1_over_t = 0.0;
};

/// c₁|z| − γ ≤ f(z) ≤ c₂(1+|z|).
struct GrowthConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double gamma = 0.0;
};

enum class IntegrandKind { PhiA, MBigP, MSmallP, Area, Quadratic, Regularized };

/// Radial profile interface; implementations live in integrands.cpp.
class RadialProfile {
 public:
  virtual ~RadialProfile() = default;
  virtual RadialValues eval(double t) const = 0;
  /// g alone; cheaper for energy evaluation.
  virtual double value(double t) const { return eval(t).g; }
};

/// Immutable, cheaply copyable handle to a convex radial integrand.
class IntegrandSpec {
 public:
  IntegrandKind kind() const { return kind_; }
  double param() const { return param_; }
  const std::string& name() const { return name_; }

  /// Empty for integrands without linear growth (quadratic, regularized).
  const std::optional<GrowthConstants>& growth() const { return growth_; }
  /// sup g'; infinite without linear growth.
  double lipschitz() const { return lipschitz_; }
  /// The exponent a of the registered ellipticity profile, if any.
  const std::optional<double>& ellipticity_a() const { return ellipticity_a_; }
  /// g'(∞), so that f^∞(z) = slope |z|; infinite without linear growth.
  double recession_slope() const { return recession_slope_; }
  /// m_p with p ≠ 2: Hessian degenerates or blows up at the origin.
  bool degenerate_at_origin() const { return degenerate_at_origin_; }
  bool has_linear_growth() const { return growth_.has_value(); }

  RadialValues radial(double t) const { return profile_->eval(t); }
  double profile_value(double t) const { return profile_->value(t); }

  /// Radial values with a finite Hessian; throws SingularityError otherwise.
  RadialValues radial_checked(double t) const {
    RadialValues r = profile_->eval(t);
    if (!std::isfinite(r.d2) || !std::isfinite(r.d1_over_t)) {
      throw SingularityError(name_ + ": Hessian is singular at |z| = " + std::to_string(t));
    }
    return r;
  }

  template <int Dim>
  double value(const SymMatrix<double, Dim>& z) const {
    return profile_->value(z.norm());
  }

  template <int Dim>
  SymMatrix<double, Dim> gradient(const SymMatrix<double, Dim>& z) const {
    const double t = z.norm();
    if (t == 0.0) return SymMatrix<double, Dim>::Zero();
    return (profile_->eval(t).d1 / t) * z;
  }

  /// <f''(z) ξ, ξ>.
  template <int Dim>
  double hessian_apply(const SymMatrix<double, Dim>& z, const SymMatrix<double, Dim>& xi) const {
    const double t = z.norm();
    const RadialValues r = radial_checked(t);
    const double xx = xi.squaredNorm();
    if (t == 0.0) return r.d2 * xx;
    const double c = frobenius_dot(z, xi) / t;
    return (r.d2 - r.d1_over_t) * c * c + r.d1_over_t * xx;
  }

  /// f^∞(z), hard-wired from the profile's slope at infinity.
  template <int Dim>
  double recession(const SymMatrix<double, Dim>& z) const {
    const double t = z.norm();
    if (t == 0.0) return 0.0;
    return recession_slope_ * t;
  }

  /// Value, packed gradient and packed Hessian at one point.
  ///
  /// In packed coordinates p (see SymMatrix), d/dp f = g'/t W p and
  /// d²/dp² f = (g'' − g'/t)(Wẑ)(Wẑ)^T + g'/t W, W the Frobenius metric.
  template <int Dim>
  struct LocalResponse {
    using Packed = typename SymMatrix<double, Dim>::Packed;
    using PackedMatrix = Eigen::Matrix<double, SymMatrix<double, Dim>::kSize, SymMatrix<double, Dim>::kSize>;
    double value = 0.0;
    Packed dvalue;
    PackedMatrix hessian;
  };

  template <int Dim>
  LocalResponse<Dim> local_response(const SymMatrix<double, Dim>& z) const {
    using S = SymMatrix<double, Dim>;
    LocalResponse<Dim> out;
    const double t = z.norm();
    const RadialValues r = radial_checked(t);
    const typename S::Packed w = S::metric();
    out.value = r.g;
    out.dvalue = r.d1_over_t * w.cwiseProduct(z.packed());
    out.hessian = r.d1_over_t * w.asDiagonal().toDenseMatrix();
    if (t > 0.0) {
      const typename S::Packed wz = w.cwiseProduct(z.packed()) / t;
      out.hessian.noalias() += (r.d2 - r.d1_over_t) * wz * wz.transpose();
    }
    return out;
  }

  /// f + weight (1 + |·|²); the viscosity-stage integrand for weight = 1/(2 A_j j²).
  IntegrandSpec regularized(double weight) const;

  /// Base integrand of a regularized one (itself otherwise).
  const IntegrandSpec& base() const { return base_ ? *base_ : *this; }
  double regularization_weight() const { return reg_weight_; }

 private:
  friend IntegrandSpec phi_a(double);
  friend IntegrandSpec m_big_p(double);
  friend IntegrandSpec m_small_p(double);
  friend IntegrandSpec area_integrand();
  friend IntegrandSpec quadratic_integrand();

  IntegrandKind kind_ = IntegrandKind::Area;
  double param_ = 0.0;
  std::string name_;
  std::shared_ptr<const RadialProfile> profile_;
  std::optional<GrowthConstants> growth_;
  double lipschitz_ = 0.0;
  std::optional<double> ellipticity_a_;
  double recession_slope_ = 0.0;
  bool degenerate_at_origin_ = false;
  std::shared_ptr<const IntegrandSpec> base_;
  double reg_weight_ = 0.0;
};

/// Φ_a(z) = ∫₀^|z| ∫₀^s (1+τ²)^{-a/2} dτ ds, a > 1. Throws InvalidParameter for a ≤ 1.
IntegrandSpec phi_a(double a);
/// M_p(z) = (1 + (1+|z|²)^{p/2})^{1/p}, p ≥ 1.
IntegrandSpec m_big_p(double p);
/// m_p(z) = (1 + |z|^p)^{1/p}, p > 1; flagged degenerate at the origin unless p = 2.
IntegrandSpec m_small_p(double p);
/// E(z) = sqrt(1 + |z|²).
IntegrandSpec area_integrand();
/// |z|²; no linear growth, used as the linear-problem oracle.
IntegrandSpec quadratic_integrand();

/// Builds an integrand from config keys: kind ∈ {phi_a, M_p, m_p, area, quadratic}.
IntegrandSpec make_integrand(const std::string& kind, double param);

/// g'(∞) for Φ_a: ∫₀^∞ (1+s²)^{-a/2} ds = (√π/2) Γ((a-1)/2) / Γ(a/2).
double phi_a_slope_at_infinity(double a);

/// Numerical recession: extrapolated limit of t f(z/t) along a geometric ladder of t.
///
/// The ladder values are accelerated with iterated Aitken Δ²; throws
/// NoConvergence when the last two accelerated values differ by more than
/// `rel_tol` (relative).
struct RecessionLadder {
  double t0 = 1e-1;
  double ratio = 0.25;
  int levels = 12;
  double rel_tol = 1e-7;
};
double recession_limit(const IntegrandSpec& f, double norm_z, const RecessionLadder& ladder = {});

template <int Dim>
double recession_limit(const IntegrandSpec& f, const SymMatrix<double, Dim>& z,
                       const RecessionLadder& ladder = {}) {
  return recession_limit(f, z.norm(), ladder);
}

/// Linear perspective integrand: t f(ξ/t) for t > 0, f^∞(ξ) for t = 0.
template <int Dim>
double perspective(const IntegrandSpec& f, double t, const SymMatrix<double, Dim>& xi) {
  if (t < 0.0) throw DomainError("perspective: t must be nonnegative");
  if (t == 0.0) return f.recession(xi);
  return t * f.value(SymMatrix<double, Dim>(xi.packed() / t));
}

/// Smallest and largest eigenvalue of f''(z) over |z| ∈ [t_lo, t_hi].
///
/// For a radial integrand the spectrum of f''(z) is {g''(t), g'(t)/t}, so a
/// dense 1-D sweep of the radius covers every matrix in the shell.
struct HessianRange {
  double min_eigenvalue;
  double max_eigenvalue;
};
HessianRange hessian_eigen_range(const IntegrandSpec& f, double t_lo, double t_hi, int samples = 4001);

struct EllipticityProfile {
  double a;
  double lambda;
  double Lambda;
};

struct EllipticitySampling {
  double t_max = 1e3;
  double t_min_positive = 1e-3;
  int radii = 121;
  int directions = 32;
  std::uint64_t seed = 20240607;
  /// Certification fails when log(lower envelope) decays faster than this
  /// slope in log t over the top decade of the sample.
  double tail_slope_tolerance = 0.05;
};

struct EllipticityEnvelope {
  std::vector<double> radii;
  std::vector<double> lower;  ///< min_ξ <f''ξ,ξ>(1+t²)^{a/2}/|ξ|² per radius
  std::vector<double> upper;  ///< max_ξ <f''ξ,ξ>(1+t²)^{1/2}/|ξ|² per radius
  double lambda = 0.0;
  double Lambda = 0.0;
  double tail_slope = 0.0;
};

/// Samples the two-sided ellipticity envelope at exponent `a` (n = Dim).
/// Throws SingularityError if the Hessian is singular on the sample.
template <int Dim>
EllipticityEnvelope ellipticity_envelope(const IntegrandSpec& f, double a, const EllipticitySampling& s = {});

/// Fitted (λ, Λ) when the lower envelope stays bounded away from zero; empty otherwise.
template <int Dim>
std::optional<EllipticityProfile> certify_ellipticity(const IntegrandSpec& f, double a,
                                                      const EllipticitySampling& s = {});

/// f_a(ξ) = f(a+ξ) − f(a) − <f'(a), ξ> around a reference point ξ₀ with radius ϱ.
template <int Dim>
class ShiftedIntegrand {
 public:
  using Sym = SymMatrix<double, Dim>;

  /// Throws DomainError unless |a − ξ₀| ≤ ϱ/2 and 0 < ϱ < 1, and when
  /// m_{ξ₀,ϱ} (smallest Hessian eigenvalue over the closed ball) is not positive.
  ShiftedIntegrand(IntegrandSpec base, const Sym& shift_point, const Sym& reference, double radius);

  double value(const Sym& xi) const;

  const IntegrandSpec& base() const { return base_; }
  const Sym& shift_point() const { return a_; }
  const Sym& reference() const { return xi0_; }
  double radius() const { return rho_; }
  double min_hessian_eigenvalue() const { return m_; }
  double sup_hessian() const { return sup_hessian_; }

  /// m_{ξ₀,ϱ} (ϱ/2)².
  double lower_constant() const { return m_ * 0.25 * rho_ * rho_; }
  /// c(ϱ/2) sup|f''| + 16 Lip(f) / ((√2 − 1) ϱ).
  double upper_constant() const {
    return v_quadratic_constant(0.5 * rho_) * sup_hessian_ +
           16.0 * base_.lipschitz() / ((std::sqrt(2.0) - 1.0) * rho_);
  }

 private:
  IntegrandSpec base_;
  Sym a_;
  Sym xi0_;
  double rho_;
  double m_;
  double sup_hessian_;
  double fa_;
  Sym grad_a_;
};

template <int Dim>
ShiftedIntegrand<Dim> shift(const IntegrandSpec& f, const SymMatrix<double, Dim>& a,
                            const SymMatrix<double, Dim>& xi0, double rho) {
  return ShiftedIntegrand<Dim>(f, a, xi0, rho);
}

extern template EllipticityEnvelope ellipticity_envelope<2>(const IntegrandSpec&, double, const EllipticitySampling&);
extern template EllipticityEnvelope ellipticity_envelope<3>(const IntegrandSpec&, double, const EllipticitySampling&);
extern template std::optional<EllipticityProfile> certify_ellipticity<2>(const IntegrandSpec&, double,
                                                                        const EllipticitySampling&);
extern template std::optional<EllipticityProfile> certify_ellipticity<3>(const IntegrandSpec&, double,
                                                                        const EllipticitySampling&);
extern template class ShiftedIntegrand<2>;
extern template class ShiftedIntegrand<3>;

}  // namespace bdlab
