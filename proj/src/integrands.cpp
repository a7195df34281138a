#include "bdlab/integrands.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bdlab/quadrature.hpp"

namespace bdlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// g'(t) = ∫₀ᵗ (1+τ²)^{-a/2} dτ = ∫₀^{atan t} cos^{a-2}θ dθ.
//
// For t ≤ 1 the θ-integrand is analytic on [0, π/4] and Gauss-Legendre is
// exact to rounding. For t > 1 we subtract the tail ∫₀^{φ₀} sin^{a-2}φ dφ,
// φ₀ = atan(1/t), written as φ₀^{a-1} ∫₀¹ s^{a-2} (sin(φ₀s)/(φ₀s))^{a-2} ds
// and integrated with the Gauss-Jacobi rule for the weight s^{a-2}.
class PhiAProfile final : public RadialProfile {
 public:
  explicit PhiAProfile(double a)
      : a_(a),
        head_(gauss_legendre_on(24, 0.0, 1.0)),
        tail_(gauss_unit_power(24, a - 2.0)),
        slope_inf_(phi_a_slope_at_infinity(a)) {}

  RadialValues eval(double t) const override {
    RadialValues r;
    double g1;
    if (t <= 1.0) {
      const double theta = std::atan(t);
      double mean = 0.0;
      for (std::size_t i = 0; i < head_.nodes.size(); ++i) {
        mean += head_.weights[i] * std::pow(std::cos(theta * head_.nodes[i]), a_ - 2.0);
      }
      g1 = theta * mean;
      const double atan_over_t = t < 1e-8 ? 1.0 - t * t / 3.0 : theta / t;
      r.d1_over_t = atan_over_t * mean;
    } else {
      const double phi0 = std::atan(1.0 / t);
      double s = 0.0;
      for (std::size_t i = 0; i < tail_.nodes.size(); ++i) {
        const double x = phi0 * tail_.nodes[i];
        s += tail_.weights[i] * std::pow(std::sin(x) / x, a_ - 2.0);
      }
      g1 = slope_inf_ - std::pow(phi0, a_ - 1.0) * s;
      r.d1_over_t = g1 / t;
    }
    r.d1 = g1;
    r.d2 = std::pow(1.0 + t * t, -0.5 * a_);
    r.g = t * g1 - moment(t);
    return r;
  }

 private:
  // ∫₀ᵗ τ(1+τ²)^{-a/2} dτ = ((1+t²)^{1-a/2} − 1)/(2 − a), log at a = 2.
  double moment(double t) const {
    const double c = 1.0 - 0.5 * a_;
    const double l = std::log1p(t * t);
    if (std::abs(c * l) < 1e-12) return 0.5 * l * (1.0 + 0.5 * c * l);
    return std::expm1(c * l) / (2.0 * c);
  }

  double a_;
  QuadratureRule head_;
  QuadratureRule tail_;
  double slope_inf_;
};

class MBigPProfile final : public RadialProfile {
 public:
  explicit MBigPProfile(double p) : p_(p) {}

  RadialValues eval(double t) const override {
    const double l1t = std::log1p(t * t);
    const double ls = 0.5 * p_ * l1t;                // log s,  s = (1+t²)^{p/2}
    const double l1s = ls + std::log1p(std::exp(-ls));  // log(1 + s)
    const double log_a = (0.5 * p_ - 1.0) * l1t;     // A = (1+t²)^{p/2-1}
    const double log_b = (1.0 / p_ - 1.0) * l1s;     // B = (1+s)^{1/p-1}
    const double ab = std::exp(log_a + log_b);
    const double a_over_1s = std::exp(log_a - l1s);
    RadialValues r;
    r.g = std::exp(l1s / p_);
    r.d1_over_t = ab;
    r.d1 = t * ab;
    const double t2 = t * t;
    r.d2 = ab * (1.0 + (p_ - 2.0) * t2 / (1.0 + t2) + (1.0 - p_) * t2 * a_over_1s);
    return r;
  }
  double value(double t) const override {
    const double ls = 0.5 * p_ * std::log1p(t * t);
    return std::exp((ls + std::log1p(std::exp(-ls))) / p_);
  }

 private:
  double p_;
};

class MSmallPProfile final : public RadialProfile {
 public:
  explicit MSmallPProfile(double p) : p_(p) {}

  RadialValues eval(double t) const override {
    RadialValues r;
    if (t == 0.0) {
      r.g = 1.0;
      r.d1 = 0.0;
      if (p_ < 2.0) {
        r.d2 = r.d1_over_t = kInf;
      } else if (p_ == 2.0) {
        r.d2 = r.d1_over_t = 1.0;
      } else {
        r.d2 = r.d1_over_t = 0.0;
      }
      return r;
    }
    if (t <= 1.0) {
      const double tp = std::pow(t, p_);
      r.g = std::pow(1.0 + tp, 1.0 / p_);
      r.d1_over_t = std::pow(t, p_ - 2.0) * std::pow(1.0 + tp, 1.0 / p_ - 1.0);
      r.d2 = (p_ - 1.0) * std::pow(t, p_ - 2.0) * std::pow(1.0 + tp, 1.0 / p_ - 2.0);
    } else {
      const double q = std::pow(t, -p_);  // t^{-p}
      r.g = t * std::pow(1.0 + q, 1.0 / p_);
      const double d1 = std::pow(1.0 + q, 1.0 / p_ - 1.0);
      r.d1_over_t = d1 / t;
      r.d2 = (p_ - 1.0) * std::pow(t, -p_ - 1.0) * std::pow(1.0 + q, 1.0 / p_ - 2.0);
    }
    r.d1 = r.d1_over_t * t;
    return r;
  }

 private:
  double p_;
};

class AreaProfile final : public RadialProfile {
 public:
  RadialValues eval(double t) const override {
    const double s = std::sqrt(1.0 + t * t);
    return {s, t / s, 1.0 / (s * s * s), 1.0 / s};
  }
  double value(double t) const override { return std::sqrt(1.0 + t * t); }
};

class QuadraticProfile final : public RadialProfile {
 public:
  RadialValues eval(double t) const override { return {t * t, 2.0 * t, 2.0, 2.0}; }
  double value(double t) const override { return t * t; }
};

class RegularizedProfile final : public RadialProfile {
 public:
  RegularizedProfile(std::shared_ptr<const RadialProfile> base, double weight)
      : base_(std::move(base)), w_(weight) {}

  RadialValues eval(double t) const override {
    RadialValues r = base_->eval(t);
    r.g += w_ * (1.0 + t * t);
    r.d1 += 2.0 * w_ * t;
    r.d2 += 2.0 * w_;
    r.d1_over_t += 2.0 * w_;
    return r;
  }
  double value(double t) const override { return base_->value(t) + w_ * (1.0 + t * t); }

 private:
  std::shared_ptr<const RadialProfile> base_;
  double w_;
};

std::string format_param(const char* stem, double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s(%g)", stem, p);
  return buf;
}

}  // namespace

double phi_a_slope_at_infinity(double a) {
  return 0.5 * std::sqrt(std::numbers::pi) * std::exp(std::lgamma(0.5 * (a - 1.0)) - std::lgamma(0.5 * a));
}

IntegrandSpec IntegrandSpec::regularized(double weight) const {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw InvalidParameter("regularized: weight must be finite and nonnegative");
  }
  IntegrandSpec out;
  out.kind_ = IntegrandKind::Regularized;
  out.param_ = weight;
  out.name_ = name_ + "+reg";
  out.profile_ = std::make_shared<RegularizedProfile>(profile_, weight);
  out.lipschitz_ = weight > 0.0 ? kInf : lipschitz_;
  out.recession_slope_ = weight > 0.0 ? kInf : recession_slope_;
  out.degenerate_at_origin_ = degenerate_at_origin_;
  out.base_ = std::make_shared<const IntegrandSpec>(base());
  out.reg_weight_ = weight;
  return out;
}

IntegrandSpec phi_a(double a) {
  if (!(a > 1.0) || !std::isfinite(a)) {
    throw InvalidParameter("phi_a: a must exceed 1 (otherwise the integrand is not of linear growth)");
  }
  IntegrandSpec f;
  f.kind_ = IntegrandKind::PhiA;
  f.param_ = a;
  f.name_ = format_param("phi_a", a);
  auto profile = std::make_shared<PhiAProfile>(a);
  f.profile_ = profile;
  const double slope = phi_a_slope_at_infinity(a);
  f.recession_slope_ = slope;
  f.lipschitz_ = slope;
  f.ellipticity_a_ = a;

  // Lower growth with c₁ = slope/2: γ = max_t (c₁ t − g(t)), attained where g'(t) = c₁.
  const double c1 = 0.5 * slope;
  double lo = 0.0, hi = 1.0;
  while (profile->eval(hi).d1 < c1) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (profile->eval(mid).d1 < c1 ? lo : hi) = mid;
  }
  const double tstar = 0.5 * (lo + hi);
  f.growth_ = GrowthConstants{c1, slope, std::max(0.0, c1 * tstar - profile->value(tstar))};
  return f;
}

IntegrandSpec m_big_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidParameter("M_p: p must be at least 1");
  IntegrandSpec f;
  f.kind_ = IntegrandKind::MBigP;
  f.param_ = p;
  f.name_ = format_param("M_p", p);
  f.profile_ = std::make_shared<MBigPProfile>(p);
  f.recession_slope_ = 1.0;
  f.lipschitz_ = 1.0;
  f.ellipticity_a_ = p == 1.0 ? 3.0 : p + 1.0;
  f.growth_ = GrowthConstants{1.0, std::pow(2.0, 1.0 / p), 0.0};
  return f;
}

IntegrandSpec m_small_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw InvalidParameter("m_p: p must exceed 1");
  IntegrandSpec f;
  f.kind_ = IntegrandKind::MSmallP;
  f.param_ = p;
  f.name_ = format_param("m_p", p);
  f.profile_ = std::make_shared<MSmallPProfile>(p);
  f.recession_slope_ = 1.0;
  f.lipschitz_ = 1.0;
  f.degenerate_at_origin_ = p != 2.0;
  if (p == 2.0) f.ellipticity_a_ = 3.0;
  f.growth_ = GrowthConstants{1.0, 1.0, 0.0};
  return f;
}

IntegrandSpec area_integrand() {
  IntegrandSpec f;
  f.kind_ = IntegrandKind::Area;
  f.name_ = "area";
  f.profile_ = std::make_shared<AreaProfile>();
  f.recession_slope_ = 1.0;
  f.lipschitz_ = 1.0;
  f.ellipticity_a_ = 3.0;
  f.growth_ = GrowthConstants{1.0, 1.0, 0.0};
  return f;
}

IntegrandSpec quadratic_integrand() {
  IntegrandSpec f;
  f.kind_ = IntegrandKind::Quadratic;
  f.name_ = "quadratic";
  f.profile_ = std::make_shared<QuadraticProfile>();
  f.recession_slope_ = kInf;
  f.lipschitz_ = kInf;
  return f;
}

IntegrandSpec make_integrand(const std::string& kind, double param) {
  if (kind == "phi_a") return phi_a(param);
  if (kind == "M_p") return m_big_p(param);
  if (kind == "m_p") return m_small_p(param);
  if (kind == "area") return area_integrand();
  if (kind == "quadratic") return quadratic_integrand();
  throw InvalidParameter("unknown integrand kind '" + kind + "'");
}

double recession_limit(const IntegrandSpec& f, double norm_z, const RecessionLadder& ladder) {
  if (norm_z == 0.0) return 0.0;
  std::vector<double> seq;
  double t = ladder.t0;
  for (int k = 0; k < ladder.levels; ++k, t *= ladder.ratio) seq.push_back(t * f.profile_value(norm_z / t));
  // Acceleration maps a geometrically diverging ladder to a spurious antilimit.
  const double d_first = std::abs(seq[1] - seq[0]);
  const double d_last = std::abs(seq.back() - seq[seq.size() - 2]);
  if (!std::isfinite(seq.back()) || (d_last > 0.0 && d_last >= d_first)) {
    throw NoConvergence(f.name() + ": t f(z/t) does not settle along the ladder");
  }

  double best = seq.back();
  double best_change = std::abs(seq.back() - seq[seq.size() - 2]);
  while (seq.size() >= 3) {
    std::vector<double> next;
    for (std::size_t k = 0; k + 2 < seq.size(); ++k) {
      const double d1 = seq[k + 1] - seq[k];
      const double d2 = seq[k + 2] - seq[k + 1];
      const double den = d2 - d1;
      next.push_back(den == 0.0 ? seq[k + 2] : seq[k + 2] - d2 * d2 / den);
    }
    seq = std::move(next);
    if (seq.size() >= 2) {
      const double change = std::abs(seq.back() - seq[seq.size() - 2]);
      if (std::isfinite(change) && change < best_change) {
        best_change = change;
        best = seq.back();
      }
    }
  }
  if (!std::isfinite(best) || !(best_change <= ladder.rel_tol * std::abs(best))) {
    throw NoConvergence(f.name() + ": recession ladder did not converge");
  }
  return best;
}

HessianRange hessian_eigen_range(const IntegrandSpec& f, double t_lo, double t_hi, int samples) {
  HessianRange out{kInf, -kInf};
  auto visit = [&](double t) {
    const RadialValues r = f.radial_checked(t);
    const double lo = t == 0.0 ? r.d2 : std::min(r.d2, r.d1_over_t);
    const double hi = t == 0.0 ? r.d2 : std::max(r.d2, r.d1_over_t);
    out.min_eigenvalue = std::min(out.min_eigenvalue, lo);
    out.max_eigenvalue = std::max(out.max_eigenvalue, hi);
  };
  for (int i = 0; i < samples; ++i) {
    visit(t_lo + (t_hi - t_lo) * double(i) / double(std::max(1, samples - 1)));
  }
  return out;
}

template <int Dim>
EllipticityEnvelope ellipticity_envelope(const IntegrandSpec& f, double a, const EllipticitySampling& s) {
  using Sym = SymMatrix<double, Dim>;
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal;
  auto random_unit = [&] {
    typename Sym::Packed p;
    for (int k = 0; k < Sym::kSize; ++k) p(k) = normal(rng);
    Sym z(p);
    return z / z.norm();
  };

  EllipticityEnvelope env;
  env.radii.push_back(0.0);
  const double l0 = std::log(s.t_min_positive), l1 = std::log(s.t_max);
  for (int i = 0; i < s.radii - 1; ++i) {
    env.radii.push_back(std::exp(l0 + (l1 - l0) * double(i) / double(std::max(1, s.radii - 2))));
  }
  env.lambda = kInf;
  env.Lambda = 0.0;
  for (double t : env.radii) {
    const Sym zhat = random_unit();
    const Sym z = t * zhat;
    double lo = kInf, hi = 0.0;
    for (int d = 0; d < s.directions; ++d) {
      // The radial direction carries the degenerate eigenvalue for the catalog.
      const Sym xi = d == 0 ? zhat : random_unit();
      const double q = f.hessian_apply(z, xi) / xi.squaredNorm();
      lo = std::min(lo, q * std::pow(1.0 + t * t, 0.5 * a));
      hi = std::max(hi, q * std::sqrt(1.0 + t * t));
    }
    env.lower.push_back(lo);
    env.upper.push_back(hi);
    env.lambda = std::min(env.lambda, lo);
    env.Lambda = std::max(env.Lambda, hi);
  }

  // Least-squares slope of log(lower) against log t over the top decade.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < env.radii.size(); ++i) {
    if (env.radii[i] < s.t_max / 10.0 || !(env.lower[i] > 0.0)) continue;
    const double x = std::log(env.radii[i]), y = std::log(env.lower[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  env.tail_slope = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
  return env;
}

template <int Dim>
std::optional<EllipticityProfile> certify_ellipticity(const IntegrandSpec& f, double a,
                                                      const EllipticitySampling& s) {
  const EllipticityEnvelope env = ellipticity_envelope<Dim>(f, a, s);
  if (!(env.lambda > 0.0) || env.tail_slope < -s.tail_slope_tolerance) return std::nullopt;
  return EllipticityProfile{a, env.lambda, env.Lambda};
}

template <int Dim>
ShiftedIntegrand<Dim>::ShiftedIntegrand(IntegrandSpec base, const Sym& shift_point, const Sym& reference,
                                        double radius)
    : base_(std::move(base)), a_(shift_point), xi0_(reference), rho_(radius) {
  if (!(rho_ > 0.0 && rho_ < 1.0)) throw DomainError("shift: radius must lie in (0, 1)");
  if ((a_ - xi0_).norm() > 0.5 * rho_) {
    throw DomainError("shift: ball around the shift point leaves the reference ball");
  }
  const double c = xi0_.norm();
  const HessianRange range = hessian_eigen_range(base_, std::max(0.0, c - rho_), c + rho_);
  m_ = range.min_eigenvalue;
  sup_hessian_ = range.max_eigenvalue;
  if (!(m_ > 0.0)) throw DomainError("shift: Hessian is not positive definite on the reference ball");
  fa_ = base_.value(a_);
  grad_a_ = base_.gradient(a_);
}

template <int Dim>
double ShiftedIntegrand<Dim>::value(const Sym& xi) const {
  const double r = xi.norm();
  if (r <= 0.05 * rho_) {
    // Taylor remainder ∫₀¹ (1−s) <f''(a+sξ)ξ,ξ> ds avoids cancellation for small ξ.
    static const QuadratureRule rule = gauss_legendre_on(16, 0.0, 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double s = rule.nodes[i];
      acc += rule.weights[i] * (1.0 - s) * base_.hessian_apply(Sym(a_ + s * xi), xi);
    }
    return acc;
  }
  return base_.value(Sym(a_ + xi)) - fa_ - frobenius_dot(grad_a_, xi);
}

template EllipticityEnvelope ellipticity_envelope<2>(const IntegrandSpec&, double, const EllipticitySampling&);
template EllipticityEnvelope ellipticity_envelope<3>(const IntegrandSpec&, double, const EllipticitySampling&);
template std::optional<EllipticityProfile> certify_ellipticity<2>(const IntegrandSpec&, double,
                                                                 const EllipticitySampling&);
template std::optional<EllipticityProfile> certify_ellipticity<3>(const IntegrandSpec&, double,
                                                                 const EllipticitySampling&);
template class ShiftedIntegrand<2>;
template class ShiftedIntegrand<3>;

}  // namespace bdlab
