#pragma once
// Post-hoc regularity diagnostics on discrete fields: excess decay, gradient
// integrability scaling, convolution-Poincaré ratios and comparison-map data.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bdlab/integrands.hpp"
#include "bdlab/mesh.hpp"

namespace bdlab {

/// Excess values below this are treated as exact zeros.
inline constexpr double kExcessZero = 1e-24;

struct ExcessLevel {
  double radius = 0.0;
  double phi = 0.0;
  double phi_tilde = 0.0;  ///< Φ divided by the discrete ball volume
  double volume = 0.0;
  int points = 0;
};

template <int Dim>
struct ExcessProfile {
  typename Grid<Dim>::Point center;
  std::vector<ExcessLevel> levels;  ///< r_k = R 2^{−k}, k = 0, 1, ...
};

/// Φ = ∫_B V(ε − (ε)_B) over the discrete ball; also returns the mean strain.
template <int Dim>
ExcessLevel ball_excess(const StrainField<Dim>& e, const DiscreteBall<Dim>& ball,
                        SymMatrix<double, Dim>* mean = nullptr);

/// Ladder R, R/2, ... down to the smallest radius ≥ r_min (default 4h).
/// Throws DomainError if B(x₀,R) leaves Ω.
template <int Dim>
ExcessProfile<Dim> excess(const StrainField<Dim>& e, const typename Grid<Dim>::Point& x0, double R,
                          std::optional<double> r_min = std::nullopt);

template <int Dim>
ExcessProfile<Dim> excess(const DisplacementField<Dim>& u, const typename Grid<Dim>::Point& x0, double R,
                          std::optional<double> r_min = std::nullopt);

struct DecayFit {
  double slope = 0.0;  ///< d log Φ̃ / d log r, estimates 2α
  double intercept = 0.0;
  int points = 0;
  bool exact = false;  ///< every level at machine zero
  bool applicable = true;  ///< Φ̃ at the top radius below the smallness threshold
  bool pass = false;
};

/// Least-squares slope of log Φ̃ against log r. PASS when slope ≥ 2 α_min, or
/// when every level vanishes. Throws PreconditionError with fewer than four
/// nonzero levels.
template <int Dim>
DecayFit decay_fit(const ExcessProfile<Dim>& profile, double alpha_min = 0.25, double smallness = 1.0);

/// Theorem-range predictions for the ellipticity exponent a in dimension n.
struct RegularityPredictor {
  int n = 2;
  double a = 1.5;

  bool valid() const { return a > 1.0 && a < 1.0 + 2.0 / n; }
  /// n(2−a)/(n−2), n ≥ 3.
  double sobolev_exponent() const;
  /// (2−a)/(3−a), the exp-Luxemburg exponent for n = 2.
  double luxemburg_exponent() const { return (2.0 - a) / (3.0 - a); }
  /// Upper end n(2−a)/(n−a) of the second-derivative exponent range.
  double second_order_exponent_bound() const { return n * (2.0 - a) / (n - a); }
  /// n(n−2)/(n−a).
  double singular_set_dimension_bound() const { return n * (n - 2.0) / (n - a); }
};

/// inf{λ > 0 : Σ w_i (exp((s_i/λ)^β) − 1) ≤ 1}; 0 when all samples vanish.
double luxemburg_norm(const std::vector<double>& samples, const std::vector<double>& weights, double beta);
/// Same with every sample carrying mass m.
double luxemburg_norm(const std::vector<double>& samples, double beta, double mass);

template <int Dim>
struct ScalingBall {
  typename Grid<Dim>::Point center;
  double radius = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

template <int Dim>
struct ScalingReport {
  double a = 0.0;
  double exponent = 0.0;  ///< q for n ≥ 3, β for n = 2
  bool luxemburg = false;
  std::vector<ScalingBall<Dim>> balls;
  double max_ratio = 0.0;
};

/// LHS: (⨍_{B(r)}|∇u|^q)^{1/q}, or for n = 2 the exp L^β Luxemburg norm of |∇u|
/// w.r.t. the normalized measure on B(r). RHS: (1 + ⨍_{B(5r)}|ε(u)|)^{1/(2−a)} + r⁻¹⨍_{B(r)}|u|.
/// Throws PreconditionError unless 1 < a < 1 + 2/n, DomainError if B(x₀,5r) leaves Ω.
template <int Dim>
ScalingReport<Dim> sobolev_scaling_check(const DisplacementField<Dim>& u, double a,
                                         const std::vector<std::pair<typename Grid<Dim>::Point, double>>& balls);

/// Uses the registered ellipticity exponent of f.
template <int Dim>
ScalingReport<Dim> sobolev_scaling_check(const DisplacementField<Dim>& u, const IntegrandSpec& f,
                                         const std::vector<std::pair<typename Grid<Dim>::Point, double>>& balls);

struct PoincareSample {
  double eps = 0.0;
  double load = 0.0;
  double lhs = 0.0;  ///< ∫_U V(L(u − ρ_ε ∗ u))
  double rhs_integral = 0.0;  ///< ∫_{U + B(λ√n ε)} V(ε(u))
  double ratio = 0.0;  ///< lhs / (max{Lε,(Lε)²} rhs_integral)
};

/// Ratio for the bump mollifier at scale ε. U is Ω shrunk by max(λ√n ε, ε + h)
/// so that every stencil used is complete and the neighborhood stays in Ω.
/// Throws InequalityViolation if the right side vanishes while the left does not.
template <int Dim>
PoincareSample convolution_poincare_check(const DisplacementField<Dim>& u, double eps, double load,
                                          double lambda = 1.001);

/// ε ∈ {2h, 4h, ...} up to R/8 with R the shortest side of Ω; Lε log-spaced over
/// [1e−2, 1e2] with `points_per_decade` points per decade.
template <int Dim>
std::vector<PoincareSample> poincare_sweep(const DisplacementField<Dim>& u, int points_per_decade = 2,
                                           double lambda = 1.001);

/// Test fields for the sweep: "smooth", "piecewise_rigid" (a rigid jump across
/// the mid-plane x₁ = const) and "strain_concentrated" (a tanh shear band of width 2h).
/// Throws ConfigError for other names.
template <int Dim>
DisplacementField<Dim> poincare_family(const std::string& name, std::shared_ptr<const Grid<Dim>> grid);

inline const std::vector<std::string>& poincare_family_names() {
  static const std::vector<std::string> names = {"smooth", "piecewise_rigid", "strain_concentrated"};
  return names;
}

template <int Dim>
struct ComparisonDiagnostics {
  SymMatrix<double, Dim> xi0;
  double phi_tilde = 0.0;
  double eps = 0.0;
  double lambda_con = 1.001;
  double sup_term = 0.0;
  double holder_term = 0.0;  ///< 2^α (r/2)^α [ε(v)]_α
  double t_alpha = 0.0;
  double predicted = 0.0;  ///< Φ̃^{α/(n+4α)}
  double ratio = 0.0;  ///< t_alpha / predicted
};

/// ε = r Φ̃^{1/(n+4α)} / (48 √n λ_con).
double mollification_scale(int n, double r, double phi_tilde, double alpha, double lambda_con = 1.001);

/// sup_B|ε(v) − ξ₀| and the dyadic-offset Hölder seminorm of cell-mean strains over B(x₀,r).
template <int Dim>
std::pair<double, double> holder_data(const DisplacementField<Dim>& v, const SymMatrix<double, Dim>& xi0,
                                      const typename Grid<Dim>::Point& x0, double r, double alpha);

/// Mollifies u at the scale above and evaluates t_{α,ξ₀}(u_{ε,ε}; x₀, r/2) with
/// ξ₀ the mean strain over B(x₀,r). Throws PreconditionError if Φ̃ ≥ 1 and
/// GridTooCoarse if ε < h; Φ̃ = 0 short-circuits with t = 0.
template <int Dim>
ComparisonDiagnostics<Dim> mollification_parameters(const DisplacementField<Dim>& u,
                                                    const typename Grid<Dim>::Point& x0, double r, double alpha,
                                                    double lambda_con = 1.001);

/// ∫_B f(ε(v)) − min ∫_B f(ε(w)) over w = v off the cells centred in B(x₀,r).
template <int Dim>
double dev_alpha(const DisplacementField<Dim>& v, const IntegrandSpec& f, const typename Grid<Dim>::Point& x0,
                 double r, double tolerance = 1e-10);

}  // namespace bdlab
