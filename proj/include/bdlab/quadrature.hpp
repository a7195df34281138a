#pragma once
// Gauss rules computed by the Golub-Welsch eigenvalue method.

#include <functional>
#include <vector>

namespace bdlab {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  double integrate(const std::function<double(double)>& f) const;
};

/// n-point Gauss-Jacobi rule for the weight (1-x)^alpha (1+x)^beta on [-1, 1].
/// Requires alpha, beta > -1.
QuadratureRule gauss_jacobi(int n, double alpha, double beta);

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// Gauss rule on [0, 1] for the weight s^beta (beta > -1).
QuadratureRule gauss_unit_power(int n, double beta);

/// Gauss-Legendre rule mapped to [lo, hi].
QuadratureRule gauss_legendre_on(int n, double lo, double hi);

}  // namespace bdlab
