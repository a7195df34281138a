#include "bdlab/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "bdlab/errors.hpp"

namespace bdlab {

double QuadratureRule::integrate(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
  return s;
}

QuadratureRule gauss_jacobi(int n, double alpha, double beta) {
  if (n < 1) throw InvalidParameter("gauss_jacobi: need at least one node");
  if (!(alpha > -1.0) || !(beta > -1.0)) throw InvalidParameter("gauss_jacobi: alpha, beta must exceed -1");

  const double ab = alpha + beta;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + ab;
    jac(k, k) = k == 0 ? (beta - alpha) / (ab + 2.0) : (beta * beta - alpha * alpha) / (s * (s + 2.0));
  }
  for (int k = 1; k < n; ++k) {
    const double s = 2.0 * k + ab;
    double b;
    if (k == 1) {
      b = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    } else {
      b = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
    }
    jac(k, k - 1) = jac(k - 1, k) = std::sqrt(b);
  }
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                              std::lgamma(beta + 1.0) - std::lgamma(ab + 2.0));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

QuadratureRule gauss_legendre(int n) {
  QuadratureRule r = gauss_jacobi(n, 0.0, 0.0);
  // Symmetrize to remove eigen-solver noise.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (r.nodes[n - 1 - i] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[n - 1 - i]);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

QuadratureRule gauss_unit_power(int n, double beta) {
  QuadratureRule r = gauss_jacobi(n, 0.0, beta);
  const double scale = std::pow(2.0, -beta - 1.0);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = 0.5 * (1.0 + r.nodes[i]);
    r.weights[i] *= scale;
  }
  return r;
}

QuadratureRule gauss_legendre_on(int n, double lo, double hi) {
  QuadratureRule r = gauss_legendre(n);
  const double half = 0.5 * (hi - lo);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = lo + half * (r.nodes[i] + 1.0);
    r.weights[i] *= half;
  }
  return r;
}

}  // namespace bdlab
