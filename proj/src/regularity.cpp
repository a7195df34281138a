#include "bdlab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdlab/parallel.hpp"
#include "bdlab/solver.hpp"

namespace bdlab {

// ---------------------------------------------------------------- excess

template <int Dim>
ExcessLevel ball_excess(const StrainField<Dim>& e, const DiscreteBall<Dim>& ball, SymMatrix<double, Dim>* mean) {
  SymMatrix<double, Dim> m;
  for (int q : ball.quad) m += e[q];
  m = m / double(ball.quad.size());
  double phi = 0.0;
  for (int q : ball.quad) phi += v_function(SymMatrix<double, Dim>(e[q] - m));
  phi *= e.grid->quad_weight();
  if (mean) *mean = m;
  return {ball.radius, phi, phi / ball.volume, ball.volume, static_cast<int>(ball.quad.size())};
}

template <int Dim>
ExcessProfile<Dim> excess(const StrainField<Dim>& e, const typename Grid<Dim>::Point& x0, double R,
                          std::optional<double> r_min) {
  const Grid<Dim>& g = *e.grid;
  if (g.distance_to_boundary(x0) < R * (1.0 - 1e-12)) throw DomainError("B(x0, R) leaves the domain");
  const double floor_r = r_min.value_or(4.0 * g.max_spacing());
  ExcessProfile<Dim> p;
  p.center = x0;
  for (double r = R; r >= floor_r * (1.0 - 1e-12); r *= 0.5) {
    p.levels.push_back(ball_excess(e, discrete_ball(g, x0, r)));
  }
  if (p.levels.empty()) throw GridTooCoarse("excess ladder is empty: R below the smallest radius");
  return p;
}

template <int Dim>
ExcessProfile<Dim> excess(const DisplacementField<Dim>& u, const typename Grid<Dim>::Point& x0, double R,
                          std::optional<double> r_min) {
  return excess(symmetric_gradient(u), x0, R, r_min);
}

template <int Dim>
DecayFit decay_fit(const ExcessProfile<Dim>& profile, double alpha_min, double smallness) {
  DecayFit fit;
  std::vector<double> x, y;
  for (const auto& l : profile.levels) {
    if (l.phi_tilde > kExcessZero) {
      x.push_back(std::log(l.radius));
      y.push_back(std::log(l.phi_tilde));
    }
  }
  if (x.empty()) {
    fit.exact = true;
    fit.pass = true;
    return fit;
  }
  if (x.size() < 4) throw PreconditionError("decay fit needs at least four nonzero excess levels");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = static_cast<int>(x.size());
  fit.applicable = profile.levels.front().phi_tilde < smallness;
  fit.pass = fit.slope >= 2.0 * alpha_min;
  return fit;
}

// ---------------------------------------------------------------- predictor, Luxemburg

double RegularityPredictor::sobolev_exponent() const {
  if (n < 3) throw PreconditionError("the Sobolev exponent is defined for n >= 3; use the Luxemburg branch");
  return n * (2.0 - a) / (n - 2.0);
}

double luxemburg_norm(const std::vector<double>& samples, const std::vector<double>& weights, double beta) {
  if (!(beta > 0.0)) throw InvalidParameter("Luxemburg exponent must be positive");
  if (samples.size() != weights.size()) throw InvalidParameter("one weight per sample is required");
  double smax = 0.0;
  for (double s : samples) {
    if (!std::isfinite(s) || s < 0.0) throw InvalidParameter("Luxemburg samples must be finite and nonnegative");
    smax = std::max(smax, s);
  }
  if (smax == 0.0) return 0.0;
  auto modular = [&](double lambda) {
    double m = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i] > 0.0) m += weights[i] * std::expm1(std::pow(samples[i] / lambda, beta));
    }
    return m;
  };
  double hi = smax, lo = smax;
  while (modular(hi) > 1.0) hi *= 2.0;
  while (modular(lo) <= 1.0) lo *= 0.5;
  while ((hi - lo) > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (modular(mid) > 1.0) lo = mid;
    else hi = mid;
  }
  return hi;
}

double luxemburg_norm(const std::vector<double>& samples, double beta, double mass) {
  return luxemburg_norm(samples, std::vector<double>(samples.size(), mass), beta);
}

// ---------------------------------------------------------------- scaling check

template <int Dim>
ScalingReport<Dim> sobolev_scaling_check(const DisplacementField<Dim>& u, double a,
                                         const std::vector<std::pair<typename Grid<Dim>::Point, double>>& balls) {
  const RegularityPredictor pred{Dim, a};
  if (!pred.valid()) {
    throw PreconditionError("ellipticity exponent a = " + std::to_string(a) +
                            " is outside the range 1 < a < 1 + 2/n of the gradient estimate");
  }
  const Grid<Dim>& g = u.grid();
  const auto du = full_gradient(u);
  const StrainField<Dim> e = symmetric_gradient(u);
  ScalingReport<Dim> rep;
  rep.a = a;
  rep.luxemburg = Dim == 2;
  rep.exponent = Dim == 2 ? pred.luxemburg_exponent() : pred.sobolev_exponent();
  for (const auto& [x0, r] : balls) {
    if (g.distance_to_boundary(x0) < 5.0 * r * (1.0 - 1e-12)) throw DomainError("B(x0, 5r) leaves the domain");
    const DiscreteBall<Dim> inner = discrete_ball(g, x0, r);
    const DiscreteBall<Dim> outer = discrete_ball(g, x0, 5.0 * r);
    std::vector<double> grad;
    double u_mean = 0.0;
    for (int q : inner.quad) {
      grad.push_back(du[q].norm());
      u_mean += u.at(g.quad_point(q)).norm();
    }
    u_mean /= double(inner.quad.size());
    double lhs = 0.0;
    if (Dim == 2) {
      lhs = luxemburg_norm(grad, rep.exponent, 1.0 / double(inner.quad.size()));
    } else {
      for (double s : grad) lhs += std::pow(s, rep.exponent);
      lhs = std::pow(lhs / double(grad.size()), 1.0 / rep.exponent);
    }
    double e_mean = 0.0;
    for (int q : outer.quad) e_mean += e[q].norm();
    e_mean /= double(outer.quad.size());
    const double rhs = std::pow(1.0 + e_mean, 1.0 / (2.0 - a)) + u_mean / r;
    ScalingBall<Dim> b{x0, r, lhs, rhs, lhs / rhs};
    rep.max_ratio = std::max(rep.max_ratio, b.ratio);
    rep.balls.push_back(b);
  }
  return rep;
}

template <int Dim>
ScalingReport<Dim> sobolev_scaling_check(const DisplacementField<Dim>& u, const IntegrandSpec& f,
                                         const std::vector<std::pair<typename Grid<Dim>::Point, double>>& balls) {
  if (!f.ellipticity_a()) throw PreconditionError(f.name() + " has no registered ellipticity exponent");
  return sobolev_scaling_check(u, *f.ellipticity_a(), balls);
}

// ---------------------------------------------------------------- convolution Poincaré

template <int Dim>
PoincareSample convolution_poincare_check(const DisplacementField<Dim>& u, double eps, double load, double lambda) {
  using Point = typename Grid<Dim>::Point;
  if (!(load > 0.0)) throw InvalidParameter("load L must be positive");
  if (!(lambda > 1.0)) throw InvalidParameter("lambda must exceed 1");
  const Grid<Dim>& g = u.grid();
  const auto kernel = make_mollifier(g, MollifierKind::Bump, eps);
  const double reach = lambda * std::sqrt(double(Dim)) * eps;
  const double margin = std::max(reach, eps + g.max_spacing());
  const Point ulo = g.lo() + Point::Constant(margin);
  const Point uhi = g.hi() - Point::Constant(margin);
  if (!((uhi - ulo).array() > 0.0).all()) throw DomainError("mollification neighborhood does not fit in the grid");
  const DisplacementField<Dim> diff = u - mollify(u, kernel);
  const StrainField<Dim> e = symmetric_gradient(u);
  std::array<std::array<double, Grid<Dim>::kCellNodes>, Grid<Dim>::kCellQuad> shape;
  for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) shape[q] = g.shape_values(g.quad_reference(q));

  std::vector<double> lhs_part(g.num_cells()), rhs_part(g.num_cells());
  parallel_for(g.num_cells(), [&](std::size_t c) {
    const auto& nodes = g.cell_nodes(int(c));
    double l = 0.0, r = 0.0;
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) {
      const Point x = g.quad_point(int(c), q);
      const Point nearest = x.cwiseMax(ulo).cwiseMin(uhi);
      const double dist = (x - nearest).norm();
      if (dist == 0.0) {
        Point d = Point::Zero();
        for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) d += shape[q][a] * diff.values().col(nodes[a]);
        l += v_function(load * d.norm());
      }
      if (dist <= reach) r += v_function(e[int(c) * Grid<Dim>::kCellQuad + q]);
    }
    lhs_part[c] = l;
    rhs_part[c] = r;
  });
  PoincareSample s;
  s.eps = eps;
  s.load = load;
  for (int c = 0; c < g.num_cells(); ++c) {
    s.lhs += lhs_part[c];
    s.rhs_integral += rhs_part[c];
  }
  s.lhs *= g.quad_weight();
  s.rhs_integral *= g.quad_weight();
  const double le = load * eps;
  if (s.rhs_integral <= kExcessZero) {
    if (s.lhs > 1e-12) {
      throw InequalityViolation("convolution Poincare: right side vanishes but left side is " + std::to_string(s.lhs));
    }
    s.ratio = 0.0;
  } else {
    s.ratio = s.lhs / (std::max(le, le * le) * s.rhs_integral);
  }
  return s;
}

template <int Dim>
std::vector<PoincareSample> poincare_sweep(const DisplacementField<Dim>& u, int points_per_decade, double lambda) {
  if (points_per_decade < 1) throw InvalidParameter("points_per_decade must be at least 1");
  const Grid<Dim>& g = u.grid();
  const double h = g.max_spacing();
  const double side = (g.hi() - g.lo()).minCoeff();
  std::vector<PoincareSample> out;
  for (double eps = 2.0 * h; eps <= side / 8.0 * (1.0 + 1e-12); eps *= 2.0) {
    for (int i = 0; i <= 4 * points_per_decade; ++i) {
      const double le = std::pow(10.0, -2.0 + double(i) / points_per_decade);
      out.push_back(convolution_poincare_check(u, eps, le / eps, lambda));
    }
  }
  if (out.empty()) throw GridTooCoarse("Poincare sweep is empty: 2h exceeds R/8");
  return out;
}

template <int Dim>
DisplacementField<Dim> poincare_family(const std::string& name, std::shared_ptr<const Grid<Dim>> grid) {
  using Point = typename Grid<Dim>::Point;
  const Point lo = grid->lo(), ext = grid->hi() - grid->lo();
  const Point mid = lo + 0.5 * ext;
  const double h = grid->max_spacing();
  auto unit = [&](const Point& x) { return Point((x - lo).cwiseQuotient(ext)); };
  if (name == "smooth") {
    return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
      const Point y = unit(x);
      Point v = Point::Zero();
      v(0) = std::sin(M_PI * y(0)) * std::cos(M_PI * y(1));
      v(1) = y(0) * y(1) * y(1);
      if constexpr (Dim == 3) v(2) = y(2) * std::sin(y(0));
      return v;
    });
  }
  if (name == "piecewise_rigid") {
    return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
      Point v = Point::Zero();
      if (x(0) < mid(0) - 1e-12 * ext(0)) return v;
      v(0) = 1.0 - 0.5 * (x(1) - mid(1));
      v(1) = 0.5 * (x(0) - mid(0));
      return v;
    });
  }
  if (name == "strain_concentrated") {
    return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
      Point v = Point::Zero();
      v(0) = std::tanh((x(1) - mid(1)) / (2.0 * h));
      return v;
    });
  }
  throw ConfigError("unknown Poincare field family '" + name + "'");
}

// ---------------------------------------------------------------- comparison data

double mollification_scale(int n, double r, double phi_tilde, double alpha, double lambda_con) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
  if (!(lambda_con > 1.0)) throw InvalidParameter("lambda_con must exceed 1");
  return r * std::pow(phi_tilde, 1.0 / (n + 4.0 * alpha)) / (48.0 * std::sqrt(double(n)) * lambda_con);
}

template <int Dim>
std::pair<double, double> holder_data(const DisplacementField<Dim>& v, const SymMatrix<double, Dim>& xi0,
                                      const typename Grid<Dim>::Point& x0, double r, double alpha) {
  const Grid<Dim>& g = v.grid();
  const StrainField<Dim> e = symmetric_gradient(v);
  const DiscreteBall<Dim> ball = discrete_ball(g, x0, r);
  double sup = 0.0;
  for (int q : ball.quad) sup = std::max(sup, (e[q] - xi0).norm());

  std::vector<int> inside(g.num_cells(), 0);
  std::vector<SymMatrix<double, Dim>> mean(g.num_cells());
  for (int c = 0; c < g.num_cells(); ++c) {
    if ((g.cell_center(c) - x0).norm() <= r) {
      inside[c] = 1;
      mean[c] = e.cell_mean(c);
    }
  }
  std::vector<double> best(g.num_cells(), 0.0);
  parallel_for(g.num_cells(), [&](std::size_t c) {
    if (!inside[c]) return;
    const auto m = g.cell_multi(int(c));
    double b = 0.0;
    for (int d = 0; d < Dim; ++d) {
      for (int step = 1; step * g.spacing()(d) <= 2.0 * r; step *= 2) {
        auto n = m;
        n(d) += step;
        if (n(d) >= g.cells()(d)) break;
        const int cn = g.cell_index(n);
        if (!inside[cn]) continue;
        const double dist = step * g.spacing()(d);
        b = std::max(b, (mean[cn] - mean[c]).norm() / std::pow(dist, alpha));
      }
    }
    best[c] = b;
  });
  return {sup, *std::max_element(best.begin(), best.end())};
}

template <int Dim>
ComparisonDiagnostics<Dim> mollification_parameters(const DisplacementField<Dim>& u,
                                                    const typename Grid<Dim>::Point& x0, double r, double alpha,
                                                    double lambda_con) {
  const Grid<Dim>& g = u.grid();
  if (g.distance_to_boundary(x0) < r * (1.0 - 1e-12)) throw DomainError("B(x0, r) leaves the domain");
  const StrainField<Dim> e = symmetric_gradient(u);
  ComparisonDiagnostics<Dim> d;
  d.lambda_con = lambda_con;
  const ExcessLevel lvl = ball_excess(e, discrete_ball(g, x0, r), &d.xi0);
  d.phi_tilde = lvl.phi_tilde;
  if (d.phi_tilde >= 1.0) throw PreconditionError("mollification rule requires excess below 1");
  if (d.phi_tilde <= kExcessZero) return d;
  d.eps = mollification_scale(Dim, r, d.phi_tilde, alpha, lambda_con);
  if (d.eps < g.max_spacing()) {
    throw GridTooCoarse("mollification scale " + std::to_string(d.eps) + " is below the grid spacing");
  }
  const DisplacementField<Dim> v = mollify_twice(u, d.eps);
  const auto [sup, semi] = holder_data(v, d.xi0, x0, 0.5 * r, alpha);
  d.sup_term = sup;
  d.holder_term = std::pow(2.0, alpha) * std::pow(0.5 * r, alpha) * semi;
  d.t_alpha = d.sup_term + d.holder_term;
  d.predicted = std::pow(d.phi_tilde, alpha / (Dim + 4.0 * alpha));
  d.ratio = d.t_alpha / d.predicted;
  return d;
}

template <int Dim>
double dev_alpha(const DisplacementField<Dim>& v, const IntegrandSpec& f, const typename Grid<Dim>::Point& x0,
                 double r, double tolerance) {
  const Grid<Dim>& g = v.grid();
  if (g.distance_to_boundary(x0) < r * (1.0 - 1e-12)) throw DomainError("B(x0, r) leaves the domain");
  std::vector<char> mask(g.num_cells(), 0);
  for (int c = 0; c < g.num_cells(); ++c) mask[c] = (g.cell_center(c) - x0).norm() <= r;
  const DirichletProblem<Dim> problem(v.grid_ptr(), mask);
  const double own = problem.energy(f, v);
  const ViscosityStage<Dim> best = minimize(f, problem, v, tolerance);
  return own - best.energy;
}

#define BDLAB_REGULARITY_INSTANTIATE(D)                                                                              \
  template ExcessLevel ball_excess(const StrainField<D>&, const DiscreteBall<D>&, SymMatrix<double, D>*);           \
  template ExcessProfile<D> excess(const StrainField<D>&, const Grid<D>::Point&, double, std::optional<double>);    \
  template ExcessProfile<D> excess(const DisplacementField<D>&, const Grid<D>::Point&, double,                      \
                                   std::optional<double>);                                                          \
  template DecayFit decay_fit(const ExcessProfile<D>&, double, double);                                             \
  template ScalingReport<D> sobolev_scaling_check(const DisplacementField<D>&, double,                              \
                                                  const std::vector<std::pair<Grid<D>::Point, double>>&);           \
  template ScalingReport<D> sobolev_scaling_check(const DisplacementField<D>&, const IntegrandSpec&,                \
                                                  const std::vector<std::pair<Grid<D>::Point, double>>&);           \
  template PoincareSample convolution_poincare_check(const DisplacementField<D>&, double, double, double);          \
  template std::pair<double, double> holder_data(const DisplacementField<D>&, const SymMatrix<double, D>&,          \
                                                 const Grid<D>::Point&, double, double);                            \
  template std::vector<PoincareSample> poincare_sweep(const DisplacementField<D>&, int, double);                \
  template DisplacementField<D> poincare_family(const std::string&, std::shared_ptr<const Grid<D>>);               \
  template ComparisonDiagnostics<D> mollification_parameters(const DisplacementField<D>&, const Grid<D>::Point&,    \
                                                             double, double, double);                               \
  template double dev_alpha(const DisplacementField<D>&, const IntegrandSpec&, const Grid<D>::Point&, double, double);

BDLAB_REGULARITY_INSTANTIATE(2)
BDLAB_REGULARITY_INSTANTIATE(3)

}  // namespace bdlab
