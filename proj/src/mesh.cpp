#include "bdlab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bdlab/integrands.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/quadrature.hpp"

namespace bdlab {

// ---------------------------------------------------------------- Grid

template <int Dim>
Grid<Dim>::Grid(const Point& lo, const Point& hi, const Multi& cells) : lo_(lo), hi_(hi), cells_(cells) {
  if ((cells_ < 1).any()) throw InvalidParameter("grid needs at least one cell per axis");
  if (!((hi_ - lo_).array() > 0.0).all()) throw InvalidParameter("grid box must have positive extent");
  h_ = (hi_ - lo_).cwiseQuotient(cells_.template cast<double>().matrix());
  num_cells_ = cells_.prod();
  num_nodes_ = (cells_ + 1).prod();
  cell_volume_ = h_.prod();

  incidence_.resize(num_cells_);
  for (int c = 0; c < num_cells_; ++c) {
    const Multi m = cell_multi(c);
    for (int a = 0; a < kCellNodes; ++a) {
      Multi n = m;
      for (int d = 0; d < Dim; ++d) n(d) += (a >> d) & 1;
      incidence_[c][a] = node_index(n);
    }
  }

  boundary_node_.assign(num_nodes_, 0);
  for (int i = 0; i < num_nodes_; ++i) {
    const Multi m = node_multi(i);
    if ((m == 0).any() || (m == cells_).any()) {
      boundary_node_[i] = 1;
      boundary_list_.push_back(i);
    }
  }

  const double g = 0.5 / std::sqrt(3.0);
  for (int q = 0; q < kCellQuad; ++q) {
    for (int d = 0; d < Dim; ++d) quad_ref_[q](d) = ((q >> d) & 1) ? 0.5 + g : 0.5 - g;
    quad_grad_[q] = shape_gradients_at(quad_ref_[q]);
  }

  for (int d = 0; d < Dim; ++d) {
    for (int side = 0; side < 2; ++side) {
      for (int c = 0; c < num_cells_; ++c) {
        const Multi m = cell_multi(c);
        if (m(d) != (side ? cells_(d) - 1 : 0)) continue;
        Face f;
        f.cell = c;
        f.axis = d;
        f.side = side;
        f.normal = Point::Zero();
        f.normal(d) = side ? 1.0 : -1.0;
        f.area = cell_volume_ / h_(d);
        int k = 0;
        for (int a = 0; a < kCellNodes; ++a) {
          if (((a >> d) & 1) == side) f.nodes[k++] = incidence_[c][a];
        }
        faces_.push_back(f);
      }
    }
  }
}

template <int Dim>
int Grid<Dim>::node_index(const Multi& m) const {
  int idx = 0;
  int stride = 1;
  for (int d = 0; d < Dim; ++d) {
    idx += m(d) * stride;
    stride *= cells_(d) + 1;
  }
  return idx;
}

template <int Dim>
typename Grid<Dim>::Multi Grid<Dim>::node_multi(int node) const {
  Multi m;
  for (int d = 0; d < Dim; ++d) {
    m(d) = node % (cells_(d) + 1);
    node /= cells_(d) + 1;
  }
  return m;
}

template <int Dim>
typename Grid<Dim>::Point Grid<Dim>::node_point(int node) const {
  return lo_ + h_.cwiseProduct(node_multi(node).template cast<double>().matrix());
}

template <int Dim>
int Grid<Dim>::cell_index(const Multi& m) const {
  int idx = 0;
  int stride = 1;
  for (int d = 0; d < Dim; ++d) {
    idx += m(d) * stride;
    stride *= cells_(d);
  }
  return idx;
}

template <int Dim>
typename Grid<Dim>::Multi Grid<Dim>::cell_multi(int cell) const {
  Multi m;
  for (int d = 0; d < Dim; ++d) {
    m(d) = cell % cells_(d);
    cell /= cells_(d);
  }
  return m;
}

template <int Dim>
typename Grid<Dim>::Point Grid<Dim>::cell_origin(int cell) const {
  return lo_ + h_.cwiseProduct(cell_multi(cell).template cast<double>().matrix());
}

template <int Dim>
std::array<double, Grid<Dim>::kCellNodes> Grid<Dim>::shape_values(const Point& r) const {
  std::array<double, kCellNodes> n;
  for (int a = 0; a < kCellNodes; ++a) {
    double v = 1.0;
    for (int d = 0; d < Dim; ++d) v *= ((a >> d) & 1) ? r(d) : 1.0 - r(d);
    n[a] = v;
  }
  return n;
}

template <int Dim>
std::array<typename Grid<Dim>::Point, Grid<Dim>::kCellNodes> Grid<Dim>::shape_gradients_at(const Point& r) const {
  std::array<Point, kCellNodes> g;
  for (int a = 0; a < kCellNodes; ++a) {
    for (int d = 0; d < Dim; ++d) {
      double v = (((a >> d) & 1) ? 1.0 : -1.0) / h_(d);
      for (int e = 0; e < Dim; ++e) {
        if (e != d) v *= ((a >> e) & 1) ? r(e) : 1.0 - r(e);
      }
      g[a](d) = v;
    }
  }
  return g;
}

template <int Dim>
std::pair<int, typename Grid<Dim>::Point> Grid<Dim>::locate(const Point& x) const {
  Multi m;
  Point ref;
  for (int d = 0; d < Dim; ++d) {
    const double s = (x(d) - lo_(d)) / h_(d);
    m(d) = std::clamp(static_cast<int>(std::floor(s)), 0, cells_(d) - 1);
    ref(d) = std::clamp(s - m(d), 0.0, 1.0);
  }
  return {cell_index(m), ref};
}

template <int Dim>
double Grid<Dim>::distance_to_boundary(const Point& x) const {
  return std::min((x - lo_).minCoeff(), (hi_ - x).minCoeff());
}

// ---------------------------------------------------------------- fields

template <int Dim>
DisplacementField<Dim>::DisplacementField(GridPtr grid)
    : grid_(std::move(grid)), values_(Values::Zero(Dim, grid_->num_nodes())) {}

template <int Dim>
DisplacementField<Dim>::DisplacementField(GridPtr grid, Values values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.cols() != grid_->num_nodes()) throw InvalidParameter("nodal value count does not match the grid");
}

template <int Dim>
typename DisplacementField<Dim>::Point DisplacementField<Dim>::at(const Point& x) const {
  const auto [cell, ref] = grid_->locate(x);
  const auto n = grid_->shape_values(ref);
  const auto& nodes = grid_->cell_nodes(cell);
  Point v = Point::Zero();
  for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) v += n[a] * values_.col(nodes[a]);
  return v;
}

template <int Dim>
typename DisplacementField<Dim>::Full DisplacementField<Dim>::gradient(int cell, const Point& reference) const {
  const auto g = grid_->shape_gradients_at(reference);
  const auto& nodes = grid_->cell_nodes(cell);
  Full du = Full::Zero();
  for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) du += values_.col(nodes[a]) * g[a].transpose();
  return du;
}

template <int Dim>
typename DisplacementField<Dim>::Full DisplacementField<Dim>::gradient_at_quad(int cell, int q) const {
  const auto& g = grid_->shape_gradients(q);
  const auto& nodes = grid_->cell_nodes(cell);
  Full du = Full::Zero();
  for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) du += values_.col(nodes[a]) * g[a].transpose();
  return du;
}

template <int Dim>
void DisplacementField<Dim>::impose_boundary(const DisplacementField& datum) {
  if (datum.values_.cols() != values_.cols()) throw DomainError("boundary datum lives on a different grid");
  for (int i : grid_->boundary_nodes()) values_.col(i) = datum.values_.col(i);
}

template <int Dim>
double DisplacementField<Dim>::boundary_mismatch(const DisplacementField& other) const {
  if (other.values_.cols() != values_.cols()) throw DomainError("fields live on different grids");
  double m = 0.0;
  for (int i : grid_->boundary_nodes()) m = std::max(m, (values_.col(i) - other.values_.col(i)).cwiseAbs().maxCoeff());
  return m;
}

template <int Dim>
DisplacementField<Dim>& DisplacementField<Dim>::operator+=(const DisplacementField& o) {
  if (o.values_.cols() != values_.cols()) throw DomainError("fields live on different grids");
  values_ += o.values_;
  return *this;
}

template <int Dim>
DisplacementField<Dim>& DisplacementField<Dim>::operator-=(const DisplacementField& o) {
  if (o.values_.cols() != values_.cols()) throw DomainError("fields live on different grids");
  values_ -= o.values_;
  return *this;
}

template <int Dim>
DisplacementField<Dim>& DisplacementField<Dim>::operator*=(double s) {
  values_ *= s;
  return *this;
}

template <int Dim>
SymMatrix<double, Dim> StrainField<Dim>::cell_mean(int cell) const {
  SymMatrix<double, Dim> s;
  for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) s += samples[cell * Grid<Dim>::kCellQuad + q];
  return s / double(Grid<Dim>::kCellQuad);
}

template <int Dim>
double StrainField<Dim>::lp_norm(double p) const {
  double s = 0.0;
  for (const auto& e : samples) s += std::pow(e.norm(), p);
  return std::pow(s * grid->quad_weight(), 1.0 / p);
}

template <int Dim>
StrainField<Dim> symmetric_gradient(const DisplacementField<Dim>& u) {
  const Grid<Dim>& grid = u.grid();
  StrainField<Dim> out{u.grid_ptr(), std::vector<SymMatrix<double, Dim>>(grid.num_quad())};
  parallel_for(grid.num_cells(), [&](std::size_t c) {
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) {
      out.samples[c * Grid<Dim>::kCellQuad + q] = SymMatrix<double, Dim>::FromFull(u.gradient_at_quad(int(c), q));
    }
  });
  return out;
}

template <int Dim>
std::vector<Eigen::Matrix<double, Dim, Dim>> full_gradient(const DisplacementField<Dim>& u) {
  const Grid<Dim>& grid = u.grid();
  std::vector<Eigen::Matrix<double, Dim, Dim>> out(grid.num_quad());
  parallel_for(grid.num_cells(), [&](std::size_t c) {
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) out[c * Grid<Dim>::kCellQuad + q] = u.gradient_at_quad(int(c), q);
  });
  return out;
}

template <int Dim>
std::vector<double> divergence(const DisplacementField<Dim>& u) {
  const auto du = full_gradient(u);
  std::vector<double> out(du.size());
  for (std::size_t i = 0; i < du.size(); ++i) out[i] = du[i].trace();
  return out;
}

template <int Dim>
Eigen::Matrix<double, SymMatrix<double, Dim>::kSize, Dim * Grid<Dim>::kCellNodes> strain_operator(
    const Grid<Dim>& grid, int q) {
  using S = SymMatrix<double, Dim>;
  Eigen::Matrix<double, S::kSize, Dim * Grid<Dim>::kCellNodes> b;
  b.setZero();
  const auto& g = grid.shape_gradients(q);
  for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) {
    for (int r = 0; r < Dim; ++r) {
      for (int c = r; c < Dim; ++c) {
        const int k = S::index(r, c);
        if (r == c) {
          b(k, a * Dim + r) = g[a](r);
        } else {
          b(k, a * Dim + r) += 0.5 * g[a](c);
          b(k, a * Dim + c) += 0.5 * g[a](r);
        }
      }
    }
  }
  return b;
}

template <int Dim>
CellRule<Dim> tensor_gauss(int points_per_axis) {
  const QuadratureRule r = gauss_legendre_on(points_per_axis, 0.0, 1.0);
  CellRule<Dim> out;
  int total = 1;
  for (int d = 0; d < Dim; ++d) total *= points_per_axis;
  for (int k = 0; k < total; ++k) {
    typename Grid<Dim>::Point p;
    double w = 1.0;
    int rest = k;
    for (int d = 0; d < Dim; ++d) {
      const int i = rest % points_per_axis;
      rest /= points_per_axis;
      p(d) = r.nodes[i];
      w *= r.weights[i];
    }
    out.points.push_back(p);
    out.weights.push_back(w);
  }
  return out;
}

template <int Dim>
DiscreteBall<Dim> discrete_annulus(const Grid<Dim>& grid, const typename Grid<Dim>::Point& x0, double t, double s) {
  if (!(s > 0.0) || t < 0.0 || t >= s) throw InvalidParameter("annulus radii must satisfy 0 <= t < s");
  if (grid.distance_to_boundary(x0) < s * (1.0 - 1e-12)) throw DomainError("ball leaves the domain");
  DiscreteBall<Dim> b;
  b.center = x0;
  b.inner = t;
  b.radius = s;
  for (int g = 0; g < grid.num_quad(); ++g) {
    const double r = (grid.quad_point(g) - x0).norm();
    if (r <= s && (t == 0.0 || r > t)) b.quad.push_back(g);
  }
  if (b.quad.empty()) throw GridTooCoarse("ball contains no quadrature point");
  b.volume = grid.quad_weight() * b.quad.size();
  return b;
}

template <int Dim>
DiscreteBall<Dim> discrete_ball(const Grid<Dim>& grid, const typename Grid<Dim>::Point& x0, double r) {
  return discrete_annulus(grid, x0, 0.0, r);
}

// ---------------------------------------------------------------- mollifiers

template <int Dim>
double MollifierKernel<Dim>::support_radius(const Grid<Dim>& grid) const {
  double r = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (weights[i] > 0.0) r = std::max(r, grid.spacing().cwiseProduct(offsets[i].template cast<double>().matrix()).norm());
  }
  return r;
}

template <int Dim>
MollifierKernel<Dim> make_mollifier(const Grid<Dim>& grid, MollifierKind kind, double eps) {
  using Multi = typename Grid<Dim>::Multi;
  if (!(eps > 0.0)) throw InvalidParameter("mollification scale must be positive");
  if (eps < grid.max_spacing() * (1.0 - 1e-12)) throw GridTooCoarse("mollification scale below the grid spacing");
  MollifierKernel<Dim> k;
  k.kind = kind;
  k.scale = eps;
  for (int d = 0; d < Dim; ++d) k.reach(d) = static_cast<int>(std::floor(eps / grid.spacing()(d) * (1.0 + 1e-12)));
  Multi s = -k.reach;
  double total = 0.0;
  while (true) {
    const double r = grid.spacing().cwiseProduct(s.template cast<double>().matrix()).norm() / eps;
    double w = 0.0;
    if (kind == MollifierKind::Indicator) {
      w = r <= 1.0 + 1e-12 ? 1.0 : 0.0;
    } else if (r < 1.0) {
      w = std::exp(-1.0 / (1.0 - r * r));
    }
    if (w > 0.0) {
      k.offsets.push_back(s);
      k.weights.push_back(w);
      total += w;
    }
    int d = 0;
    while (d < Dim && s(d) == k.reach(d)) {
      s(d) = -k.reach(d);
      ++d;
    }
    if (d == Dim) break;
    ++s(d);
  }
  for (double& w : k.weights) w /= total;
  return k;
}

template <int Dim>
bool stencil_complete(const Grid<Dim>& grid, const MollifierKernel<Dim>& k, int node) {
  const auto m = grid.node_multi(node);
  return ((m - k.reach) >= 0).all() && ((m + k.reach) <= grid.cells()).all();
}

template <int Dim>
DisplacementField<Dim> mollify(const DisplacementField<Dim>& u, const MollifierKernel<Dim>& k) {
  const Grid<Dim>& grid = u.grid();
  DisplacementField<Dim> out(u.grid_ptr());
  parallel_for(grid.num_nodes(), [&](std::size_t i) {
    const auto m = grid.node_multi(int(i));
    Eigen::Matrix<double, Dim, 1> acc = Eigen::Matrix<double, Dim, 1>::Zero();
    double mass = 0.0;
    for (std::size_t s = 0; s < k.offsets.size(); ++s) {
      const auto n = m + k.offsets[s];
      if ((n < 0).any() || (n > grid.cells()).any()) continue;
      acc += k.weights[s] * u.values().col(grid.node_index(n));
      mass += k.weights[s];
    }
    out.values().col(i) = acc / mass;
  });
  return out;
}

template <int Dim>
DisplacementField<Dim> mollify_twice(const DisplacementField<Dim>& u, double eps) {
  const auto k1 = make_mollifier(u.grid(), MollifierKind::Indicator, eps);
  const auto k2 = make_mollifier(u.grid(), MollifierKind::Bump, eps);
  return mollify(mollify(u, k1), k2);
}

// ---------------------------------------------------------------- Korn

template <int Dim>
double korn_ratio_gradient(const DisplacementField<Dim>& phi) {
  const auto du = full_gradient(phi);
  double num = 0.0, den = 0.0;
  for (const auto& m : du) {
    num += m.squaredNorm();
    den += SymMatrix<double, Dim>::FromFull(m).squaredNorm();
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

template <int Dim>
std::optional<double> korn_ratio_free(const DisplacementField<Dim>& v) {
  const auto du = full_gradient(v);
  Eigen::Matrix<double, Dim, Dim> mean = Eigen::Matrix<double, Dim, Dim>::Zero();
  for (const auto& m : du) mean += m;
  mean /= double(du.size());
  const Eigen::Matrix<double, Dim, Dim> skew = 0.5 * (mean - mean.transpose());
  double num = 0.0, den = 0.0, scale = 0.0;
  for (const auto& m : du) {
    num += (m - skew).squaredNorm();
    den += SymMatrix<double, Dim>::FromFull(m).squaredNorm();
    scale += m.squaredNorm();
  }
  if (den <= 1e-24 * scale || scale == 0.0) return std::nullopt;
  return std::sqrt(num / den);
}

template <int Dim>
KornReport korn_probe(std::shared_ptr<const Grid<Dim>> grid, int trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidParameter("korn_probe needs at least one trial");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  KornReport rep;
  rep.trials = trials;
  for (int t = 0; t < trials; ++t) {
    DisplacementField<Dim> phi(grid);
    for (int i = 0; i < grid->num_nodes(); ++i) {
      for (int d = 0; d < Dim; ++d) phi.values()(d, i) = grid->is_boundary_node(i) ? 0.0 : normal(rng);
    }
    rep.zero_boundary_max = std::max(rep.zero_boundary_max, korn_ratio_gradient(phi));
    DisplacementField<Dim> v(grid);
    for (int i = 0; i < grid->num_nodes(); ++i) {
      for (int d = 0; d < Dim; ++d) v.values()(d, i) = normal(rng);
    }
    if (const auto r = korn_ratio_free(v)) {
      rep.free_max = std::max(rep.free_max, *r);
    } else {
      ++rep.kernel_cases;
    }
  }
  return rep;
}

// ---------------------------------------------------------------- Ornstein

namespace {

// L¹ norms of ∇u and ε(u) on a tensor Gauss rule, with |·| optionally
// smoothed to √(|·|² + δ²) − δ so that the ascent can leave the set ε = 0.
template <int Dim>
struct L1Evaluator {
  const Grid<Dim>& grid;
  CellRule<Dim> rule;
  std::vector<std::array<typename Grid<Dim>::Point, Grid<Dim>::kCellNodes>> grads;
  double delta = 0.0;

  L1Evaluator(const Grid<Dim>& g, int p) : grid(g), rule(tensor_gauss<Dim>(p)) {
    for (const auto& pt : rule.points) grads.push_back(grid.shape_gradients_at(pt));
  }

  using Full = Eigen::Matrix<double, Dim, Dim>;

  Full du(const DisplacementField<Dim>& u, int cell, std::size_t k) const {
    const auto& nodes = grid.cell_nodes(cell);
    Full m = Full::Zero();
    for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) m += u.values().col(nodes[a]) * grads[k][a].transpose();
    return m;
  }

  double soft(double t) const { return delta > 0.0 ? std::sqrt(t * t + delta * delta) - delta : t; }

  // (‖∇u‖₁, ‖ε(u)‖₁)
  std::pair<double, double> norms(const DisplacementField<Dim>& u) const {
    std::vector<double> n(grid.num_cells()), d(grid.num_cells());
    parallel_for(grid.num_cells(), [&](std::size_t c) {
      double sn = 0.0, sd = 0.0;
      for (std::size_t k = 0; k < rule.points.size(); ++k) {
        const Full m = du(u, int(c), k);
        sn += rule.weights[k] * soft(m.norm());
        sd += rule.weights[k] * soft((0.5 * (m + m.transpose())).norm());
      }
      n[c] = sn;
      d[c] = sd;
    });
    double sn = 0.0, sd = 0.0;
    for (int c = 0; c < grid.num_cells(); ++c) {
      sn += n[c];
      sd += d[c];
    }
    return {sn * grid.cell_volume(), sd * grid.cell_volume()};
  }

  // Gradient of N/D with respect to the nodal values; boundary rows zeroed.
  typename DisplacementField<Dim>::Values ascent_direction(const DisplacementField<Dim>& u, double ratio,
                                                            double den) const {
    using Local = Eigen::Matrix<double, Dim, Grid<Dim>::kCellNodes>;
    std::vector<Local> local(grid.num_cells());
    parallel_for(grid.num_cells(), [&](std::size_t c) {
      Local l = Local::Zero();
      for (std::size_t k = 0; k < rule.points.size(); ++k) {
        const Full m = du(u, int(c), k);
        const Full e = 0.5 * (m + m.transpose());
        const double nm = std::sqrt(m.squaredNorm() + delta * delta);
        const double ne = std::sqrt(e.squaredNorm() + delta * delta);
        Full dir = Full::Zero();
        if (nm > 0.0) dir += m / nm;
        if (ne > 0.0) dir -= ratio * e / ne;
        for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) l.col(a) += rule.weights[k] * dir * grads[k][a];
      }
      local[c] = l;
    });
    typename DisplacementField<Dim>::Values g = DisplacementField<Dim>::Values::Zero(Dim, grid.num_nodes());
    for (int c = 0; c < grid.num_cells(); ++c) {
      const auto& nodes = grid.cell_nodes(c);
      for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) g.col(nodes[a]) += local[c].col(a);
    }
    for (int i : grid.boundary_nodes()) g.col(i).setZero();
    return g * (grid.cell_volume() / den);
  }
};

constexpr int kOrnsteinRulePoints = 4;

// Gradient ascent with step adaptation, run through a continuation in the
// smoothing δ; the field with the best unsmoothed ratio is kept.
template <int Dim>
OrnsteinLevel<Dim> ascend(DisplacementField<Dim>& phi, int iterations) {
  L1Evaluator<Dim> exact(phi.grid(), kOrnsteinRulePoints);
  const auto [n0, d0] = exact.norms(phi);
  OrnsteinLevel<Dim> level;
  level.cells = phi.grid().cells();
  level.start_ratio = d0 > 0.0 ? n0 / d0 : 0.0;
  level.ratio = level.start_ratio;
  if (d0 == 0.0) return level;
  DisplacementField<Dim> best = phi;
  const double scale = n0 / phi.grid().volume();
  const double deltas[] = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  const int stages = static_cast<int>(std::size(deltas));
  for (int s = 0; s < stages; ++s) {
    L1Evaluator<Dim> ev(phi.grid(), kOrnsteinRulePoints);
    ev.delta = deltas[s] * scale;
    auto [num, den] = ev.norms(phi);
    double ratio = num / den;
    double tau = 0.05;
    const int budget = iterations * (s + 1) / stages - iterations * s / stages;
    for (int it = 0; it < budget && tau > 1e-10; ++it) {
      const auto g = ev.ascent_direction(phi, ratio, den);
      const double gn = g.norm();
      if (gn == 0.0) break;
      DisplacementField<Dim> trial = phi;
      trial.values() += (tau * phi.values().norm() / gn) * g;
      const auto [tn, td] = ev.norms(trial);
      if (td > 0.0 && tn / td > ratio) {
        phi = std::move(trial);
        num = tn;
        den = td;
        ratio = tn / td;
        tau *= 1.5;
        ++level.accepted_steps;
        const auto [en, ed] = exact.norms(phi);
        if (ed > 0.0 && en / ed > level.ratio) {
          level.ratio = en / ed;
          best = phi;
        }
      } else {
        tau *= 0.5;
      }
    }
  }
  phi = std::move(best);
  return level;
}

}  // namespace

template <int Dim>
double l1_gradient_ratio(const DisplacementField<Dim>& phi, int points_per_axis) {
  const L1Evaluator<Dim> ev(phi.grid(), points_per_axis);
  const auto [n, d] = ev.norms(phi);
  if (d == 0.0) return n == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return n / d;
}

template <int Dim>
DisplacementField<Dim> rotation_plateau(std::shared_ptr<const Grid<Dim>> grid, double width_cells) {
  using Point = typename Grid<Dim>::Point;
  const Point c = 0.5 * (grid->lo() + grid->hi());
  const double outer = 0.45 * (grid->hi() - grid->lo()).minCoeff();
  const double inner = std::max(0.0, outer - width_cells * grid->max_spacing());
  return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
    const Point y = x - c;
    const double r = y.norm();
    const double w = r <= inner ? 1.0 : r >= outer ? 0.0 : (outer - r) / (outer - inner);
    Point v = Point::Zero();
    v(0) = -w * y(1);
    v(1) = w * y(0);
    return v;
  });
}

template <int Dim>
DisplacementField<Dim> transfer(const DisplacementField<Dim>& u, std::shared_ptr<const Grid<Dim>> target) {
  DisplacementField<Dim> out(target);
  for (int i = 0; i < target->num_nodes(); ++i) out.values().col(i) = u.at(target->node_point(i));
  return out;
}

template <int Dim>
OrnsteinTrace<Dim> ornstein_probe(std::shared_ptr<const Grid<Dim>> grid, int iterations, int levels) {
  if (levels < 1) throw InvalidParameter("ornstein_probe needs at least one level");
  OrnsteinTrace<Dim> trace;
  std::optional<DisplacementField<Dim>> best;
  double best_start = -1.0;
  for (double width : {1.0, 2.0, 3.0}) {
    auto cand = rotation_plateau(grid, width);
    const double r = l1_gradient_ratio(cand, kOrnsteinRulePoints);
    if (r > best_start) {
      best_start = r;
      best = std::move(cand);
    }
  }
  DisplacementField<Dim> phi = std::move(*best);
  for (int level = 0; level < levels; ++level) {
    if (level > 0) phi = transfer(phi, phi.grid().refined(2));
    trace.levels.push_back(ascend(phi, iterations));
  }
  trace.maximizer = std::move(phi);
  return trace;
}

// ---------------------------------------------------------------- boundary

template <int Dim>
double boundary_penalty(const DisplacementField<Dim>& u, const DisplacementField<Dim>& u0, const IntegrandSpec& f) {
  if (u.values().cols() != u0.values().cols()) throw DomainError("u and u0 live on different grids");
  const DisplacementField<Dim> jump = u0 - u;
  return face_integral(jump, [&](const auto&, const auto& j, const auto& nu) {
    return f.recession<Dim>(sym_product<double, Dim>(j, nu));
  });
}

// ---------------------------------------------------------------- instantiations

template class Grid<2>;
template class Grid<3>;
template class DisplacementField<2>;
template class DisplacementField<3>;

#define BDLAB_MESH_INSTANTIATE(D)                                                                              \
  template struct StrainField<D>;                                                                              \
  template struct MollifierKernel<D>;                                                                          \
  template StrainField<D> symmetric_gradient(const DisplacementField<D>&);                                     \
  template std::vector<Eigen::Matrix<double, D, D>> full_gradient(const DisplacementField<D>&);                \
  template std::vector<double> divergence(const DisplacementField<D>&);                                        \
  template Eigen::Matrix<double, SymMatrix<double, D>::kSize, D * Grid<D>::kCellNodes> strain_operator(        \
      const Grid<D>&, int);                                                                                    \
  template CellRule<D> tensor_gauss(int);                                                                      \
  template DiscreteBall<D> discrete_ball(const Grid<D>&, const Grid<D>::Point&, double);                       \
  template DiscreteBall<D> discrete_annulus(const Grid<D>&, const Grid<D>::Point&, double, double);            \
  template MollifierKernel<D> make_mollifier(const Grid<D>&, MollifierKind, double);                           \
  template bool stencil_complete(const Grid<D>&, const MollifierKernel<D>&, int);                              \
  template DisplacementField<D> mollify(const DisplacementField<D>&, const MollifierKernel<D>&);                \
  template DisplacementField<D> mollify_twice(const DisplacementField<D>&, double);                            \
  template double korn_ratio_gradient(const DisplacementField<D>&);                                            \
  template std::optional<double> korn_ratio_free(const DisplacementField<D>&);                                 \
  template KornReport korn_probe(std::shared_ptr<const Grid<D>>, int, std::uint64_t);                          \
  template double l1_gradient_ratio(const DisplacementField<D>&, int);                                         \
  template OrnsteinTrace<D> ornstein_probe(std::shared_ptr<const Grid<D>>, int, int);                          \
  template DisplacementField<D> rotation_plateau(std::shared_ptr<const Grid<D>>, double);                      \
  template DisplacementField<D> transfer(const DisplacementField<D>&, std::shared_ptr<const Grid<D>>);         \
  template double boundary_penalty(const DisplacementField<D>&, const DisplacementField<D>&, const IntegrandSpec&);

BDLAB_MESH_INSTANTIATE(2)
BDLAB_MESH_INSTANTIATE(3)

}  // namespace bdlab
