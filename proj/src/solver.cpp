#include "bdlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "bdlab/parallel.hpp"

namespace bdlab {

namespace {

template <int Dim>
using LocalVector = Eigen::Matrix<double, Dim * Grid<Dim>::kCellNodes, 1>;
template <int Dim>
using LocalMatrix = Eigen::Matrix<double, Dim * Grid<Dim>::kCellNodes, Dim * Grid<Dim>::kCellNodes>;
template <int Dim>
using StrainOp = Eigen::Matrix<double, SymMatrix<double, Dim>::kSize, Dim * Grid<Dim>::kCellNodes>;

template <int Dim>
const std::array<StrainOp<Dim>, Grid<Dim>::kCellQuad>& strain_ops(const Grid<Dim>& grid,
                                                                   std::array<StrainOp<Dim>, Grid<Dim>::kCellQuad>& ops) {
  for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) ops[q] = strain_operator(grid, q);
  return ops;
}

template <int Dim>
LocalVector<Dim> local_dofs(const DisplacementField<Dim>& u, int cell) {
  LocalVector<Dim> x;
  const auto& nodes = u.grid().cell_nodes(cell);
  for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) x.template segment<Dim>(a * Dim) = u.values().col(nodes[a]);
  return x;
}

template <int Dim>
SymMatrix<double, Dim> strain_at(const StrainOp<Dim>& b, const LocalVector<Dim>& x) {
  return SymMatrix<double, Dim>(typename SymMatrix<double, Dim>::Packed(b * x));
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

// Preconditioned conjugate gradients with a node-block Jacobi preconditioner.
struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
};

template <int Dim>
CgResult block_jacobi_cg(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b, double rtol, int max_iter) {
  const int n = static_cast<int>(b.size());
  const int blocks = n / Dim;
  using Block = Eigen::Matrix<double, Dim, Dim>;
  std::vector<Block> inv(blocks);
  for (int k = 0; k < blocks; ++k) {
    Block blk;
    for (int r = 0; r < Dim; ++r) {
      for (int c = 0; c < Dim; ++c) blk(r, c) = a.coeff(k * Dim + r, k * Dim + c);
    }
    inv[k] = blk.inverse();
  }
  auto precondition = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd z(n);
    for (int k = 0; k < blocks; ++k) z.segment<Dim>(k * Dim) = inv[k] * r.segment<Dim>(k * Dim);
    return z;
  };
  CgResult out;
  out.x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = b;
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;
  Eigen::VectorXd z = precondition(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int k = 0; k < max_iter; ++k) {
    const Eigen::VectorXd ap = a * p;
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    out.iterations = k + 1;
    if (r.norm() <= rtol * bnorm) break;
    z = precondition(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- DirichletProblem

template <int Dim>
DirichletProblem<Dim>::DirichletProblem(GridPtr grid, std::vector<char> active_cells)
    : grid_(std::move(grid)), active_(std::move(active_cells)) {
  const Grid<Dim>& g = *grid_;
  if (active_.empty()) active_.assign(g.num_cells(), 1);
  if (static_cast<int>(active_.size()) != g.num_cells()) throw InvalidParameter("active-cell mask has the wrong size");
  std::vector<int> touching(g.num_nodes(), 0);
  for (int c = 0; c < g.num_cells(); ++c) {
    if (!active_[c]) continue;
    active_list_.push_back(c);
    for (int n : g.cell_nodes(c)) ++touching[n];
  }
  dof_to_free_.assign(g.num_dofs(), -1);
  for (int n = 0; n < g.num_nodes(); ++n) {
    if (g.is_boundary_node(n) || touching[n] != Grid<Dim>::kCellNodes) continue;
    for (int d = 0; d < Dim; ++d) {
      dof_to_free_[n * Dim + d] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(n * Dim + d);
    }
  }

  // Consistent Q1 mass matrix restricted to free dofs (exact with the 2-point rule).
  std::vector<Eigen::Triplet<double>> trip;
  std::array<std::array<double, Grid<Dim>::kCellNodes>, Grid<Dim>::kCellQuad> shape;
  for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) shape[q] = g.shape_values(g.quad_reference(q));
  for (int c : active_list_) {
    const auto& nodes = g.cell_nodes(c);
    for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) {
      for (int b = 0; b < Grid<Dim>::kCellNodes; ++b) {
        double m = 0.0;
        for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) m += shape[q][a] * shape[q][b];
        m *= g.quad_weight();
        for (int d = 0; d < Dim; ++d) {
          const int i = dof_to_free_[nodes[a] * Dim + d];
          const int j = dof_to_free_[nodes[b] * Dim + d];
          if (i >= 0 && j >= 0) trip.emplace_back(i, j, m);
        }
      }
    }
  }
  SparseMatrix mass(num_free(), num_free());
  mass.setFromTriplets(trip.begin(), trip.end());
  mass_ = std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>();
  if (num_free() > 0) {
    mass_->compute(mass);
    if (mass_->info() != Eigen::Success) throw SingularityError("mass matrix factorization failed");
  }
}

template <int Dim>
double DirichletProblem<Dim>::volume() const {
  return grid_->cell_volume() * active_list_.size();
}

template <int Dim>
double DirichletProblem<Dim>::energy(const IntegrandSpec& f, const Field& u) const {
  std::array<StrainOp<Dim>, Grid<Dim>::kCellQuad> ops;
  strain_ops(*grid_, ops);
  const double w = grid_->quad_weight();
  return parallel_sum(active_list_.size(), [&](std::size_t k) {
    const LocalVector<Dim> x = local_dofs(u, active_list_[k]);
    double s = 0.0;
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) s += f.value(strain_at<Dim>(ops[q], x));
    return w * s;
  });
}

template <int Dim>
double DirichletProblem<Dim>::regularization_mass(const Field& u) const {
  std::array<StrainOp<Dim>, Grid<Dim>::kCellQuad> ops;
  strain_ops(*grid_, ops);
  const double w = grid_->quad_weight();
  return parallel_sum(active_list_.size(), [&](std::size_t k) {
    const LocalVector<Dim> x = local_dofs(u, active_list_[k]);
    double s = 0.0;
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) s += 1.0 + strain_at<Dim>(ops[q], x).squaredNorm();
    return w * s;
  });
}

template <int Dim>
Eigen::VectorXd DirichletProblem<Dim>::gradient(const IntegrandSpec& f, const Field& u) const {
  std::array<StrainOp<Dim>, Grid<Dim>::kCellQuad> ops;
  strain_ops(*grid_, ops);
  const double w = grid_->quad_weight();
  std::vector<LocalVector<Dim>> local(active_list_.size());
  parallel_for(active_list_.size(), [&](std::size_t k) {
    const LocalVector<Dim> x = local_dofs(u, active_list_[k]);
    LocalVector<Dim> gl = LocalVector<Dim>::Zero();
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) {
      const auto z = strain_at<Dim>(ops[q], x);
      const double t = z.norm();
      const double d1t = t > 0.0 ? f.radial(t).d1_over_t : 0.0;
      gl += ops[q].transpose() * (d1t * SymMatrix<double, Dim>::metric().cwiseProduct(z.packed()));
    }
    local[k] = w * gl;
  });
  Eigen::VectorXd g = Eigen::VectorXd::Zero(num_free());
  for (std::size_t k = 0; k < active_list_.size(); ++k) {
    const auto& nodes = grid_->cell_nodes(active_list_[k]);
    for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) {
      for (int d = 0; d < Dim; ++d) {
        const int i = dof_to_free_[nodes[a] * Dim + d];
        if (i >= 0) g(i) += local[k](a * Dim + d);
      }
    }
  }
  return g;
}

template <int Dim>
void DirichletProblem<Dim>::linearize(const IntegrandSpec& f, const Field& u, Eigen::VectorXd& grad,
                                      SparseMatrix& hess) const {
  std::array<StrainOp<Dim>, Grid<Dim>::kCellQuad> ops;
  strain_ops(*grid_, ops);
  const double w = grid_->quad_weight();
  std::vector<LocalVector<Dim>> lg(active_list_.size());
  std::vector<LocalMatrix<Dim>> lk(active_list_.size());
  parallel_for(active_list_.size(), [&](std::size_t k) {
    const LocalVector<Dim> x = local_dofs(u, active_list_[k]);
    LocalVector<Dim> g = LocalVector<Dim>::Zero();
    LocalMatrix<Dim> m = LocalMatrix<Dim>::Zero();
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) {
      const auto resp = f.local_response<Dim>(strain_at<Dim>(ops[q], x));
      g.noalias() += ops[q].transpose() * resp.dvalue;
      m.noalias() += ops[q].transpose() * resp.hessian * ops[q];
    }
    lg[k] = w * g;
    lk[k] = w * m;
  });
  grad = Eigen::VectorXd::Zero(num_free());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(active_list_.size() * LocalMatrix<Dim>::SizeAtCompileTime);
  constexpr int kLocal = Dim * Grid<Dim>::kCellNodes;
  for (std::size_t k = 0; k < active_list_.size(); ++k) {
    const auto& nodes = grid_->cell_nodes(active_list_[k]);
    std::array<int, kLocal> map;
    for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) {
      for (int d = 0; d < Dim; ++d) map[a * Dim + d] = dof_to_free_[nodes[a] * Dim + d];
    }
    for (int r = 0; r < kLocal; ++r) {
      if (map[r] < 0) continue;
      grad(map[r]) += lg[k](r);
      for (int c = 0; c < kLocal; ++c) {
        if (map[c] >= 0) trip.emplace_back(map[r], map[c], lk[k](r, c));
      }
    }
  }
  hess.resize(num_free(), num_free());
  hess.setFromTriplets(trip.begin(), trip.end());
}

template <int Dim>
double DirichletProblem<Dim>::dual_norm(const Eigen::VectorXd& r) const {
  if (r.size() == 0) return 0.0;
  const Eigen::VectorXd y = mass_->solve(r);
  return std::sqrt(std::max(0.0, r.dot(y)));
}

template <int Dim>
void DirichletProblem<Dim>::add_to_free(Field& u, const Eigen::VectorXd& step, double scale) const {
  auto dofs = u.dofs();
  for (int i = 0; i < num_free(); ++i) dofs(free_dofs_[i]) += scale * step(i);
}

template <int Dim>
Eigen::VectorXd DirichletProblem<Dim>::gather_free(const Field& u) const {
  Eigen::VectorXd x(num_free());
  const auto dofs = u.dofs();
  for (int i = 0; i < num_free(); ++i) x(i) = dofs(free_dofs_[i]);
  return x;
}

// ---------------------------------------------------------------- Newton

double stage_tolerance(int j, double scale) {
  return std::min(1e-8, 1.0 / (10.0 * double(j) * double(j))) * scale;
}

template <int Dim>
double viscosity_normalizer(const DirichletProblem<Dim>& problem, const DisplacementField<Dim>& u_tilde) {
  return 1.0 + problem.regularization_mass(u_tilde);
}

namespace {

template <int Dim>
ViscosityStage<Dim> newton(const IntegrandSpec& fj, const DirichletProblem<Dim>& problem,
                           const DisplacementField<Dim>& warm_start, double tol, const NewtonOptions& opts) {
  if (fj.base().degenerate_at_origin() && !opts.allow_degenerate) {
    throw PreconditionError(fj.base().name() + " is degenerate at the origin; set allow_degenerate to solve with it");
  }
  DisplacementField<Dim> u = warm_start;
  std::vector<double> trace;
  double e = problem.energy(fj, u);
  if (!std::isfinite(e)) throw OverflowError(fj.name() + ": energy of the warm start is not finite");
  trace.push_back(e);
  Eigen::VectorXd g;
  Eigen::SparseMatrix<double> h;
  int it = 0, cg_total = 0;
  double res = 0.0;
  while (true) {
    problem.linearize(fj, u, g, h);
    res = problem.dual_norm(g);
    if (!std::isfinite(res)) throw OverflowError(fj.name() + ": residual is not finite");
    if (res <= tol || problem.num_free() == 0) break;
    if (it >= opts.max_newton) {
      throw NoConvergence(fj.name() + ": Newton did not reach the residual tolerance (residual " +
                          sci(res) + ")");
    }
    // Levenberg shift when a diagonal node block is not safely positive.
    double min_block = std::numeric_limits<double>::infinity();
    for (int k = 0; k < problem.num_free() / Dim; ++k) {
      Eigen::Matrix<double, Dim, Dim> blk;
      for (int r = 0; r < Dim; ++r) {
        for (int c = 0; c < Dim; ++c) blk(r, c) = h.coeff(k * Dim + r, k * Dim + c);
      }
      min_block = std::min(min_block, Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, Dim, Dim>>(blk).eigenvalues()(0));
    }
    if (min_block < 1e-12) {
      for (int i = 0; i < problem.num_free(); ++i) h.coeffRef(i, i) += 1e-12 - min_block + 1e-12;
    }
    const double rtol = std::clamp(res, 1e-14, opts.cg_rtol);
    CgResult cg = block_jacobi_cg<Dim>(h, -g, rtol, opts.max_cg);
    cg_total += cg.iterations;
    Eigen::VectorXd d = std::move(cg.x);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
    }
    // Armijo backtracking on the energy. Once the predicted decrease is below
    // the rounding level of E the energy test is decided by noise, so steps are
    // accepted on residual decrease instead (energy may not rise beyond rounding).
    const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(e));
    const bool resolved = -slope > resolution;
    double t = 1.0;
    bool accepted = false;
    DisplacementField<Dim> trial = u;
    for (int k = 0; k <= opts.max_halvings; ++k) {
      trial = u;
      problem.add_to_free(trial, d, t);
      const double et = problem.energy(fj, trial);
      if (std::isfinite(et)) {
        const bool ok = resolved ? et <= e + 1e-4 * t * slope
                                 : et <= e + resolution && problem.dual_norm(problem.gradient(fj, trial)) < res;
        if (ok) {
          e = et;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      throw StagnationError(fj.name() + ": line search failed after " + std::to_string(opts.max_halvings) +
                            " halvings (residual " + sci(res) + ")");
    }
    u = std::move(trial);
    trace.push_back(e);
    ++it;
  }
  return ViscosityStage<Dim>{.j = 0,
                             .a_j = 1.0,
                             .weight = 0.0,
                             .energy = e,
                             .plain_energy = e,
                             .regularization_mass = problem.regularization_mass(u),
                             .el_residual = res,
                             .tolerance = tol,
                             .newton_iterations = it,
                             .cg_iterations = cg_total,
                             .energy_trace = std::move(trace),
                             .integrand = fj,
                             .field = std::move(u)};
}

}  // namespace

template <int Dim>
ViscosityStage<Dim> solve_stage(const IntegrandSpec& f, const DirichletProblem<Dim>& problem,
                                const DisplacementField<Dim>& warm_start, int j, double a_j, const NewtonOptions& opts) {
  if (j < 1) throw InvalidParameter("stage index j must be positive");
  if (!(a_j >= 1.0)) throw InvalidParameter("A_j must be at least 1");
  const double weight = 1.0 / (2.0 * a_j * double(j) * double(j));
  ViscosityStage<Dim> st = newton(f.regularized(weight), problem, warm_start, stage_tolerance(j, opts.tol_scale), opts);
  st.j = j;
  st.a_j = a_j;
  st.weight = weight;
  st.plain_energy = problem.energy(f, st.field);
  return st;
}

template <int Dim>
ViscosityStage<Dim> minimize(const IntegrandSpec& f, const DirichletProblem<Dim>& problem,
                             const DisplacementField<Dim>& warm_start, double tolerance, const NewtonOptions& opts) {
  return newton(f, problem, warm_start, tolerance, opts);
}

template <int Dim>
double el_residual(const DirichletProblem<Dim>& problem, const DisplacementField<Dim>& v, const IntegrandSpec& f) {
  return problem.dual_norm(problem.gradient(f, v));
}

template <int Dim>
double bulk_energy(const DisplacementField<Dim>& u, const IntegrandSpec& f) {
  const StrainField<Dim> e = symmetric_gradient(u);
  const double w = u.grid().quad_weight();
  return parallel_sum(u.grid().num_cells(), [&](std::size_t c) {
    double s = 0.0;
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) s += f.value(e[int(c) * Grid<Dim>::kCellQuad + q]);
    return w * s;
  });
}

template <int Dim>
double relaxed_energy(const DisplacementField<Dim>& u, const DisplacementField<Dim>& u0, const IntegrandSpec& f) {
  return bulk_energy(u, f) + boundary_penalty(u, u0, f);
}

template <int Dim>
SecondOrderEnergy second_order_energy(const IntegrandSpec& f, const DisplacementField<Dim>& v,
                                      const typename Grid<Dim>::Point& x0, double r, double a_j, int j) {
  const Grid<Dim>& g = v.grid();
  if (!(r > 0.0)) throw InvalidParameter("radius must be positive");
  if (g.distance_to_boundary(x0) < 2.0 * r * (1.0 - 1e-12)) throw DomainError("B(x0, 2r) leaves the domain");
  const StrainField<Dim> e = symmetric_gradient(v);
  std::vector<SymMatrix<double, Dim>> mean(g.num_cells());
  for (int c = 0; c < g.num_cells(); ++c) mean[c] = e.cell_mean(c);

  std::vector<double> part(g.num_cells(), 0.0);
  parallel_for(g.num_cells(), [&](std::size_t c) {
    if ((g.cell_center(int(c)) - x0).norm() > r) return;
    const auto m = g.cell_multi(int(c));
    double s = 0.0;
    for (int k = 0; k < Dim; ++k) {
      if (m(k) + 1 >= g.cells()(k)) continue;
      auto n = m;
      ++n(k);
      const int cn = g.cell_index(n);
      const SymMatrix<double, Dim> diff = (mean[cn] - mean[c]) / g.spacing()(k);
      const SymMatrix<double, Dim> mid = 0.5 * (mean[cn] + mean[c]);
      s += f.hessian_apply(mid, diff);
    }
    part[c] = s * g.cell_volume();
  });
  SecondOrderEnergy out;
  for (double p : part) out.lhs += p;

  const DiscreteBall<Dim> outer = discrete_ball(g, x0, 2.0 * r);
  double l1 = 0.0, mass = 0.0;
  for (int q : outer.quad) {
    l1 += e[q].norm();
    mass += 1.0 + e[q].squaredNorm();
  }
  l1 *= g.quad_weight();
  mass *= g.quad_weight();
  out.rhs = l1 / (r * r) + mass / (a_j * double(j) * double(j) * r * r * r);
  return out;
}

template <int Dim>
double l1_distance(const DisplacementField<Dim>& u, const DisplacementField<Dim>& v) {
  if (u.values().cols() != v.values().cols()) throw DomainError("fields live on different grids");
  const Grid<Dim>& g = u.grid();
  std::array<std::array<double, Grid<Dim>::kCellNodes>, Grid<Dim>::kCellQuad> shape;
  for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) shape[q] = g.shape_values(g.quad_reference(q));
  const typename DisplacementField<Dim>::Values diff = u.values() - v.values();
  return parallel_sum(g.num_cells(), [&](std::size_t c) {
    const auto& nodes = g.cell_nodes(int(c));
    double s = 0.0;
    for (int q = 0; q < Grid<Dim>::kCellQuad; ++q) {
      Eigen::Matrix<double, Dim, 1> x = Eigen::Matrix<double, Dim, 1>::Zero();
      for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) x += shape[q][a] * diff.col(nodes[a]);
      s += x.norm();
    }
    return s * g.quad_weight();
  });
}

template <int Dim>
double strain_l1_distance(const DisplacementField<Dim>& u, const DisplacementField<Dim>& v) {
  const StrainField<Dim> e = symmetric_gradient(u - v);
  double s = 0.0;
  for (const auto& z : e.samples) s += z.norm();
  return s * u.grid().quad_weight();
}

template <int Dim>
SolverReport<Dim> run_viscosity_ladder(const IntegrandSpec& f, std::shared_ptr<const Grid<Dim>> grid,
                                       const DisplacementField<Dim>& u0, int j_max, const NewtonOptions& opts,
                                       const std::optional<DisplacementField<Dim>>& warm_start) {
  if (j_max < 1) throw InvalidParameter("j_max must be at least 1");
  const DirichletProblem<Dim> problem(grid);
  DisplacementField<Dim> current = warm_start.value_or(u0);
  current.impose_boundary(u0);
  SolverReport<Dim> rep;
  double a_j = viscosity_normalizer(problem, u0);
  for (int j = 1; j <= j_max; j *= 2) {
    ViscosityStage<Dim> st = solve_stage(f, problem, current, j, a_j, opts);
    if (!rep.stages.empty()) rep.cauchy_differences.push_back(l1_distance(st.field, rep.stages.back().field));
    rep.energy_gaps.push_back(st.energy - st.plain_energy);
    current = st.field;
    a_j = 1.0 + st.regularization_mass;
    rep.stages.push_back(std::move(st));
  }
  rep.relaxed_energy = relaxed_energy(rep.final_field(), u0, f);
  return rep;
}

template <int Dim>
DisplacementField<Dim> boundary_preset(const std::string& name, std::shared_ptr<const Grid<Dim>> grid, double amp) {
  using Point = typename Grid<Dim>::Point;
  const Point center = 0.5 * (grid->lo() + grid->hi());
  if (name == "shear") {
    return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
      Point v = Point::Zero();
      v(0) = amp * x(1) * x(1);
      return v;
    });
  }
  if (name == "stretch") {
    return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
      Point v = Point::Zero();
      v(0) = amp * x(0) * x(0);
      return v;
    });
  }
  if (name == "rigid") {
    return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
      Point v = Point::Zero();
      v(0) = amp * (1.0 - x(1));
      v(1) = amp * x(0);
      return v;
    });
  }
  if (name == "bump") {
    return DisplacementField<Dim>::FromFunction(grid, [&](const Point& x) {
      return Point(Point::Constant(amp * std::exp(-(x - center).squaredNorm() / 0.05)));
    });
  }
  throw ConfigError("unknown boundary preset '" + name + "'");
}

#define BDLAB_SOLVER_INSTANTIATE(D)                                                                                 \
  template class DirichletProblem<D>;                                                                              \
  template double viscosity_normalizer(const DirichletProblem<D>&, const DisplacementField<D>&);                   \
  template ViscosityStage<D> solve_stage(const IntegrandSpec&, const DirichletProblem<D>&,                         \
                                         const DisplacementField<D>&, int, double, const NewtonOptions&);          \
  template ViscosityStage<D> minimize(const IntegrandSpec&, const DirichletProblem<D>&, const DisplacementField<D>&, \
                                      double, const NewtonOptions&);                                               \
  template double el_residual(const DirichletProblem<D>&, const DisplacementField<D>&, const IntegrandSpec&);      \
  template double bulk_energy(const DisplacementField<D>&, const IntegrandSpec&);                                  \
  template double relaxed_energy(const DisplacementField<D>&, const DisplacementField<D>&, const IntegrandSpec&);   \
  template SecondOrderEnergy second_order_energy(const IntegrandSpec&, const DisplacementField<D>&,                 \
                                                 const Grid<D>::Point&, double, double, int);                      \
  template double l1_distance(const DisplacementField<D>&, const DisplacementField<D>&);                           \
  template double strain_l1_distance(const DisplacementField<D>&, const DisplacementField<D>&);                    \
  template SolverReport<D> run_viscosity_ladder(const IntegrandSpec&, std::shared_ptr<const Grid<D>>,              \
                                                const DisplacementField<D>&, int, const NewtonOptions&,            \
                                                const std::optional<DisplacementField<D>>&);                       \
  template DisplacementField<D> boundary_preset(const std::string&, std::shared_ptr<const Grid<D>>, double);

BDLAB_SOLVER_INSTANTIATE(2)
BDLAB_SOLVER_INSTANTIATE(3)

}  // namespace bdlab
