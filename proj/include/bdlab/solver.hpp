#pragma once
// Viscosity ladder: stage-wise minimization of ∫ f_j(ε(u)) with
// f_j = f + (1+|·|²)/(2 A_j j²) over fields matching the datum on ∂Ω.

#include <Eigen/Sparse>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bdlab/integrands.hpp"
#include "bdlab/mesh.hpp"

namespace bdlab {

/// Dirichlet problem over a set of active cells. Free nodes are those off ∂Ω
/// whose incident cells are all active; all other nodes keep their values.
template <int Dim>
class DirichletProblem {
 public:
  using GridPtr = std::shared_ptr<const Grid<Dim>>;
  using Field = DisplacementField<Dim>;
  using SparseMatrix = Eigen::SparseMatrix<double>;

  /// Empty `active_cells` means every cell.
  explicit DirichletProblem(GridPtr grid, std::vector<char> active_cells = {});

  const Grid<Dim>& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int num_free() const { return static_cast<int>(free_dofs_.size()); }
  const std::vector<int>& free_dofs() const { return free_dofs_; }
  bool is_active(int cell) const { return active_[cell] != 0; }
  /// Total volume of the active cells.
  double volume() const;

  /// Σ over active cells of the Gauss-rule integral of f(ε(u)).
  double energy(const IntegrandSpec& f, const Field& u) const;
  /// ∫ (1 + |ε(u)|²) over active cells.
  double regularization_mass(const Field& u) const;
  /// Reduced gradient (free dofs only).
  Eigen::VectorXd gradient(const IntegrandSpec& f, const Field& u) const;
  /// Reduced gradient and Hessian.
  void linearize(const IntegrandSpec& f, const Field& u, Eigen::VectorXd& grad, SparseMatrix& hess) const;

  /// √(rᵀ M⁻¹ r) with M the Q1 mass matrix on free dofs: the dual norm of the
  /// residual over unit-L² test fields vanishing off the free set.
  double dual_norm(const Eigen::VectorXd& r) const;

  void add_to_free(Field& u, const Eigen::VectorXd& step, double scale) const;
  Eigen::VectorXd gather_free(const Field& u) const;

 private:
  GridPtr grid_;
  std::vector<char> active_;
  std::vector<int> active_list_;
  std::vector<int> free_dofs_;
  std::vector<int> dof_to_free_;  // −1 when fixed
  mutable std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix>> mass_;
};

struct NewtonOptions {
  int max_newton = 200;
  int max_halvings = 60;
  double tol_scale = 1.0;
  /// Relative tolerance cap for the inner conjugate-gradient solves.
  double cg_rtol = 1e-2;
  int max_cg = 20000;
  /// Accept integrands flagged degenerate at the origin (m_p, p ≠ 2); the run
  /// then asserts that ε(u) stays away from zero.
  bool allow_degenerate = false;
};

template <int Dim>
struct ViscosityStage {
  int j = 1;
  double a_j = 1.0;
  double weight = 0.0;  ///< 1/(2 A_j j²)
  double energy = 0.0;  ///< F_j[v_j]
  double plain_energy = 0.0;  ///< F[v_j]
  double regularization_mass = 0.0;  ///< ∫(1+|ε(v_j)|²)
  double el_residual = 0.0;
  double tolerance = 0.0;
  int newton_iterations = 0;
  int cg_iterations = 0;
  std::vector<double> energy_trace;
  IntegrandSpec integrand;  ///< f_j
  DisplacementField<Dim> field;  ///< v_j
};

/// Stage tolerance min(1e−8, 1/(10 j²)) · scale.
double stage_tolerance(int j, double scale = 1.0);

/// A_j = 1 + ∫(1+|ε(ũ)|²).
template <int Dim>
double viscosity_normalizer(const DirichletProblem<Dim>& problem, const DisplacementField<Dim>& u_tilde);

/// Minimizes ∫ f_j(ε(w)) with f_j = f.regularized(1/(2 A_j j²)) by damped
/// Newton. `warm_start` supplies the fixed (boundary) values as well.
/// Throws StagnationError or OverflowError, and PreconditionError for a flagged
/// degenerate integrand unless `opts.allow_degenerate`.
template <int Dim>
ViscosityStage<Dim> solve_stage(const IntegrandSpec& f, const DirichletProblem<Dim>& problem,
                           const DisplacementField<Dim>& warm_start, int j, double a_j,
                           const NewtonOptions& opts = {});

/// Minimizes ∫ f(ε(w)) as is, with no viscosity term.
template <int Dim>
ViscosityStage<Dim> minimize(const IntegrandSpec& f, const DirichletProblem<Dim>& problem,
                        const DisplacementField<Dim>& warm_start, double tolerance, const NewtonOptions& opts = {});

/// Discrete dual norm of the Euler–Lagrange residual of ∫ f(ε(·)) at v.
template <int Dim>
double el_residual(const DirichletProblem<Dim>& problem, const DisplacementField<Dim>& v, const IntegrandSpec& f);

/// ∫ f(ε(u)) + ∮ f^∞((u₀ − u) ⊙ ν).
template <int Dim>
double relaxed_energy(const DisplacementField<Dim>& u, const DisplacementField<Dim>& u0, const IntegrandSpec& f);

/// ∫ f(ε(u)) over all cells.
template <int Dim>
double bulk_energy(const DisplacementField<Dim>& u, const IntegrandSpec& f);

struct SecondOrderEnergy {
  double lhs = 0.0;
  double rhs = 0.0;  ///< with c = 1
  double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

/// Σ_k ∫_B ⟨f″(ε) ∂_k ε, ∂_k ε⟩ from forward differences of cell-mean strains,
/// against r⁻²∫_{B(2r)}|ε| + (A_j j² r³)⁻¹ ∫_{B(2r)}(1+|ε|²).
/// Throws DomainError unless B(x₀, 2r) lies inside Ω.
template <int Dim>
SecondOrderEnergy second_order_energy(const IntegrandSpec& f, const DisplacementField<Dim>& v,
                                      const typename Grid<Dim>::Point& x0, double r, double a_j, int j);

template <int Dim>
SecondOrderEnergy second_order_energy(const ViscosityStage<Dim>& stage, const typename Grid<Dim>::Point& x0, double r) {
  return second_order_energy<Dim>(stage.integrand, stage.field, x0, r, stage.a_j, stage.j);
}

/// ∫ |u − v| with the cell Gauss rule.
template <int Dim>
double l1_distance(const DisplacementField<Dim>& u, const DisplacementField<Dim>& v);

/// ∫ |ε(u) − ε(v)|.
template <int Dim>
double strain_l1_distance(const DisplacementField<Dim>& u, const DisplacementField<Dim>& v);

template <int Dim>
struct SolverReport {
  std::vector<ViscosityStage<Dim>> stages;
  double relaxed_energy = 0.0;
  /// ‖v_{2j} − v_j‖_{L¹} between consecutive stages.
  std::vector<double> cauchy_differences;
  /// F_j[v_j] − F[v_j] per stage.
  std::vector<double> energy_gaps;

  const DisplacementField<Dim>& final_field() const { return stages.back().field; }
};

/// Dyadic ladder j = 1, 2, 4, ..., ≤ j_max, each stage warm-started from the
/// previous minimizer and normalized by it. `warm_start` defaults to u₀.
template <int Dim>
SolverReport<Dim> run_viscosity_ladder(const IntegrandSpec& f, std::shared_ptr<const Grid<Dim>> grid,
                                  const DisplacementField<Dim>& u0, int j_max, const NewtonOptions& opts = {},
                                  const std::optional<DisplacementField<Dim>>& warm_start = std::nullopt);

/// Boundary datum presets evaluated on the whole grid: shear amp·(x₂²,0),
/// stretch amp·(x₁²,0), rigid amp·(−x₂,x₁) + (amp,0), bump amp·exp(−|x−c|²/0.05)·(1,1).
template <int Dim>
DisplacementField<Dim> boundary_preset(const std::string& name, std::shared_ptr<const Grid<Dim>> grid, double amp);

}  // namespace bdlab
