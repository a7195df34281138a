#pragma once
// Structured Q1 finite elements on axis-aligned boxes.
//
// Local node a of a cell sits at offset bit_d(a) along axis d; Gauss points
// use the same bit convention. Global dof of node i, component d is i*Dim + d.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "bdlab/errors.hpp"
#include "bdlab/symcalc.hpp"

namespace bdlab {

class IntegrandSpec;

template <int Dim>
class Grid {
  static_assert(Dim == 2 || Dim == 3, "Grid supports n = 2 and n = 3");

 public:
  using Point = Eigen::Matrix<double, Dim, 1>;
  using Multi = Eigen::Array<int, Dim, 1>;
  static constexpr int kCellNodes = 1 << Dim;
  static constexpr int kCellQuad = 1 << Dim;
  static constexpr int kFaceNodes = 1 << (Dim - 1);

  struct Face {
    int cell;
    int axis;
    int side;  // 0 = lower, 1 = upper
    std::array<int, kFaceNodes> nodes;
    Point normal;
    double area;
  };

  Grid(const Point& lo, const Point& hi, const Multi& cells);

  static std::shared_ptr<const Grid> Make(const Point& lo, const Point& hi, const Multi& cells) {
    return std::make_shared<const Grid>(lo, hi, cells);
  }
  /// (0,1)^n with the same number of cells per axis.
  static std::shared_ptr<const Grid> Unit(int cells_per_axis) {
    return Make(Point::Zero(), Point::Ones(), Multi::Constant(cells_per_axis));
  }
  /// Same box, every axis subdivided `factor` times finer.
  std::shared_ptr<const Grid> refined(int factor = 2) const { return Make(lo_, hi_, cells_ * factor); }

  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  const Point& spacing() const { return h_; }
  double max_spacing() const { return h_.maxCoeff(); }
  const Multi& cells() const { return cells_; }
  Multi nodes_per_axis() const { return cells_ + 1; }
  int num_nodes() const { return num_nodes_; }
  int num_cells() const { return num_cells_; }
  int num_quad() const { return num_cells_ * kCellQuad; }
  int num_dofs() const { return num_nodes_ * Dim; }
  double cell_volume() const { return cell_volume_; }
  double volume() const { return cell_volume_ * num_cells_; }
  double quad_weight() const { return cell_volume_ / kCellQuad; }

  int node_index(const Multi& m) const;
  Multi node_multi(int node) const;
  Point node_point(int node) const;
  bool is_boundary_node(int node) const { return boundary_node_[node]; }
  const std::vector<int>& boundary_nodes() const { return boundary_list_; }

  int cell_index(const Multi& m) const;
  Multi cell_multi(int cell) const;
  const std::array<int, kCellNodes>& cell_nodes(int cell) const { return incidence_[cell]; }
  Point cell_origin(int cell) const;
  Point cell_center(int cell) const { return cell_origin(cell) + 0.5 * h_; }

  /// Reference coordinates in [0,1]^n of Gauss point q.
  const Point& quad_reference(int q) const { return quad_ref_[q]; }
  Point quad_point(int cell, int q) const { return cell_origin(cell) + h_.cwiseProduct(quad_ref_[q]); }
  /// Global quadrature index cell*kCellQuad + q.
  Point quad_point(int global_q) const { return quad_point(global_q / kCellQuad, global_q % kCellQuad); }

  /// Physical shape gradients ∇N_a at Gauss point q (same for every cell).
  const std::array<Point, kCellNodes>& shape_gradients(int q) const { return quad_grad_[q]; }
  std::array<double, kCellNodes> shape_values(const Point& reference) const;
  std::array<Point, kCellNodes> shape_gradients_at(const Point& reference) const;

  /// Cell containing x (clamped to the box) and the reference coordinates of x in it.
  std::pair<int, Point> locate(const Point& x) const;

  const std::vector<Face>& boundary_faces() const { return faces_; }

  /// Distance from x to ∂Ω (negative outside).
  double distance_to_boundary(const Point& x) const;

 private:
  Point lo_, hi_, h_;
  Multi cells_;
  int num_nodes_ = 0;
  int num_cells_ = 0;
  double cell_volume_ = 0.0;
  std::vector<std::array<int, kCellNodes>> incidence_;
  std::vector<char> boundary_node_;
  std::vector<int> boundary_list_;
  std::array<Point, kCellQuad> quad_ref_;
  std::array<std::array<Point, kCellNodes>, kCellQuad> quad_grad_;
  std::vector<Face> faces_;
};

/// Nodal Q1 displacement field; column i holds the value at node i.
template <int Dim>
class DisplacementField {
 public:
  using GridPtr = std::shared_ptr<const Grid<Dim>>;
  using Point = typename Grid<Dim>::Point;
  using Values = Eigen::Matrix<double, Dim, Eigen::Dynamic>;
  using Full = Eigen::Matrix<double, Dim, Dim>;

  explicit DisplacementField(GridPtr grid);
  DisplacementField(GridPtr grid, Values values);

  template <class Fn>
  static DisplacementField FromFunction(GridPtr grid, Fn&& fn) {
    DisplacementField u(grid);
    for (int i = 0; i < grid->num_nodes(); ++i) u.values_.col(i) = fn(grid->node_point(i));
    return u;
  }

  const Grid<Dim>& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Values& values() const { return values_; }
  Values& values() { return values_; }
  Eigen::Map<const Eigen::VectorXd> dofs() const { return {values_.data(), values_.size()}; }
  Eigen::Map<Eigen::VectorXd> dofs() { return {values_.data(), values_.size()}; }

  /// Q1 interpolant at x.
  Point at(const Point& x) const;
  /// ∇u in cell at reference coordinates.
  Full gradient(int cell, const Point& reference) const;
  Full gradient_at_quad(int cell, int q) const;

  /// Copies the boundary-node values of `datum`.
  void impose_boundary(const DisplacementField& datum);
  /// Maximum nodal difference to `other` over boundary nodes.
  double boundary_mismatch(const DisplacementField& other) const;

  DisplacementField& operator+=(const DisplacementField& o);
  DisplacementField& operator-=(const DisplacementField& o);
  DisplacementField& operator*=(double s);
  friend DisplacementField operator+(DisplacementField a, const DisplacementField& b) { return a += b; }
  friend DisplacementField operator-(DisplacementField a, const DisplacementField& b) { return a -= b; }
  friend DisplacementField operator*(double s, DisplacementField a) { return a *= s; }

 private:
  GridPtr grid_;
  Values values_;
};

/// Samples of ε(u) at every quadrature point, indexed cell*kCellQuad + q.
template <int Dim>
struct StrainField {
  std::shared_ptr<const Grid<Dim>> grid;
  std::vector<SymMatrix<double, Dim>> samples;

  const SymMatrix<double, Dim>& operator[](int global_q) const { return samples[global_q]; }
  int size() const { return static_cast<int>(samples.size()); }
  /// Cell average of the strain.
  SymMatrix<double, Dim> cell_mean(int cell) const;
  /// (∫ |ε|^p)^{1/p} with the Gauss rule.
  double lp_norm(double p) const;
};

template <int Dim>
StrainField<Dim> symmetric_gradient(const DisplacementField<Dim>& u);

/// Full gradient Du at every quadrature point.
template <int Dim>
std::vector<Eigen::Matrix<double, Dim, Dim>> full_gradient(const DisplacementField<Dim>& u);

/// div u at every quadrature point.
template <int Dim>
std::vector<double> divergence(const DisplacementField<Dim>& u);

/// Strain-displacement block at Gauss point q: packed ε = Σ_a B_a u_a, B is kSize × (Dim·2^n).
template <int Dim>
Eigen::Matrix<double, SymMatrix<double, Dim>::kSize, Dim * Grid<Dim>::kCellNodes> strain_operator(
    const Grid<Dim>& grid, int q);

/// Tensor Gauss rule on the reference cell [0,1]^n.
template <int Dim>
struct CellRule {
  std::vector<typename Grid<Dim>::Point> points;
  std::vector<double> weights;  // sum to 1
};

template <int Dim>
CellRule<Dim> tensor_gauss(int points_per_axis);

/// Quadrature-point subset of a ball (or annulus) with its discrete volume.
template <int Dim>
struct DiscreteBall {
  typename Grid<Dim>::Point center;
  double inner = 0.0;
  double radius = 0.0;
  std::vector<int> quad;
  double volume = 0.0;
};

/// Points with |x − x₀| ≤ r; throws DomainError if the ball leaves Ω or holds no point.
template <int Dim>
DiscreteBall<Dim> discrete_ball(const Grid<Dim>& grid, const typename Grid<Dim>::Point& x0, double r);

/// Points with t < |x − x₀| < s.
template <int Dim>
DiscreteBall<Dim> discrete_annulus(const Grid<Dim>& grid, const typename Grid<Dim>::Point& x0, double t,
                                   double s);

enum class MollifierKind { Indicator, Bump };

template <int Dim>
struct MollifierKernel {
  MollifierKind kind = MollifierKind::Indicator;
  double scale = 0.0;
  std::vector<typename Grid<Dim>::Multi> offsets;
  std::vector<double> weights;
  typename Grid<Dim>::Multi reach;  // max |offset| per axis

  double support_radius(const Grid<Dim>& grid) const;
};

/// Nodal stencil of the normalized indicator (|x| ≤ ε) or bump exp(−1/(1−|x/ε|²)).
/// Throws GridTooCoarse if ε < h.
template <int Dim>
MollifierKernel<Dim> make_mollifier(const Grid<Dim>& grid, MollifierKind kind, double eps);

/// Discrete convolution. Near ∂Ω the stencil is truncated and renormalized.
template <int Dim>
DisplacementField<Dim> mollify(const DisplacementField<Dim>& u, const MollifierKernel<Dim>& k);

/// ρ²_ε ∗ (ρ¹_ε ∗ u).
template <int Dim>
DisplacementField<Dim> mollify_twice(const DisplacementField<Dim>& u, double eps);

/// Nodes whose full stencil lies inside the grid.
template <int Dim>
bool stencil_complete(const Grid<Dim>& grid, const MollifierKernel<Dim>& k, int node);

/// ‖∇φ‖₂ / ‖ε(φ)‖₂.
template <int Dim>
double korn_ratio_gradient(const DisplacementField<Dim>& phi);

/// ‖∇(v − π_v)‖₂ / ‖ε(v)‖₂ with π_v the L²-nearest rigid deformation;
/// nullopt when ε(v) vanishes (v rigid).
template <int Dim>
std::optional<double> korn_ratio_free(const DisplacementField<Dim>& v);

struct KornReport {
  int trials = 0;
  double zero_boundary_max = 0.0;
  double free_max = 0.0;
  int kernel_cases = 0;
};

template <int Dim>
KornReport korn_probe(std::shared_ptr<const Grid<Dim>> grid, int trials, std::uint64_t seed = 20240607);

/// ‖∇φ‖₁ / ‖ε(φ)‖₁ with a tensor Gauss rule of `points_per_axis` per cell.
template <int Dim>
double l1_gradient_ratio(const DisplacementField<Dim>& phi, int points_per_axis = 4);

template <int Dim>
struct OrnsteinLevel {
  typename Grid<Dim>::Multi cells;
  double start_ratio = 0.0;
  double ratio = 0.0;
  int accepted_steps = 0;
};

template <int Dim>
struct OrnsteinTrace {
  std::vector<OrnsteinLevel<Dim>> levels;
  std::optional<DisplacementField<Dim>> maximizer;
};

/// Projected ascent on ‖∇φ‖₁/‖ε(φ)‖₁ over zero-boundary fields, on `grid`
/// and `levels − 1` successive refinements seeded by the previous maximizer.
template <int Dim>
OrnsteinTrace<Dim> ornstein_probe(std::shared_ptr<const Grid<Dim>> grid, int iterations, int levels = 1);

/// Rotation inside a ball, cut off to zero over `width` cells.
template <int Dim>
DisplacementField<Dim> rotation_plateau(std::shared_ptr<const Grid<Dim>> grid, double width_cells);

/// Q1 interpolation of u onto another grid covering the same box.
template <int Dim>
DisplacementField<Dim> transfer(const DisplacementField<Dim>& u, std::shared_ptr<const Grid<Dim>> target);

/// ∮ f^∞((u₀ − u) ⊙ ν) over ∂Ω with a face Gauss rule.
template <int Dim>
double boundary_penalty(const DisplacementField<Dim>& u, const DisplacementField<Dim>& u0,
                        const IntegrandSpec& f);

/// ∮ ⟨φ ν, u⟩ style face integral: sum over faces of ∫ g(x, u(x), ν).
template <int Dim, class Fn>
double face_integral(const DisplacementField<Dim>& u, Fn&& g);

extern template class Grid<2>;
extern template class Grid<3>;
extern template class DisplacementField<2>;
extern template class DisplacementField<3>;

// ---------------------------------------------------------------------------

template <int Dim, class Fn>
double face_integral(const DisplacementField<Dim>& u, Fn&& g) {
  using Point = typename Grid<Dim>::Point;
  const Grid<Dim>& grid = u.grid();
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  double total = 0.0;
  for (const auto& face : grid.boundary_faces()) {
    const Point origin = grid.cell_origin(face.cell);
    const double w = face.area / Grid<Dim>::kFaceNodes;
    for (int k = 0; k < Grid<Dim>::kFaceNodes; ++k) {
      Point ref;
      int bit = 0;
      for (int d = 0; d < Dim; ++d) {
        if (d == face.axis) {
          ref(d) = face.side;
        } else {
          ref(d) = gp[(k >> bit) & 1];
          ++bit;
        }
      }
      const Point x = origin + grid.spacing().cwiseProduct(ref);
      const auto n = grid.shape_values(ref);
      Point val = Point::Zero();
      const auto& nodes = grid.cell_nodes(face.cell);
      for (int a = 0; a < Grid<Dim>::kCellNodes; ++a) val += n[a] * u.values().col(nodes[a]);
      total += w * g(x, val, face.normal);
    }
  }
  return total;
}

}  // namespace bdlab
