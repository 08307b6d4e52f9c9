#pragma once

// Conforming discretization of the plate energy with C1 bicubic Hermite
// (Bogner-Fox-Schmit) rectangles. Each node carries four degrees of freedom
// (u, u_x, u_y, u_xy). Short edges x = 0 and x = pi are hinged: value and
// y-derivative vanish there. Long-edge conditions are natural.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "plateobs/green_series.hpp"

namespace plateobs {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

inline constexpr int kDofsPerNode = 4;
enum DofKind : int { kValue = 0, kDx = 1, kDy = 2, kDxy = 3 };

/// Uniform rectangular grid of [0, pi] x [-l, l].
class Mesh {
 public:
  Mesh(int nx, int ny, double half_width);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double half_width() const { return half_width_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }

  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int num_elements() const { return nx_ * ny_; }
  int num_dofs() const { return kDofsPerNode * num_nodes(); }

  int node(int i, int j) const { return i * (ny_ + 1) + j; }
  int element(int i, int j) const { return i * ny_ + j; }
  int dof(int node_index, int kind) const { return kDofsPerNode * node_index + kind; }
  double x(int i) const { return i == nx_ ? kPi : i * hx_; }
  double y(int j) const { return j == ny_ ? half_width_ : -half_width_ + j * hy_; }
  Point node_point(int node_index) const;
  Point element_center(int e) const;

  /// Element containing q (closed plate); throws DomainError outside.
  std::array<int, 2> locate(Point q) const;
  bool contains(Point q) const;

  /// Value and y-derivative DOFs of nodes on x = 0 and x = pi.
  std::vector<int> essential_dofs() const;
  std::vector<int> long_edge_nodes() const;  // j = 0 and j = ny, ordered by node index

  /// Index maps of the mirror images y -> -y and x -> pi - x.
  int mirror_y_node(int node_index) const;
  int mirror_x_node(int node_index) const;

  bool operator==(const Mesh& o) const { return nx_ == o.nx_ && ny_ == o.ny_ && half_width_ == o.half_width_; }

 private:
  int nx_;
  int ny_;
  double half_width_;
  double hx_;
  double hy_;
};

/// Finite-element field: four DOFs per node on a mesh.
struct DofField {
  Mesh mesh;
  Vector dofs;

  explicit DofField(const Mesh& m) : mesh(m), dofs(Vector::Zero(m.num_dofs())) {}
  DofField(const Mesh& m, Vector values);

  double value(int node_index) const { return dofs[kDofsPerNode * node_index]; }
  /// max over nodes of |u|
  double max_abs_value() const;
};

/// Bicubic interpolant of a smooth function (u, u_x, u_y, u_xy supplied).
using HermiteData = std::function<std::array<double, 4>(double x, double y)>;
DofField interpolate(const Mesh& mesh, const HermiteData& fn);

struct FieldDerivatives {
  double u = 0, ux = 0, uy = 0, uxx = 0, uyy = 0, uxy = 0;
};

double point_eval(const DofField& field, Point q);
FieldDerivatives evaluate_derivatives(const DofField& field, Point q);

/// Per-element indicator of the reinforcement set D with densities alpha < 1 < beta.
struct ReinforcementMask {
  std::vector<std::uint8_t> in_D;
  double alpha = 1.0;
  double beta = 1.0;

  static ReinforcementMask empty(const Mesh& mesh, double alpha, double beta);
  double area(const Mesh& mesh) const;
  /// |Omega| (1 - alpha) / (beta - alpha)
  double target_area(const Mesh& mesh) const;
  double weight(int e) const { return in_D[e] ? beta : alpha; }
  int count() const;
  /// Throws ValidationError on densities outside 0 < alpha < 1 < beta, size
  /// mismatch, or an area farther than one element from the target.
  void validate(const Mesh& mesh) const;
};

enum class LoadBall { DualOfContinuous, Lp };

struct PointMass {
  Point location;
  double weight = 0.0;
};

/// Bounded density (callable or per-element constant) plus finite point masses.
struct LoadSpec {
  std::function<double(double, double)> density;
  double density_sup = std::numeric_limits<double>::quiet_NaN();  // known sup norm, if any
  std::vector<double> element_density;                             // overrides `density` when non-empty
  std::vector<PointMass> point_masses;
  LoadBall ball = LoadBall::DualOfContinuous;
  double p_exponent = std::numeric_limits<double>::infinity();

  bool has_density() const { return static_cast<bool>(density) || !element_density.empty(); }
  double density_at(int element, double x, double y) const;

  static LoadSpec none();
  static LoadSpec point(Point p, double weight = 1.0);
  static LoadSpec antisym_delta(const AntisymDelta& t);
  static LoadSpec uniform(double value);
  static LoadSpec sine(int mode, double amplitude = 1.0);
  static LoadSpec piecewise_constant(std::vector<double> values);

  LoadSpec negated() const;
  /// Norm in the declared ball: total variation for DualOfContinuous, L^p otherwise.
  double norm(const Mesh& mesh) const;
};

/// A matrix assembled in extended precision, stored as hi + lo with hi the
/// rounded value and lo the rounding remainder (same sparsity pattern). On thin
/// strips the operator is ill-conditioned enough that rounding the entries
/// alone costs several digits of the solution; lo lets solvers recover them.
struct SplitMatrix {
  SparseMatrix hi;
  SparseMatrix lo;
};

SplitMatrix assemble_bilinear_split(const Mesh& mesh, const MaterialParams& params,
                                    const std::vector<double>* element_weights = nullptr);
SplitMatrix assemble_reinforced_split(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& mask);

/// Galerkin matrix of the plate scalar product on the full DOF space.
/// `element_weights`, when given, multiplies each element contribution.
SparseMatrix assemble_bilinear(const Mesh& mesh, const MaterialParams& params,
                               const std::vector<double>* element_weights = nullptr);
/// Restricted to the elements of D (or of its complement when `complement`).
SparseMatrix assemble_bilinear(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& region,
                               bool complement = false);
/// alpha (.,.)_Omega + (beta - alpha) (.,.)_D
SparseMatrix assemble_reinforced(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& mask);

/// Load functional on the full DOF space. `weight` multiplies the density by
/// beta on D and alpha elsewhere; point masses are never weighted.
Vector assemble_load(const Mesh& mesh, const LoadSpec& load, const ReinforcementMask* weight = nullptr);

struct SymmetryParts {
  DofField even;
  DofField odd;
};

/// u^e(x,y) = (u(x,y) + u(x,-y))/2 and u^o = u - u^e.
SymmetryParts symmetry_decompose(const DofField& field);
DofField mirror_y(const DofField& field);
DofField mirror_x(const DofField& field);

enum class EnergyVariant { Base, E1, E2 };

double energy_value(const DofField& field, const MaterialParams& params, const LoadSpec& load, EnergyVariant variant,
                    const ReinforcementMask* mask = nullptr);

/// CSV with header x,y,u,ux,uy,uxy; one row per node, x outer, y inner.
void write_field_csv(std::ostream& out, const DofField& field);

/// 17 significant digits, as used by every CSV writer.
std::string format_number(double v);

}  // namespace plateobs
