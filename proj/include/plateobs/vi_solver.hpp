#pragma once

// Discrete two-sided obstacle problems as box-constrained quadratic programs
//   min 1/2 x^T K x - b^T x   subject to  lower_i <= x_{v(i)} <= upper_i
// where v(i) is the value DOF of constrained node i. Derivative DOFs are free.

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/SparseCholesky>

#include "plateobs/plate_fem.hpp"

namespace plateobs {

enum class ObstacleRegion { FullPlate, LongEdges };

struct BoxConstraints {
  std::vector<int> nodes;  // strictly increasing node indices
  std::vector<double> lower;
  std::vector<double> upper;

  static BoxConstraints none();
  /// psi_- == lower_level, psi_+ == upper_level on every node of the region.
  static BoxConstraints constant_level(const Mesh& mesh, ObstacleRegion region, double lower_level,
                                       double upper_level);
  static BoxConstraints symmetric_level(const Mesh& mesh, ObstacleRegion region, double gamma) {
    return constant_level(mesh, region, -gamma, gamma);
  }

  bool empty() const { return nodes.empty(); }
  std::size_t size() const { return nodes.size(); }
  /// Throws ValidationError on size mismatch, unsorted or out-of-range nodes,
  /// or lower <= 0 <= upper violated.
  void validate(const Mesh& mesh) const;
  /// True when every constrained node lies on y = -l or y = l.
  bool on_long_edges_only(const Mesh& mesh) const;
  /// True when upper == -lower nodewise.
  bool symmetric() const;
};

/// PrimalDual falls back to Primal when an active configuration repeats.
enum class ActiveSetMethod { PrimalDual, Primal };

struct SolverSettings {
  double tol = 1e-9;
  int max_iterations = 200;
  ActiveSetMethod method = ActiveSetMethod::PrimalDual;
};

struct KktReport {
  double stationarity = 0.0;     // |b - K x - E lambda|_inf / max(|b|, |K||x|), non-essential rows
  double complementarity = 0.0;  // multiplier times slack, plus sign violations, relative
  double feasibility = 0.0;      // bound violation relative to |x|_inf
  double max() const;
};

struct VISolution {
  DofField field;
  BoxConstraints constraints;
  std::vector<int> lower_contact;  // node indices, increasing
  std::vector<int> upper_contact;
  std::vector<double> multipliers;  // aligned with constraints.nodes
  double kkt_residual = 0.0;
  int iterations = 0;
  double energy = 0.0;
  KktReport kkt;

  explicit VISolution(const Mesh& mesh) : field(mesh) {}
  bool contact_free() const { return lower_contact.empty() && upper_contact.empty(); }
};

/// Galerkin operator with essential DOFs eliminated by identity rows and a
/// cached factorization for unconstrained solves. Immutable after construction;
/// const member functions may run concurrently.
class PlateOperator {
 public:
  /// `K_low`, when given, is the rounding remainder of an extended-precision
  /// assembly (see SplitMatrix); solves refine against K + K_low.
  PlateOperator(const Mesh& mesh, SparseMatrix K, SparseMatrix K_low = {});

  static PlateOperator base(const Mesh& mesh, const MaterialParams& params);
  static PlateOperator reinforced(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& mask);

  const Mesh& mesh() const { return mesh_; }
  /// Full matrix including rows of essential DOFs.
  const SparseMatrix& matrix() const { return K_; }
  const SparseMatrix& matrix_low() const { return K_lo_; }
  /// K with identity rows/columns on essential DOFs.
  const SparseMatrix& pinned_matrix() const { return Kp_; }
  const std::vector<char>& essential_mask() const { return essential_; }

  /// Unconstrained Galerkin solution; essential entries of b are ignored.
  Vector solve(const Vector& b) const;
  double energy(const Vector& x, const Vector& b) const { return 0.5 * x.dot(K_ * x) - b.dot(x); }

  /// Block of K^{-1} on the given free DOFs; computed once per DOF list and shared.
  std::shared_ptr<const Eigen::MatrixXd> constraint_green(const std::vector<int>& dofs) const;

 private:
  struct GreenCache {
    std::mutex mutex;
    std::map<std::vector<int>, std::shared_ptr<const Eigen::MatrixXd>> blocks;
  };

  Mesh mesh_;
  SparseMatrix K_;
  SparseMatrix K_lo_;
  SparseMatrix Kp_;
  SparseMatrix Kp_lo_;
  std::vector<char> essential_;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
  std::shared_ptr<GreenCache> cache_ = std::make_shared<GreenCache>();
};

/// |b - K x|_inf / max(|b|_inf, (|K| |x|)_inf) over non-essential rows.
double linear_residual(const PlateOperator& op, const Vector& x, const Vector& b);

/// Unconstrained solution of the weak plate problem.
DofField solve_linear(const PlateOperator& op, const Vector& b);

/// Unique minimizer over the box. `warm_start`, when given, seeds the active sets.
VISolution solve_obstacle(const PlateOperator& op, const Vector& b, const BoxConstraints& box,
                          const SolverSettings& settings = {}, const Vector* warm_start = nullptr);

/// Weighted form alpha (.,.)_Omega + (beta - alpha) (.,.)_D from the two region matrices.
VISolution solve_reinforced(const Mesh& mesh, const SparseMatrix& K_omega, const SparseMatrix& K_D, double alpha,
                            double beta, const Vector& b, const BoxConstraints& box,
                            const SolverSettings& settings = {});

/// Load density multiplied by beta on D and alpha elsewhere; requires a pure density load.
VISolution solve_densityweighted(const PlateOperator& op, const LoadSpec& load, const ReinforcementMask& mask,
                                 const BoxConstraints& box, const SolverSettings& settings = {});

/// Recomputes the residual summary of a solution against (op, b).
KktReport kkt_report(const VISolution& solution, const PlateOperator& op, const Vector& b);

}  // namespace plateobs
