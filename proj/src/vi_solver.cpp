#include "plateobs/vi_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>
#include <string>

#include "plateobs/errors.hpp"

namespace plateobs {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

// Per-node classification inside the active-set loops.
enum : signed char { kInactive = 0, kUpper = 1, kLower = -1, kPinned = 2 };

SparseMatrix pin_rows(const SparseMatrix& K, const std::vector<char>& pinned, double diagonal = 1.0) {
  SparseMatrix A = K;
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
      if (pinned[it.row()] || pinned[col]) it.valueRef() = (it.row() == col) ? diagonal : 0.0;
    }
  }
  return A;
}

// rhs - (hi + lo) x accumulated in long double.
Vector wide_residual(const SparseMatrix& hi, const SparseMatrix& lo, const Vector& x, const Vector& rhs) {
  std::vector<long double> acc(rhs.data(), rhs.data() + rhs.size());
  for (int col = 0; col < hi.outerSize(); ++col) {
    const long double xc = x[col];
    for (SparseMatrix::InnerIterator it(hi, col); it; ++it) acc[it.row()] -= it.value() * xc;
  }
  if (lo.nonZeros() > 0) {
    for (int col = 0; col < lo.outerSize(); ++col) {
      const long double xc = x[col];
      for (SparseMatrix::InnerIterator it(lo, col); it; ++it) acc[it.row()] -= it.value() * xc;
    }
  }
  Vector r(rhs.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = static_cast<double>(acc[i]);
  return r;
}

// Iterative refinement against the split operator until the correction is at
// rounding level.
template <class Factor>
void refine(const Factor& f, const SparseMatrix& hi, const SparseMatrix& lo, const Vector& rhs, Vector& x) {
  double last = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    const Vector dx = f.solve(wide_residual(hi, lo, x, rhs));
    x += dx;
    const double step = dx.lpNorm<Eigen::Infinity>();
    if (step <= 4 * std::numeric_limits<double>::epsilon() * x.lpNorm<Eigen::Infinity>() || step > 0.5 * last) break;
    last = step;
  }
}

double inf_norm(const Vector& v, const std::vector<char>& skip) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!skip[i]) m = std::max(m, std::abs(v[i]));
  }
  return m;
}

// Normwise backward-error scale: max(|b|, |K| |x|) over non-essential rows.
double residual_scale(const SparseMatrix& K, const Vector& x, const Vector& b, const std::vector<char>& skip) {
  const Vector ax = K.cwiseAbs() * x.cwiseAbs();
  return std::max({inf_norm(b, skip), inf_norm(ax, skip), kTiny});
}

// Solves K x = b with the DOFs flagged in `pinned` fixed to the entries of `values`.
Vector pinned_solve(const PlateOperator& op, const std::vector<char>& pinned, const Vector& values, const Vector& b) {
  const SparseMatrix A = pin_rows(op.matrix(), pinned);
  const SparseMatrix A_lo = pin_rows(op.matrix_low(), pinned, 0.0);
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw AssemblyError("factorization of the constrained operator failed");
  Vector xp = Vector::Zero(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (pinned[i]) xp[i] = values[i];
  }
  Vector rhs = wide_residual(op.matrix(), op.matrix_low(), xp, b);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (pinned[i]) rhs[i] = xp[i];
  }
  Vector x = ldlt.solve(rhs);
  refine(ldlt, A, A_lo, rhs, x);
  return x;
}

struct Problem {
  const PlateOperator& op;
  const Vector& b;
  const BoxConstraints& box;
  std::vector<int> vdof;  // value DOF per constrained node
  std::vector<double> c;  // diagonal scaling
};

std::vector<double> multipliers_from(const Problem& p, const Vector& x, const std::vector<signed char>& act) {
  const Vector g = p.b - p.op.matrix() * x;
  std::vector<double> lam(p.box.size(), 0.0);
  for (std::size_t i = 0; i < lam.size(); ++i) {
    if (act[i] != kInactive) lam[i] = g[p.vdof[i]];
  }
  return lam;
}

KktReport evaluate_kkt(const Problem& p, const Vector& x, const std::vector<signed char>& act,
                       const std::vector<double>& lam) {
  const std::vector<char>& ess = p.op.essential_mask();
  Vector g = p.b - p.op.matrix() * x;
  for (std::size_t i = 0; i < lam.size(); ++i) g[p.vdof[i]] -= lam[i];
  const double fscale = residual_scale(p.op.matrix(), x, p.b, ess);

  double xscale = kTiny;
  for (int n = 0; n < p.op.mesh().num_nodes(); ++n) xscale = std::max(xscale, std::abs(x[kDofsPerNode * n]));

  KktReport r;
  r.stationarity = inf_norm(g, ess) / fscale;
  for (std::size_t i = 0; i < lam.size(); ++i) {
    const double xi = x[p.vdof[i]];
    const double up = p.box.upper[i] - xi, lo = xi - p.box.lower[i];
    r.feasibility = std::max({r.feasibility, -up / xscale, -lo / xscale});
    double comp = 0.0;
    if (lam[i] > 0.0) comp = lam[i] / fscale * std::abs(up) / xscale;
    if (lam[i] < 0.0) comp = -lam[i] / fscale * std::abs(lo) / xscale;
    if (act[i] == kUpper && lam[i] < 0.0) comp += -lam[i] / fscale;
    if (act[i] == kLower && lam[i] > 0.0) comp += lam[i] / fscale;
    if (act[i] == kInactive && lam[i] != 0.0) comp += std::abs(lam[i]) / fscale;
    r.complementarity = std::max(r.complementarity, comp);
  }
  return r;
}

// Active-set iterations run on the constrained values y = x_J only, with
// J the constrained nodes whose value DOF is free. For an active set A with
// prescribed values v_A the contact forces solve S_AA mu_A = v_A - y0_A where
// S is the J-block of K^{-1} and y0 the unconstrained solution.
struct Reduced {
  const Eigen::MatrixXd& S;
  Vector y0;
  std::vector<int> index;  // box index of each reduced row
  std::vector<double> lower, upper, c;
};

Vector solve_active(const Reduced& r, const std::vector<signed char>& act, Vector& lam) {
  std::vector<int> A;
  for (std::size_t k = 0; k < act.size(); ++k) {
    if (act[k] != kInactive) A.push_back(static_cast<int>(k));
  }
  const int a = static_cast<int>(A.size());
  lam = Vector::Zero(r.y0.size());
  if (a == 0) return r.y0;
  Eigen::MatrixXd SAA(a, a);
  Vector rhs(a);
  for (int i = 0; i < a; ++i) {
    for (int j = 0; j < a; ++j) SAA(i, j) = r.S(A[i], A[j]);
    rhs[i] = (act[A[i]] == kLower ? r.lower[A[i]] : r.upper[A[i]]) - r.y0[A[i]];
  }
  const Eigen::LDLT<Eigen::MatrixXd> f(SAA);
  if (f.info() != Eigen::Success) throw AssemblyError("reduced contact system is singular");
  Vector mu = f.solve(rhs);
  mu += f.solve(rhs - SAA * mu);
  Vector y = r.y0;
  for (int j = 0; j < a; ++j) {
    y += mu[j] * r.S.col(A[j]);
    lam[A[j]] = -mu[j];
  }
  for (int i = 0; i < a; ++i) y[A[i]] = rhs[i] + r.y0[A[i]];
  return y;
}

// Primal active-set method from a feasible point; finite but slower. Used
// only when the primal-dual iteration revisits an active configuration.
Vector primal_active_set(const Reduced& r, Vector y, std::vector<signed char>& act, Vector& lam, int budget,
                         int& iterations) {
  const int n = static_cast<int>(y.size());
  for (int k = 0; k < n; ++k) {
    y[k] = std::clamp(y[k], r.lower[k], r.upper[k]);
    if (r.lower[k] == r.upper[k]) {
      act[k] = kPinned;
    } else if (y[k] == r.upper[k]) {
      act[k] = kUpper;
    } else if (y[k] == r.lower[k]) {
      act[k] = kLower;
    } else {
      act[k] = kInactive;
    }
  }
  for (int it = 0; it < budget; ++it) {
    ++iterations;
    const Vector target = solve_active(r, act, lam);
    double step = 1.0;
    int blocking = -1;
    signed char side = kInactive;
    for (int k = 0; k < n; ++k) {
      if (act[k] != kInactive) continue;
      const double yk = y[k], dk = target[k] - yk;
      if (dk > 0.0 && yk + dk > r.upper[k]) {
        const double s = (r.upper[k] - yk) / dk;
        if (s < step) step = s, blocking = k, side = kUpper;
      } else if (dk < 0.0 && yk + dk < r.lower[k]) {
        const double s = (r.lower[k] - yk) / dk;
        if (s < step) step = s, blocking = k, side = kLower;
      }
    }
    if (blocking >= 0) {
      y += step * (target - y);
      y[blocking] = side == kUpper ? r.upper[blocking] : r.lower[blocking];
      act[blocking] = side;
      continue;
    }
    y = target;
    int drop = -1;
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      const double wrong = (act[k] == kUpper) ? -lam[k] : (act[k] == kLower) ? lam[k] : 0.0;
      if (wrong > worst) worst = wrong, drop = k;
    }
    if (drop < 0) return y;
    act[drop] = kInactive;
  }
  throw IterationLimitError("primal active-set fallback did not converge", std::numeric_limits<double>::infinity(),
                            iterations);
}

}  // namespace

double KktReport::max() const { return std::max({stationarity, complementarity, feasibility}); }

BoxConstraints BoxConstraints::none() { return {}; }

BoxConstraints BoxConstraints::constant_level(const Mesh& mesh, ObstacleRegion region, double lower_level,
                                              double upper_level) {
  BoxConstraints box;
  if (region == ObstacleRegion::FullPlate) {
    for (int n = 0; n < mesh.num_nodes(); ++n) box.nodes.push_back(n);
  } else {
    box.nodes = mesh.long_edge_nodes();
  }
  box.lower.assign(box.nodes.size(), lower_level);
  box.upper.assign(box.nodes.size(), upper_level);
  return box;
}

void BoxConstraints::validate(const Mesh& mesh) const {
  if (lower.size() != nodes.size() || upper.size() != nodes.size()) {
    throw ValidationError("obstacle bounds must match the number of constrained nodes");
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] < 0 || nodes[i] >= mesh.num_nodes()) throw ValidationError("constrained node index out of range");
    if (i > 0 && nodes[i] <= nodes[i - 1]) throw ValidationError("constrained nodes must be strictly increasing");
    if (!(lower[i] <= 0.0 && 0.0 <= upper[i])) {
      throw ValidationError("obstacles violate psi_- <= 0 <= psi_+ at node " + std::to_string(nodes[i]));
    }
  }
}

bool BoxConstraints::on_long_edges_only(const Mesh& mesh) const {
  return std::all_of(nodes.begin(), nodes.end(), [&](int n) {
    const int j = n % (mesh.ny() + 1);
    return j == 0 || j == mesh.ny();
  });
}

bool BoxConstraints::symmetric() const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (upper[i] != -lower[i]) return false;
  }
  return true;
}

PlateOperator::PlateOperator(const Mesh& mesh, SparseMatrix K, SparseMatrix K_low)
    : mesh_(mesh), K_(std::move(K)), K_lo_(std::move(K_low)) {
  if (K_.rows() != mesh_.num_dofs() || K_.cols() != mesh_.num_dofs()) {
    throw AssemblyError("operator size does not match the mesh");
  }
  if (K_lo_.rows() == 0 && K_lo_.cols() == 0) K_lo_.resize(K_.rows(), K_.cols());
  if (K_lo_.rows() != K_.rows() || K_lo_.cols() != K_.cols()) {
    throw AssemblyError("operator correction size does not match the mesh");
  }
  essential_.assign(mesh_.num_dofs(), 0);
  for (int d : mesh_.essential_dofs()) essential_[d] = 1;
  K_.makeCompressed();
  Kp_ = pin_rows(K_, essential_);
  Kp_lo_ = pin_rows(K_lo_, essential_, 0.0);
  ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(Kp_);
  if (ldlt_->info() != Eigen::Success || ldlt_->vectorD().minCoeff() <= 0.0) {
    throw AssemblyError("plate operator is singular on the constrained space");
  }
}

PlateOperator PlateOperator::base(const Mesh& mesh, const MaterialParams& params) {
  SplitMatrix K = assemble_bilinear_split(mesh, params);
  return PlateOperator(mesh, std::move(K.hi), std::move(K.lo));
}

PlateOperator PlateOperator::reinforced(const Mesh& mesh, const MaterialParams& params,
                                        const ReinforcementMask& mask) {
  SplitMatrix K = assemble_reinforced_split(mesh, params, mask);
  return PlateOperator(mesh, std::move(K.hi), std::move(K.lo));
}

Vector PlateOperator::solve(const Vector& b) const {
  if (b.size() != K_.rows()) throw ValidationError("load vector size does not match the operator");
  Vector rhs = b;
  for (Eigen::Index i = 0; i < rhs.size(); ++i) {
    if (essential_[i]) rhs[i] = 0.0;
  }
  Vector x = ldlt_->solve(rhs);
  refine(*ldlt_, Kp_, Kp_lo_, rhs, x);
  return x;
}

std::shared_ptr<const Eigen::MatrixXd> PlateOperator::constraint_green(const std::vector<int>& dofs) const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto it = cache_->blocks.find(dofs);
  if (it != cache_->blocks.end()) return it->second;
  const Eigen::Index k = static_cast<Eigen::Index>(dofs.size());
  auto S = std::make_shared<Eigen::MatrixXd>(k, k);
  Vector e = Vector::Zero(K_.rows());
  for (Eigen::Index j = 0; j < k; ++j) {
    e[dofs[j]] = 1.0;
    const Vector col = ldlt_->solve(e);  // guides the active-set search only
    e[dofs[j]] = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) (*S)(i, j) = col[dofs[i]];
  }
  *S = 0.5 * (*S + S->transpose());
  if (cache_->blocks.size() >= 4) cache_->blocks.clear();
  cache_->blocks.emplace(dofs, S);
  return S;
}

double linear_residual(const PlateOperator& op, const Vector& x, const Vector& b) {
  const double scale = residual_scale(op.matrix(), x, b, op.essential_mask());
  return inf_norm(b - op.matrix() * x, op.essential_mask()) / scale;
}

DofField solve_linear(const PlateOperator& op, const Vector& b) {
  DofField f(op.mesh(), op.solve(b));
  const double res = linear_residual(op, f.dofs, b);
  if (!(res <= 1e-10)) throw AssemblyError("linear solve residual " + std::to_string(res) + " exceeds 1e-10");
  return f;
}

VISolution solve_obstacle(const PlateOperator& op, const Vector& b, const BoxConstraints& box,
                          const SolverSettings& settings, const Vector* warm_start) {
  const Mesh& mesh = op.mesh();
  box.validate(mesh);
  if (b.size() != mesh.num_dofs()) throw ValidationError("load vector size does not match the mesh");
  if (!(settings.tol > 0.0) || settings.max_iterations < 1) throw ValidationError("invalid solver settings");
  if (warm_start && warm_start->size() != b.size()) throw ValidationError("warm start size does not match the mesh");

  Problem p{op, b, box, {}, {}};
  const std::size_t n = box.size();
  p.vdof.resize(n);
  p.c.resize(n);
  std::vector<int> free_dofs;
  std::vector<int> index;
  for (std::size_t i = 0; i < n; ++i) {
    p.vdof[i] = mesh.dof(box.nodes[i], kValue);
    p.c[i] = op.matrix().coeff(p.vdof[i], p.vdof[i]);
    // value fixed to 0 by the hinge, which lies inside [lower, upper]
    if (op.essential_mask()[p.vdof[i]]) continue;
    free_dofs.push_back(p.vdof[i]);
    index.push_back(static_cast<int>(i));
  }
  const std::size_t m = index.size();

  const Vector x0 = op.solve(b);
  std::vector<signed char> act(m, kInactive);
  std::vector<signed char> prev(m, kInactive);
  bool have_prev = !warm_start;
  Vector y(m);
  bool violated = false;
  for (std::size_t k = 0; k < m; ++k) {
    const int i = index[k];
    y[k] = warm_start ? (*warm_start)[p.vdof[i]] : x0[p.vdof[i]];
    violated = violated || x0[p.vdof[i]] > box.upper[i] || x0[p.vdof[i]] < box.lower[i] ||
               box.lower[i] == box.upper[i];
  }

  Vector x;
  int iterations = 0;
  std::vector<double> lam(n, 0.0);
  std::vector<signed char> act_full(n, kInactive);
  if (!violated) {
    x = x0;
  } else {
    const std::shared_ptr<const Eigen::MatrixXd> S = op.constraint_green(free_dofs);
    Reduced r{*S, Vector(m), index, {}, {}, {}};
    for (std::size_t k = 0; k < m; ++k) {
      const int i = index[k];
      r.y0[k] = x0[p.vdof[i]];
      r.lower.push_back(box.lower[i]);
      r.upper.push_back(box.upper[i]);
      r.c.push_back(p.c[i]);
    }
    Vector rl = Vector::Zero(m);
    std::set<std::vector<signed char>> seen;
    if (have_prev) seen.insert(prev);
    bool converged = false;
    bool cycled = settings.method == ActiveSetMethod::Primal;
    if (cycled && !warm_start) y.setZero();
    for (int it = 0; it <= settings.max_iterations && !cycled; ++it) {
      for (std::size_t k = 0; k < m; ++k) {
        if (r.lower[k] == r.upper[k]) {
          act[k] = kPinned;
        } else if (rl[k] + r.c[k] * (y[k] - r.upper[k]) > 0.0) {
          act[k] = kUpper;
        } else if (rl[k] + r.c[k] * (y[k] - r.lower[k]) < 0.0) {
          act[k] = kLower;
        } else {
          act[k] = kInactive;
        }
      }
      if (have_prev && act == prev) {
        converged = true;
        break;
      }
      if (it == settings.max_iterations) break;
      if (!seen.insert(act).second) {
        cycled = true;
        break;
      }
      ++iterations;
      y = solve_active(r, act, rl);
      prev = act;
      have_prev = true;
    }
    if (cycled) {
      y = primal_active_set(r, y, act, rl, settings.max_iterations + 4 * static_cast<int>(m), iterations);
      converged = true;
    }
    if (!converged) {
      throw IterationLimitError("active-set iteration did not settle within " +
                                    std::to_string(settings.max_iterations) + " iterations",
                                std::numeric_limits<double>::infinity(), iterations);
    }
    // one sparse solve with the converged active set held exactly at its bounds
    std::vector<char> pinned = op.essential_mask();
    Vector vals = Vector::Zero(b.size());
    for (std::size_t k = 0; k < m; ++k) {
      const int i = index[k];
      act_full[i] = act[k];
      if (act[k] == kInactive) continue;
      pinned[p.vdof[i]] = 1;
      vals[p.vdof[i]] = act[k] == kLower ? box.lower[i] : box.upper[i];
    }
    x = pinned_solve(op, pinned, vals, b);
    lam = multipliers_from(p, x, act_full);
  }

  const KktReport kkt = evaluate_kkt(p, x, act_full, lam);
  VISolution sol(mesh);
  sol.field.dofs = std::move(x);
  sol.constraints = box;
  sol.multipliers = std::move(lam);
  sol.iterations = iterations;
  sol.kkt = kkt;
  sol.kkt_residual = kkt.max();
  sol.energy = op.energy(sol.field.dofs, b);
  for (std::size_t i = 0; i < n; ++i) {
    // a zero multiplier counts as inactive
    if (sol.multipliers[i] > 0.0) sol.upper_contact.push_back(box.nodes[i]);
    if (sol.multipliers[i] < 0.0) sol.lower_contact.push_back(box.nodes[i]);
  }
  if (sol.kkt_residual > settings.tol) {
    throw IterationLimitError("active-set solution misses the KKT tolerance", sol.kkt_residual, iterations);
  }
  return sol;
}

VISolution solve_reinforced(const Mesh& mesh, const SparseMatrix& K_omega, const SparseMatrix& K_D, double alpha,
                            double beta, const Vector& b, const BoxConstraints& box, const SolverSettings& settings) {
  const bool collapsed = alpha == 1.0 && beta == 1.0;
  if (!collapsed && !(alpha > 0.0 && alpha < 1.0 && beta > 1.0)) {
    throw ValidationError("reinforcement requires 0 < alpha < 1 < beta");
  }
  const PlateOperator op(mesh, collapsed ? SparseMatrix(K_omega) : SparseMatrix(alpha * K_omega + (beta - alpha) * K_D));
  return solve_obstacle(op, b, box, settings);
}

VISolution solve_densityweighted(const PlateOperator& op, const LoadSpec& load, const ReinforcementMask& mask,
                                 const BoxConstraints& box, const SolverSettings& settings) {
  if (!load.has_density()) throw UnsupportedError("density-weighted problem requires a load with a density part");
  if (!load.point_masses.empty()) {
    throw UnsupportedError("density-weighted problem is defined only for integrable loads; point masses given");
  }
  const bool collapsed = mask.alpha == 1.0 && mask.beta == 1.0;
  if (!collapsed) mask.validate(op.mesh());
  return solve_obstacle(op, assemble_load(op.mesh(), load, &mask), box, settings);
}

KktReport kkt_report(const VISolution& solution, const PlateOperator& op, const Vector& b) {
  const BoxConstraints& box = solution.constraints;
  Problem p{op, b, box, {}, {}};
  std::vector<signed char> act(box.size(), kInactive);
  for (std::size_t i = 0; i < box.size(); ++i) {
    p.vdof.push_back(op.mesh().dof(box.nodes[i], kValue));
    if (solution.multipliers[i] > 0.0) act[i] = kUpper;
    if (solution.multipliers[i] < 0.0) act[i] = kLower;
  }
  p.c.assign(box.size(), 1.0);
  // multipliers of the stored solution are re-derived from the residual
  std::vector<double> lam(box.size(), 0.0);
  const Vector g = b - op.matrix() * solution.field.dofs;
  for (std::size_t i = 0; i < box.size(); ++i) {
    const double xi = solution.field.dofs[p.vdof[i]];
    const bool at_bound = xi == box.upper[i] || xi == box.lower[i];
    if (at_bound && act[i] == kInactive) act[i] = kPinned;
    if (act[i] != kInactive) lam[i] = g[p.vdof[i]];
  }
  return evaluate_kkt(p, solution.field.dofs, act, lam);
}

}  // namespace plateobs
