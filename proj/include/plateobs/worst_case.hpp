#pragma once

// Outer problems: worst loads over finite extreme-point grids, best
// reinforcement sets and best obstacles over finite candidate lists, the
// threshold scan for thin obstacles and the bound chain for density-weighted
// loads. All reductions run in candidate order with lowest-index tie-break.

#include <functional>
#include <string>
#include <vector>

#include "plateobs/green_series.hpp"
#include "plateobs/plate_fem.hpp"
#include "plateobs/vi_solver.hpp"

namespace plateobs {

struct GapProfile {
  std::vector<double> x;
  std::vector<double> gap;  // u(x, l) - u(x, -l)
  double maximal_gap = 0.0;
  double argmax_x = 0.0;
  int argmax_index = 0;
};

GapProfile gap_profile(const DofField& field);
inline GapProfile gap_profile(const VISolution& solution) { return gap_profile(solution.field); }

enum class ForceKind {
  AntisymDeltaGrid,  // T_{xi,eta} over the scan window, eta != 0
  EvenDeltaPairGrid,  // (delta_(xi,eta) + delta_(xi,-eta)) / 2
  SignedDeltaGrid,   // +-delta_p over the closed plate
  BangBangGrid,      // +-1 on a block partition of the elements
};

struct ForceMember {
  LoadSpec load;
  std::string label;
  Point site;  // delta location, or block-pattern index in x for bang-bang
  int sign = 1;
};

struct ForceClass {
  ForceKind kind = ForceKind::AntisymDeltaGrid;
  int nxi = 33;
  int neta = 9;
  ScanWindow window;        // AntisymDeltaGrid / EvenDeltaPairGrid only
  int blocks_x = 4;         // BangBangGrid: 2^(blocks_x * blocks_y) members
  int blocks_y = 1;
  bool negate = false;      // flips the sign of every member

  static ForceClass antisym(const MaterialParams& params) {
    ForceClass f;
    f.window = ScanWindow::defaults(params);
    return f;
  }
  /// Members in deterministic order. Throws ValidationError on an empty class.
  std::vector<ForceMember> enumerate(const Mesh& mesh) const;
};

enum class EnergyModel { E1, E2 };

struct ScanSettings {
  int threads = 1;
  SolverSettings solver;
};

struct ScanEntry {
  std::string label;
  double value = 0.0;
  bool contact_free = true;
  int iterations = 0;
  double kkt_residual = 0.0;
};

struct ScanResult {
  double value = 0.0;
  int argopt = -1;
  std::vector<ScanEntry> entries;
  double max_kkt_residual() const;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// by index is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Max over members of max nodal |u_{f,D}| (E1: reinforced operator; E2:
/// base operator with weighted density; point-mass members are rejected for E2).
ScanResult worst_force_amplitude(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& mask,
                                 const std::vector<ForceMember>& forces, const BoxConstraints& obstacles,
                                 EnergyModel model, const ScanSettings& settings = {});

/// Max over members of the maximal gap under the given obstacles.
ScanResult worst_gap_force(const PlateOperator& op, const std::vector<ForceMember>& forces,
                           const BoxConstraints& obstacles, const ScanSettings& settings = {});

enum class ReinforcementKind { CrossType, Tiles };

struct ReinforcementFamily {
  ReinforcementKind kind = ReinforcementKind::CrossType;
  double alpha = 0.5;
  double beta = 2.0;
  int lattice_x = 9;  // candidate centers per axis
  int lattice_y = 9;
  int max_x_strips = 2;  // cross-type N; tiles: max number of tiles
  int max_y_strips = 2;  // cross-type M
  double min_inradius = 0.0;  // tiles: epsilon

  void validate() const;
};

struct ReinforcementCandidate {
  ReinforcementMask mask;
  std::vector<double> x_centers;
  std::vector<double> y_centers;
  double half_width_fraction = 0.0;  // strip or tile half-size over the plate side
  std::string label;
};

/// Rasterized candidates of the family satisfying separation and area rules.
std::vector<ReinforcementCandidate> enumerate_reinforcements(const Mesh& mesh, const ReinforcementFamily& family);

/// Mask with exactly round(target / element area) elements of least
/// normalized distance to the given strip centerlines (tiles: Chebyshev distance
/// to the given centers). Returns the distance threshold through `fraction`.
ReinforcementMask rasterize(const Mesh& mesh, double alpha, double beta, const std::vector<double>& x_centers,
                            const std::vector<double>& y_centers, bool tiles, double* fraction = nullptr);

struct ReinforcementReport {
  double value = 0.0;
  int argmin = -1;
  std::vector<ReinforcementCandidate> candidates;
  std::vector<double> values;
};

ReinforcementReport best_reinforcement(const Mesh& mesh, const MaterialParams& params,
                                       const std::vector<ReinforcementCandidate>& candidates,
                                       const std::vector<ForceMember>& forces, const BoxConstraints& obstacles,
                                       EnergyModel model, const ScanSettings& settings = {});

enum class ObstacleKind { ConstantLevel, Sampled };

struct ObstacleCandidate {
  ObstacleKind kind = ObstacleKind::ConstantLevel;
  ObstacleRegion region = ObstacleRegion::LongEdges;
  double gamma = 0.0;          // psi_+ >= gamma and psi_- <= -gamma on the region
  double kappa = 0.0;          // Hoelder norm bound (Sampled only)
  double holder_exponent = 0.5;
  std::vector<double> lower;   // Sampled: one value per region node
  std::vector<double> upper;
  std::string label;

  /// Throws ValidationError when the candidate leaves its class.
  BoxConstraints to_box(const Mesh& mesh) const;
};

/// sup |psi| + Hoelder seminorm of exponent a over the node samples.
double holder_norm(const Mesh& mesh, const std::vector<int>& nodes, const std::vector<double>& values, double a);

struct ObstacleReport {
  double value = 0.0;
  int argmin = -1;
  std::vector<double> values;
  std::vector<bool> ceiling_ok;  // value <= 2 gamma for constant levels
};

ObstacleReport best_obstacle(const PlateOperator& op, const std::vector<ObstacleCandidate>& candidates,
                             const std::vector<ForceMember>& forces, const ScanSettings& settings = {});

struct RegimeReport {
  std::string regime;  // "(i)" when gamma > M, "(ii)" otherwise
  double gamma = 0.0;
  ThresholdValue M;
};

/// Throws UnsupportedError unless the obstacle region is exactly the long edges.
RegimeReport classify_regime(double gamma, const MaterialParams& params, const Mesh& mesh,
                             const BoxConstraints& omega_O, int m_max = SeriesState::kDefaultOrder);

struct ThresholdScan {
  double M_scan = 0.0;
  Point argmax;
  std::vector<Point> sites;
  std::vector<double> values;  // max over long-edge nodes of |v_{xi,eta}|
  double boundary_max = 0.0;   // largest value at xi in {0, pi} or eta = 0
};

/// Obstacle-free scan of max |v_{xi,eta}(x, +-l)| over the window grid,
/// including the degenerate sites xi in {0, pi} and eta = 0.
ThresholdScan threshold_scan(const PlateOperator& op, const ScanWindow& window, int nxi, int neta,
                             const ScanSettings& settings = {});

struct PlacementBound {
  double upperb = 0.0;        // max over nodes of beta int_D G + alpha int_Dc G (truncated series)
  double upperb_tail = 0.0;   // bound on the discarded series tail
  Point upperb_argmax;
  double coarse = 0.0;        // pi/12 max_y [beta int_D phi_1 sin + alpha int_Dc phi_1 sin]
};

PlacementBound placement_bound_report(const Mesh& mesh, const ReinforcementMask& mask, const SeriesState& state);

}  // namespace plateobs
