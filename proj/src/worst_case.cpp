#include "plateobs/worst_case.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "plateobs/errors.hpp"

namespace plateobs {

namespace {

std::string site_label(const char* prefix, Point p, int sign) {
  std::ostringstream os;
  os << prefix << (sign < 0 ? "-" : "+") << "(" << format_number(p.x) << "," << format_number(p.y) << ")";
  return os.str();
}

std::string list_label(const std::vector<double>& v) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << format_number(v[i]);
  os << "]";
  return os.str();
}

// First index attaining the max (or min when `minimize`).
int select(const std::vector<double>& values, bool minimize) {
  int best = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (best < 0 || (minimize ? values[i] < values[best] : values[i] > values[best])) best = static_cast<int>(i);
  }
  return best;
}

double max_long_edge_abs(const Mesh& mesh, const Vector& x) {
  double m = 0.0;
  for (int node : mesh.long_edge_nodes()) m = std::max(m, std::abs(x[mesh.dof(node, kValue)]));
  return m;
}

enum class Measure { Amplitude, Gap };

ScanResult run_scan(const PlateOperator& op, const std::vector<ForceMember>& forces, const BoxConstraints& box,
                    const ReinforcementMask* density_weight, Measure measure, const ScanSettings& settings) {
  if (forces.empty()) throw ValidationError("force class is empty");
  const Mesh& mesh = op.mesh();
  box.validate(mesh);
  if (density_weight) {
    for (const ForceMember& f : forces) {
      if (!f.load.point_masses.empty() || !f.load.has_density()) {
        throw UnsupportedError("density-weighted energy is undefined for point-mass loads");
      }
    }
  }
  ScanResult result;
  result.entries.resize(forces.size());
  parallel_for(static_cast<int>(forces.size()), settings.threads, [&](int i) {
    const ForceMember& f = forces[i];
    const Vector b = assemble_load(mesh, f.load, density_weight);
    const VISolution sol = solve_obstacle(op, b, box, settings.solver);
    ScanEntry& e = result.entries[i];
    e.label = f.label;
    e.value = measure == Measure::Gap ? gap_profile(sol.field).maximal_gap : sol.field.max_abs_value();
    e.contact_free = sol.contact_free();
    e.iterations = sol.iterations;
    e.kkt_residual = sol.kkt_residual;
  });
  std::vector<double> values(forces.size());
  for (std::size_t i = 0; i < forces.size(); ++i) values[i] = result.entries[i].value;
  result.argopt = select(values, false);
  result.value = values[result.argopt];
  return result;
}

ScanResult amplitude_scan(const PlateOperator* base, const Mesh& mesh, const MaterialParams& params,
                          const ReinforcementMask& mask, const std::vector<ForceMember>& forces,
                          const BoxConstraints& obstacles, EnergyModel model, const ScanSettings& settings) {
  mask.validate(mesh);
  if (model == EnergyModel::E1) {
    const PlateOperator op = PlateOperator::reinforced(mesh, params, mask);
    return run_scan(op, forces, obstacles, nullptr, Measure::Amplitude, settings);
  }
  if (base) return run_scan(*base, forces, obstacles, &mask, Measure::Amplitude, settings);
  const PlateOperator op = PlateOperator::base(mesh, params);
  return run_scan(op, forces, obstacles, &mask, Measure::Amplitude, settings);
}

// All subsets of {0..n-1} with at most k elements, in size-then-lexicographic order.
std::vector<std::vector<int>> small_subsets(int n, int k) {
  std::vector<std::vector<int>> out{{}};
  std::vector<std::vector<int>> layer{{}};
  for (int size = 1; size <= k; ++size) {
    std::vector<std::vector<int>> next;
    for (const auto& s : layer) {
      for (int i = s.empty() ? 0 : s.back() + 1; i < n; ++i) {
        auto t = s;
        t.push_back(i);
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

bool separated(const std::vector<double>& centers, double gap) {
  for (std::size_t i = 1; i < centers.size(); ++i) {
    if (!(centers[i] - centers[i - 1] > gap)) return false;
  }
  return true;
}

}  // namespace

GapProfile gap_profile(const DofField& field) {
  const Mesh& mesh = field.mesh;
  GapProfile g;
  g.x.resize(mesh.nx() + 1);
  g.gap.resize(mesh.nx() + 1);
  for (int i = 0; i <= mesh.nx(); ++i) {
    g.x[i] = mesh.x(i);
    g.gap[i] = field.value(mesh.node(i, mesh.ny())) - field.value(mesh.node(i, 0));
    if (std::abs(g.gap[i]) > g.maximal_gap) {
      g.maximal_gap = std::abs(g.gap[i]);
      g.argmax_index = i;
    }
  }
  g.argmax_x = g.x[g.argmax_index];
  return g;
}

std::vector<ForceMember> ForceClass::enumerate(const Mesh& mesh) const {
  const double l = mesh.half_width();
  std::vector<ForceMember> out;
  const int s = negate ? -1 : 1;
  auto add = [&](LoadSpec load, std::string label, Point site, int sign) {
    if (negate) load = load.negated();
    out.push_back({std::move(load), std::move(label), site, sign * s});
  };
  switch (kind) {
    case ForceKind::AntisymDeltaGrid:
    case ForceKind::EvenDeltaPairGrid: {
      if (nxi < 2 || neta < 2) throw ValidationError("delta grid needs at least two points per axis");
      for (int i = 0; i < nxi; ++i) {
        const double xi = kPi * i / (nxi - 1);
        for (int j = 0; j < neta; ++j) {
          const double eta = j == neta - 1 ? l : -l + 2.0 * l * j / (neta - 1);
          if (std::abs(eta) < 1e-12 * l || !window.contains(xi, eta)) continue;
          if (kind == ForceKind::AntisymDeltaGrid) {
            add(LoadSpec::antisym_delta({xi, eta}), site_label("T", {xi, eta}, 1), {xi, eta}, 1);
          } else {
            LoadSpec load;
            load.point_masses = {{{xi, eta}, 0.5}, {{xi, -eta}, 0.5}};
            add(std::move(load), site_label("E", {xi, eta}, 1), {xi, eta}, 1);
          }
        }
      }
      break;
    }
    case ForceKind::SignedDeltaGrid: {
      if (nxi < 2 || neta < 2) throw ValidationError("delta grid needs at least two points per axis");
      for (int i = 0; i < nxi; ++i) {
        for (int j = 0; j < neta; ++j) {
          const Point p{kPi * i / (nxi - 1), j == neta - 1 ? l : -l + 2.0 * l * j / (neta - 1)};
          for (int sign : {1, -1}) add(LoadSpec::point(p, sign), site_label("D", p, sign), p, sign);
        }
      }
      break;
    }
    case ForceKind::BangBangGrid: {
      const int k = blocks_x * blocks_y;
      if (blocks_x < 1 || blocks_y < 1 || k > 16) throw ValidationError("bang-bang grid needs 1..16 blocks");
      if (blocks_x > mesh.nx() || blocks_y > mesh.ny()) throw ValidationError("more blocks than elements");
      for (int pattern = 0; pattern < (1 << k); ++pattern) {
        std::vector<double> values(mesh.num_elements());
        std::string label = "B";
        for (int ex = 0; ex < mesh.nx(); ++ex) {
          for (int ey = 0; ey < mesh.ny(); ++ey) {
            const int block = (ex * blocks_x / mesh.nx()) * blocks_y + ey * blocks_y / mesh.ny();
            values[mesh.element(ex, ey)] = (pattern >> block) & 1 ? -1.0 : 1.0;
          }
        }
        for (int b = 0; b < k; ++b) label += (pattern >> b) & 1 ? '-' : '+';
        LoadSpec load = LoadSpec::piecewise_constant(std::move(values));
        load.ball = LoadBall::Lp;
        add(std::move(load), label, {static_cast<double>(pattern), 0.0}, 1);
      }
      break;
    }
  }
  if (out.empty()) throw ValidationError("force class is empty");
  return out;
}

double ScanResult::max_kkt_residual() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.kkt_residual);
  return m;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::clamp(threads, 1, n);
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < n && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ScanResult worst_force_amplitude(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& mask,
                                 const std::vector<ForceMember>& forces, const BoxConstraints& obstacles,
                                 EnergyModel model, const ScanSettings& settings) {
  return amplitude_scan(nullptr, mesh, params, mask, forces, obstacles, model, settings);
}

ScanResult worst_gap_force(const PlateOperator& op, const std::vector<ForceMember>& forces,
                           const BoxConstraints& obstacles, const ScanSettings& settings) {
  return run_scan(op, forces, obstacles, nullptr, Measure::Gap, settings);
}

void ReinforcementFamily::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0 && beta > 1.0)) throw ValidationError("requires 0 < alpha < 1 < beta");
  if (lattice_x < 1 || lattice_y < 1) throw ValidationError("reinforcement lattice must be non-empty");
  if (max_x_strips < 0 || max_y_strips < 0) throw ValidationError("strip counts must be non-negative");
  if (kind == ReinforcementKind::CrossType && max_x_strips + max_y_strips == 0) {
    throw ValidationError("cross-type family needs at least one strip");
  }
  if (kind == ReinforcementKind::Tiles && max_x_strips < 1) throw ValidationError("tile family needs N >= 1");
  if (min_inradius < 0.0) throw ValidationError("minimal inradius must be non-negative");
}

ReinforcementMask rasterize(const Mesh& mesh, double alpha, double beta, const std::vector<double>& x_centers,
                            const std::vector<double>& y_centers, bool tiles, double* fraction) {
  ReinforcementMask mask = ReinforcementMask::empty(mesh, alpha, beta);
  const double l = mesh.half_width();
  const int ne = mesh.num_elements();
  std::vector<double> dist(ne, std::numeric_limits<double>::infinity());
  for (int e = 0; e < ne; ++e) {
    const Point c = mesh.element_center(e);
    if (tiles) {
      for (std::size_t k = 0; k < x_centers.size() && k < y_centers.size(); ++k) {
        const double d = std::max(std::abs(c.x - x_centers[k]) / kPi, std::abs(c.y - y_centers[k]) / (2.0 * l));
        dist[e] = std::min(dist[e], d);
      }
    } else {
      for (double xc : x_centers) dist[e] = std::min(dist[e], std::abs(c.x - xc) / kPi);
      for (double yc : y_centers) dist[e] = std::min(dist[e], std::abs(c.y - yc) / (2.0 * l));
    }
  }
  const double cell = mesh.hx() * mesh.hy();
  const int count = static_cast<int>(std::lround(mask.target_area(mesh) / cell));
  if (count < 1 || count > ne) throw ValidationError("reinforcement area does not fit the mesh");
  std::vector<int> order(ne);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  for (int k = 0; k < count; ++k) mask.in_D[order[k]] = 1;
  if (fraction) *fraction = dist[order[count - 1]];
  return mask;
}

std::vector<ReinforcementCandidate> enumerate_reinforcements(const Mesh& mesh, const ReinforcementFamily& family) {
  family.validate();
  const double l = mesh.half_width();
  std::vector<ReinforcementCandidate> out;
  if (family.kind == ReinforcementKind::CrossType) {
    std::vector<double> lx(family.lattice_x), ly(family.lattice_y);
    for (int k = 0; k < family.lattice_x; ++k) {
      lx[k] = family.lattice_x == 1 ? kPi / 2.0 : kPi * k / (family.lattice_x - 1);
    }
    for (int k = 0; k < family.lattice_y; ++k) {
      ly[k] = family.lattice_y == 1 ? 0.0 : -l + 2.0 * l * k / (family.lattice_y - 1);
    }
    const auto xs = small_subsets(family.lattice_x, family.max_x_strips);
    const auto ys = small_subsets(family.lattice_y, family.max_y_strips);
    for (const auto& sx : xs) {
      for (const auto& sy : ys) {
        if (sx.empty() && sy.empty()) continue;
        ReinforcementCandidate c;
        for (int i : sx) c.x_centers.push_back(lx[i]);
        for (int j : sy) c.y_centers.push_back(ly[j]);
        c.mask = rasterize(mesh, family.alpha, family.beta, c.x_centers, c.y_centers, false, &c.half_width_fraction);
        const double mu = c.half_width_fraction * kPi;
        const double eps = c.half_width_fraction * 2.0 * l;
        if (!separated(c.x_centers, 2.0 * mu) || !separated(c.y_centers, 2.0 * eps)) continue;
        c.label = "x=" + list_label(c.x_centers) + ";y=" + list_label(c.y_centers);
        out.push_back(std::move(c));
      }
    }
  } else {
    std::vector<Point> sites;
    for (int i = 0; i < family.lattice_x; ++i) {
      for (int j = 0; j < family.lattice_y; ++j) {
        sites.push_back({kPi * (i + 1) / (family.lattice_x + 1), -l + 2.0 * l * (j + 1) / (family.lattice_y + 1)});
      }
    }
    for (const auto& s : small_subsets(static_cast<int>(sites.size()), family.max_x_strips)) {
      if (s.empty()) continue;
      ReinforcementCandidate c;
      for (int k : s) {
        c.x_centers.push_back(sites[k].x);
        c.y_centers.push_back(sites[k].y);
      }
      c.mask = rasterize(mesh, family.alpha, family.beta, c.x_centers, c.y_centers, true, &c.half_width_fraction);
      const double t = c.half_width_fraction;
      if (std::min(t * kPi, t * 2.0 * l) < family.min_inradius) continue;
      bool disjoint = true;
      for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = a + 1; b < s.size(); ++b) {
          const double d = std::max(std::abs(c.x_centers[a] - c.x_centers[b]) / kPi,
                                    std::abs(c.y_centers[a] - c.y_centers[b]) / (2.0 * l));
          disjoint = disjoint && d > 2.0 * t;
        }
      }
      if (!disjoint) continue;
      c.label = "tiles x=" + list_label(c.x_centers) + ";y=" + list_label(c.y_centers);
      out.push_back(std::move(c));
    }
  }
  return out;
}

ReinforcementReport best_reinforcement(const Mesh& mesh, const MaterialParams& params,
                                       const std::vector<ReinforcementCandidate>& candidates,
                                       const std::vector<ForceMember>& forces, const BoxConstraints& obstacles,
                                       EnergyModel model, const ScanSettings& settings) {
  if (candidates.empty()) throw ValidationError("no reinforcement candidate satisfies the area and separation rules");
  ReinforcementReport report;
  report.candidates = candidates;
  report.values.resize(candidates.size());
  std::optional<PlateOperator> base;
  if (model == EnergyModel::E2) base.emplace(PlateOperator::base(mesh, params));
  // parallelism goes to the inner scans; the candidate loop stays ordered
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    report.values[k] = amplitude_scan(base ? &*base : nullptr, mesh, params, candidates[k].mask, forces, obstacles,
                                      model, settings)
                           .value;
  }
  report.argmin = select(report.values, true);
  report.value = report.values[report.argmin];
  return report;
}

double holder_norm(const Mesh& mesh, const std::vector<int>& nodes, const std::vector<double>& values, double a) {
  if (nodes.size() != values.size()) throw ValidationError("obstacle samples must match the region nodes");
  double sup = 0.0, semi = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    sup = std::max(sup, std::abs(values[i]));
    const Point p = mesh.node_point(nodes[i]);
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const Point q = mesh.node_point(nodes[j]);
      const double d = std::hypot(p.x - q.x, p.y - q.y);
      semi = std::max(semi, std::abs(values[i] - values[j]) / std::pow(d, a));
    }
  }
  return sup + semi;
}

BoxConstraints ObstacleCandidate::to_box(const Mesh& mesh) const {
  if (!(gamma > 0.0)) throw ValidationError("obstacle level gamma must be positive");
  if (kind == ObstacleKind::ConstantLevel) return BoxConstraints::symmetric_level(mesh, region, gamma);
  BoxConstraints box = BoxConstraints::constant_level(mesh, region, -gamma, gamma);
  if (lower.size() != box.size() || upper.size() != box.size()) {
    throw ValidationError("sampled obstacle needs one value per region node");
  }
  if (!(holder_exponent > 0.0 && holder_exponent < 1.0)) throw ValidationError("Hoelder exponent must lie in (0,1)");
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!(upper[i] >= gamma) || !(lower[i] <= -gamma)) {
      throw ValidationError("sampled obstacle leaves the class psi_+ >= gamma, psi_- <= -gamma");
    }
  }
  if (holder_norm(mesh, box.nodes, upper, holder_exponent) > kappa ||
      holder_norm(mesh, box.nodes, lower, holder_exponent) > kappa) {
    throw ValidationError("sampled obstacle exceeds its Hoelder bound kappa");
  }
  box.lower = lower;
  box.upper = upper;
  return box;
}

ObstacleReport best_obstacle(const PlateOperator& op, const std::vector<ObstacleCandidate>& candidates,
                             const std::vector<ForceMember>& forces, const ScanSettings& settings) {
  if (candidates.empty()) throw ValidationError("obstacle candidate list is empty");
  std::vector<BoxConstraints> boxes;
  for (const auto& c : candidates) boxes.push_back(c.to_box(op.mesh()));
  ObstacleReport report;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double v = worst_gap_force(op, forces, boxes[k], settings).value;
    report.values.push_back(v);
    const bool level = candidates[k].kind == ObstacleKind::ConstantLevel;
    report.ceiling_ok.push_back(!level || v <= 2.0 * candidates[k].gamma * (1.0 + settings.solver.tol));
  }
  report.argmin = select(report.values, true);
  report.value = report.values[report.argmin];
  return report;
}

RegimeReport classify_regime(double gamma, const MaterialParams& params, const Mesh& mesh,
                             const BoxConstraints& omega_O, int m_max) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  if (omega_O.nodes != mesh.long_edge_nodes()) {
    throw UnsupportedError("explicit threshold M is available only for obstacles on both long edges");
  }
  RegimeReport r;
  r.gamma = gamma;
  r.M = gap_threshold_M(params, m_max);
  r.regime = gamma > r.M.value ? "(i)" : "(ii)";
  return r;
}

ThresholdScan threshold_scan(const PlateOperator& op, const ScanWindow& window, int nxi, int neta,
                             const ScanSettings& settings) {
  if (nxi < 2 || neta < 2) throw ValidationError("threshold scan needs at least two points per axis");
  const Mesh& mesh = op.mesh();
  const double l = mesh.half_width();
  ThresholdScan s;
  for (int i = 0; i < nxi; ++i) {
    const double xi = kPi * i / (nxi - 1);
    for (int j = 0; j < neta; ++j) {
      const double eta = j == neta - 1 ? l : -l + 2.0 * l * j / (neta - 1);
      if (window.contains(xi, eta)) s.sites.push_back({xi, std::abs(eta) < 1e-12 * l ? 0.0 : eta});
    }
  }
  s.values.resize(s.sites.size());
  parallel_for(static_cast<int>(s.sites.size()), settings.threads, [&](int k) {
    const Vector b = assemble_load(mesh, LoadSpec::antisym_delta({s.sites[k].x, s.sites[k].y}));
    s.values[k] = max_long_edge_abs(mesh, op.solve(b));
  });
  const int best = select(s.values, false);
  s.M_scan = s.values[best];
  s.argmax = s.sites[best];
  for (std::size_t k = 0; k < s.sites.size(); ++k) {
    const Point p = s.sites[k];
    if (p.x == 0.0 || p.x == kPi || p.y == 0.0) s.boundary_max = std::max(s.boundary_max, s.values[k]);
  }
  return s;
}

PlacementBound placement_bound_report(const Mesh& mesh, const ReinforcementMask& mask, const SeriesState& state) {
  const MaterialParams& params = state.params();
  if (mesh.half_width() != params.half_width) throw ValidationError("mesh and series disagree on the half width");
  if (mask.in_D.size() != static_cast<std::size_t>(mesh.num_elements())) {
    throw ValidationError("mask size does not match the mesh");
  }
  const int nx = mesh.nx(), ny = mesh.ny(), mm = state.m_max();
  // W[m][row] = sum over columns of weight * integral of sin(m xi) over the column
  std::vector<std::vector<double>> W(mm + 1, std::vector<double>(ny, 0.0));
  std::vector<double> coarse_w(ny, 0.0);
  for (int ex = 0; ex < nx; ++ex) {
    const double xa = mesh.x(ex), xb = mesh.x(ex + 1);
    for (int ey = 0; ey < ny; ++ey) {
      const double w = mask.weight(mesh.element(ex, ey));
      for (int m = 1; m <= mm; ++m) W[m][ey] += w * (std::cos(m * xa) - std::cos(m * xb)) / m;
      coarse_w[ey] += w * (std::cos(xa) - std::cos(xb));
    }
  }
  PlacementBound out;
  out.upperb = -std::numeric_limits<double>::infinity();
  out.coarse = 0.0;
  std::vector<double> P(mm + 1);
  for (int jn = 0; jn <= ny; ++jn) {
    const double y = mesh.y(jn);
    double coarse = 0.0;
    for (int m = 1; m <= mm; ++m) {
      double acc = 0.0;
      for (int ey = 0; ey < ny; ++ey) {
        const double row = phi_m_eta_integral(y, mesh.y(ey), mesh.y(ey + 1), m, params);
        acc += row * W[m][ey];
        if (m == 1) coarse += row * coarse_w[ey];
      }
      P[m] = acc / (2.0 * kPi * static_cast<double>(m) * m * m);
    }
    out.coarse = std::max(out.coarse, kPi / 12.0 * coarse);
    for (int in = 0; in <= nx; ++in) {
      const double x = mesh.x(in);
      CompensatedSum sum;
      for (int m = 1; m <= mm; ++m) sum.add(std::sin(m * x) * P[m]);
      if (sum.value() > out.upperb) {
        out.upperb = sum.value();
        out.upperb_argmax = {x, y};
      }
    }
  }
  // |integral of the m-th term| <= beta/(2 pi m^3) * 2 * 2l g(l); sum_{m>n} m^-3 <= 1/(2 n^2)
  const double l = params.half_width;
  out.upperb_tail = std::max(mask.alpha, mask.beta) * l * envelope_g(l, params) /
                    (kPi * static_cast<double>(mm) * mm);
  return out;
}

}  // namespace plateobs
