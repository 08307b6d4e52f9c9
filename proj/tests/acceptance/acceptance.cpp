// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "plateobs/errors.hpp"
#include "plateobs/run.hpp"
#include "plateobs/worst_case.hpp"

using namespace plateobs;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds; 0 = none
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// every obstacle solve performed below reports here
double g_worst_kkt = 0.0;
int g_vi_solves = 0;

void record(double kkt, int solves = 1) {
  g_worst_kkt = std::max(g_worst_kkt, kkt);
  g_vi_solves += solves;
}

VISolution vi(const PlateOperator& op, const Vector& b, const BoxConstraints& box) {
  VISolution s = solve_obstacle(op, b, box);
  record(s.kkt.max());
  return s;
}

ScanResult scan(const PlateOperator& op, const std::vector<ForceMember>& forces, const BoxConstraints& box) {
  ScanResult r = worst_gap_force(op, forces, box, {4, {}});
  record(r.max_kkt_residual(), static_cast<int>(r.entries.size()));
  return r;
}

const MaterialParams kRef{0.2, 0.1};

// ---------------------------------------------------------------- 1

Outcome series_fem_consistency() {
  std::vector<double> errors;
  double norm = 0.0;
  for (int n : {16, 32, 64}) {
    const Mesh mesh(n, n / 4, kRef.half_width);
    const DofField u = solve_linear(PlateOperator::base(mesh, kRef), assemble_load(mesh, LoadSpec::sine(1)));
    double err = 0.0;
    norm = 0.0;
    for (int k = 0; k < mesh.num_nodes(); ++k) {
      const double exact = sine_load_response(1, mesh.node_point(k), kRef);
      err = std::max(err, std::abs(u.value(k) - exact));
      norm = std::max(norm, std::abs(exact));
    }
    errors.push_back(err);
  }
  Outcome o;
  o.pass = errors[1] < errors[0] && errors[2] < errors[1] && errors[2] <= 1e-3 * norm;
  o.detail = "errors " + fmt("%.3e", errors[0]) + " " + fmt("%.3e", errors[1]) + " " + fmt("%.3e", errors[2]) +
             ", finest/norm " + fmt("%.3e", errors[2] / norm);
  return o;
}

// ---------------------------------------------------------------- 2

Outcome phi_monotone() {
  Outcome o;
  int checked = 0;
  for (double sigma : {0.2, 0.3}) {
    for (double l : {kPi / 150.0, 0.1}) {
      const MaterialParams p{sigma, l};
      for (int a = 0; a <= 20; ++a) {
        for (int c = 0; c <= 20; ++c) {
          const double y = -l + 2.0 * l * a / 20.0, eta = -l + 2.0 * l * c / 20.0;
          double prev = phi_m(y, eta, 1, p);
          if (!(prev > 0.0)) o.pass = false;
          for (int m = 1; m <= 50; ++m) {
            const double next = phi_m(y, eta, m + 1, p);
            if (!(next < prev && next > 0.0)) o.pass = false;
            prev = next;
            ++checked;
          }
        }
      }
    }
  }
  o.detail = std::to_string(checked) + " consecutive pairs";
  return o;
}

// ---------------------------------------------------------------- 3

Outcome green_positive_reciprocal() {
  const SeriesState state(kRef);
  std::vector<Point> pts;
  for (int i = 1; i <= 9; ++i) {
    for (int j = 0; j < 5; ++j) pts.push_back({kPi * i / 10.0, -kRef.half_width + 2 * kRef.half_width * j / 4.0});
  }
  Outcome o;
  double min_g = std::numeric_limits<double>::infinity(), worst = 0.0;
  for (const Point& p : pts) {
    for (const Point& q : pts) {
      const double g = green_value(p, q, state);
      min_g = std::min(min_g, g);
      worst = std::max(worst, std::abs(g - green_value(q, p, state)));
    }
  }
  o.pass = min_g > 0.0 && worst <= 2.0 * state.tail_bound();
  o.detail = "min G " + fmt("%.3e", min_g) + ", max |G_p(q)-G_q(p)| " + fmt("%.3e", worst) + " vs 2*tail " +
             fmt("%.3e", 2.0 * state.tail_bound());
  return o;
}

// ---------------------------------------------------------------- 4

// Least-energy feasible point over all 3^k assignments of free / lower / upper.
Vector brute_force_qp(const PlateOperator& op, const Vector& b, const BoxConstraints& box) {
  const Mesh& mesh = op.mesh();
  const Eigen::MatrixXd K = Eigen::MatrixXd(op.matrix());
  const auto& ess = op.essential_mask();
  const int k = static_cast<int>(box.size());
  int combos = 1;
  for (int i = 0; i < k; ++i) combos *= 3;
  double best = std::numeric_limits<double>::infinity();
  Vector best_x;
  for (int code = 0; code < combos; ++code) {
    Vector fixed = Vector::Zero(b.size());
    std::vector<char> pinned(ess.begin(), ess.end());
    for (int i = 0, c = code; i < k; ++i, c /= 3) {
      if (c % 3 == 0) continue;
      const int d = mesh.dof(box.nodes[i], kValue);
      pinned[d] = 1;
      fixed[d] = c % 3 == 1 ? box.lower[i] : box.upper[i];
    }
    std::vector<int> free;
    for (int d = 0; d < b.size(); ++d) {
      if (!pinned[d]) free.push_back(d);
    }
    const Vector r = b - K * fixed;
    Eigen::MatrixXd Kff(free.size(), free.size());
    Vector rf(free.size());
    for (std::size_t a = 0; a < free.size(); ++a) {
      rf[a] = r[free[a]];
      for (std::size_t c = 0; c < free.size(); ++c) Kff(a, c) = K(free[a], free[c]);
    }
    const Vector xf = Kff.ldlt().solve(rf);
    Vector x = fixed;
    for (std::size_t a = 0; a < free.size(); ++a) x[free[a]] = xf[a];
    bool feasible = true;
    for (int i = 0; i < k; ++i) {
      const double v = x[mesh.dof(box.nodes[i], kValue)];
      if (v > box.upper[i] + 1e-14 || v < box.lower[i] - 1e-14) feasible = false;
    }
    const double e = 0.5 * x.dot(K * x) - b.dot(x);
    if (feasible && e < best) best = e, best_x = x;
  }
  return best_x;
}

Outcome kkt_certification() {
  const Mesh mesh(4, 2, kRef.half_width);  // 60 DOFs
  const PlateOperator op = PlateOperator::base(mesh, kRef);
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_diff = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    LoadSpec f;
    for (int k = 0; k < 3; ++k) f.point_masses.push_back({{0.2 + 2.7 * unit(gen), -0.1 + 0.2 * unit(gen)}, unit(gen) - 0.5});
    Vector b = assemble_load(mesh, f);
    b /= solve_linear(op, b).max_abs_value();  // unconstrained reach 1
    BoxConstraints box;
    for (int i = 1; i <= 3; ++i) {
      for (int j = 0; j <= 2; ++j) box.nodes.push_back(mesh.node(i, j));
    }
    for (std::size_t i = 0; i < box.nodes.size(); ++i) {
      box.lower.push_back(-0.5 * unit(gen));
      box.upper.push_back(0.5 * unit(gen));
    }
    const VISolution s = vi(op, b, box);
    const Vector ref = brute_force_qp(op, b, box);
    worst_diff = std::max(worst_diff, (s.field.dofs - ref).lpNorm<Eigen::Infinity>());
  }
  Outcome o;
  o.pass = worst_diff <= 1e-8 && g_worst_kkt <= 1e-8;
  o.detail = "oracle diff " + fmt("%.3e", worst_diff) + ", worst KKT residual " + fmt("%.3e", g_worst_kkt) +
             " over " + std::to_string(g_vi_solves) + " obstacle solves";
  return o;
}

// ---------------------------------------------------------------- 5

Outcome empty_contact() {
  const Mesh mesh(64, 16, kRef.half_width);
  const SeriesState state(kRef);
  double z_max = 0.0;
  for (int k = 0; k < mesh.num_nodes(); ++k) z_max = std::max(z_max, uniform_load_profile(mesh.node_point(k), state));
  const PlateOperator op = PlateOperator::base(mesh, kRef);
  const BoxConstraints box = BoxConstraints::symmetric_level(mesh, ObstacleRegion::FullPlate, 1.1 * z_max);
  std::mt19937_64 gen(20);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  int empty = 0;
  double reach = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f(mesh.num_elements());
    for (double& v : f) v = unit(gen);
    const VISolution s = vi(op, assemble_load(mesh, LoadSpec::piecewise_constant(f)), box);
    empty += s.contact_free();
    reach = std::max(reach, s.field.max_abs_value());
  }
  Outcome o;
  o.pass = empty == 20;
  o.detail = std::to_string(empty) + "/20 contact-free, max |u| / z_max " + fmt("%.4f", reach / z_max);
  return o;
}

// ---------------------------------------------------------------- 6

Outcome threshold_identity() {
  const ScanWindow window = ScanWindow::defaults(kRef);
  const ThresholdValue M = gap_threshold_M(kRef);
  const Mesh fine(64, 16, kRef.half_width), coarse(32, 8, kRef.half_width);
  const ThresholdScan sf = threshold_scan(PlateOperator::base(fine, kRef), window, 33, 9, {4, {}});
  const ThresholdScan sc = threshold_scan(PlateOperator::base(coarse, kRef), window, 33, 9, {4, {}});
  const double fem = std::abs(sf.M_scan - sc.M_scan);
  const double lhs = std::abs(2.0 * sf.M_scan - 2.0 * M.value);
  const double rhs = 5.0 * (M.tail_bound + fem);
  const bool at_peak = std::abs(sf.argmax.x - kPi / 2) < 1e-12 &&
                       std::abs(std::abs(sf.argmax.y) - kRef.half_width) < 1e-12;
  Outcome o;
  o.pass = lhs <= rhs && at_peak;
  o.detail = "M " + fmt("%.10f", M.value) + ", M_scan " + fmt("%.10f", sf.M_scan) + ", |2M_scan-2M| " +
             fmt("%.3e", lhs) + " <= " + fmt("%.3e", rhs) + ", argmax (" + fmt("%.6f", sf.argmax.x) + ", " +
             fmt("%.6f", sf.argmax.y) + ")";
  return o;
}

// ---------------------------------------------------------------- 7

nlohmann::json run_regime(double ratio) {
  const auto dir = std::filesystem::temp_directory_path() / "plateobs_acceptance_regime";
  const nlohmann::json cfg = {{"schema_version", 1},
                              {"problem", "regime"},
                              {"material", {{"sigma", kRef.sigma}, {"half_width", kRef.half_width}}},
                              {"mesh", {{"nx", 64}, {"ny", 16}}},
                              {"output_dir", dir.string()},
                              {"threads", 4},
                              {"params", {{"gamma_over_M", ratio}, {"forces", {{"nxi", 33}, {"neta", 9}}}}}};
  const RunOutcome out = run(RunConfig::parse(cfg.dump()));
  std::filesystem::remove_all(dir);
  const nlohmann::json result = nlohmann::json::parse(out.summary_json)["result"];
  record(result["scan"]["max_kkt_residual"].get<double>());
  return result;
}

Outcome regime_dichotomy() {
  const nlohmann::json hi = run_regime(1.5);
  const nlohmann::json lo = run_regime(0.5);
  const double g_hi = hi["scan"]["maximal_gap"], two_hi = hi["scan"]["two_gamma"];
  const double g_lo = lo["scan"]["maximal_gap"], two_lo = lo["scan"]["two_gamma"];
  const double tol_scan = lo["scan"]["tol_scan"];
  Outcome o;
  o.pass = hi["regime"] == "(i)" && g_hi < two_hi && hi["scan"]["midline_contact_free"] == true &&
           lo["regime"] == "(ii)" && g_lo >= two_lo - tol_scan && g_lo <= two_lo * (1.0 + 1e-12);
  o.detail = "1.5M: G " + fmt("%.6e", g_hi) + " < 2g " + fmt("%.6e", two_hi) + "; 0.5M: G " + fmt("%.12e", g_lo) +
             ", 2g " + fmt("%.12e", two_lo) + ", tol_scan " + fmt("%.3e", tol_scan);
  return o;
}

// ---------------------------------------------------------------- 8

double rel(const DofField& part, const DofField& whole) { return part.max_abs_value() / whole.max_abs_value(); }

Outcome symmetry_suite() {
  const Mesh mesh(32, 8, kRef.half_width);
  const PlateOperator op = PlateOperator::base(mesh, kRef);

  LoadSpec odd = LoadSpec::antisym_delta({1.2, 0.07});
  odd.point_masses.push_back({{2.5, 0.02}, 0.3});
  odd.point_masses.push_back({{2.5, -0.02}, -0.3});
  const Vector bo = assemble_load(mesh, odd);
  const double ro = solve_linear(op, bo).max_abs_value();
  const VISolution so = vi(op, bo, BoxConstraints::symmetric_level(mesh, ObstacleRegion::LongEdges, 0.4 * ro));

  LoadSpec even = LoadSpec::uniform(1.0);
  even.point_masses.push_back({{0.9, 0.05}, 2.0});
  even.point_masses.push_back({{0.9, -0.05}, 2.0});
  const Vector be = assemble_load(mesh, even);
  const double re = solve_linear(op, be).max_abs_value();
  const VISolution se = vi(op, be, BoxConstraints::symmetric_level(mesh, ObstacleRegion::FullPlate, 0.6 * re));

  LoadSpec mirrored = LoadSpec::point({1.0, 0.03}, 1.0);
  mirrored.point_masses.push_back({{kPi - 1.0, 0.03}, 1.0});
  const Vector bm = assemble_load(mesh, mirrored);
  const double rm = solve_linear(op, bm).max_abs_value();
  const VISolution sm = vi(op, bm, BoxConstraints::constant_level(mesh, ObstacleRegion::FullPlate, -0.2 * rm, 0.5 * rm));
  DofField diff = sm.field;
  diff.dofs -= mirror_x(sm.field).dofs;

  const double e_odd = rel(symmetry_decompose(so.field).even, so.field);
  const double e_even = rel(symmetry_decompose(se.field).odd, se.field);
  const double e_x = rel(diff, sm.field);
  Outcome o;
  o.pass = !so.contact_free() && !se.contact_free() && !sm.contact_free() && e_odd <= 1e-7 && e_even <= 1e-7 &&
           e_x <= 1e-7;
  o.detail = "odd->even part " + fmt("%.2e", e_odd) + ", even->odd part " + fmt("%.2e", e_even) + ", x-mirror " +
             fmt("%.2e", e_x) + " (all with contact)";
  return o;
}

// ---------------------------------------------------------------- 9

Outcome sign_symmetry() {
  const Mesh mesh(64, 16, kRef.half_width);
  const PlateOperator op = PlateOperator::base(mesh, kRef);
  const double M = gap_threshold_M(kRef).value;
  const BoxConstraints thin = BoxConstraints::symmetric_level(mesh, ObstacleRegion::LongEdges, 0.5 * M);

  ForceClass plus = ForceClass::antisym(kRef), minus = plus;
  minus.negate = true;
  const ScanResult a = scan(op, plus.enumerate(mesh), thin);
  const ScanResult b = scan(op, minus.enumerate(mesh), thin);
  bool same = a.entries.size() == b.entries.size() && a.value == b.value && a.argopt == b.argopt;
  for (std::size_t k = 0; same && k < a.entries.size(); ++k) same = a.entries[k].value == b.entries[k].value;

  ForceClass bang;
  bang.kind = ForceKind::BangBangGrid;
  ForceClass bang_neg = bang;
  bang_neg.negate = true;
  const ReinforcementMask mask = rasterize(mesh, 0.5, 2.0, {kPi / 2}, {}, false);
  const BoxConstraints box = BoxConstraints::symmetric_level(mesh, ObstacleRegion::FullPlate, 0.004);
  const ScanSettings ss{4, {}};
  const ScanResult c = worst_force_amplitude(mesh, kRef, mask, bang.enumerate(mesh), box, EnergyModel::E1, ss);
  const ScanResult d = worst_force_amplitude(mesh, kRef, mask, bang_neg.enumerate(mesh), box, EnergyModel::E1, ss);
  record(std::max(c.max_kkt_residual(), d.max_kkt_residual()), 2 * static_cast<int>(c.entries.size()));
  bool same_amp = c.entries.size() == d.entries.size() && c.value == d.value;
  for (std::size_t k = 0; same_amp && k < c.entries.size(); ++k) same_amp = c.entries[k].value == d.entries[k].value;
  bool touched = false;
  for (const auto& e : c.entries) touched = touched || !e.contact_free;

  Outcome o;
  o.pass = same && same_amp && touched;
  o.detail = "gap scan " + std::to_string(a.entries.size()) + " members identical: " + (same ? "yes" : "no") +
             "; E1 amplitude scan " + std::to_string(c.entries.size()) + " members identical: " +
             (same_amp ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------- 10

Outcome bound_chain() {
  Outcome o;
  int masks = 0;
  double worst_ratio = 0.0;
  ForceClass bang;
  bang.kind = ForceKind::BangBangGrid;
  for (double sigma : {0.2, 0.3}) {
    for (double l : {kPi / 150.0, 0.1}) {
      const MaterialParams p{sigma, l};
      if (!(gap_threshold_M(p).value <= analytic_bound_C(p))) o.pass = false;
      const SeriesState state(p);
      const Mesh fine(64, 16, l), coarse(32, 8, l);
      struct Shape {
        std::vector<double> xc, yc;
        bool tiles;
      };
      const std::vector<Shape> shapes = {{{kPi / 2}, {}, false},
                                         {{}, {0.0}, false},
                                         {{kPi / 4, 3 * kPi / 4}, {}, false},
                                         {{kPi / 2}, {l}, false},
                                         {{kPi / 2}, {0.0}, true}};
      for (const Shape& sh : shapes) {
        const ReinforcementMask mf = rasterize(fine, 0.5, 2.0, sh.xc, sh.yc, sh.tiles);
        const ReinforcementMask mc = rasterize(coarse, 0.5, 2.0, sh.xc, sh.yc, sh.tiles);
        const double af = worst_force_amplitude(fine, p, mf, bang.enumerate(fine), BoxConstraints::none(),
                                                EnergyModel::E2, {4, {}}).value;
        const double ac = worst_force_amplitude(coarse, p, mc, bang.enumerate(coarse), BoxConstraints::none(),
                                                EnergyModel::E2, {4, {}}).value;
        const PlacementBound pb = placement_bound_report(fine, mf, state);
        const double upper = pb.upperb + pb.upperb_tail;
        const bool ok = af <= upper + std::abs(af - ac) && upper <= pb.coarse;
        if (!ok) {
          o.pass = false;
          o.detail += "[sigma " + fmt("%g", sigma) + " l " + fmt("%g", l) + ": A " + fmt("%.6e", af) + " upperb " +
                      fmt("%.6e", upper) + " coarse " + fmt("%.6e", pb.coarse) + "] ";
        }
        worst_ratio = std::max(worst_ratio, af / upper);
        ++masks;
      }
    }
  }
  o.detail += std::to_string(masks) + " (mask, sigma, l) cases, max A/upperb " + fmt("%.6f", worst_ratio) +
              ", M <= C in all 4 parameter pairs";
  return o;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "series-FEM consistency", 60, series_fem_consistency},
      {2, "phi monotonicity", 5, phi_monotone},
      {3, "Green positivity and reciprocity", 10, green_positive_reciprocal},
      {5, "empty-contact criterion", 120, empty_contact},
      {6, "threshold identity", 120, threshold_identity},
      {7, "regime dichotomy", 180, regime_dichotomy},
      {8, "symmetry suite", 0, symmetry_suite},
      {9, "sign symmetry of maximizers", 0, sign_symmetry},
      {10, "bound chain", 0, bound_chain},
      {4, "KKT certification", 0, kkt_certification},  // last: audits every solve above
  };
  struct Line {
    int id;
    std::string text;
  };
  std::vector<Line> lines;
  bool all = true;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0 && secs > c.time_limit) {
      o.pass = false;
      o.detail += "; over time limit " + fmt("%.0f s", c.time_limit);
    }
    all = all && o.pass;
    lines.push_back({c.id, std::string(o.pass ? "PASS" : "FAIL") + " [" + std::to_string(c.id) + "] " + c.name +
                               " (" + fmt("%.2f s", secs) + "): " + o.detail});
  }
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  for (const Line& l : lines) std::printf("%s\n", l.text.c_str());
  return all ? 0 : 1;
}
