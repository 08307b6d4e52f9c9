#include "plateobs/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "plateobs/errors.hpp"
#include "plateobs/worst_case.hpp"

namespace plateobs {

using Json = nlohmann::ordered_json;

struct RunConfig::Doc {
  Json input;
  RunOverrides overrides;
};

namespace {

const std::vector<std::string> kProblems = {"green-eval",   "solve", "vi-solve", "gap-scan", "optimize-reinforcement",
                                            "optimize-obstacle", "regime"};

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

struct Diag {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& msg) { list.push_back(path + ": " + msg); }
};

// Reads one JSON object; resolved values (defaults included) collect in `out`.
class Reader {
 public:
  Reader(const Json* in, std::string path, Diag& d) : in_(in), path_(std::move(path)), d_(d) {
    if (in_ && !in_->is_object()) {
      d_.add(path_, "must be an object");
      in_ = nullptr;
    }
  }

  bool has(const std::string& key) const { return in_ && in_->contains(key); }
  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  Diag& diag() { return d_; }

  double number(const std::string& key, double def, const std::function<bool(double)>& ok = {},
                const std::string& msg = "") {
    double v = def;
    if (const Json* j = get(key)) {
      if (!j->is_number()) {
        d_.add(at(key), "must be a number");
      } else {
        v = j->get<double>();
        if (!std::isfinite(v)) d_.add(at(key), "must be finite");
      }
    }
    if (ok && !ok(v)) d_.add(at(key), msg);
    out[key] = v;
    return v;
  }

  double required_number(const std::string& key) {
    if (!has(key)) {
      d_.add(at(key), "is required");
      seen_.insert(key);
      return std::numeric_limits<double>::quiet_NaN();
    }
    return number(key, 0.0);
  }

  int integer(const std::string& key, int def, int lo, int hi) {
    long long v = def;
    if (const Json* j = get(key)) {
      if (!j->is_number_integer()) {
        d_.add(at(key), "must be an integer");
      } else {
        v = j->get<long long>();
      }
    }
    if (v < lo || v > hi) {
      d_.add(at(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      v = def;
    }
    out[key] = v;
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool def) {
    bool v = def;
    if (const Json* j = get(key)) {
      if (!j->is_boolean()) {
        d_.add(at(key), "must be true or false");
      } else {
        v = j->get<bool>();
      }
    }
    out[key] = v;
    return v;
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& options) {
    std::string v = def;
    if (const Json* j = get(key)) {
      if (!j->is_string()) {
        d_.add(at(key), "must be a string");
      } else {
        v = j->get<std::string>();
      }
    }
    if (std::find(options.begin(), options.end(), v) == options.end()) {
      d_.add(at(key), "must be one of " + join(options, ", ") + " (got \"" + v + "\")");
      v = def;
    }
    out[key] = v;
    return v;
  }

  std::string text(const std::string& key, const std::string& def) {
    std::string v = def;
    if (const Json* j = get(key)) {
      if (!j->is_string()) {
        d_.add(at(key), "must be a string");
      } else {
        v = j->get<std::string>();
      }
    }
    out[key] = v;
    return v;
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> v;
    if (const Json* j = get(key)) {
      if (!j->is_array()) {
        d_.add(at(key), "must be an array of numbers");
      } else {
        for (const auto& e : *j) {
          if (!e.is_number() || !std::isfinite(e.get<double>())) {
            d_.add(at(key), "must contain only finite numbers");
            v.clear();
            break;
          }
          v.push_back(e.get<double>());
        }
      }
    }
    out[key] = v;
    return v;
  }

  const Json* object(const std::string& key) { return get(key); }
  void put(const std::string& key, Json value) { out[key] = std::move(value); }

  void finish() {
    if (!in_) return;
    for (const auto& item : in_->items()) {
      if (!seen_.count(item.key())) d_.add(at(item.key()), "unknown field");
    }
  }

  Json out = Json::object();

 private:
  const Json* get(const std::string& key) {
    seen_.insert(key);
    if (!in_) return nullptr;
    auto it = in_->find(key);
    return it == in_->end() ? nullptr : &*it;
  }

  const Json* in_;
  std::string path_;
  Diag& d_;
  std::set<std::string> seen_;
};

auto positive = [](double v) { return v > 0.0; };

struct LoadCfg {
  std::string kind = "uniform";
  double value = 1.0;
  int mode = 1;
  double amplitude = 1.0;
  Point p;
  double weight = 1.0;
  std::vector<double> values;
  std::uint64_t seed = 1;
};

struct ObstacleCfg {
  bool present = false;
  ObstacleRegion region = ObstacleRegion::LongEdges;
  std::string mode;  // gamma | gamma_over_M | gamma_over_zmax | bounds
  double a = 0.0;
  double b = 0.0;
};

struct MaskCfg {
  bool present = false;
  double alpha = 0.5;
  double beta = 2.0;
  std::vector<double> xc, yc;
  bool tiles = false;
  std::vector<int> elements;
};

struct CandidateCfg {
  ObstacleCandidate c;
  bool relative = false;  // gamma given as a multiple of M
};

struct Settings {
  std::string problem;
  MaterialParams material;
  int nx = 64, ny = 16, m_max = SeriesState::kDefaultOrder, threads = 1;
  std::string output_dir = "out";
  Json resolved;

  // green-eval
  std::string kernel = "green";
  Point source{kPi / 2, 0.0};
  std::vector<Point> points;
  // solve / vi-solve
  LoadCfg load;
  std::string energy = "base";
  MaskCfg mask;
  ObstacleCfg obstacles;
  SolverSettings solver;
  // scans
  ForceClass forces;
  std::string measure = "gap";
  ReinforcementFamily family;
  std::vector<CandidateCfg> candidates;
  // regime
  bool gamma_relative = false;
  double gamma = 0.0;
  bool scan = true;
};

ObstacleRegion read_region(Reader& r) {
  return r.choice("region", "long-edges", {"long-edges", "full-plate"}) == "full-plate" ? ObstacleRegion::FullPlate
                                                                                      : ObstacleRegion::LongEdges;
}

LoadCfg read_load(Reader& r, const Settings& s, const Mesh* mesh) {
  LoadCfg c;
  c.kind = r.choice("kind", "uniform", {"uniform", "sine", "point", "antisym-delta", "elements", "random"});
  const double l = s.material.half_width;
  if (c.kind == "uniform") {
    c.value = r.number("value", 1.0);
  } else if (c.kind == "sine") {
    c.mode = r.integer("mode", 1, 1, 100000);
    c.amplitude = r.number("amplitude", 1.0);
  } else if (c.kind == "point") {
    c.p.x = r.required_number("x");
    c.p.y = r.required_number("y");
    c.weight = r.number("weight", 1.0);
    if (!(c.p.x >= 0.0 && c.p.x <= kPi && std::abs(c.p.y) <= l)) r.diag().add(r.path(), "point lies outside the plate");
  } else if (c.kind == "antisym-delta") {
    c.p.x = r.required_number("xi");
    c.p.y = r.required_number("eta");
    if (!(c.p.x >= 0.0 && c.p.x <= kPi && std::abs(c.p.y) <= l)) r.diag().add(r.path(), "point lies outside the plate");
  } else if (c.kind == "elements") {
    c.values = r.numbers("values");
    if (mesh && static_cast<int>(c.values.size()) != mesh->num_elements()) {
      r.diag().add(r.at("values"), "needs one value per element (" + std::to_string(mesh->num_elements()) + ")");
    }
  } else {
    c.seed = static_cast<std::uint64_t>(r.integer("seed", 1, 0, std::numeric_limits<int>::max()));
    c.amplitude = r.number("amplitude", 1.0, [](double v) { return v >= 0.0; }, "must be non-negative");
  }
  r.finish();
  return c;
}

// Element-wise values in [-amplitude, amplitude] from a fixed 64-bit generator.
std::vector<double> random_elements(const Mesh& mesh, std::uint64_t seed, double amplitude) {
  std::mt19937_64 gen(seed);
  std::vector<double> v(mesh.num_elements());
  for (double& x : v) x = amplitude * (2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0);
  return v;
}

LoadSpec make_load(const LoadCfg& c, const Mesh& mesh) {
  if (c.kind == "uniform") return LoadSpec::uniform(c.value);
  if (c.kind == "sine") return LoadSpec::sine(c.mode, c.amplitude);
  if (c.kind == "point") return LoadSpec::point(c.p, c.weight);
  if (c.kind == "antisym-delta") return LoadSpec::antisym_delta({c.p.x, c.p.y});
  if (c.kind == "elements") return LoadSpec::piecewise_constant(c.values);
  return LoadSpec::piecewise_constant(random_elements(mesh, c.seed, c.amplitude));
}

bool is_point_load(const LoadCfg& c) { return c.kind == "point" || c.kind == "antisym-delta"; }

ObstacleCfg read_obstacles(Reader& r) {
  ObstacleCfg c;
  c.present = true;
  c.region = read_region(r);
  int given = 0;
  for (const char* k : {"gamma", "gamma_over_M", "gamma_over_zmax"}) {
    if (r.has(k)) {
      ++given;
      c.mode = k;
      c.a = r.number(k, 0.0, positive, "must be positive");
    }
  }
  if (r.has("lower") || r.has("upper")) {
    ++given;
    c.mode = "bounds";
    c.a = r.required_number("lower");
    c.b = r.required_number("upper");
    if (!(c.a <= 0.0 && 0.0 <= c.b)) r.diag().add(r.path(), "obstacles must satisfy lower <= 0 <= upper");
  }
  if (given != 1) r.diag().add(r.path(), "give exactly one of gamma, gamma_over_M, gamma_over_zmax or lower/upper");
  r.finish();
  return c;
}

MaskCfg read_mask(Reader& r, const Mesh* mesh, Diag& d) {
  MaskCfg m;
  m.present = true;
  m.alpha = r.number("alpha", 0.5);
  m.beta = r.number("beta", 2.0);
  if (!(m.alpha > 0.0 && m.alpha < 1.0 && m.beta > 1.0)) {
    d.add(r.path(), "requires α < 1 < β with α > 0 (alpha = " + format_number(m.alpha) +
                        ", beta = " + format_number(m.beta) + ")");
  }
  if (r.has("elements")) {
    for (double v : r.numbers("elements")) m.elements.push_back(static_cast<int>(v));
  } else {
    m.xc = r.numbers("x_centers");
    m.yc = r.numbers("y_centers");
    m.tiles = r.boolean("tiles", false);
    if (m.xc.empty() && m.yc.empty()) d.add(r.path(), "needs x_centers/y_centers or elements");
    if (m.tiles && m.xc.size() != m.yc.size()) d.add(r.path(), "tiles need as many x_centers as y_centers");
  }
  r.finish();
  if (mesh && d.list.empty()) {
    const double target = ReinforcementMask::empty(*mesh, m.alpha, m.beta).target_area(*mesh);
    const long count = std::lround(target / (mesh->hx() * mesh->hy()));
    if (count < 1 || count > mesh->num_elements()) {
      d.add(r.path(), "area constraint |D| = |Ω|(1−α)/(β−α) = " + format_number(target) +
                          " cannot be met on this mesh");
    } else if (!m.elements.empty()) {
      ReinforcementMask mk = ReinforcementMask::empty(*mesh, m.alpha, m.beta);
      for (int e : m.elements) {
        if (e < 0 || e >= mesh->num_elements()) {
          d.add(r.at("elements"), "element index out of range");
          return m;
        }
        mk.in_D[e] = 1;
      }
      try {
        mk.validate(*mesh);
      } catch (const ValidationError& e) {
        d.add(r.path(), e.what());
      }
    }
  }
  return m;
}

ReinforcementMask make_mask(const MaskCfg& m, const Mesh& mesh) {
  if (m.elements.empty()) return rasterize(mesh, m.alpha, m.beta, m.xc, m.yc, m.tiles);
  ReinforcementMask mk = ReinforcementMask::empty(mesh, m.alpha, m.beta);
  for (int e : m.elements) mk.in_D[e] = 1;
  return mk;
}

ForceClass read_forces(Reader& r, const Settings& s, const std::string& def_kind) {
  ForceClass f;
  const std::string kind = r.choice("kind", def_kind,
                                    {"antisym-delta-grid", "even-delta-pair-grid", "signed-delta-grid", "bang-bang"});
  f.kind = kind == "antisym-delta-grid"     ? ForceKind::AntisymDeltaGrid
           : kind == "even-delta-pair-grid" ? ForceKind::EvenDeltaPairGrid
           : kind == "signed-delta-grid"    ? ForceKind::SignedDeltaGrid
                                            : ForceKind::BangBangGrid;
  if (f.kind == ForceKind::BangBangGrid) {
    f.blocks_x = r.integer("blocks_x", 4, 1, 16);
    f.blocks_y = r.integer("blocks_y", 1, 1, 16);
    if (f.blocks_x * f.blocks_y > 16) r.diag().add(r.path(), "bang-bang grid allows at most 16 blocks");
  } else {
    f.nxi = r.integer("nxi", 33, 2, 4097);
    f.neta = r.integer("neta", 9, 2, 4097);
  }
  if (f.kind == ForceKind::AntisymDeltaGrid || f.kind == ForceKind::EvenDeltaPairGrid) {
    const ScanWindow def = ScanWindow::defaults(s.material);
    f.window.z0 = r.number("z0", def.z0);
    f.window.w0 = r.number("w0", def.w0);
    try {
      f.window.validate(s.material);
    } catch (const std::exception& e) {
      r.diag().add(r.path(), e.what());
    }
  }
  f.negate = r.boolean("negate", false);
  r.finish();
  return f;
}

SolverSettings read_solver(Reader& r) {
  SolverSettings s;
  s.tol = r.number("tol", 1e-9, [](double v) { return v > 0.0 && v < 1.0; }, "must lie in (0,1)");
  s.max_iterations = r.integer("max_iterations", 200, 1, 1000000);
  s.method = r.choice("method", "primal-dual", {"primal-dual", "primal"}) == "primal" ? ActiveSetMethod::Primal
                                                                                      : ActiveSetMethod::PrimalDual;
  r.finish();
  return s;
}

std::vector<int> region_nodes(const Mesh& mesh, ObstacleRegion region) {
  return BoxConstraints::constant_level(mesh, region, 0.0, 0.0).nodes;
}

CandidateCfg read_candidate(Reader& r, const Settings& s, const Mesh* mesh) {
  CandidateCfg c;
  const std::string kind = r.choice("kind", "constant", {"constant", "sampled"});
  c.c.kind = kind == "sampled" ? ObstacleKind::Sampled : ObstacleKind::ConstantLevel;
  c.c.region = read_region(r);
  if (r.has("gamma") == r.has("gamma_over_M")) r.diag().add(r.path(), "give exactly one of gamma, gamma_over_M");
  if (r.has("gamma_over_M")) {
    c.relative = true;
    c.c.gamma = r.number("gamma_over_M", 1.0, positive, "must be positive");
  } else {
    c.c.gamma = r.number("gamma", 1.0, positive, "must be positive");
  }
  c.c.label = r.text("label", "");
  if (c.c.kind == ObstacleKind::Sampled) {
    c.c.kappa = r.number("kappa", 0.0, positive, "must be positive");
    c.c.holder_exponent = r.number("exponent", 0.5, [](double v) { return v > 0.0 && v < 1.0; }, "must lie in (0,1)");
    c.c.lower = r.numbers("lower");
    c.c.upper = r.numbers("upper");
    if (mesh) {
      const std::size_t n = region_nodes(*mesh, c.c.region).size();
      if (c.c.lower.size() != n || c.c.upper.size() != n) {
        r.diag().add(r.path(), "sampled obstacle needs " + std::to_string(n) + " lower and upper values");
      }
    }
  }
  (void)s;
  r.finish();
  return c;
}

ReinforcementFamily read_family(Reader& r) {
  ReinforcementFamily f;
  f.kind = r.choice("kind", "cross", {"cross", "tiles"}) == "tiles" ? ReinforcementKind::Tiles
                                                                    : ReinforcementKind::CrossType;
  const bool tiles = f.kind == ReinforcementKind::Tiles;
  f.alpha = r.number("alpha", 0.5);
  f.beta = r.number("beta", 2.0);
  f.lattice_x = r.integer("lattice_x", tiles ? 5 : 9, 1, 65);
  f.lattice_y = r.integer("lattice_y", tiles ? 3 : 9, 1, 65);
  f.max_x_strips = r.integer("max_x", 2, 0, 4);
  f.max_y_strips = tiles ? 0 : r.integer("max_y", 2, 0, 4);
  f.min_inradius = r.number("min_inradius", 0.0, [](double v) { return v >= 0.0; }, "must be non-negative");
  r.finish();
  return f;
}

Settings parse_settings(const RunConfig::Doc& doc, Diag& d) {
  Settings s;
  Reader top(&doc.input, "", d);
  const Json* sv = top.object("schema_version");
  if (!sv) {
    d.add("schema_version", "is required");
  } else if (!sv->is_number_integer() || sv->get<long long>() != kSchemaVersion) {
    d.add("schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  top.put("schema_version", kSchemaVersion);

  std::string cfg_problem;
  if (top.has("problem")) cfg_problem = top.text("problem", "");
  s.problem = cfg_problem.empty() ? doc.overrides.problem : cfg_problem;
  if (!doc.overrides.problem.empty() && !cfg_problem.empty() && cfg_problem != doc.overrides.problem) {
    d.add("problem", "config problem \"" + cfg_problem + "\" does not match the requested \"" +
                         doc.overrides.problem + "\"");
  }
  if (std::find(kProblems.begin(), kProblems.end(), s.problem) == kProblems.end()) {
    d.add("problem", "must be one of " + join(kProblems, ", ") + " (got \"" + s.problem + "\")");
  }
  top.put("problem", s.problem);

  {
    Reader r(top.object("material"), "material", d);
    s.material.sigma = r.number("sigma", 0.2, [](double v) { return v > 0.0 && v < 1.0; }, "sigma outside (0,1)");
    s.material.half_width = r.number("half_width", kPi / 150.0, [](double v) { return v > 0.0 && 2.0 * v < kPi; },
                                     "half_width outside (0, pi/2)");
    r.finish();
    top.put("material", r.out);
  }
  {
    Reader r(top.object("mesh"), "mesh", d);
    s.nx = r.integer("nx", 64, 4, 4096);
    s.ny = r.integer("ny", 16, 2, 4096);
    if (doc.overrides.nx > 0) s.nx = doc.overrides.nx, r.out["nx"] = s.nx;
    if (doc.overrides.ny > 0) s.ny = doc.overrides.ny, r.out["ny"] = s.ny;
    if (s.nx < 4 || s.ny < 2) d.add("mesh", "requires nx >= 4 and ny >= 2");
    r.finish();
    top.put("mesh", r.out);
  }
  {
    Reader r(top.object("series"), "series", d);
    s.m_max = r.integer("m_max", SeriesState::kDefaultOrder, 1, 1000000);
    if (doc.overrides.m_max > 0) s.m_max = doc.overrides.m_max, r.out["m_max"] = s.m_max;
    r.finish();
    top.put("series", r.out);
  }
  s.output_dir = top.text("output_dir", "out");
  if (!doc.overrides.output_dir.empty()) s.output_dir = doc.overrides.output_dir, top.out["output_dir"] = s.output_dir;
  s.threads = top.integer("threads", 1, 1, 1024);
  if (doc.overrides.threads > 0) s.threads = doc.overrides.threads, top.out["threads"] = s.threads;

  const bool base_ok = d.list.empty();
  std::optional<Mesh> mesh;
  if (base_ok) mesh.emplace(s.nx, s.ny, s.material.half_width);
  const Mesh* mp = mesh ? &*mesh : nullptr;

  Reader p(top.object("params"), "params", d);
  auto sub = [&](const std::string& key) { return Reader(p.object(key), p.at(key), d); };
  auto read_solver_into = [&]() {
    Reader r = sub("solver");
    s.solver = read_solver(r);
    p.put("solver", r.out);
  };
  auto read_obstacles_into = [&]() {
    if (!p.has("obstacles")) {
      p.object("obstacles");
      p.put("obstacles", nullptr);
      return;
    }
    Reader r = sub("obstacles");
    s.obstacles = read_obstacles(r);
    p.put("obstacles", r.out);
  };
  auto read_forces_into = [&](const std::string& def_kind) {
    Reader r = sub("forces");
    s.forces = read_forces(r, s, def_kind);
    p.put("forces", r.out);
    if (mp && d.list.empty()) {
      try {
        s.forces.enumerate(*mp);
      } catch (const std::exception& e) {
        d.add(p.at("forces"), e.what());
      }
    }
  };
  auto read_energy_and_mask = [&](std::vector<std::string> energies, const std::string& def) {
    s.energy = p.choice("energy", def, energies);
    if (p.has("reinforcement")) {
      Reader r = sub("reinforcement");
      s.mask = read_mask(r, mp, d);
      p.put("reinforcement", r.out);
    } else {
      p.object("reinforcement");
      if (s.energy != "base") d.add(p.at("reinforcement"), s.energy + " energy requires a reinforcement");
    }
    if (s.energy == "base" && s.mask.present) d.add(p.at("reinforcement"), "only used with energy E1 or E2");
  };

  if (s.problem == "green-eval") {
    s.kernel = p.choice("kernel", "green", {"green", "antisym", "uniform"});
    if (s.kernel != "uniform") {
      const std::vector<double> src = p.numbers("source");
      if (src.size() != 2) {
        d.add(p.at("source"), "must be [xi, eta]");
      } else {
        s.source = {src[0], src[1]};
        if (!(src[0] >= 0.0 && src[0] <= kPi && std::abs(src[1]) <= s.material.half_width)) {
          d.add(p.at("source"), "lies outside the plate");
        }
      }
    }
    if (const Json* pts = p.object("points")) {
      Json res = Json::array();
      if (!pts->is_array()) d.add(p.at("points"), "must be an array of [x, y] pairs");
      for (const auto& q : pts->is_array() ? *pts : Json::array()) {
        if (!q.is_array() || q.size() != 2 || !q[0].is_number() || !q[1].is_number()) {
          d.add(p.at("points"), "must be an array of [x, y] pairs");
          break;
        }
        const Point pt{q[0].get<double>(), q[1].get<double>()};
        if (!(pt.x >= 0.0 && pt.x <= kPi && std::abs(pt.y) <= s.material.half_width)) {
          d.add(p.at("points"), "point (" + format_number(pt.x) + ", " + format_number(pt.y) + ") lies outside the plate");
        }
        s.points.push_back(pt);
        res.push_back({pt.x, pt.y});
      }
      p.put("points", res);
    } else {
      p.put("points", "mesh-nodes");
    }
  } else if (s.problem == "solve" || s.problem == "vi-solve") {
    {
      Reader r = sub("load");
      s.load = read_load(r, s, mp);
      p.put("load", r.out);
    }
    read_energy_and_mask({"base", "E1", "E2"}, "base");
    if (s.energy == "E2" && is_point_load(s.load)) {
      d.add(p.at("load"), "E2 energy is undefined for point loads");
    }
    if (s.problem == "vi-solve") {
      read_obstacles_into();
      read_solver_into();
    }
  } else if (s.problem == "gap-scan") {
    read_forces_into("antisym-delta-grid");
    read_obstacles_into();
    s.measure = p.choice("measure", "gap", {"gap"});
    read_solver_into();
  } else if (s.problem == "optimize-reinforcement") {
    {
      Reader r = sub("family");
      s.family = read_family(r);
      p.put("family", r.out);
      if (!(s.family.alpha > 0.0 && s.family.alpha < 1.0 && s.family.beta > 1.0)) {
        d.add(p.at("family"), "requires α < 1 < β with α > 0 (alpha = " + format_number(s.family.alpha) +
                                  ", beta = " + format_number(s.family.beta) + ")");
      } else if (mp && d.list.empty()) {
        try {
          if (enumerate_reinforcements(*mp, s.family).empty()) {
            d.add(p.at("family"),
                  "no candidate satisfies the area constraint |D| = |Ω|(1−α)/(β−α) with the separation rules");
          }
        } catch (const std::exception& e) {
          d.add(p.at("family"), e.what());
        }
      }
    }
    s.energy = p.choice("energy", "E2", {"E1", "E2"});
    read_forces_into("bang-bang");
    read_obstacles_into();
    read_solver_into();
    if (s.energy == "E2" && s.forces.kind != ForceKind::BangBangGrid) {
      d.add(p.at("forces"), "E2 energy is undefined for point loads; use bang-bang forces");
    }
  } else if (s.problem == "optimize-obstacle") {
    const Json* list = p.object("candidates");
    Json res = Json::array();
    if (!list || !list->is_array() || list->empty()) {
      d.add(p.at("candidates"), "must be a non-empty array");
    } else {
      for (std::size_t k = 0; k < list->size(); ++k) {
        Reader r(&(*list)[k], p.at("candidates") + "[" + std::to_string(k) + "]", d);
        s.candidates.push_back(read_candidate(r, s, mp));
        res.push_back(r.out);
      }
    }
    p.put("candidates", res);
    read_forces_into("antisym-delta-grid");
    read_solver_into();
  } else if (s.problem == "regime") {
    if (p.has("gamma") == p.has("gamma_over_M")) d.add("params", "give exactly one of gamma, gamma_over_M");
    if (p.has("gamma_over_M")) {
      s.gamma_relative = true;
      s.gamma = p.number("gamma_over_M", 1.0, positive, "must be positive");
    } else {
      s.gamma = p.number("gamma", 1.0, positive, "must be positive");
    }
    s.scan = p.boolean("scan", true);
    read_forces_into("antisym-delta-grid");
    read_solver_into();
  }
  p.finish();
  top.put("params", p.out);
  top.finish();
  s.resolved = top.out;
  return s;
}

// ----------------------------------------------------------------- running

struct Output {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& content) {
    const std::filesystem::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw IoError("failed writing " + path.string());
    files.push_back(path.string());
  }
};

std::string gap_csv(const GapProfile& g) {
  std::ostringstream os;
  os << "x,gap\n";
  for (std::size_t i = 0; i < g.x.size(); ++i) os << format_number(g.x[i]) << ',' << format_number(g.gap[i]) << '\n';
  return os.str();
}

std::string field_csv(const DofField& f) {
  std::ostringstream os;
  write_field_csv(os, f);
  return os.str();
}

Json point_list(const Mesh& mesh, const std::vector<int>& nodes) {
  Json a = Json::array();
  for (int n : nodes) {
    const Point p = mesh.node_point(n);
    a.push_back({p.x, p.y});
  }
  return a;
}

Json kkt_json(const KktReport& k) {
  return {{"stationarity", k.stationarity}, {"complementarity", k.complementarity}, {"feasibility", k.feasibility}};
}

double uniform_profile_max(const Mesh& mesh, const SeriesState& state) {
  double z = 0.0;
  for (int n = 0; n < mesh.num_nodes(); ++n) z = std::max(z, uniform_load_profile(mesh.node_point(n), state));
  return z;
}

BoxConstraints make_box(const ObstacleCfg& c, const Mesh& mesh, const SeriesState& state, Json& info) {
  if (!c.present) return BoxConstraints::none();
  double lo = -c.a, hi = c.a;
  if (c.mode == "gamma_over_M") {
    const double M = gap_threshold_M(state.params(), state.m_max()).value;
    lo = -c.a * M, hi = c.a * M;
    info["M"] = M;
  } else if (c.mode == "gamma_over_zmax") {
    const double z = uniform_profile_max(mesh, state);
    lo = -c.a * z, hi = c.a * z;
    info["z_max"] = z;
  } else if (c.mode == "bounds") {
    lo = c.a, hi = c.b;
  }
  info["lower"] = lo;
  info["upper"] = hi;
  return BoxConstraints::constant_level(mesh, c.region, lo, hi);
}

Json scan_candidates(const ScanResult& r, const std::vector<ForceMember>& forces) {
  Json a = Json::array();
  for (std::size_t k = 0; k < r.entries.size(); ++k) {
    const ScanEntry& e = r.entries[k];
    a.push_back({{"params", {{"label", e.label}, {"site", {forces[k].site.x, forces[k].site.y}}, {"sign", forces[k].sign}}},
                 {"value", e.value},
                 {"contact_free", e.contact_free},
                 {"kkt_residual", e.kkt_residual}});
  }
  return a;
}

Json report(const Settings& s, const Json& candidates, int argopt, double value, Json tolerances) {
  return {{"problem", s.problem},
          {"candidates", candidates},
          {"argopt", argopt},
          {"value", value},
          {"tolerances", std::move(tolerances)},
          {"mesh", s.resolved["mesh"]},
          {"series", s.resolved["series"]}};
}

Json run_green_eval(const Settings& s, const Mesh& mesh, const SeriesState& state, Output& out) {
  std::vector<Point> pts = s.points;
  if (pts.empty()) {
    for (int n = 0; n < mesh.num_nodes(); ++n) pts.push_back(mesh.node_point(n));
  }
  std::ostringstream os;
  os << "x,y,value\n";
  for (const Point& q : pts) {
    double v = 0.0;
    if (s.kernel == "green") v = green_value(s.source, q, state);
    if (s.kernel == "antisym") v = antisym_solution({s.source.x, s.source.y}, q, state);
    if (s.kernel == "uniform") v = uniform_load_profile(q, state);
    os << format_number(q.x) << ',' << format_number(q.y) << ',' << format_number(v) << '\n';
  }
  out.write("green.csv", os.str());
  const double tail = s.kernel == "uniform" ? uniform_load_tail(state) : state.tail_bound();
  return {{"kernel", s.kernel}, {"points", pts.size()}, {"tolerances", {{"series_tail", tail}}}};
}

Json run_solve(const Settings& s, const Mesh& mesh, const SeriesState& state, Output& out) {
  const LoadSpec load = make_load(s.load, mesh);
  std::optional<ReinforcementMask> mask;
  if (s.mask.present) mask = make_mask(s.mask, mesh);
  const PlateOperator op = s.energy == "E1" ? PlateOperator::reinforced(mesh, s.material, *mask)
                                            : PlateOperator::base(mesh, s.material);
  const Vector b = assemble_load(mesh, load, s.energy == "E2" ? &*mask : nullptr);
  Json summary = Json::object();
  Json certificate = Json::object();
  const BoxConstraints box = make_box(s.obstacles, mesh, state, certificate);
  DofField field(mesh);
  if (s.problem == "solve") {
    field = solve_linear(op, b);
    summary["energy"] = op.energy(field.dofs, b);
    summary["linear_residual"] = linear_residual(op, field.dofs, b);
  } else {
    const VISolution sol = solve_obstacle(op, b, box, s.solver);
    field = sol.field;
    summary["contact_lower"] = point_list(mesh, sol.lower_contact);
    summary["contact_upper"] = point_list(mesh, sol.upper_contact);
    summary["kkt"] = kkt_json(sol.kkt);
    summary["energy"] = sol.energy;
    summary["iterations"] = sol.iterations;
  }
  const GapProfile g = gap_profile(field);
  summary["max_abs_u"] = field.max_abs_value();
  summary["maximal_gap"] = g.maximal_gap;
  summary["gap_argmax_x"] = g.argmax_x;
  if (!certificate.empty()) summary["obstacles"] = certificate;
  if (s.energy == "E2") {
    const PlacementBound pb = placement_bound_report(mesh, *mask, state);
    summary["placement_bound"] = {{"upperb", pb.upperb}, {"upperb_tail", pb.upperb_tail}, {"coarse", pb.coarse}};
  }
  summary["tolerances"] = {{"solver_tol", s.solver.tol}, {"series_tail", state.tail_bound()}};
  out.write("field.csv", field_csv(field));
  out.write("gap.csv", gap_csv(g));
  return summary;
}

Json run_gap_scan(const Settings& s, const Mesh& mesh, const SeriesState& state, Output& out) {
  const PlateOperator op = PlateOperator::base(mesh, s.material);
  Json certificate = Json::object();
  const BoxConstraints box = make_box(s.obstacles, mesh, state, certificate);
  const auto forces = s.forces.enumerate(mesh);
  const ScanSettings ss{s.threads, s.solver};
  const ScanResult r = worst_gap_force(op, forces, box, ss);
  const VISolution best = solve_obstacle(op, assemble_load(mesh, forces[r.argopt].load), box, s.solver);
  out.write("gap.csv", gap_csv(gap_profile(best)));
  Json rep = report(s, scan_candidates(r, forces), r.argopt, r.value,
                    {{"solver_tol", s.solver.tol}, {"max_kkt_residual", r.max_kkt_residual()},
                     {"series_tail", state.tail_bound()}});
  rep["measure"] = s.measure;
  rep["argopt_label"] = r.entries[r.argopt].label;
  if (!certificate.empty()) rep["obstacles"] = certificate;
  return rep;
}

Json run_optimize_reinforcement(const Settings& s, const Mesh& mesh, const SeriesState& state, Output& out) {
  const auto cands = enumerate_reinforcements(mesh, s.family);
  Json certificate = Json::object();
  const BoxConstraints box = make_box(s.obstacles, mesh, state, certificate);
  const auto forces = s.forces.enumerate(mesh);
  const EnergyModel model = s.energy == "E1" ? EnergyModel::E1 : EnergyModel::E2;
  const ReinforcementReport r =
      best_reinforcement(mesh, s.material, cands, forces, box, model, {s.threads, s.solver});
  Json list = Json::array();
  std::ostringstream csv;
  csv << "index,value\n";
  for (std::size_t k = 0; k < cands.size(); ++k) {
    list.push_back({{"params",
                     {{"label", cands[k].label},
                      {"x_centers", cands[k].x_centers},
                      {"y_centers", cands[k].y_centers},
                      {"half_width_fraction", cands[k].half_width_fraction}}},
                    {"value", r.values[k]}});
    csv << k << ',' << format_number(r.values[k]) << '\n';
  }
  out.write("candidates.csv", csv.str());
  const ReinforcementMask& best = cands[r.argmin].mask;
  std::ostringstream mcsv;
  mcsv << "xc,yc,in_D\n";
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Point c = mesh.element_center(e);
    mcsv << format_number(c.x) << ',' << format_number(c.y) << ',' << int(best.in_D[e]) << '\n';
  }
  out.write("mask.csv", mcsv.str());
  Json rep = report(s, list, r.argmin, r.value, {{"solver_tol", s.solver.tol}, {"series_tail", state.tail_bound()}});
  rep["argopt_label"] = cands[r.argmin].label;
  if (model == EnergyModel::E2) {
    const PlacementBound pb = placement_bound_report(mesh, best, state);
    rep["certificate"] = {{"upperb", pb.upperb}, {"upperb_tail", pb.upperb_tail}, {"coarse", pb.coarse}};
  }
  if (!certificate.empty()) rep["obstacles"] = certificate;
  return rep;
}

Json run_optimize_obstacle(const Settings& s, const Mesh& mesh, const SeriesState& state, Output& out) {
  const PlateOperator op = PlateOperator::base(mesh, s.material);
  const double M = gap_threshold_M(s.material, s.m_max).value;
  std::vector<ObstacleCandidate> cands;
  for (const auto& c : s.candidates) {
    ObstacleCandidate oc = c.c;
    if (c.relative) oc.gamma *= M;
    cands.push_back(oc);
  }
  const auto forces = s.forces.enumerate(mesh);
  const ScanSettings ss{s.threads, s.solver};
  const ObstacleReport r = best_obstacle(op, cands, forces, ss);
  Json list = Json::array();
  for (std::size_t k = 0; k < cands.size(); ++k) {
    list.push_back({{"params",
                     {{"label", cands[k].label},
                      {"kind", cands[k].kind == ObstacleKind::Sampled ? "sampled" : "constant"},
                      {"gamma", cands[k].gamma}}},
                    {"value", r.values[k]},
                    {"ceiling_ok", static_cast<bool>(r.ceiling_ok[k])}});
  }
  const BoxConstraints box = cands[r.argmin].to_box(mesh);
  const ScanResult best = worst_gap_force(op, forces, box, ss);
  const VISolution sol = solve_obstacle(op, assemble_load(mesh, forces[best.argopt].load), box, s.solver);
  out.write("gap.csv", gap_csv(gap_profile(sol)));
  Json rep = report(s, list, r.argmin, r.value, {{"solver_tol", s.solver.tol}, {"series_tail", state.tail_bound()}});
  rep["certificate"] = {{"M", M}};
  return rep;
}

Json run_regime(const Settings& s, const Mesh& mesh, const SeriesState& state, Output& out) {
  const ThresholdValue Mv = gap_threshold_M(s.material, s.m_max);
  const double gamma = s.gamma_relative ? s.gamma * Mv.value : s.gamma;
  const BoxConstraints thin = BoxConstraints::symmetric_level(mesh, ObstacleRegion::LongEdges, gamma);
  const RegimeReport rr = classify_regime(gamma, s.material, mesh, thin, s.m_max);
  Json summary = {{"regime", rr.regime},
                  {"certificate",
                   {{"gamma", rr.gamma},
                    {"M", rr.M.value},
                    {"M_tail_bound", rr.M.tail_bound},
                    {"C", analytic_bound_C(s.material)}}}};
  if (s.scan) {
    const PlateOperator op = PlateOperator::base(mesh, s.material);
    const auto forces = s.forces.enumerate(mesh);
    const ScanSettings ss{s.threads, s.solver};
    const ScanResult r = worst_gap_force(op, forces, thin, ss);
    bool midline_free = true;
    for (std::size_t k = 0; k < forces.size(); ++k) {
      if (std::abs(forces[k].site.x - kPi / 2) < 1e-12) midline_free = midline_free && r.entries[k].contact_free;
    }
    const VISolution best = solve_obstacle(op, assemble_load(mesh, forces[r.argopt].load), thin, s.solver);
    out.write("gap.csv", gap_csv(gap_profile(best)));
    std::map<double, std::vector<std::pair<double, double>>> columns;
    for (std::size_t k = 0; k < forces.size(); ++k) {
      columns[forces[k].site.x].push_back({forces[k].site.y, r.entries[k].value});
    }
    double tol_scan = 0.0;
    for (auto& [x, col] : columns) {
      std::sort(col.begin(), col.end());
      for (std::size_t k = 1; k < col.size(); ++k) tol_scan = std::max(tol_scan, std::abs(col[k].second - col[k - 1].second));
    }
    summary["scan"] = {{"maximal_gap", r.value},
                       {"two_gamma", 2.0 * gamma},
                       {"tol_scan", tol_scan},
                       {"argmax", r.entries[r.argopt].label},
                       {"midline_contact_free", midline_free},
                       {"max_kkt_residual", r.max_kkt_residual()}};
  }
  summary["tolerances"] = {{"solver_tol", s.solver.tol}, {"series_tail", state.tail_bound()}};
  return summary;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& json_text) {
  RunConfig c;
  c.doc_ = std::make_shared<Doc>();
  try {
    c.doc_->input = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!c.doc_->input.is_object()) throw ValidationError("config must be a JSON object");
  return c;
}

void RunConfig::apply(const RunOverrides& overrides) {
  auto doc = std::make_shared<Doc>(*doc_);
  RunOverrides& o = doc->overrides;
  if (!overrides.problem.empty()) o.problem = overrides.problem;
  if (!overrides.output_dir.empty()) o.output_dir = overrides.output_dir;
  if (overrides.threads > 0) o.threads = overrides.threads;
  if (overrides.m_max > 0) o.m_max = overrides.m_max;
  if (overrides.nx > 0) o.nx = overrides.nx;
  if (overrides.ny > 0) o.ny = overrides.ny;
  doc_ = std::move(doc);
}

std::vector<std::string> RunConfig::validate() const {
  Diag d;
  parse_settings(*doc_, d);
  return d.list;
}

std::string RunConfig::resolved_json() const {
  Diag d;
  return parse_settings(*doc_, d).resolved.dump(2);
}

RunOutcome run(const RunConfig& config) {
  Diag d;
  const Settings s = parse_settings(*config.doc_, d);
  if (!d.list.empty()) throw ValidationError(join(d.list, "\n"));

  const Mesh mesh(s.nx, s.ny, s.material.half_width);
  const SeriesState state(s.material, s.m_max);
  Output out;
  out.dir = s.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(out.dir, ec);
  if (ec) throw IoError("cannot create output directory " + out.dir.string() + ": " + ec.message());

  Json result;
  if (s.problem == "green-eval") result = run_green_eval(s, mesh, state, out);
  if (s.problem == "solve" || s.problem == "vi-solve") result = run_solve(s, mesh, state, out);
  if (s.problem == "gap-scan") result = run_gap_scan(s, mesh, state, out);
  if (s.problem == "optimize-reinforcement") result = run_optimize_reinforcement(s, mesh, state, out);
  if (s.problem == "optimize-obstacle") result = run_optimize_obstacle(s, mesh, state, out);
  if (s.problem == "regime") result = run_regime(s, mesh, state, out);

  Json summary = {{"schema_version", kSchemaVersion}, {"problem", s.problem}, {"config", s.resolved},
                  {"result", result}};
  RunOutcome outcome;
  outcome.summary_json = summary.dump(2, ' ', false, nlohmann::json::error_handler_t::strict) + "\n";
  out.write("summary.json", outcome.summary_json);
  outcome.files = out.files;
  return outcome;
}

}  // namespace plateobs
