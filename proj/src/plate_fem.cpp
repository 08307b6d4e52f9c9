#include "plateobs/plate_fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "plateobs/errors.hpp"

namespace plateobs {

namespace {

constexpr int kElementDofs = 16;
using ElementVector = Eigen::Matrix<double, kElementDofs, 1>;

struct Hermite1D {
  std::array<double, 4> v;   // H0..H3
  std::array<double, 4> d1;  // first derivative in physical units
  std::array<double, 4> d2;
};

// H0, H2 interpolate values at the left/right node; H1, H3 interpolate derivatives.
Hermite1D hermite(double t, double h) {
  Hermite1D r;
  const double t2 = t * t, t3 = t2 * t;
  r.v = {1 - 3 * t2 + 2 * t3, h * (t - 2 * t2 + t3), 3 * t2 - 2 * t3, h * (-t2 + t3)};
  r.d1 = {(-6 * t + 6 * t2) / h, 1 - 4 * t + 3 * t2, (6 * t - 6 * t2) / h, -2 * t + 3 * t2};
  r.d2 = {(-6 + 12 * t) / (h * h), (-4 + 6 * t) / h, (6 - 12 * t) / (h * h), (-2 + 6 * t) / h};
  return r;
}

// Local index L = 4 * (2 * ax + ay) + k with k the DofKind; (ax, ay) the corner.
constexpr int local_index(int ax, int ay, int k) { return 4 * (2 * ax + ay) + k; }

struct BasisValues {
  ElementVector n, nx, ny, nxx, nyy, nxy;
};

BasisValues basis(double t, double s, double hx, double hy) {
  const Hermite1D hx1 = hermite(t, hx);
  const Hermite1D hy1 = hermite(s, hy);
  BasisValues b;
  for (int ax = 0; ax < 2; ++ax) {
    for (int ay = 0; ay < 2; ++ay) {
      for (int k = 0; k < 4; ++k) {
        const int ix = 2 * ax + (k & 1);
        const int iy = 2 * ay + (k >> 1);
        const int L = local_index(ax, ay, k);
        b.n[L] = hx1.v[ix] * hy1.v[iy];
        b.nx[L] = hx1.d1[ix] * hy1.v[iy];
        b.ny[L] = hx1.v[ix] * hy1.d1[iy];
        b.nxx[L] = hx1.d2[ix] * hy1.v[iy];
        b.nyy[L] = hx1.v[ix] * hy1.d2[iy];
        b.nxy[L] = hx1.d1[ix] * hy1.d1[iy];
      }
    }
  }
  return b;
}

struct GaussRule {
  std::array<double, 4> t;  // on [0, 1]
  std::array<double, 4> w;
};

const GaussRule& gauss4() {
  static const GaussRule rule = [] {
    using G = boost::math::quadrature::gauss<double, 4>;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    GaussRule r;
    r.t = {0.5 * (1 - a[1]), 0.5 * (1 - a[0]), 0.5 * (1 + a[0]), 0.5 * (1 + a[1])};
    r.w = {0.5 * w[1], 0.5 * w[0], 0.5 * w[0], 0.5 * w[1]};
    return r;
  }();
  return rule;
}

// Element matrices are formed in extended precision; see SplitMatrix.
using Wide = long double;
using Matrix4 = Eigen::Matrix<Wide, 4, 4>;
using WideElementMatrix = Eigen::Matrix<Wide, kElementDofs, kElementDofs>;

// Exact 1D Hermite integrals on [0, h], basis order H0..H3.
struct Hermite1DMatrices {
  Matrix4 mass;    // int H_i H_j
  Matrix4 slope;   // int H_i' H_j'
  Matrix4 bend;    // int H_i'' H_j''
  Matrix4 mixed;   // int H_i'' H_j
};

Hermite1DMatrices hermite_matrices(Wide h) {
  Hermite1DMatrices m;
  const Wide h2 = h * h;
  m.mass << 156, 22 * h, 54, -13 * h,
            22 * h, 4 * h2, 13 * h, -3 * h2,
            54, 13 * h, 156, -22 * h,
            -13 * h, -3 * h2, -22 * h, 4 * h2;
  m.mass *= h / 420;
  m.slope << 36, 3 * h, -36, 3 * h,
             3 * h, 4 * h2, -3 * h, -h2,
             -36, -3 * h, 36, -3 * h,
             3 * h, -h2, -3 * h, 4 * h2;
  m.slope /= 30 * h;
  m.bend << 12, 6 * h, -12, 6 * h,
            6 * h, 4 * h2, -6 * h, 2 * h2,
            -12, -6 * h, 12, -6 * h,
            6 * h, 2 * h2, -6 * h, 4 * h2;
  m.bend /= h2 * h;
  // integration by parts: int H_i'' H_j = [H_i' H_j] - int H_i' H_j'
  m.mixed = -m.slope;
  m.mixed(3, 2) += 1;
  m.mixed(1, 0) -= 1;
  return m;
}

// Tensor-product form of the bending energy.
WideElementMatrix element_stiffness(const Mesh& mesh, double sigma) {
  constexpr Wide pi = 3.141592653589793238462643383279502884L;
  const Hermite1DMatrices X = hermite_matrices(pi / mesh.nx());
  const Hermite1DMatrices Y = hermite_matrices(2 * static_cast<Wide>(mesh.half_width()) / mesh.ny());
  const Wide s = sigma;
  WideElementMatrix K;
  for (int A = 0; A < kElementDofs; ++A) {
    const int ia = 2 * (A / 8) + (A % 4 & 1), ja = 2 * (A / 4 % 2) + (A % 4 >> 1);
    for (int B = 0; B < kElementDofs; ++B) {
      const int ib = 2 * (B / 8) + (B % 4 & 1), jb = 2 * (B / 4 % 2) + (B % 4 >> 1);
      K(A, B) = X.bend(ia, ib) * Y.mass(ja, jb) + X.mass(ia, ib) * Y.bend(ja, jb) +
                s * (X.mixed(ia, ib) * Y.mixed(jb, ja) + X.mixed(ib, ia) * Y.mixed(ja, jb)) +
                2 * (1 - s) * X.slope(ia, ib) * Y.slope(ja, jb);
    }
  }
  return K;
}

std::array<int, kElementDofs> element_dofs(const Mesh& mesh, int i, int j) {
  std::array<int, kElementDofs> d{};
  for (int ax = 0; ax < 2; ++ax) {
    for (int ay = 0; ay < 2; ++ay) {
      const int nd = mesh.node(i + ax, j + ay);
      for (int k = 0; k < 4; ++k) d[local_index(ax, ay, k)] = mesh.dof(nd, k);
    }
  }
  return d;
}

ElementVector gather(const DofField& f, int i, int j) {
  const auto d = element_dofs(f.mesh, i, j);
  ElementVector v;
  for (int L = 0; L < kElementDofs; ++L) v[L] = f.dofs[d[L]];
  return v;
}

}  // namespace

Mesh::Mesh(int nx, int ny, double half_width) : nx_(nx), ny_(ny), half_width_(half_width) {
  if (nx < 4 || ny < 2) throw ValidationError("mesh requires nx >= 4 and ny >= 2");
  if (!(half_width > 0.0 && 2.0 * half_width < kPi)) throw DomainError("mesh half width must satisfy 0 < 2l < pi");
  hx_ = kPi / nx;
  hy_ = 2.0 * half_width / ny;
}

Point Mesh::node_point(int node_index) const {
  return {x(node_index / (ny_ + 1)), y(node_index % (ny_ + 1))};
}

Point Mesh::element_center(int e) const {
  const int i = e / ny_, j = e % ny_;
  return {(i + 0.5) * hx_, -half_width_ + (j + 0.5) * hy_};
}

bool Mesh::contains(Point q) const {
  const double tol = 1e-12;
  return q.x >= -tol && q.x <= kPi + tol && std::abs(q.y) <= half_width_ * (1.0 + tol);
}

std::array<int, 2> Mesh::locate(Point q) const {
  if (!contains(q)) {
    throw DomainError("point (" + std::to_string(q.x) + ", " + std::to_string(q.y) + ") outside the closed plate");
  }
  const int i = std::clamp(static_cast<int>(std::floor(q.x / hx_)), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor((q.y + half_width_) / hy_)), 0, ny_ - 1);
  return {i, j};
}

std::vector<int> Mesh::essential_dofs() const {
  std::vector<int> out;
  for (int i : {0, nx_}) {
    for (int j = 0; j <= ny_; ++j) {
      out.push_back(dof(node(i, j), kValue));
      out.push_back(dof(node(i, j), kDy));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> Mesh::long_edge_nodes() const {
  std::vector<int> out;
  for (int i = 0; i <= nx_; ++i) {
    out.push_back(node(i, 0));
    out.push_back(node(i, ny_));
  }
  return out;
}

int Mesh::mirror_y_node(int node_index) const {
  const int i = node_index / (ny_ + 1), j = node_index % (ny_ + 1);
  return node(i, ny_ - j);
}

int Mesh::mirror_x_node(int node_index) const {
  const int i = node_index / (ny_ + 1), j = node_index % (ny_ + 1);
  return node(nx_ - i, j);
}

DofField::DofField(const Mesh& m, Vector values) : mesh(m), dofs(std::move(values)) {
  if (dofs.size() != m.num_dofs()) throw ValidationError("DOF vector size does not match mesh");
}

double DofField::max_abs_value() const {
  double best = 0.0;
  for (int n = 0; n < mesh.num_nodes(); ++n) best = std::max(best, std::abs(value(n)));
  return best;
}

DofField interpolate(const Mesh& mesh, const HermiteData& fn) {
  DofField f(mesh);
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const Point p = mesh.node_point(n);
    const auto d = fn(p.x, p.y);
    for (int k = 0; k < 4; ++k) f.dofs[mesh.dof(n, k)] = d[k];
  }
  for (int d : mesh.essential_dofs()) f.dofs[d] = 0.0;
  return f;
}

FieldDerivatives evaluate_derivatives(const DofField& field, Point q) {
  const Mesh& mesh = field.mesh;
  const auto [i, j] = mesh.locate(q);
  const double t = std::clamp((q.x - i * mesh.hx()) / mesh.hx(), 0.0, 1.0);
  const double s = std::clamp((q.y - mesh.y(j)) / mesh.hy(), 0.0, 1.0);
  const BasisValues B = basis(t, s, mesh.hx(), mesh.hy());
  const ElementVector v = gather(field, i, j);
  return {B.n.dot(v), B.nx.dot(v), B.ny.dot(v), B.nxx.dot(v), B.nyy.dot(v), B.nxy.dot(v)};
}

double point_eval(const DofField& field, Point q) { return evaluate_derivatives(field, q).u; }

ReinforcementMask ReinforcementMask::empty(const Mesh& mesh, double alpha, double beta) {
  ReinforcementMask m;
  m.in_D.assign(mesh.num_elements(), 0);
  m.alpha = alpha;
  m.beta = beta;
  return m;
}

int ReinforcementMask::count() const { return static_cast<int>(std::count(in_D.begin(), in_D.end(), 1)); }

double ReinforcementMask::area(const Mesh& mesh) const { return count() * mesh.hx() * mesh.hy(); }

double ReinforcementMask::target_area(const Mesh& mesh) const {
  return 2.0 * kPi * mesh.half_width() * (1.0 - alpha) / (beta - alpha);
}

void ReinforcementMask::validate(const Mesh& mesh) const {
  if (!(alpha > 0.0 && alpha < 1.0 && beta > 1.0)) {
    throw ValidationError("reinforcement requires 0 < alpha < 1 < beta (got alpha = " + std::to_string(alpha) +
                          ", beta = " + std::to_string(beta) + ")");
  }
  if (static_cast<int>(in_D.size()) != mesh.num_elements()) {
    throw ValidationError("reinforcement mask size does not match the mesh");
  }
  const double elem = mesh.hx() * mesh.hy();
  if (std::abs(area(mesh) - target_area(mesh)) > elem * (1.0 + 1e-9)) {
    throw ValidationError("reinforcement area |D| = " + std::to_string(area(mesh)) +
                          " violates |D| = |Omega|(1-alpha)/(beta-alpha) = " + std::to_string(target_area(mesh)) +
                          " by more than one element");
  }
}

double LoadSpec::density_at(int element, double x, double y) const {
  if (!element_density.empty()) return element_density[element];
  if (density) return density(x, y);
  return 0.0;
}

LoadSpec LoadSpec::none() { return {}; }

LoadSpec LoadSpec::point(Point p, double weight) {
  LoadSpec l;
  l.point_masses.push_back({p, weight});
  return l;
}

LoadSpec LoadSpec::antisym_delta(const AntisymDelta& t) {
  LoadSpec l;
  if (t.eta != 0.0) {
    l.point_masses.push_back({{t.xi, t.eta}, 0.5});
    l.point_masses.push_back({{t.xi, -t.eta}, -0.5});
  }
  return l;
}

LoadSpec LoadSpec::uniform(double value) {
  LoadSpec l;
  l.density = [value](double, double) { return value; };
  l.density_sup = std::abs(value);
  l.ball = LoadBall::Lp;
  return l;
}

LoadSpec LoadSpec::sine(int mode, double amplitude) {
  LoadSpec l;
  l.density = [mode, amplitude](double x, double) { return amplitude * std::sin(mode * x); };
  l.density_sup = std::abs(amplitude);
  l.ball = LoadBall::Lp;
  return l;
}

LoadSpec LoadSpec::piecewise_constant(std::vector<double> values) {
  LoadSpec l;
  double sup = 0.0;
  for (double v : values) sup = std::max(sup, std::abs(v));
  l.element_density = std::move(values);
  l.density_sup = sup;
  l.ball = LoadBall::Lp;
  return l;
}

LoadSpec LoadSpec::negated() const {
  LoadSpec l = *this;
  if (density) {
    auto f = density;
    l.density = [f](double x, double y) { return -f(x, y); };
  }
  for (double& v : l.element_density) v = -v;
  for (auto& pm : l.point_masses) pm.weight = -pm.weight;
  return l;
}

double LoadSpec::norm(const Mesh& mesh) const {
  const GaussRule& g = gauss4();
  const double jac = mesh.hx() * mesh.hy();
  auto integrate_abs_pow = [&](double p) {
    double total = 0.0;
    for (int i = 0; i < mesh.nx(); ++i) {
      for (int j = 0; j < mesh.ny(); ++j) {
        const int e = mesh.element(i, j);
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            const double x = (i + g.t[a]) * mesh.hx();
            const double y = mesh.y(j) + g.t[b] * mesh.hy();
            total += g.w[a] * g.w[b] * jac * std::pow(std::abs(density_at(e, x, y)), p);
          }
        }
      }
    }
    return total;
  };

  if (ball == LoadBall::DualOfContinuous) {
    double tv = 0.0;
    for (const auto& pm : point_masses) tv += std::abs(pm.weight);
    if (has_density()) tv += integrate_abs_pow(1.0);
    return tv;
  }
  if (!point_masses.empty()) return std::numeric_limits<double>::infinity();
  if (!has_density()) return 0.0;
  if (std::isinf(p_exponent)) {
    if (!std::isnan(density_sup)) return density_sup;
    double sup = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const Point c = mesh.element_center(e);
      sup = std::max(sup, std::abs(density_at(e, c.x, c.y)));
    }
    return sup;
  }
  return std::pow(integrate_abs_pow(p_exponent), 1.0 / p_exponent);
}

SplitMatrix assemble_bilinear_split(const Mesh& mesh, const MaterialParams& params,
                                    const std::vector<double>* element_weights) {
  params.validate();
  if (element_weights && static_cast<int>(element_weights->size()) != mesh.num_elements()) {
    throw ValidationError("element weight count does not match the mesh");
  }
  const WideElementMatrix Ke = element_stiffness(mesh, params.sigma);
  std::vector<Eigen::Triplet<Wide>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_elements()) * kElementDofs * kElementDofs);
  for (int i = 0; i < mesh.nx(); ++i) {
    for (int j = 0; j < mesh.ny(); ++j) {
      const Wide w = element_weights ? (*element_weights)[mesh.element(i, j)] : 1.0;
      const auto d = element_dofs(mesh, i, j);
      // zero-weight elements still contribute explicit zeros so every
      // operator on a mesh shares one sparsity pattern
      for (int a = 0; a < kElementDofs; ++a) {
        for (int b = 0; b < kElementDofs; ++b) triplets.emplace_back(d[a], d[b], w * Ke(a, b));
      }
    }
  }
  Eigen::SparseMatrix<Wide> K(mesh.num_dofs(), mesh.num_dofs());
  K.setFromTriplets(triplets.begin(), triplets.end());
  K.makeCompressed();
  SplitMatrix out;
  out.hi = K.cast<double>();
  out.lo = out.hi;
  const Wide* wide = K.valuePtr();
  double* lo = out.lo.valuePtr();
  for (Eigen::Index k = 0; k < K.nonZeros(); ++k) lo[k] = static_cast<double>(wide[k] - static_cast<double>(wide[k]));
  return out;
}

SparseMatrix assemble_bilinear(const Mesh& mesh, const MaterialParams& params,
                               const std::vector<double>* element_weights) {
  return assemble_bilinear_split(mesh, params, element_weights).hi;
}

SparseMatrix assemble_bilinear(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& region,
                               bool complement) {
  if (static_cast<int>(region.in_D.size()) != mesh.num_elements()) {
    throw ValidationError("region mask size does not match the mesh");
  }
  std::vector<double> w(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) w[e] = (region.in_D[e] != 0) != complement ? 1.0 : 0.0;
  return assemble_bilinear(mesh, params, &w);
}

SplitMatrix assemble_reinforced_split(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& mask) {
  if (static_cast<int>(mask.in_D.size()) != mesh.num_elements()) {
    throw ValidationError("reinforcement mask size does not match the mesh");
  }
  std::vector<double> w(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) w[e] = mask.weight(e);
  return assemble_bilinear_split(mesh, params, &w);
}

SparseMatrix assemble_reinforced(const Mesh& mesh, const MaterialParams& params, const ReinforcementMask& mask) {
  return assemble_reinforced_split(mesh, params, mask).hi;
}

Vector assemble_load(const Mesh& mesh, const LoadSpec& load, const ReinforcementMask* weight) {
  if (weight && static_cast<int>(weight->in_D.size()) != mesh.num_elements()) {
    throw ValidationError("load weight mask size does not match the mesh");
  }
  Vector b = Vector::Zero(mesh.num_dofs());
  if (!load.element_density.empty() && static_cast<int>(load.element_density.size()) != mesh.num_elements()) {
    throw ValidationError("element density count does not match the mesh");
  }
  if (load.has_density()) {
    const GaussRule& g = gauss4();
    const double jac = mesh.hx() * mesh.hy();
    for (int i = 0; i < mesh.nx(); ++i) {
      for (int j = 0; j < mesh.ny(); ++j) {
        const int e = mesh.element(i, j);
        const double w = weight ? weight->weight(e) : 1.0;
        ElementVector fe = ElementVector::Zero();
        for (int a = 0; a < 4; ++a) {
          for (int c = 0; c < 4; ++c) {
            const double x = (i + g.t[a]) * mesh.hx();
            const double y = mesh.y(j) + g.t[c] * mesh.hy();
            const double f = load.density_at(e, x, y);
            if (!std::isfinite(f)) throw ValidationError("load density is not finite");
            fe += (g.w[a] * g.w[c] * jac * w * f) * basis(g.t[a], g.t[c], mesh.hx(), mesh.hy()).n;
          }
        }
        const auto d = element_dofs(mesh, i, j);
        for (int L = 0; L < kElementDofs; ++L) b[d[L]] += fe[L];
      }
    }
  }
  for (const auto& pm : load.point_masses) {
    const auto [i, j] = mesh.locate(pm.location);
    const double t = std::clamp((pm.location.x - i * mesh.hx()) / mesh.hx(), 0.0, 1.0);
    const double s = std::clamp((pm.location.y - mesh.y(j)) / mesh.hy(), 0.0, 1.0);
    const ElementVector n = basis(t, s, mesh.hx(), mesh.hy()).n;
    const auto d = element_dofs(mesh, i, j);
    for (int L = 0; L < kElementDofs; ++L) b[d[L]] += pm.weight * n[L];
  }
  for (int d : mesh.essential_dofs()) b[d] = 0.0;
  return b;
}

DofField mirror_y(const DofField& field) {
  const Mesh& mesh = field.mesh;
  DofField out(mesh);
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const int m = mesh.mirror_y_node(n);
    out.dofs[mesh.dof(n, kValue)] = field.dofs[mesh.dof(m, kValue)];
    out.dofs[mesh.dof(n, kDx)] = field.dofs[mesh.dof(m, kDx)];
    out.dofs[mesh.dof(n, kDy)] = -field.dofs[mesh.dof(m, kDy)];
    out.dofs[mesh.dof(n, kDxy)] = -field.dofs[mesh.dof(m, kDxy)];
  }
  return out;
}

DofField mirror_x(const DofField& field) {
  const Mesh& mesh = field.mesh;
  DofField out(mesh);
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const int m = mesh.mirror_x_node(n);
    out.dofs[mesh.dof(n, kValue)] = field.dofs[mesh.dof(m, kValue)];
    out.dofs[mesh.dof(n, kDx)] = -field.dofs[mesh.dof(m, kDx)];
    out.dofs[mesh.dof(n, kDy)] = field.dofs[mesh.dof(m, kDy)];
    out.dofs[mesh.dof(n, kDxy)] = -field.dofs[mesh.dof(m, kDxy)];
  }
  return out;
}

SymmetryParts symmetry_decompose(const DofField& field) {
  const DofField reflected = mirror_y(field);
  DofField even(field.mesh, 0.5 * (field.dofs + reflected.dofs));
  DofField odd(field.mesh, field.dofs - even.dofs);
  return {std::move(even), std::move(odd)};
}

double energy_value(const DofField& field, const MaterialParams& params, const LoadSpec& load, EnergyVariant variant,
                    const ReinforcementMask* mask) {
  const Mesh& mesh = field.mesh;
  const Vector& u = field.dofs;
  switch (variant) {
    case EnergyVariant::Base: {
      const SparseMatrix K = assemble_bilinear(mesh, params);
      return 0.5 * u.dot(K * u) - assemble_load(mesh, load).dot(u);
    }
    case EnergyVariant::E1: {
      if (!mask) throw ValidationError("E1 energy requires a reinforcement mask");
      const SparseMatrix K = assemble_reinforced(mesh, params, *mask);
      return 0.5 * u.dot(K * u) - assemble_load(mesh, load).dot(u);
    }
    case EnergyVariant::E2: {
      if (!mask) throw ValidationError("E2 energy requires a reinforcement mask");
      if (!load.point_masses.empty()) {
        throw UnsupportedError("E2 is defined only for integrable loads; point masses are not allowed");
      }
      const SparseMatrix K = assemble_bilinear(mesh, params);
      return 0.5 * u.dot(K * u) - assemble_load(mesh, load, mask).dot(u);
    }
  }
  return 0.0;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_field_csv(std::ostream& out, const DofField& field) {
  const Mesh& mesh = field.mesh;
  out << "x,y,u,ux,uy,uxy\n";
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const Point p = mesh.node_point(n);
    out << format_number(p.x) << ',' << format_number(p.y);
    for (int k = 0; k < 4; ++k) out << ',' << format_number(field.dofs[mesh.dof(n, k)]);
    out << '\n';
  }
}

}  // namespace plateobs
