#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "doctest.h"
#include "plateobs/errors.hpp"
#include "plateobs/plate_fem.hpp"

using namespace plateobs;

namespace {

const MaterialParams kWide{0.2, 0.1};

DofField random_field(const Mesh& mesh, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  DofField f(mesh);
  for (int i = 0; i < mesh.num_dofs(); ++i) f.dofs[i] = dist(gen);
  for (int d : mesh.essential_dofs()) f.dofs[d] = 0.0;
  return f;
}

// Energy integrand from pointwise second derivatives, 5x5 Gauss per element.
double quadratic_energy_by_sampling(const DofField& u, double sigma) {
  const double g[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
  const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                       0.2369268850561891};
  const Mesh& m = u.mesh;
  double total = 0.0;
  for (int i = 0; i < m.nx(); ++i) {
    for (int j = 0; j < m.ny(); ++j) {
      for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
          const Point q{m.x(i) + 0.5 * m.hx() * (1 + g[a]), m.y(j) + 0.5 * m.hy() * (1 + g[b])};
          const FieldDerivatives d = evaluate_derivatives(u, q);
          const double lap = d.uxx + d.uyy;
          const double f = lap * lap + (1 - sigma) * (2 * d.uxy * d.uxy - 2 * d.uxx * d.uyy);
          total += 0.25 * m.hx() * m.hy() * w[a] * w[b] * f;
        }
      }
    }
  }
  return 0.5 * total;
}

SparseMatrix reduce(const SparseMatrix& K, const Mesh& mesh) {
  std::vector<int> keep;
  const auto ess = mesh.essential_dofs();
  for (int i = 0; i < mesh.num_dofs(); ++i) {
    if (!std::binary_search(ess.begin(), ess.end(), i)) keep.push_back(i);
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd(K);
  Eigen::MatrixXd r(keep.size(), keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (std::size_t b = 0; b < keep.size(); ++b) r(a, b) = dense(keep[a], keep[b]);
  }
  return r.sparseView();
}

}  // namespace

TEST_CASE("mesh layout") {
  const Mesh m(8, 4, 0.1);
  CHECK(m.num_nodes() == 45);
  CHECK(m.num_dofs() == 180);
  CHECK(m.x(8) == kPi);
  CHECK(m.y(0) == -0.1);
  CHECK(m.y(4) == 0.1);
  CHECK(m.essential_dofs().size() == 2u * 2u * 5u);
  CHECK(m.long_edge_nodes().size() == 18u);
  for (int n = 0; n < m.num_nodes(); ++n) {
    const Point p = m.node_point(n), py = m.node_point(m.mirror_y_node(n)), px = m.node_point(m.mirror_x_node(n));
    CHECK(py.y == doctest::Approx(-p.y).scale(1e-16));
    CHECK(px.x == doctest::Approx(kPi - p.x));
  }
  CHECK_THROWS_AS(Mesh(3, 4, 0.1), ValidationError);
  CHECK_THROWS_AS(Mesh(8, 1, 0.1), ValidationError);
  CHECK_THROWS_AS(Mesh(8, 2, 2.0), DomainError);
  CHECK_THROWS_AS(m.locate({3.2, 0.0}), DomainError);
  CHECK_THROWS_AS(m.locate({1.0, 0.11}), DomainError);
  CHECK(m.locate({kPi, 0.1}) == std::array<int, 2>{7, 3});
}

TEST_CASE("stiffness matrix") {
  const Mesh mesh(8, 4, 0.1);
  const SparseMatrix K = assemble_bilinear(mesh, kWide);
  CHECK((K - SparseMatrix(K.transpose())).norm() <= 1e-12 * K.norm());

  Eigen::SimplicialLDLT<SparseMatrix> ldlt(reduce(K, mesh));
  REQUIRE(ldlt.info() == Eigen::Success);
  CHECK(ldlt.vectorD().minCoeff() > 0.0);

  ReinforcementMask D = ReinforcementMask::empty(mesh, 0.5, 2.0);
  for (int e = 0; e < mesh.num_elements(); e += 3) D.in_D[e] = 1;
  const SparseMatrix KD = assemble_bilinear(mesh, kWide, D, false);
  const SparseMatrix KDc = assemble_bilinear(mesh, kWide, D, true);
  CHECK((KD + KDc - K).norm() <= 1e-14 * K.norm());

  const SparseMatrix KR = assemble_reinforced(mesh, kWide, D);
  CHECK((KR - (0.5 * K + 1.5 * KD)).norm() <= 1e-13 * K.norm());

  // hi is the rounded value, lo the remainder below half an ulp
  const SplitMatrix split = assemble_bilinear_split(mesh, kWide);
  CHECK((split.hi - K).norm() == 0.0);
  REQUIRE(split.lo.nonZeros() == split.hi.nonZeros());
  bool any = false;
  for (Eigen::Index k = 0; k < split.hi.nonZeros(); ++k) {
    const double h = split.hi.valuePtr()[k], l = split.lo.valuePtr()[k];
    CHECK(std::abs(l) <= 0.5 * std::abs(h) * std::numeric_limits<double>::epsilon());
    any = any || l != 0.0;
  }
  CHECK(any);
}

TEST_CASE("energy of sin(x)") {
  // integrand reduces to sin^2 x, so the quadratic part is pi*l/2
  for (int n : {16, 32, 64}) {
    const Mesh mesh(n, 4, 0.1);
    const DofField u = interpolate(mesh, [](double x, double) {
      return std::array<double, 4>{std::sin(x), std::cos(x), 0.0, 0.0};
    });
    const double e = energy_value(u, kWide, LoadSpec::none(), EnergyVariant::Base);
    CHECK(std::abs(e - kPi * 0.1 / 2.0) < 2.0 * std::pow(kPi / n, 2));
    if (n == 64) CHECK(std::abs(e - kPi * 0.1 / 2.0) < 1e-4);
  }
}

TEST_CASE("quadratic form equals sampled integrand") {
  const Mesh mesh(6, 4, 0.1);
  const SparseMatrix K = assemble_bilinear(mesh, kWide);
  for (unsigned seed : {1u, 2u, 3u}) {
    const DofField u = random_field(mesh, seed);
    const double ref = quadratic_energy_by_sampling(u, kWide.sigma);
    CHECK(0.5 * u.dofs.dot(K * u.dofs) == doctest::Approx(ref).epsilon(1e-11));
  }
}

TEST_CASE("load functional") {
  const Mesh mesh(8, 4, 0.1);
  CHECK(assemble_load(mesh, LoadSpec::none()).norm() == 0.0);

  const DofField u = random_field(mesh, 7);
  const int node = mesh.node(3, 1);
  const Vector b = assemble_load(mesh, LoadSpec::point(mesh.node_point(node)));
  CHECK(b.dot(u.dofs) == doctest::Approx(u.value(node)).epsilon(1e-14));

  const Point q{1.234, 0.0371};
  CHECK(assemble_load(mesh, LoadSpec::point(q, 2.5)).dot(u.dofs) ==
        doctest::Approx(2.5 * point_eval(u, q)).epsilon(1e-13));

  const Vector t = assemble_load(mesh, LoadSpec::antisym_delta({1.1, 0.06}));
  CHECK(t.dot(mirror_y(u).dofs) == doctest::Approx(-t.dot(u.dofs)).epsilon(1e-13));

  // uniform density: functional applied to the interpolant of 1 - cos(2x)
  const DofField w = interpolate(mesh, [](double x, double) {
    return std::array<double, 4>{1.0 - std::cos(2 * x), 2 * std::sin(2 * x), 0.0, 0.0};
  });
  CHECK(assemble_load(mesh, LoadSpec::uniform(1.0)).dot(w.dofs) == doctest::Approx(kPi * 0.2).epsilon(1e-4));

  ReinforcementMask ones = ReinforcementMask::empty(mesh, 0.5, 3.0);
  ReinforcementMask all = ones;
  std::fill(all.in_D.begin(), all.in_D.end(), 1);
  const Vector bu = assemble_load(mesh, LoadSpec::uniform(1.0));
  CHECK((assemble_load(mesh, LoadSpec::uniform(1.0), &ones) - 0.5 * bu).norm() < 1e-14);
  CHECK((assemble_load(mesh, LoadSpec::uniform(1.0), &all) - 3.0 * bu).norm() < 1e-13);

  CHECK_THROWS_AS(assemble_load(mesh, LoadSpec::point({-0.1, 0.0})), DomainError);
  CHECK_THROWS_AS(assemble_load(mesh, LoadSpec::piecewise_constant({1.0, 2.0})), ValidationError);
}

TEST_CASE("load norms") {
  const Mesh mesh(8, 4, 0.1);
  LoadSpec pm = LoadSpec::point({1.0, 0.0}, -0.75);
  pm.point_masses.push_back({{2.0, 0.05}, 0.25});
  CHECK(pm.norm(mesh) == doctest::Approx(1.0));
  CHECK(LoadSpec::antisym_delta({1.0, 0.05}).norm(mesh) == doctest::Approx(1.0));
  CHECK(LoadSpec::uniform(-1.0).norm(mesh) == 1.0);
  LoadSpec l2 = LoadSpec::uniform(1.0);
  l2.p_exponent = 2.0;
  CHECK(l2.norm(mesh) == doctest::Approx(std::sqrt(2 * kPi * 0.1)).epsilon(1e-12));
  std::vector<double> bang(mesh.num_elements(), 1.0);
  bang[3] = -1.0;
  CHECK(LoadSpec::piecewise_constant(bang).norm(mesh) == 1.0);
}

TEST_CASE("point evaluation") {
  const Mesh mesh(8, 4, 0.1);
  const DofField u = random_field(mesh, 11);
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    CHECK(point_eval(u, mesh.node_point(n)) == doctest::Approx(u.value(n)).epsilon(1e-14).scale(1e-14));
  }
  for (double y : {-0.1, -0.02, 0.1}) {
    CHECK(point_eval(u, {0.0, y}) == 0.0);
    CHECK(std::abs(point_eval(u, {kPi, y})) < 1e-15);
  }
  // continuity of value and gradient across an interior element edge
  const double xe = mesh.x(3);
  const FieldDerivatives l = evaluate_derivatives(u, {xe - 1e-12, 0.013});
  const FieldDerivatives r = evaluate_derivatives(u, {xe + 1e-12, 0.013});
  CHECK(l.u == doctest::Approx(r.u).epsilon(1e-9));
  CHECK(l.ux == doctest::Approx(r.ux).epsilon(1e-9));
  CHECK(l.uy == doctest::Approx(r.uy).epsilon(1e-9));

  // interpolants of a smooth function converge at fourth order at mid-element points
  auto f = [](double x, double y) {
    return std::array<double, 4>{std::sin(x) * std::exp(y), std::cos(x) * std::exp(y), std::sin(x) * std::exp(y),
                                 std::cos(x) * std::exp(y)};
  };
  const Point q{1.0 + 0.5 * kPi / 16.0, 0.0125};
  const double coarse = std::abs(point_eval(interpolate(Mesh(8, 2, 0.1), f), q) - f(q.x, q.y)[0]);
  const double fine = std::abs(point_eval(interpolate(Mesh(32, 8, 0.1), f), q) - f(q.x, q.y)[0]);
  CHECK(fine < coarse / 64.0);
  CHECK(fine < 1e-6);
}

TEST_CASE("symmetry decomposition") {
  const Mesh mesh(8, 4, 0.1);
  const SparseMatrix K = assemble_bilinear(mesh, kWide);
  const DofField u = random_field(mesh, 5);
  const SymmetryParts parts = symmetry_decompose(u);
  CHECK((parts.even.dofs + parts.odd.dofs - u.dofs).norm() < 1e-14);
  CHECK(std::abs(parts.even.dofs.dot(K * parts.odd.dofs)) < 1e-12 * u.dofs.dot(K * u.dofs));

  const DofField odd = interpolate(mesh, [](double x, double y) {
    return std::array<double, 4>{std::sin(x) * y, std::cos(x) * y, std::sin(x), std::cos(x)};
  });
  CHECK(symmetry_decompose(odd).even.dofs.norm() < 1e-15);
  const DofField even = interpolate(mesh, [](double x, double y) {
    return std::array<double, 4>{std::sin(x) * y * y, std::cos(x) * y * y, 2 * y * std::sin(x), 2 * y * std::cos(x)};
  });
  CHECK(symmetry_decompose(even).odd.dofs.norm() < 1e-15);

  const DofField mx = mirror_x(u);
  for (Point q : {Point{0.4, 0.03}, Point{2.0, -0.07}}) {
    CHECK(point_eval(mx, q) == doctest::Approx(point_eval(u, {kPi - q.x, q.y})).epsilon(1e-12));
    CHECK(point_eval(mirror_y(u), q) == doctest::Approx(point_eval(u, {q.x, -q.y})).epsilon(1e-12));
  }
}

TEST_CASE("energy variants") {
  const Mesh mesh(8, 4, 0.1);
  CHECK(energy_value(DofField(mesh), kWide, LoadSpec::none(), EnergyVariant::Base) == 0.0);

  const DofField u = random_field(mesh, 9);
  const LoadSpec f = LoadSpec::sine(1);
  ReinforcementMask unit = ReinforcementMask::empty(mesh, 1.0, 1.0);
  for (int e = 0; e < mesh.num_elements(); e += 2) unit.in_D[e] = 1;
  const double base = energy_value(u, kWide, f, EnergyVariant::Base);
  CHECK(energy_value(u, kWide, f, EnergyVariant::E1, &unit) == doctest::Approx(base).epsilon(1e-13));
  CHECK(energy_value(u, kWide, f, EnergyVariant::E2, &unit) == doctest::Approx(base).epsilon(1e-13));

  CHECK_THROWS_AS(energy_value(u, kWide, LoadSpec::point({1.0, 0.0}), EnergyVariant::E2, &unit), UnsupportedError);
  CHECK_THROWS_AS(energy_value(u, kWide, f, EnergyVariant::E1), ValidationError);
}

TEST_CASE("reinforcement mask validation") {
  const Mesh mesh(8, 4, 0.1);
  ReinforcementMask m = ReinforcementMask::empty(mesh, 0.5, 1.5);
  // target area is half the plate: 16 of 32 elements
  for (int e = 0; e < 16; ++e) m.in_D[e] = 1;
  CHECK_NOTHROW(m.validate(mesh));
  m.in_D[16] = 1;
  CHECK_NOTHROW(m.validate(mesh));
  m.in_D[17] = 1;
  CHECK_THROWS_AS(m.validate(mesh), ValidationError);
  m.alpha = 1.0;
  CHECK_THROWS_AS(m.validate(mesh), ValidationError);
}

TEST_CASE("field csv") {
  const Mesh mesh(4, 2, 0.1);
  std::ostringstream out;
  write_field_csv(out, DofField(mesh));
  const std::string s = out.str();
  CHECK(s.rfind("x,y,u,ux,uy,uxy\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + mesh.num_nodes());
  CHECK(format_number(0.1) == "0.10000000000000001");
}
