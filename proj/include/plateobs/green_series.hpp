#pragma once

// Closed-form Fourier objects of the partially hinged plate (0,pi) x (-l,l):
// the y-coefficients phi_m, the Green function G_p, the antisymmetric
// delta response v, the uniform-load profile z, the gap threshold M and the
// analytic bounds that accompany them.

#include <cmath>
#include <vector>

namespace plateobs {

inline constexpr double kPi = 3.14159265358979323846;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Poisson ratio and half width of the plate (0,pi) x (-half_width, half_width).
struct MaterialParams {
  double sigma = 0.2;
  double half_width = kPi / 150.0;

  /// Throws DomainError unless 0 < sigma < 1 and 0 < 2*half_width < pi.
  void validate() const;
  double area() const { return 2.0 * kPi * half_width; }
};

/// Truncation order of every series evaluation together with an a-priori
/// sup-norm bound on the discarded tail. Immutable after construction.
class SeriesState {
 public:
  static constexpr int kDefaultOrder = 200;

  explicit SeriesState(MaterialParams params, int m_max = kDefaultOrder);

  const MaterialParams& params() const { return params_; }
  int m_max() const { return m_max_; }
  double tail_bound() const { return tail_bound_; }

 private:
  MaterialParams params_;
  int m_max_;
  double tail_bound_;
};

/// T_{xi,eta} = (delta_(xi,eta) - delta_(xi,-eta)) / 2.
struct AntisymDelta {
  double xi = kPi / 2.0;
  double eta = 0.0;
};

/// Omega~ = ([0,z0] u [pi-z0,pi] u {pi/2}) x [-l,l]  u  [0,pi] x [-w0,w0].
struct ScanWindow {
  double z0 = kPi / 6.0;
  double w0 = 0.0;

  static ScanWindow defaults(const MaterialParams& params) { return {kPi / 6.0, 0.5 * params.half_width}; }
  void validate(const MaterialParams& params) const;
  /// Membership test with an absolute slack `tol` on every boundary.
  bool contains(double xi, double eta, double tol = 1e-12) const;
};

struct AuxPair {
  double F = 0.0;
  double Fbar = 0.0;
};

struct BoundaryKernels {
  double zeta = 0.0;
  double theta = 0.0;
  double psi = 0.0;
  double omega = 0.0;
};

AuxPair aux_pair(double z, const MaterialParams& params);
BoundaryKernels boundary_kernels(double r, double z, const MaterialParams& params);

/// phi_m(y, eta), evaluated in exponentially scaled form so that m*l can be
/// arbitrarily large without overflow.
double phi_m(double y, double eta, int m, const MaterialParams& params);

/// G_p(q) for p = (xi, eta), partial sum up to state.m_max().
double green_value(Point p, Point q, const SeriesState& state);

/// v_{xi,eta}(q), the plate response to T_{xi,eta} without obstacles.
double antisym_solution(const AntisymDelta& load, Point q, const SeriesState& state);

/// z(q) = integral over the plate of G_p(q) dp, the response to f == 1.
double uniform_load_profile(Point q, const SeriesState& state);
/// Sup-norm bound for the tail of uniform_load_profile.
double uniform_load_tail(const SeriesState& state);

/// Response to f(x, y) = sin(k x): only the k-th Fourier mode survives, so the
/// series is exact up to the eta quadrature.
double sine_load_response(int k, Point q, const MaterialParams& params);

/// Integral of phi_m(y, eta) over eta in [eta_lo, eta_hi], split at eta = y.
double phi_m_eta_integral(double y, double eta_lo, double eta_hi, int m, const MaterialParams& params);

struct ThresholdValue {
  double value = 0.0;            // partial_sum + tail_correction
  double partial_sum = 0.0;      // odd m <= m_max
  double tail_correction = 0.0;  // asymptotic 1/m^3 remainder, summed analytically
  double tail_bound = 0.0;       // bound on |M - value|
  int m_max = 0;
};

/// The gap threshold M(sigma, l) for obstacles on the long edges.
ThresholdValue gap_threshold_M(const MaterialParams& params, int m_max = SeriesState::kDefaultOrder);

/// C(sigma, l) with M <= C.
double analytic_bound_C(const MaterialParams& params);

/// Constants A(l, sigma), B(l, sigma) bounding |zeta|, |theta| and |psi|, |omega| at z = l.
double coefficient_bound_A(const MaterialParams& params);
double coefficient_bound_B(const MaterialParams& params);
/// Leading constant of the envelope g.
double envelope_constant(const MaterialParams& params);
/// g(eta) >= phi_1(y, eta) for all y.
double envelope_g(double eta, const MaterialParams& params);

/// Sup-norm bound on the discarded tail of the Green series (and of v).
double tail_estimate(int m_max, const MaterialParams& params);

/// Obstacles sampled at arbitrary sites of the closed plate.
struct ObstacleSpec {
  std::vector<Point> sites;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// min over sites of min(|psi_-|, psi_+) - z. Positive return certifies
/// empty contact sets for every load with |f| <= 1 (at sample resolution).
double empty_contact_margin(const ObstacleSpec& obstacles, const SeriesState& state);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace plateobs
