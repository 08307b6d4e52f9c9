#include "plateobs/green_series.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "plateobs/errors.hpp"

namespace plateobs {

namespace {

using Gauss32 = boost::math::quadrature::gauss<double, 32>;

void require_positive_z(double z) {
  if (!(z > 0.0)) throw DomainError("auxiliary functions require z > 0, got " + std::to_string(z));
}

void require_in_strip(double v, double l, const char* what) {
  if (!(std::abs(v) <= l * (1.0 + 1e-12))) {
    throw DomainError(std::string(what) + " = " + std::to_string(v) + " outside [-l, l]");
  }
}

// cosh/sinh products scaled by exp(-2z), stable for |a|, |b| <= z. Each factor
// is exactly even or odd in its argument.
struct ScaledProducts {
  double cc, cs, sc, ss;  // first factor in a (eta), second in b (y)
};

ScaledProducts scaled_products(double a, double b, double z) {
  const double ap = std::exp(a - z), am = std::exp(-a - z);
  const double bp = std::exp(b - z), bm = std::exp(-b - z);
  const double ca = 0.5 * (ap + am), sa = 0.5 * (ap - am);
  const double cb = 0.5 * (bp + bm), sb = 0.5 * (bp - bm);
  return {ca * cb, ca * sb, sa * cb, sa * sb};
}

}  // namespace

void MaterialParams::validate() const {
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw DomainError("sigma outside (0,1): " + std::to_string(sigma));
  }
  if (!(half_width > 0.0 && 2.0 * half_width < kPi)) {
    throw DomainError("half_width must satisfy 0 < 2l < pi: " + std::to_string(half_width));
  }
}

SeriesState::SeriesState(MaterialParams params, int m_max) : params_(params), m_max_(m_max) {
  params_.validate();
  if (m_max_ < 1) throw DomainError("series truncation order must be >= 1");
  tail_bound_ = tail_estimate(m_max_, params_);
}

void ScanWindow::validate(const MaterialParams& params) const {
  if (!(z0 > 0.0 && z0 < kPi / 2.0)) throw ValidationError("scan window requires 0 < z0 < pi/2");
  if (!(w0 > 0.0 && w0 < params.half_width)) throw ValidationError("scan window requires 0 < w0 < l");
}

bool ScanWindow::contains(double xi, double eta, double tol) const {
  const bool in_columns = xi <= z0 + tol || xi >= kPi - z0 - tol || std::abs(xi - kPi / 2.0) <= tol;
  return in_columns || std::abs(eta) <= w0 + tol;
}

AuxPair aux_pair(double z, const MaterialParams& params) {
  require_positive_z(z);
  const double s = params.sigma;
  const double main = 0.5 * (3.0 + s) * std::sinh(2.0 * z);
  return {main - z * (1.0 - s), main + z * (1.0 - s)};
}

BoundaryKernels boundary_kernels(double r, double z, const MaterialParams& params) {
  require_positive_z(z);
  const double s = params.sigma;
  const double chr = std::cosh(r), shr = std::sinh(r), chz = std::cosh(z), shz = std::sinh(z);
  const double a1 = 4.0 / (1.0 - s) - z * (1.0 + s);
  const double a2 = (1.0 + s) * (1.0 + s) / (1.0 - s) + 2.0 * z;
  const double b1 = 2.0 + (1.0 - s) * z;
  const double b2 = -(1.0 + s) + z * (1.0 - s);
  BoundaryKernels k;
  k.zeta = a1 * chr * chz + a2 * chr * shz - 2.0 * r * shr * chz + r * (1.0 + s) * shr * shz;
  k.theta = r * (1.0 + s) * chr * chz - 2.0 * r * chr * shz + a2 * shr * chz + a1 * shr * shz;
  k.psi = b1 * chr * chz + b2 * chr * shz - r * (1.0 - s) * shr * chz - r * (1.0 - s) * shr * shz;
  k.omega = -r * (1.0 - s) * chr * chz - r * (1.0 - s) * chr * shz + b2 * shr * chz + b1 * shr * shz;
  return k;
}

double phi_m(double y, double eta, int m, const MaterialParams& params) {
  const double l = params.half_width;
  require_in_strip(y, l, "y");
  require_in_strip(eta, l, "eta");
  if (m < 1) throw DomainError("phi_m requires m >= 1");

  const double s = params.sigma;
  const double z = m * l;
  const double r = m * y;
  const double e = m * eta;

  // Kernels written as P(r,z) cosh(r) + Q(r,z) sinh(r), with cosh(z), sinh(z)
  // replaced by C = cosh(z) e^-z and S = sinh(z) e^-z. F and Fbar are scaled by e^-2z.
  const double e2 = std::exp(-2.0 * z);
  const double C = 0.5 * (1.0 + e2);
  const double S = 0.5 * (1.0 - e2);
  const double a1 = 4.0 / (1.0 - s) - z * (1.0 + s);
  const double a2 = (1.0 + s) * (1.0 + s) / (1.0 - s) + 2.0 * z;
  const double b1 = 2.0 + (1.0 - s) * z;
  const double b2 = -(1.0 + s) + z * (1.0 - s);

  const double zeta_p = a1 * C + a2 * S;
  const double zeta_q = -2.0 * r * C + r * (1.0 + s) * S;
  const double theta_p = r * (1.0 + s) * C - 2.0 * r * S;
  const double theta_q = a2 * C + a1 * S;
  const double psi_p = b1 * C + b2 * S;
  const double psi_q = -r * (1.0 - s);  // C + S == 1
  const double omega_p = -r * (1.0 - s);
  const double omega_q = b2 * C + b1 * S;

  const double sh2 = 0.5 * (1.0 - e2 * e2);  // sinh(2z) e^-2z
  const double F = 0.5 * (3.0 + s) * sh2 - z * (1.0 - s) * e2;
  const double Fbar = 0.5 * (3.0 + s) * sh2 + z * (1.0 - s) * e2;

  const double cosh_p = (zeta_p + z * psi_p) / F - e * omega_p / Fbar;
  const double cosh_q = (zeta_q + z * psi_q) / F - e * omega_q / Fbar;
  const double sinh_p = (theta_p + z * omega_p) / Fbar - e * psi_p / F;
  const double sinh_q = (theta_q + z * omega_q) / Fbar - e * psi_q / F;

  const ScaledProducts sp = scaled_products(e, r, z);
  const double boundary = cosh_p * sp.cc + cosh_q * sp.cs + sinh_p * sp.sc + sinh_q * sp.ss;

  const double d = m * std::abs(y - eta);
  return boundary + (1.0 + d) * std::exp(-d);
}

double green_value(Point p, Point q, const SeriesState& state) {
  const MaterialParams& params = state.params();
  CompensatedSum sum;
  for (int m = 1; m <= state.m_max(); ++m) {
    const double sx = std::sin(m * p.x) * std::sin(m * q.x);
    if (sx == 0.0) continue;
    const double m3 = static_cast<double>(m) * m * m;
    sum.add(phi_m(q.y, p.y, m, params) / m3 * sx);
  }
  return sum.value() / (2.0 * kPi);
}

double antisym_solution(const AntisymDelta& load, Point q, const SeriesState& state) {
  const MaterialParams& params = state.params();
  if (load.eta == 0.0) return 0.0;
  CompensatedSum sum;
  for (int m = 1; m <= state.m_max(); ++m) {
    const double sx = std::sin(m * load.xi) * std::sin(m * q.x);
    if (sx == 0.0) continue;
    const double m3 = static_cast<double>(m) * m * m;
    const double diff = phi_m(q.y, load.eta, m, params) - phi_m(q.y, -load.eta, m, params);
    sum.add(diff / m3 * sx);
  }
  return sum.value() / (4.0 * kPi);
}

double phi_m_eta_integral(double y, double eta_lo, double eta_hi, int m, const MaterialParams& params) {
  auto integrand = [&](double eta) { return phi_m(y, eta, m, params); };
  // phi_m has a jump in its second eta-derivative at eta = y.
  if (y > eta_lo && y < eta_hi) {
    return Gauss32::integrate(integrand, eta_lo, y) + Gauss32::integrate(integrand, y, eta_hi);
  }
  return Gauss32::integrate(integrand, eta_lo, eta_hi);
}

double uniform_load_profile(Point q, const SeriesState& state) {
  const MaterialParams& params = state.params();
  const double l = params.half_width;
  CompensatedSum sum;
  // integral of sin(m xi) over (0, pi) is 2/m for odd m and 0 for even m.
  for (int m = 1; m <= state.m_max(); m += 2) {
    const double sx = std::sin(m * q.x);
    if (sx == 0.0) continue;
    const double m4 = static_cast<double>(m) * m * m * m;
    sum.add(2.0 * phi_m_eta_integral(q.y, -l, l, m, params) / m4 * sx);
  }
  return sum.value() / (2.0 * kPi);
}

double uniform_load_tail(const SeriesState& state) {
  const MaterialParams& params = state.params();
  const double n = state.m_max();
  // terms <= (1/pi) * 2l g(l) / m^4, and sum_{m>n} m^-4 <= 1/(3 n^3)
  return 2.0 * params.half_width * envelope_g(params.half_width, params) / (3.0 * kPi * n * n * n);
}

double sine_load_response(int k, Point q, const MaterialParams& params) {
  if (k < 1) throw DomainError("sine load mode must be >= 1");
  const double l = params.half_width;
  const double k3 = static_cast<double>(k) * k * k;
  return std::sin(k * q.x) * phi_m_eta_integral(q.y, -l, l, k, params) / (4.0 * k3);
}

namespace {

// sum over odd m > n of m^-3, Euler-Maclaurin with three correction terms.
double odd_cubic_tail(int n) {
  int k = (n + 1) / 2;  // first odd m > n is 2k + 1
  auto f = [](double t) { return 1.0 / std::pow(2.0 * t + 1.0, 3); };
  const double u = 2.0 * k + 1.0;
  const double integral = 1.0 / (4.0 * u * u);
  const double d1 = -6.0 / std::pow(u, 4);
  const double d3 = -480.0 / std::pow(u, 6);
  return integral + 0.5 * f(k) - d1 / 12.0 + d3 / 720.0;
}

}  // namespace

ThresholdValue gap_threshold_M(const MaterialParams& params, int m_max) {
  params.validate();
  if (m_max < 1) throw DomainError("gap_threshold_M requires m_max >= 1");
  const double s = params.sigma;
  const double l = params.half_width;
  const double pref = 4.0 / (kPi * (1.0 - s));

  // ratio(z) = sinh(z)^2 / [(3+s) sinh(2z) + 2 z (1-s)], scaled by e^-2z
  auto ratio = [&](double z) {
    const double e2 = std::exp(-2.0 * z);
    const double S = 0.5 * (1.0 - e2);
    return S * S / (0.5 * (3.0 + s) * (1.0 - e2 * e2) + 2.0 * z * (1.0 - s) * e2);
  };
  const double ratio_inf = 1.0 / (2.0 * (3.0 + s));

  CompensatedSum sum;
  for (int m = 1; m <= m_max; m += 2) {
    const double m3 = static_cast<double>(m) * m * m;
    sum.add(pref * ratio(m * l) / m3);
  }

  ThresholdValue out;
  out.m_max = m_max;
  out.partial_sum = sum.value();
  const double tail_sum = odd_cubic_tail(m_max);
  out.tail_correction = pref * ratio_inf * tail_sum;
  out.value = out.partial_sum + out.tail_correction;

  // |ratio(z) - ratio_inf| <= e^-2z [(3+s) + 2z(1-s)] / ((3+s)^2 (1 - e^-4z)), decreasing in z.
  const int first = (m_max % 2 == 0) ? m_max + 1 : m_max + 2;
  const double z = first * l;
  const double e2 = std::exp(-2.0 * z);
  const double dev = e2 * ((3.0 + s) + 2.0 * z * (1.0 - s)) / ((3.0 + s) * (3.0 + s) * (1.0 - e2 * e2));
  // Euler-Maclaurin remainder is below the next correction term, bounded by 1e-3 of the tail here.
  out.tail_bound = pref * dev * tail_sum + 1e-3 * out.tail_correction * std::pow(first, -4.0) +
                   4.0 * std::numeric_limits<double>::epsilon() * out.value;
  return out;
}

double analytic_bound_C(const MaterialParams& params) {
  params.validate();
  const double s = params.sigma;
  const double l = params.half_width;
  const double ch = std::cosh(l);
  const double num = kPi * ch * ch *
                     (5.0 + 2.0 * s + s * s + 2.0 * l * (5.0 + 2.0 * s) * (1.0 - s) + 8.0 * l * l * (1.0 - s) * (1.0 - s));
  const double den = 6.0 * (1.0 - s) * ((3.0 + s) * std::sinh(2.0 * l) - l * (1.0 + s));
  return num / den + kPi / 12.0;
}

double coefficient_bound_A(const MaterialParams& params) {
  const double s = params.sigma;
  const double l = params.half_width;
  const double ch = std::cosh(l);
  return ((4.0 + (1.0 + s) * (1.0 + s)) / (1.0 - s) + 2.0 * l * (3.0 + s)) * ch * ch;
}

double coefficient_bound_B(const MaterialParams& params) {
  const double s = params.sigma;
  const double l = params.half_width;
  const double ch = std::cosh(l);
  return (3.0 + s + 4.0 * (1.0 - s) * l) * ch * ch;
}

double envelope_constant(const MaterialParams& params) {
  const double s = params.sigma;
  const double l = params.half_width;
  const double ch = std::cosh(l);
  const double F = aux_pair(l, params).F;
  return ch * ch / (std::exp(l) * F) * ((4.0 + (1.0 + s) * (1.0 + s)) / (1.0 - s) + l * (13.0 - s));
}

double envelope_g(double eta, const MaterialParams& params) {
  require_in_strip(eta, params.half_width, "eta");
  const double a = std::abs(eta);
  return envelope_constant(params) * (std::cosh(a) + std::sinh(a)) * (1.0 + a) + 1.0;
}

double tail_estimate(int m_max, const MaterialParams& params) {
  if (m_max < 1) throw DomainError("tail_estimate requires m_max >= 1");
  // phi_m <= phi_1 <= g(l); sum_{m > n} m^-3 <= 1/(2 n^2)
  const double n = m_max;
  return envelope_g(params.half_width, params) / (2.0 * kPi) / (2.0 * n * n);
}

double empty_contact_margin(const ObstacleSpec& obstacles, const SeriesState& state) {
  const std::size_t n = obstacles.sites.size();
  if (obstacles.lower.size() != n || obstacles.upper.size() != n) {
    throw ValidationError("obstacle samples must match the number of sites");
  }
  if (n == 0) throw ValidationError("obstacle specification has no sample sites");
  const double l = state.params().half_width;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const Point q = obstacles.sites[k];
    if (q.x < 0.0 || q.x > kPi || std::abs(q.y) > l * (1.0 + 1e-12)) {
      throw DomainError("obstacle sample site outside the closed plate");
    }
    if (!(obstacles.lower[k] <= 0.0 && 0.0 <= obstacles.upper[k])) {
      throw ValidationError("obstacle samples violate psi_- <= 0 <= psi_+ at site " + std::to_string(k));
    }
    const double reach = std::min(-obstacles.lower[k], obstacles.upper[k]);
    margin = std::min(margin, reach - uniform_load_profile(q, state));
  }
  return margin;
}

}  // namespace plateobs
