#include "homoenc/adiff/special.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "homoenc/errors.hpp"

namespace homoenc::special {

namespace {

constexpr double kSeriesSwitch = 15.0;

constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

void require_positive(double x, const char* fn) {
  if (!(x > 0.0)) throw DomainError(std::string(fn) + ": argument must be > 0");
}

void require_nonnegative(double x, const char* fn) {
  if (!(x >= 0.0)) throw DomainError(std::string(fn) + ": argument must be >= 0");
}

// Power series for I0 and I1. Below the switch point every term stays well
// inside double range.
void bessel_series(double kappa, double& i0, double& i1) {
  const double q = 0.25 * kappa * kappa;
  double t0 = 1.0;            // (k/2)^{2m} / (m!)^2
  double t1 = 0.5 * kappa;    // (k/2)^{2m+1} / (m! (m+1)!)
  i0 = t0;
  i1 = t1;
  for (int m = 1; m < 500; ++m) {
    t0 *= q / (static_cast<double>(m) * m);
    t1 *= q / (static_cast<double>(m) * (m + 1));
    i0 += t0;
    i1 += t1;
    if (t0 < 1e-17 * i0 && t1 < 1e-17 * i1) break;
  }
}

// Asymptotic sums S_nu with I_nu(k) ~ e^k / sqrt(2 pi k) * S_nu(k).
void bessel_asymptotic(double kappa, double& s0, double& s1) {
  double a0 = 1.0;
  double a1 = 1.0;
  s0 = 1.0;
  s1 = 1.0;
  const double inv8k = 1.0 / (8.0 * kappa);
  for (int k = 1; k < 40; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double n0 = a0 * odd * odd * inv8k / k;                // mu = 0
    const double n1 = -a1 * (4.0 - odd * odd) * inv8k / k;       // mu = 4
    if (std::abs(n0) > std::abs(a0) && k > 2) break;             // divergence
    a0 = n0;
    a1 = n1;
    s0 += a0;
    s1 += a1;
    if (std::abs(a0) < 1e-17 * s0 && std::abs(a1) < 1e-17 * std::abs(s1)) break;
  }
}

}  // namespace

double lgamma(double x) {
  require_positive(x, "lgamma");
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - lgamma(1.0 - x);
  }
  const double z = x - 1.0;
  double a = kLanczos[0];
  const double t = z + 7.5;
  for (int i = 1; i < 9; ++i) a += kLanczos[i] / (z + i);
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // Bernoulli terms B_{2k} / (2k x^{2k}).
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 -
                     r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r / 12.0))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < 6.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  const double series =
      1.0 / 6 -
      r * (1.0 / 30 -
           r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730 - r * 7.0 / 6)))));
  return acc + 1.0 / x + 0.5 * r + series * r / x;
}

double log_bessel_i0(double kappa) {
  require_nonnegative(kappa, "log_bessel_i0");
  if (kappa < kSeriesSwitch) {
    double i0, i1;
    bessel_series(kappa, i0, i1);
    return std::log(i0);
  }
  double s0, s1;
  bessel_asymptotic(kappa, s0, s1);
  return kappa - 0.5 * std::log(2.0 * std::numbers::pi * kappa) + std::log(s0);
}

double bessel_ratio(double kappa) {
  require_nonnegative(kappa, "bessel_ratio");
  if (kappa < kSeriesSwitch) {
    double i0, i1;
    bessel_series(kappa, i0, i1);
    return i1 / i0;
  }
  double s0, s1;
  bessel_asymptotic(kappa, s0, s1);
  return s1 / s0;
}

double bessel_ratio_derivative(double kappa) {
  require_nonnegative(kappa, "bessel_ratio_derivative");
  if (kappa == 0.0) return 0.5;
  const double r = bessel_ratio(kappa);
  return 1.0 - r / kappa - r * r;
}

}  // namespace homoenc::special
