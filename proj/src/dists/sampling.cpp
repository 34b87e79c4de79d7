#include "homoenc/dists/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace homoenc::dists {

double standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

std::vector<double> standard_normals(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& x : out) x = standard_normal(rng);
  return out;
}

double sample_gamma(Rng& rng, double alpha, double beta) {
  if (alpha < 1.0) {
    const double u = uniform01(rng);
    return sample_gamma(rng, alpha + 1.0, beta) * std::pow(1.0 - u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / beta;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / beta;
  }
}

double sample_von_mises(Rng& rng, double mu, double kappa) {
  constexpr double pi = std::numbers::pi;
  if (kappa < 1e-8) return wrap_angle(pi * (2.0 * uniform01(rng) - 1.0));
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double u1 = uniform01(rng);
    const double u2 = 1.0 - uniform01(rng);
    const double z = std::cos(pi * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double u3 = uniform01(rng);
      const double theta = (u3 < 0.5 ? -1.0 : 1.0) * std::acos(std::clamp(f, -1.0, 1.0));
      return wrap_angle(mu + theta);
    }
  }
}

double family_sample(const FamilyParams<double>& params, Rng& rng) {
  return std::visit(
      [&rng](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Gaussian<double>>) {
          return p.mu + p.sigma * standard_normal(rng);
        } else if constexpr (std::is_same_v<P, Mixture2<double>>) {
          const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
          return p.center + side * p.half_sep + p.sigma * standard_normal(rng);
        } else if constexpr (std::is_same_v<P, VonMises<double>>) {
          return sample_von_mises(rng, p.mu, p.kappa);
        } else if constexpr (std::is_same_v<P, GammaShape<double>>) {
          return sample_gamma(rng, p.alpha, p.beta);
        } else {
          const double u = uniform01(rng);
          double cdf = 0.0;
          int last = 1;
          for (int k = 0; k < kDiscreteSymbols; ++k) {
            if (p.probs[k] <= 0.0) continue;
            last = k + 1;
            cdf += p.probs[k];
            if (u < cdf) return static_cast<double>(k + 1);
          }
          return static_cast<double>(last);
        }
      },
      params);
}

}  // namespace homoenc::dists
