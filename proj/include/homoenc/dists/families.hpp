#pragma once

// Observation families of the 1D benchmark, latent Gaussians, and their
// log-densities. Log-densities are templates over the scalar type so the same
// code runs on plain doubles and on tape variables.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "homoenc/adiff/tape.hpp"
#include "homoenc/errors.hpp"

namespace homoenc::dists {

enum class Family { kGaussian, kMixture2, kVonMises, kGamma, kDiscrete };

inline constexpr int kDiscreteSymbols = 8;
inline constexpr double kLogTwoPi = 1.8378770664093454836;

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

template <class T>
struct Gaussian {
  T mu;
  T sigma;
  bool operator==(const Gaussian&) const = default;
};

/// Even mixture of N(center - half_sep, sigma^2) and N(center + half_sep, sigma^2).
template <class T>
struct Mixture2 {
  T center;
  double half_sep;
  double sigma;
  bool operator==(const Mixture2&) const = default;
};

/// Support (-pi, pi].
template <class T>
struct VonMises {
  T mu;
  T kappa;
  bool operator==(const VonMises&) const = default;
};

/// Shape alpha, rate beta.
template <class T>
struct GammaShape {
  T alpha;
  double beta;
  bool operator==(const GammaShape&) const = default;
};

/// Probabilities over the symbols 1..8.
template <class T>
struct Discrete {
  std::array<T, kDiscreteSymbols> probs;
  bool operator==(const Discrete&) const = default;
};

template <class T>
using FamilyParams =
    std::variant<Gaussian<T>, Mixture2<T>, VonMises<T>, GammaShape<T>, Discrete<T>>;

template <class T>
Family family_of(const FamilyParams<T>& p) {
  return static_cast<Family>(p.index());
}

/// Throws ConfigError on sigma <= 0, kappa < 0, alpha/beta <= 0, or
/// probabilities that are negative or do not sum to 1 within 1e-12.
void validate(const FamilyParams<double>& p);

/// Throws DomainError when x is outside the family's support.
void check_support(Family f, double x);

/// Wraps an angle onto (-pi, pi].
double wrap_angle(double x);

template <class T>
T gaussian_logpdf(double x, const T& mu, const T& sigma) {
  const T z = (x - mu) / sigma;
  return -0.5 * kLogTwoPi - ad::log(sigma) - 0.5 * ad::square(z);
}

template <class T>
T family_logpdf(const FamilyParams<T>& params, double x) {
  check_support(family_of(params), x);
  return std::visit(
      [x](const auto& p) -> T {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Gaussian<T>>) {
          return gaussian_logpdf<T>(x, p.mu, p.sigma);
        } else if constexpr (std::is_same_v<P, Mixture2<T>>) {
          const double s = p.sigma;
          const double log_half = -std::numbers::ln2;
          const double z_norm = -0.5 * kLogTwoPi - std::log(s) + log_half;
          const T lo = (x - (p.center - p.half_sep)) / s;
          const T hi = (x - (p.center + p.half_sep)) / s;
          const std::array<T, 2> terms = {z_norm - 0.5 * ad::square(lo),
                                          z_norm - 0.5 * ad::square(hi)};
          return ad::logsumexp(std::span<const T>(terms));
        } else if constexpr (std::is_same_v<P, VonMises<T>>) {
          return p.kappa * ad::cos(x - p.mu) - kLogTwoPi - ad::log_bessel_i0(p.kappa);
        } else if constexpr (std::is_same_v<P, GammaShape<T>>) {
          return p.alpha * std::log(p.beta) - ad::lgamma(p.alpha) +
                 (p.alpha - 1.0) * std::log(x) - p.beta * x;
        } else {
          const auto k = static_cast<std::size_t>(std::lround(x)) - 1;
          return ad::log(p.probs[k]);
        }
      },
      params);
}

/// Diagonal Gaussian over a latent vector.
template <class T>
struct GaussianPosterior {
  std::vector<T> mean;
  std::vector<T> log_var;

  std::size_t dim() const { return mean.size(); }
};

/// sum_i [ ln(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2 ].
template <class T>
T gaussian_kl(const GaussianPosterior<T>& q, const GaussianPosterior<T>& p) {
  if (q.dim() != p.dim() || q.log_var.size() != q.dim() || p.log_var.size() != p.dim()) {
    throw UsageError("gaussian_kl: dimension mismatch");
  }
  std::vector<T> terms;
  terms.reserve(q.dim());
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const T diff = q.mean[i] - p.mean[i];
    terms.push_back(0.5 * (p.log_var[i] - q.log_var[i]) +
                    (ad::exp(q.log_var[i]) + ad::square(diff)) / (2.0 * ad::exp(p.log_var[i])) -
                    0.5);
  }
  return ad::sum(std::span<const T>(terms));
}

/// KL to the standard normal: sum_i (exp(lv) + mu^2 - 1 - lv) / 2.
template <class T>
T kl_to_standard_normal(const GaussianPosterior<T>& q) {
  std::vector<T> terms;
  terms.reserve(q.dim());
  for (std::size_t i = 0; i < q.dim(); ++i) {
    terms.push_back(0.5 * (ad::exp(q.log_var[i]) + ad::square(q.mean[i]) - 1.0 - q.log_var[i]));
  }
  return ad::sum(std::span<const T>(terms));
}

/// mean + exp(log_var / 2) * noise.
template <class T>
std::vector<T> reparam_sample(const GaussianPosterior<T>& q, std::span<const double> noise) {
  if (noise.size() != q.dim()) throw UsageError("reparam_sample: noise dimension mismatch");
  std::vector<T> out;
  out.reserve(q.dim());
  for (std::size_t i = 0; i < q.dim(); ++i) {
    out.push_back(q.mean[i] + ad::exp(0.5 * q.log_var[i]) * noise[i]);
  }
  return out;
}

/// log N(z; q.mean, diag(exp(q.log_var))) at a plain point.
double gaussian_posterior_logpdf(const GaussianPosterior<double>& q, std::span<const double> z);

}  // namespace homoenc::dists
