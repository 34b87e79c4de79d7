#include "homoenc/dists/families.hpp"

#include <cmath>

namespace homoenc::dists {

std::string_view family_name(Family f) {
  switch (f) {
    case Family::kGaussian: return "gaussian";
    case Family::kMixture2: return "mixture2";
    case Family::kVonMises: return "von_mises";
    case Family::kGamma: return "gamma";
    case Family::kDiscrete: return "discrete";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::kGaussian, Family::kMixture2, Family::kVonMises, Family::kGamma,
                   Family::kDiscrete}) {
    if (family_name(f) == name) return f;
  }
  throw ConfigError("unknown family '" + std::string(name) + "'");
}

void validate(const FamilyParams<double>& params) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        auto finite = [](double v) { return std::isfinite(v); };
        if constexpr (std::is_same_v<P, Gaussian<double>>) {
          if (!finite(p.mu) || !(p.sigma > 0.0)) throw ConfigError("gaussian: need sigma > 0");
        } else if constexpr (std::is_same_v<P, Mixture2<double>>) {
          if (!finite(p.center) || !(p.sigma > 0.0) || !(p.half_sep >= 0.0)) {
            throw ConfigError("mixture2: need sigma > 0 and half_sep >= 0");
          }
        } else if constexpr (std::is_same_v<P, VonMises<double>>) {
          if (!finite(p.mu) || !(p.kappa >= 0.0)) throw ConfigError("von_mises: need kappa >= 0");
        } else if constexpr (std::is_same_v<P, GammaShape<double>>) {
          if (!(p.alpha > 0.0) || !(p.beta > 0.0)) throw ConfigError("gamma: need alpha, beta > 0");
        } else {
          double total = 0.0;
          for (double q : p.probs) {
            if (!(q >= 0.0)) throw ConfigError("discrete: negative probability");
            total += q;
          }
          if (std::abs(total - 1.0) > 1e-12) throw ConfigError("discrete: probabilities must sum to 1");
        }
      },
      params);
}

void check_support(Family f, double x) {
  switch (f) {
    case Family::kGaussian:
    case Family::kMixture2:
      if (!std::isfinite(x)) throw DomainError("observation must be finite");
      return;
    case Family::kVonMises:
      if (!(x > -std::numbers::pi && x <= std::numbers::pi)) {
        throw DomainError("von_mises: observation outside (-pi, pi]");
      }
      return;
    case Family::kGamma:
      if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("gamma: observation must be > 0");
      return;
    case Family::kDiscrete:
      if (!(x >= 1.0 && x <= kDiscreteSymbols) || x != std::round(x)) {
        throw DomainError("discrete: observation must be one of 1..8");
      }
      return;
  }
}

double wrap_angle(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double y = std::fmod(x + std::numbers::pi, two_pi);
  if (y <= 0.0) y += two_pi;
  return y - std::numbers::pi;
}

double gaussian_posterior_logpdf(const GaussianPosterior<double>& q, std::span<const double> z) {
  if (z.size() != q.dim()) throw UsageError("gaussian_posterior_logpdf: dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - q.mean[i];
    lp += -0.5 * kLogTwoPi - 0.5 * q.log_var[i] - 0.5 * d * d / std::exp(q.log_var[i]);
  }
  return lp;
}

}  // namespace homoenc::dists
