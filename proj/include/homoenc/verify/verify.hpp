#pragma once

// Property suites behind `homoenc verify`. Each check reports a measured
// value against a tolerance; it passes when measured <= tolerance.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "homoenc/model/model.hpp"
#include "homoenc/synth/dataset.hpp"

namespace homoenc::verify {

struct Check {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 20250101;
  /// Episodes per Monte Carlo bound check.
  std::size_t bound_episodes = 100000;
  /// Random points per gradient check.
  std::size_t grad_points = 20;
};

std::vector<std::string> suite_names();
/// Throws UsageError for an unknown suite.
std::vector<Check> run_suite(const std::string& name, const Options& opt);

std::vector<Check> check_special(const Options& opt);
std::vector<Check> check_dists(const Options& opt);
std::vector<Check> check_gradients(const Options& opt);
std::vector<Check> check_identities(const Options& opt);
std::vector<Check> check_bounds(const Options& opt);
std::vector<Check> check_gap(const Options& opt);
std::vector<Check> check_estimator(const Options& opt);

/// "PASS suite/name measured=... tolerance=... detail".
std::string format_check(const Check& c);

// Building blocks shared with the test suites.

/// softplus^{-1}(y) for y > 0.
double softplus_inverse(double y);

/// Flat gaussian model, latent dim 1, decoder p(x|c) = N(c, 1), encoder equal
/// to the exact posterior under p(c) = N(0, 1) for supports of size n.
model::Model conjugate_model(std::size_t n);

/// Hierarchical model for a ~ N(0,1), c|a ~ N(a,1), x|c ~ N(c,1) whose
/// encoders are exact for groups of k classes of n elements (full supports).
model::Model conjugate_hierarchical_model(std::size_t k, std::size_t n);

/// Per-element latent model p(c) = N(0,1), p(z) = N(0,1),
/// p(x|c,z) = N(c + z, sigma^2), with exact q(c; X) for |X| = n and exact
/// c-conditioned q(z; c, x).
model::Model conjugate_z_model(std::size_t n, double sigma);

/// log N(x; 0, cov) for a dense covariance (Cholesky).
double mvn_zero_mean_logpdf(std::span<const double> x, const std::vector<double>& cov);

/// Mean and standard error of a sample.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(std::span<const double> xs);

}  // namespace homoenc::verify
