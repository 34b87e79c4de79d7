#pragma once

// Few-shot metrics, importance-weighted likelihood, and the analytic and
// quadrature oracles used to certify them.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "homoenc/dists/families.hpp"
#include "homoenc/model/model.hpp"
#include "homoenc/rng.hpp"
#include "homoenc/synth/dataset.hpp"

namespace homoenc::eval {

struct EvalConfig {
  std::size_t d_size = 1;
  /// Importance samples from q(c; X).
  std::size_t k = 200;
  /// Samples from q(c; D) per generation / classification estimate.
  std::size_t mc_outer = 20;
  std::size_t n_way = 2;
  std::size_t nodes = 64;
  std::uint64_t seed = 0;
  /// Support sets drawn per class for every episodic metric.
  std::size_t episodes_per_class = 10;
  /// Held-out points per generation episode.
  std::size_t heldout = 10;
  bool quadrature = false;
  /// Classification score: log-mean-exp of p(x|c) (true) or mean log p(x|c).
  bool expected_likelihood = true;

  void validate() const;
};

struct MetricRecord {
  std::string objective;
  std::string family;
  std::size_t d_size = 0;
  std::size_t latent_dim = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

/// Mean analytic KL[q(c; D) || p(c)] over classes and support draws.
double encoded_information(const model::Model& m, const synth::Dataset& ds, std::size_t d_size,
                           std::uint64_t seed, std::size_t episodes_per_class = 10);

/// Mean of -(1/mc_outer) sum_s log p(x'|c_s), c_s ~ q(c; D), x' held out of D.
double fewshot_generation_nll(const model::Model& m, const synth::Dataset& ds,
                              const EvalConfig& cfg);

/// Per-candidate scores for query x given each candidate's support.
std::vector<double> classification_scores(const model::ModelView<double>& v, double x,
                                          std::span<const std::vector<double>> supports,
                                          std::size_t mc_outer, bool expected_likelihood,
                                          Rng& rng);

/// argmax with the first maximum winning.
std::size_t predict(std::span<const double> scores);

/// n_way-way error rate; the query's own class contributes a support that
/// excludes the query element.
double fewshot_classification_error(const model::Model& m, const synth::Dataset& ds,
                                    const EvalConfig& cfg);

/// -(1/|X|) logmeanexp_s [log p(c_s) + sum_x log p(x|c_s) - log q(c_s; X)].
double iw_joint_nll(const model::ModelView<double>& v, std::span<const double> xs, std::size_t k,
                    Rng& rng);

/// Mean of iw_joint_nll over classes.
double joint_nll(const model::Model& m, const synth::Dataset& ds, std::size_t k,
                 std::uint64_t seed);

/// Gauss-Hermite nodes (ascending) and weights for weight function exp(-t^2).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};
GaussHermite gauss_hermite(std::size_t n);

/// log of the integral of exp(log_f) over R^dim (dim 1 or 2), by Gauss-Hermite
/// quadrature recentred at the mode of log_f and scaled by its curvature.
double adaptive_gh_log_integral(const std::function<double(std::span<const double>)>& log_f,
                                std::vector<double> start, std::size_t nodes);

/// Per-element -log p(X) by quadrature over c (latent dim 1 or 2).
double quadrature_joint_nll(const model::ModelView<double>& v, std::span<const double> xs,
                            std::size_t nodes);
double quadrature_joint_nll(const model::Model& m, const synth::Dataset& ds, std::size_t nodes);

/// p(c) = N(m0, tau0^2), p(x|c) = N(c, sigma^2).
struct ConjugateHyper {
  double m0 = 0.0;
  double tau0 = 1.0;
  double sigma = 1.0;
};

double exact_conjugate_logpX(const ConjugateHyper& h, std::span<const double> xs);
/// Exact posterior p(c | X) as (mean, variance).
std::pair<double, double> conjugate_posterior(const ConjugateHyper& h, std::span<const double> xs);
/// Closed-form E_q log p(X|c) - KL[q || p(c)] for q = N(mean, var).
double conjugate_elbo(const ConjugateHyper& h, std::span<const double> xs, double mean, double var);
/// KL[N(m1, v1) || N(m2, v2)].
double kl_gauss_1d(double m1, double v1, double m2, double v2);

/// Log-predictive density of x' under the conjugate posterior given D.
double conjugate_predictive_logpdf(const ConjugateHyper& h, std::span<const double> d, double x);

/// Every metric for one (model, d_size) cell, summed over classes in id order.
std::vector<MetricRecord> run_metric_suite(const model::Model& m, const synth::Dataset& ds,
                                           const EvalConfig& cfg, const std::string& objective,
                                           std::uint64_t train_seed);

std::string metrics_csv_header();
std::string metrics_csv_rows(std::span<const MetricRecord> records);
std::vector<MetricRecord> parse_metrics_csv(const std::string& text);

}  // namespace homoenc::eval
