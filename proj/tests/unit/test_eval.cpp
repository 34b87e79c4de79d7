#include <doctest.h>

#include <cmath>
#include <numbers>

#include "homoenc/dists/sampling.hpp"
#include "homoenc/errors.hpp"
#include "homoenc/eval/eval.hpp"
#include "homoenc/verify/verify.hpp"

using namespace homoenc;
using namespace homoenc::eval;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

model::Model zero_model(std::size_t L = 1) {
  model::ModelConfig c;
  c.latent_dim = L;
  return model::Model::zeros(c);
}

synth::Dataset unit_classes(std::size_t n_classes, std::size_t per_class, std::uint64_t seed) {
  synth::Hyper hy;
  hy.gaussian_mu_sd = 1.0;
  return synth::generate(dists::Family::kGaussian, n_classes, per_class, seed, hy);
}

// Two classes whose true means are 10 sigma apart.
synth::Dataset separated(std::size_t per_class) {
  synth::Dataset ds;
  ds.meta.n_classes = 2;
  ds.meta.n_per_class = per_class;
  Rng rng(4);
  for (std::size_t c = 0; c < 2; ++c) {
    synth::ClassRecord r;
    r.class_id = c;
    for (std::size_t i = 0; i < per_class; ++i) {
      r.elements.push_back(10.0 * static_cast<double>(c) + dists::standard_normal(rng));
    }
    ds.classes.push_back(r);
  }
  return ds;
}

}  // namespace

TEST_CASE("encoded information") {
  const auto ds = unit_classes(5, 6, 1);
  CHECK(encoded_information(zero_model(), ds, 3, 0) == 0.0);
  auto m = zero_model();
  m.slice("enc.b_mu")[0] = 1.0;
  CHECK(encoded_information(m, ds, 3, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(encoded_information(m, ds, 7, 0), UsageError);
}

TEST_CASE("predict") {
  const std::vector<double> s = {0.1, 2.0, -3.0, 2.0};
  CHECK(predict(s) == 1);
  std::vector<double> shifted = s;
  for (auto& v : shifted) v += 1234.5;
  CHECK(predict(shifted) == 1);
  CHECK_THROWS_AS(predict(std::vector<double>{}), UsageError);
}

TEST_CASE("classification error") {
  EvalConfig cfg;
  cfg.d_size = 5;
  cfg.seed = 3;
  // The prior encoder ignores D, so every candidate looks the same.
  const auto ds = unit_classes(100, 10, 2);
  const double chance = fewshot_classification_error(zero_model(), ds, cfg);
  CHECK(std::abs(chance - 0.5) < 0.05);

  const auto sep = separated(10);
  cfg.episodes_per_class = 200;
  CHECK(fewshot_classification_error(verify::conjugate_model(5), sep, cfg) < 0.01);

  cfg.n_way = 3;
  CHECK_THROWS_AS(fewshot_classification_error(zero_model(), sep, cfg), UsageError);
}

TEST_CASE("generation NLL under the true decoder") {
  // Exact posterior q = N(m, v) with v = 1/6: E[-log p(x'|c)] = log(2 pi)/2 + (1 + 2v)/2.
  const auto ds = unit_classes(200, 15, 5);
  EvalConfig cfg;
  cfg.d_size = 5;
  cfg.seed = 6;
  const double expect = 0.5 * kLog2Pi + 0.5 * (1.0 + 2.0 / 6.0);
  const double nll = fewshot_generation_nll(verify::conjugate_model(5), ds, cfg);
  CHECK(std::abs(nll - expect) < 0.05);

  cfg.mc_outer = 2000;
  cfg.episodes_per_class = 2;
  const double fine = fewshot_generation_nll(verify::conjugate_model(5), ds, cfg);
  cfg.mc_outer = 20;
  const double coarse = fewshot_generation_nll(verify::conjugate_model(5), ds, cfg);
  CHECK(std::abs(fine - coarse) < 0.05);

  cfg.d_size = 15;
  CHECK_THROWS_AS(fewshot_generation_nll(verify::conjugate_model(5), ds, cfg), UsageError);
}

TEST_CASE("importance-weighted likelihood") {
  const std::vector<double> xs = {0.3, -1.2, 0.8, 2.1};
  const auto m = verify::conjugate_model(xs.size());
  const ConjugateHyper h;
  const double exact = -exact_conjugate_logpX(h, xs) / 4.0;
  for (std::size_t k : {1, 10, 200}) {
    Rng rng(k);
    CHECK(iw_joint_nll(model::view(m), xs, k, rng) == doctest::Approx(exact).epsilon(1e-10));
  }

  // k = 1 is the single-sample ELBO.
  model::Model off = m;
  off.slice("enc.b_mu")[0] = 0.4;
  const auto v = model::view(off);
  Rng rng(9), replay(9);
  const double iw1 = iw_joint_nll(v, xs, 1, rng);
  const auto q = v.encode_class(xs);
  const double eps = dists::standard_normals(replay, 1)[0];
  const double c = q.mean[0] + std::exp(0.5 * q.log_var[0]) * eps;
  double lw = -0.5 * (kLog2Pi + c * c);
  lw += 0.5 * (kLog2Pi + q.log_var[0] + eps * eps);
  for (double x : xs) lw -= 0.5 * (kLog2Pi + (x - c) * (x - c));
  CHECK(iw1 == doctest::Approx(-lw / 4.0).epsilon(1e-12));

  Rng bad(1);
  CHECK_THROWS_AS(iw_joint_nll(v, xs, 0, bad), UsageError);
}

TEST_CASE("conjugate closed forms") {
  const ConjugateHyper h;
  const double one[1] = {0.0};
  CHECK(exact_conjugate_logpX(h, one) == doctest::Approx(-1.26551212).epsilon(1e-8));
  const std::vector<double> two = {0.5, -1.0};
  const std::vector<double> cov = {2.0, 1.0, 1.0, 2.0};
  CHECK(exact_conjugate_logpX(h, two) ==
        doctest::Approx(verify::mvn_zero_mean_logpdf(two, cov)).epsilon(1e-12));

  const auto [mu, var] = conjugate_posterior(h, two);
  CHECK(mu == doctest::Approx(-0.5 / 3.0));
  CHECK(var == doctest::Approx(1.0 / 3.0));
  // At the exact posterior the ELBO equals log p(X).
  CHECK(conjugate_elbo(h, two, mu, var) == doctest::Approx(exact_conjugate_logpX(h, two)).epsilon(1e-12));

  CHECK(kl_gauss_1d(0.0, 1.0, 0.0, 1.0) == 0.0);
  CHECK(kl_gauss_1d(1.0, 1.0, 0.0, 1.0) == doctest::Approx(0.5));

  const double x = 0.7;
  const double pv = 1.0 / 3.0 + 1.0;
  CHECK(conjugate_predictive_logpdf(h, two, x) ==
        doctest::Approx(-0.5 * (kLog2Pi + std::log(pv) + (x - mu) * (x - mu) / pv)));
  // The predictive is the ratio of marginals.
  const std::vector<double> three = {0.5, -1.0, x};
  CHECK(conjugate_predictive_logpdf(h, two, x) ==
        doctest::Approx(exact_conjugate_logpX(h, three) - exact_conjugate_logpX(h, two)).epsilon(1e-12));
}

TEST_CASE("quadrature") {
  const auto gh = gauss_hermite(64);
  REQUIRE(gh.nodes.size() == 64);
  double w = 0.0, w2 = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    w += std::exp(gh.log_weights[i]);
    w2 += std::exp(gh.log_weights[i]) * gh.nodes[i] * gh.nodes[i];
  }
  CHECK(w == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
  CHECK(w2 == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0).epsilon(1e-12));

  auto log_normal = [](std::span<const double> c) {
    return -0.5 * (kLog2Pi + 2.0 * std::log(0.5) + (c[0] - 3.0) * (c[0] - 3.0) / 0.25);
  };
  CHECK(std::abs(adaptive_gh_log_integral(log_normal, {0.0}, 32)) < 1e-9);

  const std::vector<double> xs = {0.3, -1.2, 0.8};
  const auto m = verify::conjugate_model(3);
  CHECK(quadrature_joint_nll(model::view(m), xs, 64) ==
        doctest::Approx(-exact_conjugate_logpX({}, xs) / 3.0).epsilon(1e-9));
}

TEST_CASE("metric suite and CSV") {
  const auto ds = unit_classes(6, 8, 7);
  EvalConfig cfg;
  cfg.d_size = 2;
  cfg.k = 20;
  const auto recs = run_metric_suite(verify::conjugate_model(2), ds, cfg, "vhe", 11);
  REQUIRE(recs.size() == 4);
  for (const auto& r : recs) {
    CHECK(r.objective == "vhe");
    CHECK(r.family == "gaussian");
    CHECK(r.d_size == 2);
    CHECK(r.seed == 11);
  }
  CHECK(recs[0].metric == "encoded_information");
  cfg.quadrature = true;
  CHECK(run_metric_suite(verify::conjugate_model(2), ds, cfg, "vhe", 11).size() == 5);

  const auto text = metrics_csv_header() + metrics_csv_rows(recs);
  const auto back = parse_metrics_csv(text);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].metric == recs[i].metric);
    CHECK(back[i].value == recs[i].value);
  }
  CHECK_THROWS_AS(parse_metrics_csv(metrics_csv_header() + "a,b,c\n"), ParseError);

  auto zm = zero_model();
  zm.config.z_branch = true;
  CHECK_THROWS_AS(run_metric_suite(zm, ds, cfg, "vhe", 0), ConfigError);
}
