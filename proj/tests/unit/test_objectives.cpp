#include <doctest.h>

#include <cmath>

#include "homoenc/dists/sampling.hpp"
#include "homoenc/errors.hpp"
#include "homoenc/objectives/objectives.hpp"
#include "homoenc/verify/verify.hpp"

using namespace homoenc;
using namespace homoenc::obj;
using model::Model;
using model::ModelConfig;
using model::view;

namespace {

ModelConfig gaussian(std::size_t L = 2) {
  ModelConfig c;
  c.latent_dim = L;
  return c;
}

Model random_model(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Model m = Model::zeros(c);
  for (auto& p : m.params) p = 0.4 * dists::standard_normal(rng);
  return m;
}

template <class B>
double rebuilt_total(const B& b) {
  double pen = 0.0;
  for (const auto& t : b.terms) pen += t.weight * t.value;
  return -(b.recon - pen);
}

const std::vector<double> kD = {0.4, -1.1, 2.0, 0.9, -0.3};

}  // namespace

TEST_CASE("loss_vae") {
  const Model zero = Model::zeros(gaussian());
  Rng r1(1), r2(1);
  const auto a = loss_vae(view(zero), 0.7, r1);
  CHECK(a.term("kl_c") == 0.0);
  CHECK(a.total == -a.recon);
  const double d[1] = {0.7};
  CHECK(a.total == loss_vhe(view(zero), 0.7, d, 1, r2).total);

  // Perfect fixed decoder: b = x, sigma = 1, zero weights.
  Model fixed = Model::zeros(gaussian());
  fixed.slice("dec.b")[0] = 0.7;
  fixed.slice("dec.scale")[0] = verify::softplus_inverse(1.0);
  Rng r3(2);
  CHECK(loss_vae(view(fixed), 0.7, r3).total == doctest::Approx(0.91893853).epsilon(1e-8));
}

TEST_CASE("loss_vhe weights and errors") {
  const Model m = random_model(gaussian(), 3);
  Rng rng(4);
  const auto b = loss_vhe(view(m), kD[0], kD, 20, rng, LossOptions{0.5, 1});
  CHECK(b.weight("kl_c") == doctest::Approx(0.5 / 20));
  CHECK(b.total == doctest::Approx(rebuilt_total(b)).epsilon(1e-14));
  CHECK(b.term("kl_c") > 0.0);
  CHECK_THROWS_AS(b.term("kl_z"), UsageError);
  CHECK_THROWS_AS(loss_vhe(view(m), kD[0], kD, 4, rng), UsageError);
  CHECK_THROWS_AS(loss_vhe(view(m), kD[0], kD, 10, rng, LossOptions{1.0, 0}), UsageError);

  const Model zero = Model::zeros(gaussian());
  const auto z = loss_vhe(view(zero), kD[1], kD, 10, rng);
  CHECK(z.term("kl_c") == 0.0);
  CHECK(z.total == -z.recon);
}

TEST_CASE("mc_samples averages the reconstruction") {
  const Model m = random_model(gaussian(), 5);
  Rng rng(6), replay(6);
  const auto b = loss_vhe(view(m), kD[0], kD, 10, rng, LossOptions{1.0, 3});
  double mean = 0.0;
  for (int s = 0; s < 3; ++s) {
    Rng one = replay;
    const auto r = loss_vhe(view(m), kD[0], kD, 10, one);
    mean += r.recon / 3.0;
    // Advance by the noise one sample consumes.
    (void)dists::standard_normals(replay, 2);
  }
  CHECK(b.recon == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("loss_ns") {
  const Model m = random_model(gaussian(), 7);
  Rng r1(8), r2(8);
  const double one[1] = {0.25};
  CHECK(loss_ns(view(m), one, r1).total == loss_vae(view(m), 0.25, r2).total);
  const Model zero = Model::zeros(gaussian());
  Rng r3(9);
  const auto b = loss_ns(view(zero), kD, r3);
  double expect = 0.0;
  const double c[2] = {0.0, 0.0};
  for (double x : kD) expect -= view(zero).obs_logpdf(c, x);
  CHECK(b.term("kl_c") == 0.0);
  CHECK(b.total == doctest::Approx(expect).epsilon(1e-14));
  CHECK(b.weight("kl_c") == 1.0);
}

TEST_CASE("ablations") {
  const Model m = random_model(gaussian(), 10);
  Rng r1(11), r2(11);
  CHECK(loss_resample(view(m), kD[2], kD, r1).total == loss_vhe(view(m), kD[2], kD, kD.size(), r2).total);
  Rng r3(12);
  CHECK(loss_resample(view(m), kD[2], kD, r3).weight("kl_c") == doctest::Approx(0.2));
  std::vector<double> big(100, 0.0);
  for (std::size_t i = 0; i < 5; ++i) big[i] = kD[i];
  Rng r4(13);
  CHECK(loss_rescale(view(m), kD[1], kD, 100, r4).weight("kl_c") == doctest::Approx(0.01));
  CHECK_THROWS_AS(loss_rescale(view(m), 42.0, kD, 100, r4), UsageError);
}

TEST_CASE("loss_vhe_z") {
  ModelConfig c = gaussian();
  c.z_branch = true;
  const Model m = random_model(c, 14);
  Rng rng(15);
  const auto b = loss_vhe_z(view(m), kD[0], kD, 30, rng, LossOptions{0.3, 1});
  CHECK(b.weight("kl_z") == doctest::Approx(0.3));
  CHECK(b.weight("kl_c") == doctest::Approx(0.3 / 30));
  CHECK(b.total == doctest::Approx(rebuilt_total(b)).epsilon(1e-14));
  const Model flat = random_model(gaussian(), 14);
  CHECK_THROWS_AS(loss_vhe_z(view(flat), kD[0], kD, 30, rng), ConfigError);
}

TEST_CASE("loss_structured") {
  ModelConfig c = gaussian();
  c.structure = synth::Structure::kFactorial;
  const Model m = random_model(c, 16);
  Rng rng(17);
  const std::vector<double> s2 = {1.0, 2.0};
  const FactorSupport sup[2] = {{kD, 60}, {s2, 80}};
  const auto b = loss_structured(view(m), kD[0], std::span<const FactorSupport>(sup), rng);
  CHECK(b.weight("kl_content") == doctest::Approx(1.0 / 60));
  CHECK(b.weight("kl_style") == doctest::Approx(1.0 / 80));
  CHECK(b.total == doctest::Approx(rebuilt_total(b)).epsilon(1e-14));
  CHECK_THROWS_AS(loss_structured(view(m), kD[0], std::span<const FactorSupport>(sup, 1), rng), UsageError);
}

TEST_CASE("loss_hierarchical") {
  ModelConfig c = gaussian();
  c.structure = synth::Structure::kHierarchical;
  const Model m = random_model(c, 18);
  Rng rng(19);
  const auto b = loss_hierarchical(view(m), kD[0], kD, kD, 1000, 100, rng);
  CHECK(b.weight("kl_a") == doctest::Approx(0.001));
  CHECK(b.weight("kl_c") == doctest::Approx(0.01));
  CHECK(b.term("kl_a") >= 0.0);
  CHECK(b.term("kl_c") >= 0.0);
  CHECK_THROWS_AS(loss_hierarchical(view(m), kD[0], kD, kD, 3, 100, rng), UsageError);
  const Model flat = random_model(gaussian(), 18);
  CHECK_THROWS_AS(loss_hierarchical(view(flat), kD[0], kD, kD, 1000, 100, rng), ConfigError);
}

TEST_CASE("loss_tightened") {
  ModelConfig c = gaussian();
  c.aux_embed_dim = 3;
  c.aux_rows = 5;
  const Model m = random_model(c, 20);
  CHECK(log_binomial(5, 5) == 0.0);
  CHECK(log_binomial(5, 2) == doctest::Approx(std::log(10.0)));

  // Full support: q' is deterministic, so the ratio is -sum log r.
  const std::size_t all[5] = {0, 1, 2, 3, 4};
  Rng r1(21), replay(21);
  const auto b = loss_tightened(view(m), kD[0], kD, std::span<const std::size_t>(all), 0, r1);
  const auto q = view(m).encode_class(kD);
  const auto cs = dists::reparam_sample(q, dists::standard_normals(replay, 2));
  const auto log_r = view(m).aux_log_r(cs, 0, 5);
  double expect = 0.0;
  for (double lr : log_r) expect -= lr;
  CHECK(b.term("log_ratio") == doctest::Approx(expect).epsilon(1e-13));
  CHECK(b.weight("log_ratio") == doctest::Approx(0.2));

  Rng r2(22);
  const std::size_t idx[1] = {1};
  CHECK_THROWS_AS(loss_tightened(view(m), kD[0], kD, std::span<const std::size_t>(idx), 3, r2), ConfigError);
  const std::size_t bad[1] = {7};
  CHECK_THROWS_AS(loss_tightened(view(m), kD[0], kD, std::span<const std::size_t>(bad), 0, r2), UsageError);
}

TEST_CASE("objective/dataset compatibility") {
  const auto flat = synth::generate(dists::Family::kGaussian, 4, 10, 1);
  const auto cfg = model::config_for(flat, 2);
  ObjectiveSpec spec;
  spec.kind = Kind::kHierarchical;
  try {
    check_compatible(spec, cfg, flat);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("hierarchical") != std::string::npos);
    CHECK(std::string(e.what()).find("flat") != std::string::npos);
  }
  spec.kind = Kind::kVhe;
  spec.d_size = 11;
  CHECK_THROWS_AS(check_compatible(spec, cfg, flat), ConfigError);
  spec.d_size = 10;
  CHECK_NOTHROW(check_compatible(spec, cfg, flat));
  spec.kind = Kind::kTightened;
  CHECK_THROWS_AS(check_compatible(spec, cfg, flat), ConfigError);
  CHECK(parse_objective("rescale") == Kind::kRescale);
  CHECK_THROWS_AS(parse_objective("elbo"), ConfigError);
}

TEST_CASE("episode_loss covers every objective") {
  const auto flat = synth::generate(dists::Family::kGaussian, 3, 8, 1);
  const auto fact = synth::generate_factorial(2, 2, 4, 1);
  const auto hier = synth::generate_hierarchical(2, 2, 4, 1);
  for (Kind k : {Kind::kVae, Kind::kNs, Kind::kVhe, Kind::kResample, Kind::kRescale, Kind::kVheZ,
                 Kind::kStructured, Kind::kHierarchical, Kind::kTightened}) {
    const auto& ds = k == Kind::kStructured ? fact : k == Kind::kHierarchical ? hier : flat;
    auto cfg = model::config_for(ds, 2);
    if (k == Kind::kVheZ) cfg.z_branch = true;
    if (k == Kind::kTightened) {
      cfg.aux_embed_dim = 2;
      cfg.aux_rows = ds.total_elements();
    }
    ObjectiveSpec spec;
    spec.kind = k;
    spec.d_size = 2;
    CHECK_NOTHROW(check_compatible(spec, cfg, ds));
    const Model m = random_model(cfg, 30);
    Rng rng(31);
    const auto b = episode_loss(spec, view(m), ds, 1, rng, LossOptions{});
    CHECK(std::isfinite(b.total));
    CHECK(b.total == doctest::Approx(rebuilt_total(b)).epsilon(1e-13));
    for (const auto& t : b.terms) CHECK(t.value >= (t.name == "log_ratio" ? -1e300 : 0.0));
  }
}
