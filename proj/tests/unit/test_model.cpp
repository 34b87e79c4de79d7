#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "homoenc/errors.hpp"
#include "homoenc/model/model.hpp"

using namespace homoenc;
using namespace homoenc::model;
using dists::Family;

namespace {

ModelConfig flat(Family f, std::size_t L = 2) {
  ModelConfig c;
  c.family = f;
  c.latent_dim = L;
  return c;
}

}  // namespace

TEST_CASE("zero parameters give the prior as posterior") {
  for (Family f : {Family::kGaussian, Family::kMixture2, Family::kVonMises, Family::kGamma,
                   Family::kDiscrete}) {
    const Model m = Model::zeros(flat(f));
    const double d[1] = {f == Family::kDiscrete ? 3.0 : 0.5};
    const auto q = view(m).encode_class(d);
    CHECK(q.mean == std::vector<double>{0.0, 0.0});
    CHECK(q.log_var == std::vector<double>{0.0, 0.0});
  }
}

TEST_CASE("encoding is permutation invariant") {
  Rng rng(3);
  const Model m = Model::init(flat(Family::kGaussian), rng);
  const double a[4] = {0.3, -1.2, 2.5, 0.7};
  const double b[4] = {2.5, 0.7, -1.2, 0.3};
  const auto qa = view(m).encode_class(a);
  const auto qb = view(m).encode_class(b);
  CHECK(qa.mean == qb.mean);
  CHECK(qa.log_var == qb.log_var);
  CHECK_THROWS_AS(view(m).encode_class(std::span<const double>()), UsageError);
}

TEST_CASE("gaussian features are mean pooled (x, x^2)") {
  Model m = Model::zeros(flat(Family::kGaussian));
  auto w = m.slice("enc.w_mu");  // 2 x 2, identity
  w[0] = 1.0;
  w[3] = 1.0;
  const double d[2] = {1.0, 3.0};
  const auto q = view(m).encode_class(d);
  CHECK(q.mean[0] == 2.0);
  CHECK(q.mean[1] == 5.0);
  CHECK(feature_map(Family::kVonMises, 0.0) == std::vector<double>{1.0, 0.0});
  CHECK(feature_map(Family::kDiscrete, 3.0) == std::vector<double>{0, 0, 1, 0, 0, 0, 0, 0});
}

TEST_CASE("decoder links") {
  const double c[2] = {0.4, -0.9};
  {
    Model m = Model::zeros(flat(Family::kGaussian));
    m.slice("dec.b")[0] = 1.7;
    const auto p = std::get<dists::Gaussian<double>>(view(m).decode_params(c));
    CHECK(p.mu == 1.7);
    CHECK(p.sigma == doctest::Approx(std::log(2.0)));
  }
  {
    const Model m = Model::zeros(flat(Family::kDiscrete));
    const auto p = std::get<dists::Discrete<double>>(view(m).decode_params(c));
    for (double q : p.probs) CHECK(q == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(view(m).obs_logpdf(c, 5.0) == doctest::Approx(std::log(0.125)));
  }
  {
    const Model m = Model::zeros(flat(Family::kGamma));
    const auto p = std::get<dists::GammaShape<double>>(view(m).decode_params(c));
    CHECK(p.alpha == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(p.beta == m.config.gamma_beta);
  }
  {
    Model m = Model::zeros(flat(Family::kVonMises));
    m.slice("dec.b")[0] = 0.0;
    m.slice("dec.b")[1] = 2.0;
    const auto p = std::get<dists::VonMises<double>>(view(m).decode_params(c));
    CHECK(p.mu == doctest::Approx(std::acos(0.0)));
  }
  {
    const Model m = Model::zeros(flat(Family::kMixture2));
    const auto p = std::get<dists::Mixture2<double>>(view(m).decode_params(c));
    CHECK(p.half_sep == m.config.mix_half_sep);
    CHECK(p.sigma == m.config.mix_sigma);
  }
}

TEST_CASE("prior and conditional densities") {
  const Model m1 = Model::zeros(flat(Family::kGaussian, 1));
  const double c0[1] = {0.0};
  CHECK(view(m1).prior_logpdf(c0) == doctest::Approx(-0.91893853).epsilon(1e-8));
  const Model m2 = Model::zeros(flat(Family::kGaussian, 2));
  const double c11[2] = {1.0, 1.0};
  CHECK(view(m2).prior_logpdf(c11) == doctest::Approx(-2.83787707).epsilon(1e-8));

  ModelConfig hc = flat(Family::kGaussian, 1);
  hc.structure = Structure::kHierarchical;
  const Model h = Model::zeros(hc);
  const double a[1] = {2.0};
  CHECK(view(h).conditional_logpdf(c0, a) == doctest::Approx(-0.91893853).epsilon(1e-8));
}

TEST_CASE("initialisation") {
  Rng rng(1);
  const Model m = Model::init(flat(Family::kVonMises), rng);
  for (const auto& s : m.layout.slices()) {
    const auto v = m.slice(s.name);
    if (s.name == "dec.b") {
      CHECK(v[0] == 1.0);
      CHECK(v[1] == 0.0);
    } else if (s.kind == SliceKind::kWeight) {
      for (double x : v) CHECK(std::abs(x) < 0.06);
    } else {
      for (double x : v) CHECK(x == 0.0);
    }
  }
}

TEST_CASE("layouts per structure") {
  ModelConfig f = flat(Family::kGaussian);
  f.structure = Structure::kFactorial;
  const auto lf = make_layout(f);
  CHECK(lf.find("enc_content.w_mu") != nullptr);
  CHECK(lf.find("enc_style.b_lv") != nullptr);
  CHECK(lf.at("dec.w").cols == 4);
  ModelConfig z = flat(Family::kGaussian);
  z.z_branch = true;
  z.z_conditions_on_c = true;
  CHECK(make_layout(z).find("encz.u_c") != nullptr);
  ModelConfig t = flat(Family::kGaussian);
  t.aux_embed_dim = 3;
  t.aux_rows = 10;
  CHECK(make_layout(t).at("aux.xi").size() == 30);
  CHECK_THROWS_AS(make_layout(flat(Family::kGaussian)).at("aux.xi"), ConfigError);
}

TEST_CASE("config validation") {
  ModelConfig c = flat(Family::kGamma);
  c.z_branch = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  ModelConfig d = flat(Family::kGaussian, 0);
  CHECK_THROWS_AS(d.validate(), ConfigError);
  ModelConfig e = flat(Family::kGaussian);
  e.aux_embed_dim = 2;
  CHECK_THROWS_AS(e.validate(), ConfigError);
  ModelConfig s = flat(Family::kGaussian);
  s.feat_shift = {0.0};
  s.feat_scale = {1.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("config_for standardises features of the data") {
  const auto ds = synth::generate(Family::kGaussian, 10, 20, 1);
  const auto c = config_for(ds, 2);
  REQUIRE(c.feat_shift.size() == 2);
  // Pooled standardised features of the whole dataset are centred.
  Model m = Model::zeros(c);
  auto w = m.slice("enc.w_mu");
  w[0] = 1.0;
  w[3] = 1.0;
  std::vector<double> all;
  for (const auto& k : ds.classes) all.insert(all.end(), k.elements.begin(), k.elements.end());
  const auto q = view(m).encode_class(all);
  CHECK(std::abs(q.mean[0]) < 1e-12);
  CHECK(std::abs(q.mean[1]) < 1e-12);
  CHECK(config_for(synth::generate(Family::kVonMises, 2, 3, 1), 2).feat_shift.empty());
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(9);
  ModelConfig c = flat(Family::kGaussian);
  c.structure = Structure::kHierarchical;
  c.feat_shift = {0.1, 2.0};
  c.feat_scale = {1.5, 3.0};
  const Model m = Model::init(c, rng);
  const Model back = model_from_json(to_json(m));
  CHECK(back.config == m.config);
  CHECK(back.layout == m.layout);
  CHECK(back.params == m.params);
  CHECK(to_json(back) == to_json(m));

  const auto path = (std::filesystem::temp_directory_path() / "homoenc_test_model.json").string();
  save_checkpoint(m, path);
  CHECK(load_checkpoint(path).params == m.params);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.json"), IoError);
  CHECK_THROWS_AS(model_from_json("{\"format\": 3"), ParseError);
  CHECK_THROWS_AS(model_from_json("{\"format\": \"other\"}"), Error);
}
