#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "homoenc/errors.hpp"
#include "homoenc/synth/dataset.hpp"

using namespace homoenc;
using namespace homoenc::synth;
using dists::Family;

namespace {

double sample_variance(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

TEST_CASE("every family respects counts and support") {
  for (Family f : {Family::kGaussian, Family::kMixture2, Family::kVonMises, Family::kGamma,
                   Family::kDiscrete}) {
    const auto ds = generate(f, 12, 7, 3);
    REQUIRE(ds.n_classes() == 12);
    for (std::size_t i = 0; i < ds.classes.size(); ++i) {
      CHECK(ds.classes[i].class_id == i);
      CHECK(ds.classes[i].elements.size() == 7);
      for (double x : ds.classes[i].elements) CHECK_NOTHROW(dists::check_support(f, x));
    }
  }
}

TEST_CASE("discrete classes use one of the four subsets") {
  const auto ds = generate(Family::kDiscrete, 100, 10, 5);
  const std::set<std::array<double, 8>> allowed = {
      {0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0},
      {0, 0, 0, 0, 0.25, 0.25, 0.25, 0.25},
      {0.25, 0, 0.25, 0, 0.25, 0, 0.25, 0},
      {0, 0.25, 0, 0.25, 0, 0.25, 0, 0.25}};
  std::set<std::array<double, 8>> seen;
  for (const auto& c : ds.classes) {
    const auto& p = std::get<dists::Discrete<double>>(c.true_params).probs;
    CHECK(allowed.count(p) == 1);
    seen.insert(p);
    for (double x : c.elements) CHECK(p[static_cast<std::size_t>(x) - 1] > 0.0);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("generation is a pure function of the seed") {
  CHECK(to_jsonl(generate(Family::kGaussian, 20, 5, 7)) == to_jsonl(generate(Family::kGaussian, 20, 5, 7)));
  CHECK(to_jsonl(generate(Family::kGaussian, 20, 5, 7)) != to_jsonl(generate(Family::kGaussian, 20, 5, 8)));
  CHECK(to_jsonl(generate_hierarchical(3, 4, 5, 1)) == to_jsonl(generate_hierarchical(3, 4, 5, 1)));
  CHECK(to_jsonl(generate_factorial(2, 3, 4, 1)) == to_jsonl(generate_factorial(2, 3, 4, 1)));
}

TEST_CASE("gaussian class means follow the hyperprior") {
  const auto ds = generate(Family::kGaussian, 1000, 1, 11);
  std::vector<double> mus;
  for (const auto& c : ds.classes) mus.push_back(std::get<dists::Gaussian<double>>(c.true_params).mu);
  CHECK(std::abs(sample_variance(mus) - 100.0) < 15.0);
}

TEST_CASE("hierarchical variance decomposition") {
  const Hyper h;
  const auto ds = generate_hierarchical(200, 10, 1, 3);
  CHECK(ds.n_classes() == 2000);
  std::vector<double> all;
  double within = 0.0;
  for (std::size_t g = 0; g < 200; ++g) {
    std::vector<double> mus;
    for (auto id : ds.group_members(g)) {
      CHECK(ds.classes[id].group_id == g);
      mus.push_back(std::get<dists::Gaussian<double>>(ds.classes[id].true_params).mu);
    }
    within += sample_variance(mus) / 200.0;
    all.insert(all.end(), mus.begin(), mus.end());
  }
  const double sc2 = h.hier_sigma_c * h.hier_sigma_c, tau2 = h.hier_tau * h.hier_tau;
  CHECK(std::abs(within - sc2) < 0.15 * sc2);
  CHECK(std::abs(sample_variance(all) - (tau2 + sc2)) < 0.2 * (tau2 + sc2));
}

TEST_CASE("factorial cells") {
  const auto ds = generate_factorial(4, 3, 20, 9);
  CHECK(ds.total_elements() == 240);
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t members = 0;
    for (auto id : ds.content_members(c)) members += ds.classes[id].elements.size();
    CHECK(members == 60);
  }
  const double sigma = Hyper{}.fact_noise;
  for (const auto& cell : ds.classes) {
    REQUIRE(cell.content_id.has_value());
    REQUIRE(cell.style_id.has_value());
    const double expect = ds.meta.content_means[*cell.content_id] + ds.meta.style_offsets[*cell.style_id];
    double m = 0.0;
    for (double x : cell.elements) m += x / 20.0;
    CHECK(std::abs(m - expect) < 3.0 * sigma / std::sqrt(20.0));
  }
}

TEST_CASE("episodes") {
  const auto ds = generate(Family::kGaussian, 3, 100, 1);
  Rng rng(5);
  SUBCASE("full support is a permutation") {
    const auto e = sample_episode(ds, 1, 100, rng);
    auto sorted = e.support;
    auto whole = ds.classes[1].elements;
    std::sort(sorted.begin(), sorted.end());
    std::sort(whole.begin(), whole.end());
    CHECK(sorted == whole);
    CHECK(e.class_size == 100);
  }
  SUBCASE("single support element") {
    const auto e = sample_episode(ds, 0, 1, rng);
    REQUIRE(e.support.size() == 1);
    const auto& xs = ds.classes[0].elements;
    CHECK(std::find(xs.begin(), xs.end(), e.support[0]) != xs.end());
  }
  SUBCASE("inclusion frequency and no duplicates") {
    std::vector<int> hits(100, 0);
    for (int i = 0; i < 10000; ++i) {
      const auto e = sample_episode(ds, 2, 5, rng);
      std::set<std::size_t> unique(e.support_indices.begin(), e.support_indices.end());
      CHECK(unique.size() == 5);
      for (auto j : e.support_indices) ++hits[j];
    }
    for (int h : hits) CHECK(std::abs(h / 10000.0 - 0.05) < 0.01);
  }
  SUBCASE("oversized support") {
    CHECK_THROWS_AS(sample_episode(ds, 0, 101, rng), UsageError);
    CHECK_THROWS_AS(sample_episode(ds, 0, 0, rng), UsageError);
  }
}

TEST_CASE("structured episodes draw from the right pools") {
  const auto fd = generate_factorial(3, 2, 10, 4);
  Rng rng(1);
  const auto e = sample_factorial_episode(fd, 4, 5, rng);
  REQUIRE(e.supports.size() == 2);
  CHECK(e.supports[0].set_size == 20);  // content: 2 styles x 10
  CHECK(e.supports[1].set_size == 30);  // style: 3 contents x 10
  const auto hd = generate_hierarchical(2, 3, 4, 4);
  const auto h = sample_hierarchical_episode(hd, 1, 6, 2, rng);
  REQUIRE(h.supports.size() == 2);
  CHECK(h.supports[0].set_size == 12);
  CHECK(h.supports[1].set_size == 4);
  const auto flat = generate(Family::kGaussian, 2, 5, 1);
  CHECK_THROWS_AS(sample_factorial_episode(flat, 0, 1, rng), ConfigError);
}

TEST_CASE("JSONL round trip and failure modes") {
  for (const auto& ds : {generate(Family::kVonMises, 4, 6, 2), generate(Family::kDiscrete, 4, 6, 2),
                         generate_hierarchical(2, 2, 3, 2), generate_factorial(2, 2, 3, 2)}) {
    std::istringstream in(to_jsonl(ds));
    const auto back = from_jsonl(in);
    CHECK(to_jsonl(back) == to_jsonl(ds));
    CHECK(back.meta.hyper == ds.meta.hyper);
    for (std::size_t i = 0; i < ds.classes.size(); ++i) {
      CHECK(back.classes[i].elements == ds.classes[i].elements);
      CHECK(back.classes[i].true_params == ds.classes[i].true_params);
    }
  }
  const std::string text = to_jsonl(generate(Family::kGaussian, 3, 4, 1));
  {
    std::istringstream in(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(from_jsonl(in), ParseError);
  }
  {
    std::istringstream in(text.substr(0, text.rfind('\n', text.size() - 2) + 1));
    CHECK_THROWS_AS(from_jsonl(in), ParseError);
  }
  {
    std::istringstream in("");
    CHECK_THROWS_AS(from_jsonl(in), ParseError);
  }
  const auto path = (std::filesystem::temp_directory_path() / "homoenc_test_roundtrip.jsonl").string();
  save(generate(Family::kGamma, 3, 4, 1), path);
  CHECK(to_jsonl(load(path)) == to_jsonl(generate(Family::kGamma, 3, 4, 1)));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load("/nonexistent/dir/x.jsonl"), IoError);
}

TEST_CASE("hyper validation") {
  Hyper h;
  h.gaussian_sigma = 0.0;
  CHECK_THROWS_AS(generate(Family::kGaussian, 2, 2, 1, h), ConfigError);
  Hyper g;
  g.gamma_alpha_hi = 0.5;
  CHECK_THROWS_AS(generate(Family::kGamma, 2, 2, 1, g), ConfigError);
  CHECK_THROWS_AS(generate(Family::kGaussian, 0, 2, 1), ConfigError);
  CHECK(parse_structure("factorial") == Structure::kFactorial);
  CHECK_THROWS_AS(parse_structure("tree"), ConfigError);
}
