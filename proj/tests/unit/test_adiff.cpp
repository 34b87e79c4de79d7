#include <doctest.h>

#include <cmath>
#include <numbers>

#include "homoenc/adiff/grad_check.hpp"
#include "homoenc/adiff/special.hpp"
#include "homoenc/adiff/tape.hpp"
#include "homoenc/dists/families.hpp"
#include "homoenc/errors.hpp"

using namespace homoenc;
using ad::Tape;
using ad::Var;

TEST_CASE("forward evaluates deferred graphs") {
  Tape t;
  Var a = t.input(), b = t.input();
  Var f = a * b + b;
  const double v[2] = {2.0, 3.0};
  CHECK(t.forward(v, f) == 9.0);

  Tape t2;
  Var x = t2.input();
  Var g = ad::log(ad::exp(x));
  const double one[1] = {1.5};
  CHECK(t2.forward(one, g) == doctest::Approx(1.5).epsilon(1e-15));

  Tape t3;
  Var y = t3.input();
  Var h = ad::lgamma(y);
  const double half[1] = {0.5};
  CHECK(t3.forward(half, h) == doctest::Approx(0.57236494).epsilon(1e-8));
}

TEST_CASE("forward rejects a wrong number of leaf values") {
  Tape t;
  Var a = t.input();
  const double v[2] = {1.0, 2.0};
  CHECK_THROWS_AS(t.forward(v, a), UsageError);
}

TEST_CASE("backward accumulates leaf gradients") {
  Tape t;
  Var a = t.input(2.0), b = t.input(3.0);
  t.backward(a * b);
  CHECK(t.grad(a) == 3.0);
  CHECK(t.grad(b) == 2.0);

  Tape t2;
  Var x = t2.input(5.0);
  t2.backward(ad::square(x));
  CHECK(t2.grad(x) == 10.0);

  // KL(N(mu, e^lv) || N(0, 1)) is minimised at (0, 0).
  Tape t3;
  Var mu = t3.input(0.0), lv = t3.input(0.0);
  const dists::GaussianPosterior<Var> q{{mu}, {lv}};
  t3.backward(dists::kl_to_standard_normal(q));
  CHECK(t3.grad(mu) == 0.0);
  CHECK(t3.grad(lv) == 0.0);
}

TEST_CASE("backward before forward is a usage error") {
  Tape t;
  Var a = t.input();
  Var f = ad::exp(a);
  CHECK_THROWS_AS(t.backward(f), UsageError);
}

TEST_CASE("domain violations name the node") {
  Tape t;
  Var a = t.input(-1.0);
  try {
    (void)ad::log(a);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(e.node_id() == 1);
  }
  CHECK_THROWS_AS(special::lgamma(0.0), DomainError);
  CHECK_THROWS_AS(special::digamma(-2.0), DomainError);
  CHECK_THROWS_AS(special::log_bessel_i0(-0.1), DomainError);
  CHECK_THROWS_AS(special::bessel_ratio(-0.1), DomainError);
}

TEST_CASE("special function anchors") {
  CHECK(special::lgamma(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(special::log_bessel_i0(0.0) == 0.0);
  CHECK(special::digamma(1.0) == doctest::Approx(-0.57721566).epsilon(1e-8));
  // Power series sum (k/2)^(2m) / (m!)^2; at k = 2 this is log(2.2795853...) = 0.82399354.
  double series = 0.0, term = 1.0;
  for (int m = 1; m < 40; ++m) {
    series += term;
    term /= static_cast<double>(m) * static_cast<double>(m);
  }
  CHECK(special::log_bessel_i0(2.0) == doctest::Approx(std::log(series)).epsilon(1e-14));
  CHECK(special::log_bessel_i0(2.0) == doctest::Approx(0.82399354).epsilon(1e-8));
  CHECK(special::lgamma(0.5) == doctest::Approx(0.5 * std::log(std::numbers::pi)).epsilon(1e-14));
  // Large-kappa branch against the series branch at the switch point.
  CHECK(std::abs(special::log_bessel_i0(15.0 - 1e-9) - special::log_bessel_i0(15.0)) < 1e-8);
}

TEST_CASE("grad_check on a polynomial") {
  Tape t;
  Var x = t.input(0.7), y = t.input(-1.3);
  Var f = ad::square(x) * y + 3.0 * x - y * y * y;
  const double p[2] = {0.7, -1.3};
  CHECK(ad::grad_check(t, f, p).max_relative_error < 1e-8);
}

TEST_CASE("grad_check reports the leaf of a non-finite difference") {
  Tape t;
  Var x = t.input(1e-5);
  Var f = ad::log(x);
  const double p[1] = {1e-5};
  CHECK_THROWS_AS(ad::grad_check(t, f, p), Error);
}

TEST_CASE("repeated passes are bit identical") {
  auto run = [] {
    Tape t;
    Var a = t.input(0.4), b = t.input(2.5);
    Var f = ad::log_bessel_i0(b) * ad::sin(a) + ad::digamma(b);
    t.backward(f);
    return std::make_pair(f.value(), t.leaf_gradients());
  };
  const auto r1 = run(), r2 = run();
  CHECK(r1.first == r2.first);
  CHECK(r1.second == r2.second);
}
