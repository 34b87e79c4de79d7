#include "homoenc/verify/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "homoenc/adiff/grad_check.hpp"
#include "homoenc/adiff/special.hpp"
#include "homoenc/adiff/tape.hpp"
#include "homoenc/dists/sampling.hpp"
#include "homoenc/errors.hpp"
#include "homoenc/eval/eval.hpp"
#include "homoenc/objectives/objectives.hpp"
#include "homoenc/train/train.hpp"

namespace homoenc::verify {

using ad::Tape;
using ad::Var;
using dists::Family;
using model::Model;
using model::ModelConfig;
using synth::Structure;

namespace {

Check make(const std::string& suite, const std::string& name, double measured, double tol,
           std::string detail = {}) {
  return Check{suite, name, measured, tol, measured <= tol, std::move(detail)};
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    g[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return g;
}

// sum_m (k/2)^{2m} / (m!)^2 in extended precision, to convergence.
long double bessel_i0_series(long double k) {
  const long double q = k * k / 4.0L;
  long double term = 1.0L, sum = 1.0L;
  for (int m = 1; m < 500; ++m) {
    term *= q / (static_cast<long double>(m) * m);
    sum += term;
    if (term < sum * 1e-21L) break;
  }
  return sum;
}

}  // namespace

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inverse needs y > 0");
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

MeanSe mean_se(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, n > 1.0 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

double mvn_zero_mean_logpdf(std::span<const double> x, const std::vector<double>& cov) {
  const std::size_t n = x.size();
  if (cov.size() != n * n) throw UsageError("mvn_zero_mean_logpdf: covariance size");
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = cov[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) throw NumericError("covariance is not positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  // Solve L y = x; quad = |y|^2.
  std::vector<double> y(n);
  double quad = 0.0, log_det = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
    y[i] = s / l[i * n + i];
    quad += y[i] * y[i];
    log_det += 2.0 * std::log(l[i * n + i]);
  }
  return -0.5 * (static_cast<double>(n) * dists::kLogTwoPi + log_det + quad);
}

Model conjugate_model(std::size_t n) {
  ModelConfig c;
  c.family = Family::kGaussian;
  c.latent_dim = 1;
  Model m = Model::zeros(c);
  const double nd = static_cast<double>(n);
  m.slice("enc.w_mu")[0] = nd / (nd + 1.0);
  m.slice("enc.b_lv")[0] = -std::log(nd + 1.0);
  m.slice("dec.w")[0] = 1.0;
  m.slice("dec.scale")[0] = softplus_inverse(1.0);
  return m;
}

Model conjugate_hierarchical_model(std::size_t k, std::size_t n) {
  ModelConfig c;
  c.family = Family::kGaussian;
  c.structure = Structure::kHierarchical;
  c.latent_dim = 1;
  Model m = Model::zeros(c);
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  // Class means are N(a, 1 + 1/n); a's posterior depends on their average.
  const double v_mean = 1.0 + 1.0 / nd;
  const double prec_a = 1.0 + kd / v_mean;
  m.slice("enc_a.w_mu")[0] = (kd / v_mean) / prec_a;
  m.slice("enc_a.b_lv")[0] = -std::log(prec_a);
  // c | X, a ~ N((a + n xbar) / (n + 1), 1 / (n + 1)).
  m.slice("enc.w_mu")[0] = nd / (nd + 1.0);
  m.slice("enc.u_mu")[0] = 1.0 / (nd + 1.0);
  m.slice("enc.b_lv")[0] = -std::log(nd + 1.0);
  m.slice("cond.w")[0] = 1.0;
  m.slice("dec.w")[0] = 1.0;
  m.slice("dec.scale")[0] = softplus_inverse(1.0);
  return m;
}

Model conjugate_z_model(std::size_t n, double sigma) {
  ModelConfig c;
  c.family = Family::kGaussian;
  c.latent_dim = 1;
  c.z_branch = true;
  c.z_conditions_on_c = true;
  Model m = Model::zeros(c);
  const double nd = static_cast<double>(n);
  const double s2 = sigma * sigma;
  const double v_x = 1.0 + s2;  // x | c ~ N(c, 1 + sigma^2)
  const double prec_c = 1.0 + nd / v_x;
  m.slice("enc.w_mu")[0] = (nd / v_x) / prec_c;
  m.slice("enc.b_lv")[0] = -std::log(prec_c);
  const double prec_z = 1.0 + 1.0 / s2;
  m.slice("encz.w_x")[0] = (1.0 / s2) / prec_z;
  m.slice("encz.u_c")[0] = -(1.0 / s2) / prec_z;
  m.slice("encz.v_b")[0] = -std::log(prec_z);
  m.slice("dec.w")[0] = 1.0;
  m.slice("dec.w_z")[0] = 1.0;
  m.slice("dec.scale")[0] = softplus_inverse(sigma);
  return m;
}

// ---------------------------------------------------------------------------

std::vector<Check> check_special(const Options&) {
  const std::string s = "special";
  std::vector<Check> out;
  const auto grid = log_grid(1e-3, 50.0, 200);
  double e_lg = 0.0, e_dg = 0.0, e_i0 = 0.0, e_i0s = 0.0, e_r = 0.0;
  for (double x : grid) {
    const long double xl = x;
    e_lg = std::max(e_lg, std::abs(special::lgamma(x) - static_cast<double>(boost::math::lgamma(xl))));
    e_dg = std::max(e_dg, std::abs(special::digamma(x) - static_cast<double>(boost::math::digamma(xl))));
    const long double i0 = boost::math::cyl_bessel_i(0, xl);
    const long double i1 = boost::math::cyl_bessel_i(1, xl);
    e_i0 = std::max(e_i0, std::abs(special::log_bessel_i0(x) - static_cast<double>(std::log(i0))));
    e_i0s = std::max(e_i0s, std::abs(special::log_bessel_i0(x) -
                                     static_cast<double>(std::log(bessel_i0_series(xl)))));
    e_r = std::max(e_r, std::abs(special::bessel_ratio(x) - static_cast<double>(i1 / i0)));
  }
  out.push_back(make(s, "lgamma_vs_reference", e_lg, 1e-8, "200-point grid on [1e-3, 50]"));
  out.push_back(make(s, "digamma_vs_reference", e_dg, 1e-8, "200-point grid on [1e-3, 50]"));
  out.push_back(make(s, "log_bessel_i0_vs_reference", e_i0, 1e-8, "200-point grid on [1e-3, 50]"));
  out.push_back(make(s, "log_bessel_i0_vs_power_series", e_i0s, 1e-8, "200-point grid on [1e-3, 50]"));
  out.push_back(make(s, "bessel_ratio_vs_reference", e_r, 1e-8, "200-point grid on [1e-3, 50]"));
  out.push_back(make(s, "lgamma_half", std::abs(special::lgamma(0.5) - 0.5 * std::log(std::numbers::pi)),
                     1e-12));
  out.push_back(make(s, "digamma_one", std::abs(special::digamma(1.0) + std::numbers::egamma), 1e-12));
  return out;
}

std::vector<Check> check_dists(const Options& opt) {
  const std::string s = "dists";
  std::vector<Check> out;
  Rng rng = derive_rng(opt.seed, {101});

  // Trapezoid normalisation at random parameter settings.
  double worst = 0.0;
  auto trapezoid = [](auto logpdf, double lo, double hi, std::size_t n) {
    const double h = (hi - lo) / static_cast<double>(n);
    double acc = 0.5 * (std::exp(logpdf(lo)) + std::exp(logpdf(hi)));
    for (std::size_t i = 1; i < n; ++i) acc += std::exp(logpdf(lo + h * static_cast<double>(i)));
    return acc * h;
  };
  for (int rep = 0; rep < 5; ++rep) {
    const double mu = uniform(rng, -3.0, 3.0), sigma = uniform(rng, 0.3, 3.0);
    const dists::FamilyParams<double> g = dists::Gaussian<double>{mu, sigma};
    worst = std::max(worst, std::abs(1.0 - trapezoid([&](double x) { return dists::family_logpdf(g, x); },
                                                     mu - 12 * sigma, mu + 12 * sigma, 20000)));
    const double half = uniform(rng, 0.0, 3.0), ms = uniform(rng, 0.3, 2.0);
    const dists::FamilyParams<double> mx = dists::Mixture2<double>{mu, half, ms};
    worst = std::max(worst, std::abs(1.0 - trapezoid([&](double x) { return dists::family_logpdf(mx, x); },
                                                     mu - half - 12 * ms, mu + half + 12 * ms, 20000)));
    const dists::FamilyParams<double> vm =
        dists::VonMises<double>{uniform(rng, -3.0, 3.0), uniform(rng, 0.0, 10.0)};
    worst = std::max(worst, std::abs(1.0 - trapezoid([&](double x) { return dists::family_logpdf(vm, x); },
                                                     -std::numbers::pi + 1e-12, std::numbers::pi, 20000)));
    const double alpha = uniform(rng, 1.0, 6.0), beta = uniform(rng, 0.5, 3.0);
    const dists::FamilyParams<double> ga = dists::GammaShape<double>{alpha, beta};
    worst = std::max(worst, std::abs(1.0 - trapezoid([&](double x) { return dists::family_logpdf(ga, x); },
                                                     1e-9, 60.0 / beta, 200000)));
  }
  out.push_back(make(s, "continuous_normalisation", worst, 1e-3, "trapezoid, 5 settings per family"));

  double mass_err = 0.0;
  for (int type = 0; type < 4; ++type) {
    dists::Discrete<double> d{};
    for (int k = 1; k <= 8; ++k) {
      const bool in = type == 0 ? k <= 4 : type == 1 ? k >= 5 : type == 2 ? k % 2 == 1 : k % 2 == 0;
      d.probs[k - 1] = in ? 0.25 : 0.0;
    }
    double total = 0.0;
    for (int k = 1; k <= 8; ++k) {
      if (d.probs[k - 1] > 0.0) total += std::exp(dists::family_logpdf<double>(d, k));
    }
    mass_err = std::max(mass_err, std::abs(total - 1.0));
  }
  out.push_back(make(s, "discrete_mass", mass_err, 1e-15));

  // Analytic KL against a Monte Carlo estimate of E_q[log q - log p].
  double worst_z = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    dists::GaussianPosterior<double> q{{uniform(rng, -1, 1), uniform(rng, -1, 1)},
                                       {uniform(rng, -1, 1), uniform(rng, -1, 1)}};
    dists::GaussianPosterior<double> p{{uniform(rng, -1, 1), uniform(rng, -1, 1)},
                                       {uniform(rng, -1, 1), uniform(rng, -1, 1)}};
    std::vector<double> samples;
    for (int i = 0; i < 10000; ++i) {
      const auto z = dists::reparam_sample(q, dists::standard_normals(rng, 2));
      samples.push_back(dists::gaussian_posterior_logpdf(q, z) - dists::gaussian_posterior_logpdf(p, z));
    }
    const auto ms = mean_se(samples);
    worst_z = std::max(worst_z, std::abs(ms.mean - dists::gaussian_kl(q, p)) / ms.se);
  }
  out.push_back(make(s, "kl_matches_monte_carlo", worst_z, 3.0, "max |z-score| over 5 pairs, 10k draws"));

  // Reparameterised draws: mean and variance within 3 standard errors.
  {
    const dists::GaussianPosterior<double> q{{0.7}, {std::log(2.5)}};
    std::vector<double> xs, sq;
    for (int i = 0; i < 50000; ++i) xs.push_back(dists::reparam_sample(q, dists::standard_normals(rng, 1))[0]);
    const auto ms = mean_se(xs);
    for (double x : xs) sq.push_back((x - 0.7) * (x - 0.7));
    const auto vs = mean_se(sq);
    out.push_back(make(s, "reparam_mean", std::abs(ms.mean - 0.7) / ms.se, 3.0, "z-score, 50k draws"));
    out.push_back(make(s, "reparam_variance", std::abs(vs.mean - 2.5) / vs.se, 3.0, "z-score, 50k draws"));
  }

  // Sampler moments.
  {
    std::vector<double> g, ga;
    std::array<int, 8> counts{};
    const dists::FamilyParams<double> disc = dists::Discrete<double>{{0, 0, 0, 0, 0.25, 0.25, 0.25, 0.25}};
    for (int i = 0; i < 10000; ++i) {
      g.push_back(dists::family_sample(dists::Gaussian<double>{0.0, 1.0}, rng));
      ga.push_back(dists::family_sample(dists::GammaShape<double>{3.0, 1.0}, rng));
      ++counts[static_cast<std::size_t>(dists::family_sample(disc, rng)) - 1];
    }
    const auto gm = mean_se(g);
    double var = 0.0;
    for (double x : g) var += (x - gm.mean) * (x - gm.mean);
    var /= static_cast<double>(g.size() - 1);
    out.push_back(make(s, "gaussian_sample_mean", std::abs(gm.mean), 0.05));
    out.push_back(make(s, "gaussian_sample_variance", std::abs(var - 1.0), 0.1));
    out.push_back(make(s, "gamma_sample_mean", std::abs(mean_se(ga).mean - 3.0), 0.1));
    double freq_err = 0.0;
    for (int k = 0; k < 8; ++k) {
      const double expect = k >= 4 ? 0.25 : 0.0;
      freq_err = std::max(freq_err, std::abs(counts[k] / 10000.0 - expect));
    }
    out.push_back(make(s, "discrete_sample_frequencies", freq_err, 0.02));
    std::vector<double> cosines;
    const double kappa = 2.0;
    for (int i = 0; i < 20000; ++i) {
      cosines.push_back(std::cos(dists::family_sample(dists::VonMises<double>{0.5, kappa}, rng) - 0.5));
    }
    const auto cm = mean_se(cosines);
    out.push_back(make(s, "von_mises_mean_resultant",
                       std::abs(cm.mean - special::bessel_ratio(kappa)) / cm.se, 3.0,
                       "E cos(x - mu) = I1/I0, z-score"));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradients

namespace {

using VarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

double op_grad_error(const VarFn& fn, const std::vector<double>& point) {
  Tape tape;
  std::vector<Var> leaves;
  for (double p : point) leaves.push_back(tape.input(p));
  const Var out = fn(tape, leaves);
  return ad::grad_check(tape, out, point).max_relative_error;
}

Model random_model(const ModelConfig& c, Rng& rng, double scale) {
  Model m = Model::zeros(c);
  for (auto& p : m.params) p = scale * dists::standard_normal(rng);
  if (c.family == Family::kVonMises) m.slice("dec.b")[0] += 1.5;
  return m;
}

using LossFn = std::function<obj::LossBreakdown<Var>(const model::ModelView<Var>&, Rng&)>;

// Grad check of a loss at the given parameters with noise frozen on the tape.
double loss_grad_error(const Model& m, const LossFn& loss, std::uint64_t noise_seed) {
  Tape tape;
  std::vector<Var> leaves;
  for (double p : m.params) leaves.push_back(tape.input(p));
  const model::ModelView<Var> v(m.config, m.layout, std::span<const Var>(leaves));
  Rng rng(noise_seed);
  const auto b = loss(v, rng);
  return ad::grad_check(tape, b.total, m.params).max_relative_error;
}

std::vector<double> sample_data(Family f, std::size_t n, Rng& rng) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) {
    switch (f) {
      case Family::kGaussian:
      case Family::kMixture2: xs.push_back(uniform(rng, -2.0, 2.0)); break;
      case Family::kVonMises: xs.push_back(uniform(rng, -3.0, 3.0)); break;
      case Family::kGamma: xs.push_back(uniform(rng, 0.3, 4.0)); break;
      case Family::kDiscrete: xs.push_back(static_cast<double>(1 + uniform_index(rng, 8))); break;
    }
  }
  return xs;
}

}  // namespace

std::vector<Check> check_gradients(const Options& opt) {
  const std::string s = "gradients";
  std::vector<Check> out;
  Rng rng = derive_rng(opt.seed, {201});
  const std::size_t pts = opt.grad_points;

  struct OpCase {
    const char* name;
    std::size_t arity;
    double lo, hi;
    VarFn fn;
  };
  const std::vector<OpCase> ops = {
      {"add", 2, -3, 3, [](Tape&, const std::vector<Var>& v) { return v[0] + v[1]; }},
      {"sub", 2, -3, 3, [](Tape&, const std::vector<Var>& v) { return v[0] - v[1]; }},
      {"mul", 2, -3, 3, [](Tape&, const std::vector<Var>& v) { return v[0] * v[1]; }},
      {"div", 2, 0.5, 3, [](Tape&, const std::vector<Var>& v) { return v[0] / v[1]; }},
      {"neg", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return -v[0]; }},
      {"add_const", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return v[0] + 1.7; }},
      {"mul_const", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return v[0] * -2.3; }},
      {"const_sub", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return 0.4 - v[0]; }},
      {"div_const", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return v[0] / 3.1; }},
      {"const_div", 1, 0.5, 3, [](Tape&, const std::vector<Var>& v) { return 2.0 / v[0]; }},
      {"exp", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return ad::exp(v[0]); }},
      {"log", 1, 0.2, 5, [](Tape&, const std::vector<Var>& v) { return ad::log(v[0]); }},
      {"log1p", 1, -0.5, 5, [](Tape&, const std::vector<Var>& v) { return ad::log1p(v[0]); }},
      {"sqrt", 1, 0.2, 5, [](Tape&, const std::vector<Var>& v) { return ad::sqrt(v[0]); }},
      {"square", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return ad::square(v[0]); }},
      {"sin", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return ad::sin(v[0]); }},
      {"cos", 1, -3, 3, [](Tape&, const std::vector<Var>& v) { return ad::cos(v[0]); }},
      {"atan2", 2, 0.3, 3, [](Tape&, const std::vector<Var>& v) { return ad::atan2(v[0], v[1] - 1.5); }},
      {"softplus", 1, -5, 5, [](Tape&, const std::vector<Var>& v) { return ad::softplus(v[0]); }},
      {"lgamma", 1, 0.1, 10, [](Tape&, const std::vector<Var>& v) { return ad::lgamma(v[0]); }},
      {"digamma", 1, 0.3, 10, [](Tape&, const std::vector<Var>& v) { return ad::digamma(v[0]); }},
      {"log_bessel_i0", 1, 0.0, 30, [](Tape&, const std::vector<Var>& v) { return ad::log_bessel_i0(v[0]); }},
      {"bessel_ratio", 1, 0.0, 30, [](Tape&, const std::vector<Var>& v) { return ad::bessel_ratio(v[0]); }},
      {"sum", 4, -3, 3, [](Tape&, const std::vector<Var>& v) { return ad::sum(std::span<const Var>(v)); }},
      {"logsumexp", 4, -3, 3,
       [](Tape&, const std::vector<Var>& v) { return ad::logsumexp(std::span<const Var>(v)); }},
  };
  for (const auto& op : ops) {
    double worst = 0.0;
    for (std::size_t p = 0; p < pts; ++p) {
      std::vector<double> point(op.arity);
      for (auto& x : point) x = uniform(rng, op.lo, op.hi);
      worst = std::max(worst, op_grad_error(op.fn, point));
    }
    out.push_back(make(s, std::string("op_") + op.name, worst, 1e-5,
                       std::to_string(pts) + " random points"));
  }

  // Composition: one tape for f(g(x)) against separately taped Jacobians.
  {
    double worst = 0.0;
    auto g = [](const std::vector<Var>& x) {
      return std::vector<Var>{ad::sin(x[0]) * x[1], ad::exp(x[0]) + ad::square(x[1])};
    };
    auto f = [](const std::vector<Var>& u) { return ad::log1p(ad::square(u[0])) + u[0] * u[1]; };
    for (int rep = 0; rep < 10; ++rep) {
      const std::vector<double> x0{uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)};
      Tape whole;
      std::vector<Var> xs{whole.input(x0[0]), whole.input(x0[1])};
      const Var out_whole = f(g(xs));
      whole.backward(out_whole);
      const auto direct = whole.leaf_gradients();

      std::vector<std::vector<double>> jac;
      std::vector<double> u0;
      for (int k = 0; k < 2; ++k) {
        Tape tg;
        std::vector<Var> xg{tg.input(x0[0]), tg.input(x0[1])};
        const auto gv = g(xg);
        tg.backward(gv[k]);
        jac.push_back(tg.leaf_gradients());
        u0.push_back(gv[k].value());
      }
      Tape tf;
      std::vector<Var> uf{tf.input(u0[0]), tf.input(u0[1])};
      const Var fv = f(uf);
      tf.backward(fv);
      const auto gf = tf.leaf_gradients();
      for (int i = 0; i < 2; ++i) {
        const double chained = gf[0] * jac[0][i] + gf[1] * jac[1][i];
        worst = std::max(worst, std::abs(chained - direct[i]));
      }
    }
    out.push_back(make(s, "composition_chain_rule", worst, 1e-10, "10 random points"));
  }

  // Determinism: repeated forward/backward passes agree bit for bit.
  {
    auto run = [] {
      Tape t;
      std::vector<Var> v{t.input(0.3), t.input(-1.1), t.input(2.2)};
      const Var y = ad::logsumexp(std::span<const Var>(v)) * ad::lgamma(v[2]) + ad::log_bessel_i0(v[2]);
      t.backward(y);
      auto g = t.leaf_gradients();
      g.push_back(y.value());
      return g;
    };
    const auto a = run(), b = run();
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] == b[i] ? 0.0 : 1.0;
    out.push_back(make(s, "repeat_bit_identical", diff, 0.0));
  }

  // Log-density examples.
  {
    const double eg = op_grad_error(
        [](Tape&, const std::vector<Var>& v) {
          return dists::gaussian_logpdf<Var>(0.3, v[0], ad::exp(0.5 * v[1]));
        },
        {-0.2, 0.1});
    out.push_back(make(s, "gaussian_logpdf", eg, 1e-5, "(x, mu, log var) = (0.3, -0.2, 0.1)"));
    const double egam = op_grad_error(
        [](Tape&, const std::vector<Var>& v) {
          return dists::family_logpdf<Var>(dists::GammaShape<Var>{v[0], 1.0}, 1.7);
        },
        {2.3});
    out.push_back(make(s, "gamma_logpdf", egam, 1e-5, "(x, alpha) = (1.7, 2.3)"));
  }

  // Every objective at random parameter points with frozen noise.
  auto objective_case = [&](const std::string& name, const ModelConfig& cfg, const LossFn& loss) {
    double worst = 0.0;
    for (std::size_t p = 0; p < pts; ++p) {
      const Model m = random_model(cfg, rng, 0.3);
      worst = std::max(worst, loss_grad_error(m, loss, opt.seed + p));
    }
    out.push_back(make(s, "objective_" + name, worst, 1e-5, std::to_string(pts) + " random points"));
  };
  for (Family f : {Family::kGaussian, Family::kMixture2, Family::kVonMises, Family::kGamma,
                   Family::kDiscrete}) {
    ModelConfig cfg;
    cfg.family = f;
    cfg.latent_dim = 2;
    const auto d = sample_data(f, 4, rng);
    const double x = d[1];
    const std::string fam(dists::family_name(f));
    objective_case("vhe_" + fam, cfg, [d, x](const model::ModelView<Var>& v, Rng& r) {
      return obj::loss_vhe(v, x, d, 10, r);
    });
    if (f != Family::kGaussian) continue;
    objective_case("vae", cfg, [x](const model::ModelView<Var>& v, Rng& r) { return obj::loss_vae(v, x, r); });
    objective_case("ns", cfg, [d](const model::ModelView<Var>& v, Rng& r) { return obj::loss_ns(v, d, r); });
    objective_case("resample", cfg, [d, x](const model::ModelView<Var>& v, Rng& r) {
      return obj::loss_resample(v, x, d, r);
    });
    objective_case("rescale", cfg, [d](const model::ModelView<Var>& v, Rng& r) {
      return obj::loss_rescale(v, d[2], d, 10, r);
    });
    objective_case("mc_samples_3", cfg, [d, x](const model::ModelView<Var>& v, Rng& r) {
      return obj::loss_vhe(v, x, d, 10, r, obj::LossOptions{0.7, 3});
    });
    ModelConfig zc = cfg;
    zc.z_branch = true;
    objective_case("vhe_z", zc, [d, x](const model::ModelView<Var>& v, Rng& r) {
      return obj::loss_vhe_z(v, x, d, 10, r);
    });
    zc.z_conditions_on_c = true;
    objective_case("vhe_z_conditioned", zc, [d, x](const model::ModelView<Var>& v, Rng& r) {
      return obj::loss_vhe_z(v, x, d, 10, r);
    });
    ModelConfig fc = cfg;
    fc.structure = Structure::kFactorial;
    const auto d2 = sample_data(f, 3, rng);
    objective_case("structured", fc, [d, d2, x](const model::ModelView<Var>& v, Rng& r) {
      const obj::FactorSupport sup[2] = {{d, 60}, {d2, 80}};
      return obj::loss_structured(v, x, std::span<const obj::FactorSupport>(sup), r);
    });
    ModelConfig hc = cfg;
    hc.structure = Structure::kHierarchical;
    objective_case("hierarchical", hc, [d, d2, x](const model::ModelView<Var>& v, Rng& r) {
      std::vector<double> da = d;
      da.insert(da.end(), d2.begin(), d2.end());
      return obj::loss_hierarchical(v, x, da, d, 100, 10, r);
    });
    ModelConfig tc = cfg;
    tc.aux_embed_dim = 3;
    tc.aux_rows = 6;
    const auto cls = sample_data(f, 6, rng);
    objective_case("tightened", tc, [cls](const model::ModelView<Var>& v, Rng& r) {
      const std::size_t idx[2] = {4, 1};
      return obj::loss_tightened(v, cls[0], cls, std::span<const std::size_t>(idx), 0, r);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Identities

std::vector<Check> check_identities(const Options& opt) {
  const std::string s = "identities";
  std::vector<Check> out;
  Rng rng = derive_rng(opt.seed, {301});
  double chain = 0.0, structured = 0.0, rescale_sum = 0.0, hier = 0.0, negative_kl = 0.0;
  for (Family f : {Family::kGaussian, Family::kMixture2, Family::kVonMises, Family::kGamma,
                   Family::kDiscrete}) {
    ModelConfig cfg;
    cfg.family = f;
    cfg.latent_dim = 2;
    for (int rep = 0; rep < 10; ++rep) {
      const Model m = random_model(cfg, rng, 0.5);
      const auto v = model::view(m);
      const auto d = sample_data(f, 5, rng);
      const double x = d[0];
      const double one[1] = {x};
      const std::uint64_t noise = opt.seed + static_cast<std::uint64_t>(rep);
      Rng r0(noise), r1(noise), r2(noise), r3(noise);
      const double vae = obj::loss_vae(v, x, r0).total;
      const double vhe = obj::loss_vhe(v, x, std::span<const double>(one), 1, r1).total;
      const double res = obj::loss_resample(v, x, std::span<const double>(one), r2).total;
      const double rsc = obj::loss_rescale(v, x, std::span<const double>(one), 1, r3).total;
      chain = std::max({chain, std::abs(vae - vhe), std::abs(vae - res), std::abs(vae - rsc)});

      Rng r4(noise), r5(noise);
      const double vhe_d = obj::loss_vhe(v, d[3], d, 50, r4).total;
      const obj::FactorSupport sup[1] = {{d, 50}};
      const double st = obj::loss_structured(v, d[3], std::span<const obj::FactorSupport>(sup), r5).total;
      structured = std::max(structured, std::abs(vhe_d - st));

      const std::size_t class_size = 40;
      double sum = 0.0;
      for (double xi : d) {
        Rng r(noise);
        sum += obj::loss_rescale(v, xi, d, class_size, r).total;
      }
      Rng r6(noise);
      const auto ns = obj::loss_ns(v, d, r6);
      const double rhs = ns.total - (1.0 - static_cast<double>(d.size()) / class_size) * ns.term("kl_c");
      rescale_sum = std::max(rescale_sum, std::abs(sum - rhs) / std::max(1.0, std::abs(rhs)));

      for (const auto& t : ns.terms) negative_kl = std::max(negative_kl, -t.value);
    }
  }
  out.push_back(make(s, "vae_vhe_resample_rescale_chain", chain, 1e-12, "5 families x 10 models"));
  out.push_back(make(s, "structured_single_factor_is_vhe", structured, 1e-12));
  out.push_back(make(s, "rescale_sum_equals_ns_minus_kl", rescale_sum, 1e-10, "relative"));

  // Hierarchical with q_a = prior and p(c|a) = N(0, I) reduces to VHE.
  {
    ModelConfig fc;
    fc.latent_dim = 2;
    ModelConfig hc = fc;
    hc.structure = Structure::kHierarchical;
    for (int rep = 0; rep < 10; ++rep) {
      const Model flat = random_model(fc, rng, 0.5);
      Model h = Model::zeros(hc);
      for (const auto& sl : flat.layout.slices()) {
        const auto src = flat.slice(sl.name);
        std::copy(src.begin(), src.end(), h.slice(sl.name).begin());
      }
      const auto d = sample_data(Family::kGaussian, 4, rng);
      const auto da = sample_data(Family::kGaussian, 7, rng);
      Rng r1(opt.seed + 7), r2(opt.seed + 7);
      const auto a = obj::loss_vhe(model::view(flat), d[0], d, 20, r1);
      const auto b = obj::loss_hierarchical(model::view(h), d[0], da, d, 200, 20, r2);
      hier = std::max({hier, std::abs(a.total - b.total), std::abs(b.term("kl_a"))});
      negative_kl = std::max({negative_kl, -b.term("kl_a"), -b.term("kl_c")});
    }
  }
  out.push_back(make(s, "hierarchical_reduces_to_vhe", hier, 1e-12));

  // With f = 0 every r is uniform over the class, so the tightened loss sits
  // a constant (|D| log n - log C(n, |D|)) / n above VHE.
  {
    ModelConfig tc;
    tc.latent_dim = 2;
    tc.aux_embed_dim = 3;
    tc.aux_rows = 8;
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      Model m = random_model(tc, rng, 0.5);
      for (auto& w : m.slice("aux.w_f")) w = 0.0;
      for (auto& b : m.slice("aux.b_f")) b = 0.0;
      const auto cls = sample_data(Family::kGaussian, 8, rng);
      const std::size_t n_d = 1 + static_cast<std::size_t>(rep % 4);
      const auto idx = synth::sample_subset(rng, cls.size(), n_d);
      std::vector<double> d;
      for (auto i : idx) d.push_back(cls[i]);
      Rng r1(opt.seed + 11), r2(opt.seed + 11);
      const double tight =
          obj::loss_tightened(model::view(m), cls[3], cls, std::span<const std::size_t>(idx), 0, r1).total;
      const double loose = obj::loss_vhe(model::view(m), cls[3], d, cls.size(), r2).total;
      const double n = static_cast<double>(cls.size());
      const double constant =
          (-obj::log_binomial(cls.size(), n_d) + static_cast<double>(n_d) * std::log(n)) / n;
      worst = std::max(worst, std::abs((tight - loose) - constant));
    }
    out.push_back(make(s, "tightened_uniform_r_offset", worst, 1e-10));
  }

  // Per-element latent: q(z) equal to the prior gives kl_z = 0; with w_z = 0
  // the loss equals VHE.
  {
    ModelConfig zc;
    zc.latent_dim = 2;
    zc.z_branch = true;
    ModelConfig fc;
    fc.latent_dim = 2;
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      const Model flat = random_model(fc, rng, 0.5);
      Model z = Model::zeros(zc);
      for (const auto& sl : flat.layout.slices()) {
        const auto src = flat.slice(sl.name);
        std::copy(src.begin(), src.end(), z.slice(sl.name).begin());
      }
      const auto d = sample_data(Family::kGaussian, 3, rng);
      Rng r1(opt.seed + 13), r2(opt.seed + 13);
      const auto a = obj::loss_vhe(model::view(flat), d[0], d, 20, r1);
      const auto b = obj::loss_vhe_z(model::view(z), d[0], d, 20, r2);
      worst = std::max({worst, std::abs(a.total - b.total), std::abs(b.term("kl_z"))});
    }
    out.push_back(make(s, "vhe_z_prior_q_reduces_to_vhe", worst, 1e-12));
  }

  {
    ModelConfig cfg;
    cfg.latent_dim = 2;
    const Model zero = Model::zeros(cfg);
    Rng r(opt.seed);
    const double d[2] = {0.3, -1.2};
    const auto b = obj::loss_vhe(model::view(zero), 0.3, std::span<const double>(d), 10, r);
    out.push_back(make(s, "zero_model_kl_is_zero", std::abs(b.term("kl_c")), 0.0));
  }
  out.push_back(make(s, "kl_terms_nonnegative", negative_kl, 0.0));
  return out;
}

// ---------------------------------------------------------------------------
// Bounds on the conjugate model

namespace {

// Classes drawn from c ~ N(0,1), x ~ N(c,1).
synth::Dataset conjugate_classes(std::size_t n_classes, std::size_t n, std::uint64_t seed) {
  synth::Hyper h;
  h.gaussian_mu_sd = 1.0;
  h.gaussian_sigma = 1.0;
  return synth::generate(Family::kGaussian, n_classes, n, seed, h);
}

Check bound_check(const std::string& name, const std::vector<double>& deltas,
                  const char* what = "bound - exact") {
  const auto ms = mean_se(deltas);
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean(%s) over %zu episodes; se=%.3g", what, deltas.size(), ms.se);
  return make("bounds", name, ms.mean, 3.0 * ms.se, buf);
}

}  // namespace

std::vector<Check> check_bounds(const Options& opt) {
  std::vector<Check> out;
  const std::size_t episodes = opt.bound_episodes;
  const std::size_t n = 10, n_classes = 20;
  const auto ds = conjugate_classes(n_classes, n, opt.seed + 401);
  const eval::ConjugateHyper hyper{};
  std::vector<double> log_px;
  for (const auto& c : ds.classes) log_px.push_back(eval::exact_conjugate_logpX(hyper, c.elements));

  // VHE and NS with D = X and the exact posterior encoder.
  {
    const Model m = conjugate_model(n);
    const auto v = model::view(m);
    std::vector<double> vhe, ns;
    for (std::size_t e = 0; e < episodes; ++e) {
      Rng rng = derive_rng(opt.seed, {402, e});
      const std::size_t cls = e % n_classes;
      const auto& xs = ds.classes[cls].elements;
      const double x = xs[uniform_index(rng, n)];
      vhe.push_back(-obj::loss_vhe(v, x, xs, n, rng).total - log_px[cls] / static_cast<double>(n));
      ns.push_back((-obj::loss_ns(v, xs, rng).total - log_px[cls]) / static_cast<double>(n));
    }
    out.push_back(bound_check("vhe_below_exact", vhe));
    out.push_back(bound_check("ns_full_support_below_exact", ns));
  }

  // Hierarchical: a ~ N(0,1), c|a ~ N(a,1), x|c ~ N(c,1); groups of k classes.
  {
    const std::size_t k = 4, m_el = 5, n_groups = 10;
    Rng gen = derive_rng(opt.seed, {403});
    std::vector<std::vector<std::vector<double>>> groups(n_groups);
    std::vector<double> group_logp;
    const std::size_t total = k * m_el;
    std::vector<double> cov(total * total);
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = 0; j < total; ++j) {
        cov[i * total + j] = 1.0 + (i / m_el == j / m_el ? 1.0 : 0.0) + (i == j ? 1.0 : 0.0);
      }
    }
    for (auto& g : groups) {
      const double a = dists::standard_normal(gen);
      std::vector<double> flat;
      for (std::size_t c = 0; c < k; ++c) {
        const double mu = a + dists::standard_normal(gen);
        std::vector<double> xs;
        for (std::size_t i = 0; i < m_el; ++i) xs.push_back(mu + dists::standard_normal(gen));
        flat.insert(flat.end(), xs.begin(), xs.end());
        g.push_back(xs);
      }
      group_logp.push_back(mvn_zero_mean_logpdf(flat, cov));
    }
    const Model m = conjugate_hierarchical_model(k, m_el);
    const auto v = model::view(m);
    std::vector<double> deltas;
    for (std::size_t e = 0; e < episodes; ++e) {
      Rng rng = derive_rng(opt.seed, {404, e});
      const std::size_t gi = e % n_groups;
      const auto& g = groups[gi];
      std::vector<double> all;
      for (const auto& c : g) all.insert(all.end(), c.begin(), c.end());
      const std::size_t pick = uniform_index(rng, total);
      const auto& cls = g[pick / m_el];
      const double bound = -obj::loss_hierarchical(v, all[pick], all, cls, total, m_el, rng).total;
      deltas.push_back(bound - group_logp[gi] / static_cast<double>(total));
    }
    out.push_back(bound_check("hierarchical_below_exact", deltas));
  }

  // Per-element latent: x = c + z + noise, exact q(c; X) and q(z; c, x).
  {
    const double sigma = 0.5;
    const eval::ConjugateHyper zh{0.0, 1.0, std::sqrt(1.0 + sigma * sigma)};
    Rng gen = derive_rng(opt.seed, {405});
    std::vector<std::vector<double>> classes;
    std::vector<double> logp;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double mu = dists::standard_normal(gen);
      std::vector<double> xs;
      for (std::size_t i = 0; i < n; ++i) {
        xs.push_back(mu + dists::standard_normal(gen) + sigma * dists::standard_normal(gen));
      }
      logp.push_back(eval::exact_conjugate_logpX(zh, xs));
      classes.push_back(xs);
    }
    const Model m = conjugate_z_model(n, sigma);
    const auto v = model::view(m);
    std::vector<double> deltas;
    for (std::size_t e = 0; e < episodes; ++e) {
      Rng rng = derive_rng(opt.seed, {406, e});
      const std::size_t cls = e % n_classes;
      const double x = classes[cls][uniform_index(rng, n)];
      deltas.push_back(-obj::loss_vhe_z(v, x, classes[cls], n, rng).total -
                       logp[cls] / static_cast<double>(n));
    }
    out.push_back(bound_check("vhe_z_below_exact", deltas));
  }

  // Tightened bound with |D| = 1: fit the inverse model, then compare with
  // the loose bound on shared episodes.
  {
    const std::size_t nt = 5;
    auto one = conjugate_classes(1, nt, opt.seed + 407);
    const double exact = eval::exact_conjugate_logpX(hyper, one.classes[0].elements) / static_cast<double>(nt);
    Model base = conjugate_model(1);
    ModelConfig tc = base.config;
    tc.aux_embed_dim = 4;
    tc.aux_rows = nt;
    Rng init_rng = derive_rng(opt.seed, {408});
    Model m = Model::init(tc, init_rng);
    for (const auto& sl : base.layout.slices()) {
      const auto src = base.slice(sl.name);
      std::copy(src.begin(), src.end(), m.slice(sl.name).begin());
    }
    train::TrainConfig cfg;
    cfg.objective.kind = obj::Kind::kTightened;
    cfg.objective.d_size = 1;
    cfg.M = 32;
    cfg.epochs = 1500;
    cfg.anneal_epochs = 0;
    cfg.runs = 1;
    cfg.seed = opt.seed + 409;
    cfg.frozen = {"enc", "dec"};
    cfg.adam.lr = 0.05;
    m = train::train_run(one, m, cfg, 0).model;

    const auto v = model::view(m);
    const auto& xs = one.classes[0].elements;
    std::vector<double> tight, diff;
    for (std::size_t e = 0; e < episodes; ++e) {
      Rng rng = derive_rng(opt.seed, {410, e});
      const double x = xs[uniform_index(rng, nt)];
      const std::size_t idx[1] = {uniform_index(rng, nt)};
      const double d[1] = {xs[idx[0]]};
      Rng shared = rng;
      const double t = -obj::loss_tightened(v, x, xs, std::span<const std::size_t>(idx), 0, rng).total;
      const double l = -obj::loss_vhe(v, x, std::span<const double>(d), nt, shared).total;
      tight.push_back(t - exact);
      diff.push_back(l - t);
    }
    out.push_back(bound_check("tightened_below_exact", tight));
    out.push_back(bound_check("tightened_not_looser_than_vhe", diff, "loose - tightened"));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Check> check_gap(const Options& opt) {
  const std::string s = "gap";
  Rng rng = derive_rng(opt.seed, {501});
  double worst = 0.0, worst_quad = 0.0;
  ModelConfig cfg;
  cfg.latent_dim = 1;
  const auto gh = eval::gauss_hermite(64);
  for (int inst = 0; inst < 100; ++inst) {
    const eval::ConjugateHyper h{uniform(rng, -1, 1), uniform(rng, 0.5, 2), uniform(rng, 0.5, 2)};
    const std::size_t n = 1 + uniform_index(rng, 10);
    std::vector<double> xs;
    const double c = h.m0 + h.tau0 * dists::standard_normal(rng);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(c + h.sigma * dists::standard_normal(rng));
    // q(c; D) from a random linear encoder on a random subset of X.
    const auto idx = synth::sample_subset(rng, n, 1 + uniform_index(rng, n));
    std::vector<double> d;
    for (auto i : idx) d.push_back(xs[i]);
    Model m = random_model(cfg, rng, 0.5);
    const auto q = model::view(m).encode_class(d);
    const double qm = q.mean[0], qv = std::exp(q.log_var[0]);

    const double logp = eval::exact_conjugate_logpX(h, xs);
    const double bound = eval::conjugate_elbo(h, xs, qm, qv);
    const auto [pm, pv] = eval::conjugate_posterior(h, xs);
    worst = std::max(worst, std::abs(logp - bound - eval::kl_gauss_1d(qm, qv, pm, pv)));

    // The closed-form bound against Gauss-Hermite expectation under q.
    double quad = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      const double cc = qm + std::sqrt(2.0 * qv) * gh.nodes[i];
      double integrand = -0.5 * std::log(2.0 * std::numbers::pi * h.tau0 * h.tau0) -
                         0.5 * (cc - h.m0) * (cc - h.m0) / (h.tau0 * h.tau0) +
                         0.5 * std::log(2.0 * std::numbers::pi * qv) + 0.5 * (cc - qm) * (cc - qm) / qv;
      for (double x : xs) {
        integrand += -0.5 * std::log(2.0 * std::numbers::pi * h.sigma * h.sigma) -
                     0.5 * (x - cc) * (x - cc) / (h.sigma * h.sigma);
      }
      quad += std::exp(gh.log_weights[i]) * integrand;
    }
    quad /= std::sqrt(std::numbers::pi);
    worst_quad = std::max(worst_quad, std::abs(quad - bound));
  }
  return {make(s, "logp_minus_bound_equals_posterior_kl", worst, 1e-8, "100 random conjugate instances"),
          make(s, "closed_form_bound_matches_quadrature", worst_quad, 1e-8)};
}

std::vector<Check> check_estimator(const Options& opt) {
  const std::string s = "estimator";
  std::vector<Check> out;
  Rng rng = derive_rng(opt.seed, {601});
  const eval::ConjugateHyper hyper{};

  double worst_iw = 0.0, worst_quad = 0.0, worst_nodes = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 1 + uniform_index(rng, 5);
    std::vector<double> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(uniform(rng, -2, 2));
    const double exact = -eval::exact_conjugate_logpX(hyper, xs) / static_cast<double>(n);
    const Model m = conjugate_model(n);
    const auto v = model::view(m);
    for (std::size_t k : {1, 10, 200}) {
      Rng r = derive_rng(opt.seed, {602, static_cast<std::uint64_t>(rep), k});
      worst_iw = std::max(worst_iw, std::abs(eval::iw_joint_nll(v, xs, k, r) - exact));
    }
    const double q64 = eval::quadrature_joint_nll(v, xs, 64);
    const double q128 = eval::quadrature_joint_nll(v, xs, 128);
    worst_quad = std::max(worst_quad, std::abs(q64 - exact));
    worst_nodes = std::max(worst_nodes, std::abs(q64 - q128));
  }
  out.push_back(make(s, "iw_exact_posterior_is_exact", worst_iw, 1e-10, "k in {1, 10, 200}"));
  out.push_back(make(s, "quadrature_matches_closed_form", worst_quad, 1e-9, "|X| <= 5"));
  out.push_back(make(s, "quadrature_64_vs_128_nodes", worst_nodes, 1e-9));
  {
    const Model m = conjugate_model(1);
    const double x0[1] = {0.0};
    out.push_back(make(s, "quadrature_single_zero",
                       std::abs(eval::quadrature_joint_nll(model::view(m), x0, 64) - 1.26551212), 1e-8));
    const Model m2 = conjugate_model(2);
    const double x2[2] = {1.0, -1.0};
    out.push_back(make(s, "quadrature_pair",
                       std::abs(eval::quadrature_joint_nll(model::view(m2), x2, 64) - 1.69359161), 1e-8));
  }

  // IW monotonicity with an imperfect proposal: k = 50 is tighter than k = 1
  // on average, and both stay below the truth.
  {
    Model m = conjugate_model(3);
    m.slice("enc.w_mu")[0] = 0.4;
    m.slice("enc.b_lv")[0] = 0.2;
    const auto v = model::view(m);
    const double xs[3] = {0.9, 1.4, 0.2};
    const double truth = eval::exact_conjugate_logpX(hyper, xs);
    std::vector<double> gain, lo1, lo50;
    for (std::uint64_t sd = 0; sd < 200; ++sd) {
      Rng r1 = derive_rng(opt.seed, {603, sd}), r50 = derive_rng(opt.seed, {604, sd});
      const double e1 = -3.0 * eval::iw_joint_nll(v, xs, 1, r1);
      const double e50 = -3.0 * eval::iw_joint_nll(v, xs, 50, r50);
      gain.push_back(e1 - e50);
      lo1.push_back(e1 - truth);
      lo50.push_back(e50 - truth);
    }
    const auto g = mean_se(gain), a = mean_se(lo1), b = mean_se(lo50);
    out.push_back(make(s, "iw_k50_not_below_k1", g.mean, 3.0 * g.se, "mean(est_k1 - est_k50), 200 seeds"));
    out.push_back(make(s, "iw_k1_below_truth", a.mean, 3.0 * a.se));
    out.push_back(make(s, "iw_k50_below_truth", b.mean, 3.0 * b.se));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> suite_names() {
  return {"special", "dists", "gradients", "identities", "bounds", "gap", "estimator"};
}

std::vector<Check> run_suite(const std::string& name, const Options& opt) {
  if (name == "special") return check_special(opt);
  if (name == "dists") return check_dists(opt);
  if (name == "gradients") return check_gradients(opt);
  if (name == "identities") return check_identities(opt);
  if (name == "bounds") return check_bounds(opt);
  if (name == "gap") return check_gap(opt);
  if (name == "estimator") return check_estimator(opt);
  throw UsageError("unknown verify suite '" + name + "'");
}

std::string format_check(const Check& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s %s/%s measured=%.6g tolerance=%.6g%s%s", c.passed ? "PASS" : "FAIL",
                c.suite.c_str(), c.name.c_str(), c.measured, c.tolerance, c.detail.empty() ? "" : "  ",
                c.detail.c_str());
  return buf;
}

}  // namespace homoenc::verify
