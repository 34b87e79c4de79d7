#include "homoenc/eval/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "homoenc/dists/sampling.hpp"
#include "homoenc/errors.hpp"
#include "homoenc/io/json_writer.hpp"

namespace homoenc::eval {

using model::Model;
using model::ModelView;

namespace {

constexpr std::uint64_t kInfoTag = 1;
constexpr std::uint64_t kGenTag = 2;
constexpr std::uint64_t kClsTag = 3;
constexpr std::uint64_t kIwTag = 4;

void require_flat(const Model& m) {
  if (m.config.structure != synth::Structure::kFlat || m.config.z_branch) {
    throw ConfigError("metrics are defined for flat models without a per-element latent");
  }
}

double logmeanexp(std::span<const double> xs) {
  return ad::logsumexp(xs) - std::log(static_cast<double>(xs.size()));
}

// Evaluates fn(i) for i in [0, n) concurrently and sums in index order.
template <class Fn>
double ordered_sum(std::size_t n, Fn fn) {
  std::vector<double> vals(n, 0.0);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      vals[u] = fn(u);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double s = 0.0;
  for (double v : vals) s += v;
  return s;
}

std::vector<double> pick(std::span<const double> xs, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(xs[i]);
  return out;
}

std::vector<double> sample_c(const dists::GaussianPosterior<double>& q, Rng& rng) {
  const auto noise = dists::standard_normals(rng, q.dim());
  return dists::reparam_sample(q, noise);
}

}  // namespace

void EvalConfig::validate() const {
  if (d_size < 1) throw ConfigError("d_size must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (mc_outer < 1) throw ConfigError("mc_outer must be >= 1");
  if (n_way < 2) throw ConfigError("n_way must be >= 2");
  if (nodes < 8) throw ConfigError("quadrature needs at least 8 nodes");
  if (episodes_per_class < 1) throw ConfigError("episodes_per_class must be >= 1");
  if (heldout < 1) throw ConfigError("heldout must be >= 1");
}

double encoded_information(const Model& m, const synth::Dataset& ds, std::size_t d_size,
                           std::uint64_t seed, std::size_t episodes_per_class) {
  require_flat(m);
  const auto v = model::view(m);
  const double total = ordered_sum(ds.classes.size(), [&](std::size_t c) {
    double s = 0.0;
    for (std::size_t e = 0; e < episodes_per_class; ++e) {
      Rng rng = derive_rng(seed, {kInfoTag, c, e});
      const auto& xs = ds.classes[c].elements;
      if (d_size > xs.size()) throw UsageError("d_size exceeds the class size");
      const auto d = pick(xs, synth::sample_subset(rng, xs.size(), d_size));
      s += dists::kl_to_standard_normal(v.encode_class(d));
    }
    return s;
  });
  return total / static_cast<double>(ds.classes.size() * episodes_per_class);
}

double fewshot_generation_nll(const Model& m, const synth::Dataset& ds, const EvalConfig& cfg) {
  require_flat(m);
  cfg.validate();
  const auto v = model::view(m);
  const double total = ordered_sum(ds.classes.size(), [&](std::size_t c) {
    const auto& xs = ds.classes[c].elements;
    if (xs.size() < cfg.d_size + 1) {
      throw UsageError("class " + std::to_string(c) + " is too small to hold out a point beyond |D| = " +
                       std::to_string(cfg.d_size));
    }
    double s = 0.0;
    for (std::size_t e = 0; e < cfg.episodes_per_class; ++e) {
      Rng rng = derive_rng(cfg.seed, {kGenTag, c, e});
      auto perm = synth::sample_subset(rng, xs.size(), xs.size());
      const std::vector<std::size_t> d_idx(perm.begin(), perm.begin() + cfg.d_size);
      const std::size_t n_out = std::min(cfg.heldout, xs.size() - cfg.d_size);
      const std::vector<std::size_t> out_idx(perm.begin() + cfg.d_size,
                                             perm.begin() + cfg.d_size + n_out);
      const auto q = v.encode_class(pick(xs, d_idx));
      double acc = 0.0;
      for (std::size_t smp = 0; smp < cfg.mc_outer; ++smp) {
        const auto cs = sample_c(q, rng);
        for (auto i : out_idx) acc += v.obs_logpdf(cs, xs[i]);
      }
      s += -acc / static_cast<double>(cfg.mc_outer * n_out);
    }
    return s;
  });
  return total / static_cast<double>(ds.classes.size() * cfg.episodes_per_class);
}

std::vector<double> classification_scores(const ModelView<double>& v, double x,
                                          std::span<const std::vector<double>> supports,
                                          std::size_t mc_outer, bool expected_likelihood,
                                          Rng& rng) {
  std::vector<double> scores;
  std::vector<double> lls(mc_outer);
  for (const auto& d : supports) {
    const auto q = v.encode_class(d);
    for (std::size_t s = 0; s < mc_outer; ++s) lls[s] = v.obs_logpdf(sample_c(q, rng), x);
    if (expected_likelihood) {
      scores.push_back(logmeanexp(lls));
    } else {
      double mean = 0.0;
      for (double l : lls) mean += l;
      scores.push_back(mean / static_cast<double>(mc_outer));
    }
  }
  return scores;
}

std::size_t predict(std::span<const double> scores) {
  if (scores.empty()) throw UsageError("predict: no candidates");
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) best = j;
  }
  return best;
}

double fewshot_classification_error(const Model& m, const synth::Dataset& ds,
                                    const EvalConfig& cfg) {
  require_flat(m);
  cfg.validate();
  const std::size_t n_classes = ds.classes.size();
  if (n_classes < cfg.n_way) {
    throw UsageError("need at least " + std::to_string(cfg.n_way) + " classes, dataset has " +
                     std::to_string(n_classes));
  }
  if (ds.meta.n_per_class < cfg.d_size + 1) {
    throw UsageError("classes are too small for a support of size " + std::to_string(cfg.d_size) +
                     " plus a query");
  }
  const auto v = model::view(m);
  const std::size_t episodes = n_classes * cfg.episodes_per_class;
  const double errors = ordered_sum(episodes, [&](std::size_t i) {
    Rng rng = derive_rng(cfg.seed, {kClsTag, i});
    const std::size_t query_class = i % n_classes;
    std::vector<std::size_t> candidates{query_class};
    for (auto j : synth::sample_subset(rng, n_classes - 1, cfg.n_way - 1)) {
      candidates.push_back(j >= query_class ? j + 1 : j);
    }
    for (std::size_t j = candidates.size(); j > 1; --j) {
      std::swap(candidates[j - 1], candidates[uniform_index(rng, j)]);
    }
    const auto& qx = ds.classes[query_class].elements;
    const std::size_t x_idx = uniform_index(rng, qx.size());
    std::vector<std::vector<double>> supports;
    for (auto cls : candidates) {
      const auto& xs = ds.classes[cls].elements;
      if (cls == query_class) {
        std::vector<double> d;
        for (auto j : synth::sample_subset(rng, xs.size() - 1, cfg.d_size)) {
          d.push_back(xs[j >= x_idx ? j + 1 : j]);
        }
        supports.push_back(std::move(d));
      } else {
        supports.push_back(pick(xs, synth::sample_subset(rng, xs.size(), cfg.d_size)));
      }
    }
    const auto scores = classification_scores(v, qx[x_idx], supports, cfg.mc_outer,
                                              cfg.expected_likelihood, rng);
    return candidates[predict(scores)] == query_class ? 0.0 : 1.0;
  });
  return errors / static_cast<double>(episodes);
}

double iw_joint_nll(const ModelView<double>& v, std::span<const double> xs, std::size_t k,
                    Rng& rng) {
  if (k < 1) throw UsageError("k must be >= 1");
  const auto q = v.encode_class(xs);
  std::vector<double> log_w(k);
  for (std::size_t s = 0; s < k; ++s) {
    const auto c = sample_c(q, rng);
    double lw = v.prior_logpdf(c) - dists::gaussian_posterior_logpdf(q, c);
    for (double x : xs) lw += v.obs_logpdf(c, x);
    log_w[s] = lw;
  }
  return -logmeanexp(log_w) / static_cast<double>(xs.size());
}

double joint_nll(const Model& m, const synth::Dataset& ds, std::size_t k, std::uint64_t seed) {
  require_flat(m);
  const auto v = model::view(m);
  const double total = ordered_sum(ds.classes.size(), [&](std::size_t c) {
    Rng rng = derive_rng(seed, {kIwTag, c});
    return iw_joint_nll(v, ds.classes[c].elements, k, rng);
  });
  return total / static_cast<double>(ds.classes.size());
}

// ---------------------------------------------------------------------------
// Quadrature

GaussHermite gauss_hermite(std::size_t n) {
  if (n < 1) throw UsageError("gauss_hermite: n must be >= 1");
  // Newton iteration on orthonormal Hermite polynomials with the usual
  // asymptotic initial guesses for the largest roots.
  constexpr double kPim4 = 0.7511255444649425;  // pi^(-1/4)
  const double nd = static_cast<double>(n);
  std::vector<double> x(n), lw(n);
  const std::size_t half = (n + 1) / 2;
  double z = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(nd, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = kPim4, p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * nd) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    lw[i] = lw[n - 1 - i] = std::log(2.0) - 2.0 * std::log(std::abs(pp));
  }
  GaussHermite gh;
  gh.nodes.assign(x.rbegin(), x.rend());
  gh.log_weights.assign(lw.rbegin(), lw.rend());
  return gh;
}

namespace {

using LogF = std::function<double(std::span<const double>)>;

struct Curvature {
  std::vector<double> grad;
  std::vector<double> hess;  // row-major dim x dim
};

Curvature finite_curvature(const LogF& f, const std::vector<double>& c) {
  const std::size_t dim = c.size();
  Curvature out{std::vector<double>(dim), std::vector<double>(dim * dim)};
  const double f0 = f(c);
  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    auto p = c;
    p[i] += di;
    p[j] += dj;
    return f(p);
  };
  for (std::size_t i = 0; i < dim; ++i) {
    const double h = 1e-4 * std::max(1.0, std::abs(c[i]));
    const double fp = at(i, h, i, 0.0), fm = at(i, -h, i, 0.0);
    out.grad[i] = (fp - fm) / (2.0 * h);
    out.hess[i * dim + i] = (fp - 2.0 * f0 + fm) / (h * h);
    for (std::size_t j = 0; j < i; ++j) {
      const double hj = 1e-4 * std::max(1.0, std::abs(c[j]));
      const double v = (at(i, h, j, hj) - at(i, h, j, -hj) - at(i, -h, j, hj) + at(i, -h, j, -hj)) /
                       (4.0 * h * hj);
      out.hess[i * dim + j] = out.hess[j * dim + i] = v;
    }
  }
  return out;
}

// Cholesky of a symmetric positive-definite matrix (dim <= 2); false if not SPD.
bool cholesky(const std::vector<double>& a, std::size_t dim, std::vector<double>& l) {
  l.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * dim + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * dim + k] * l[j * dim + k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        l[i * dim + i] = std::sqrt(s);
      } else {
        l[i * dim + j] = s / l[j * dim + j];
      }
    }
  }
  return true;
}

std::vector<double> invert_small(const std::vector<double>& a, std::size_t dim) {
  if (dim == 1) return {1.0 / a[0]};
  const double det = a[0] * a[3] - a[1] * a[2];
  return {a[3] / det, -a[1] / det, -a[2] / det, a[0] / det};
}

}  // namespace

double adaptive_gh_log_integral(const LogF& log_f, std::vector<double> c, std::size_t nodes) {
  const std::size_t dim = c.size();
  if (dim < 1 || dim > 2) throw UsageError("quadrature supports latent dimension 1 or 2");
  // Damped Newton ascent to the mode.
  double fc = log_f(c);
  for (int it = 0; it < 200; ++it) {
    const auto cur = finite_curvature(log_f, c);
    std::vector<double> neg_h(dim * dim), l;
    for (std::size_t i = 0; i < dim * dim; ++i) neg_h[i] = -cur.hess[i];
    std::vector<double> step(dim, 0.0);
    if (cholesky(neg_h, dim, l)) {
      const auto inv = invert_small(neg_h, dim);
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) step[i] += inv[i * dim + j] * cur.grad[j];
      }
    } else {
      for (std::size_t i = 0; i < dim; ++i) step[i] = 0.1 * cur.grad[i];
    }
    double alpha = 1.0;
    std::vector<double> trial(dim);
    double ft = fc;
    for (; alpha > 1e-10; alpha *= 0.5) {
      for (std::size_t i = 0; i < dim; ++i) trial[i] = c[i] + alpha * step[i];
      ft = log_f(trial);
      if (std::isfinite(ft) && ft >= fc) break;
    }
    if (alpha <= 1e-10) break;
    double moved = 0.0;
    for (std::size_t i = 0; i < dim; ++i) moved = std::max(moved, std::abs(trial[i] - c[i]));
    c = trial;
    fc = ft;
    if (moved < 1e-12 * std::max(1.0, std::abs(c[0]))) break;
  }
  // Scale from the curvature at the mode.
  const auto cur = finite_curvature(log_f, c);
  std::vector<double> neg_h(dim * dim), a;
  for (std::size_t i = 0; i < dim * dim; ++i) neg_h[i] = -cur.hess[i];
  std::vector<double> l_prec;
  if (cholesky(neg_h, dim, l_prec)) {
    if (!cholesky(invert_small(neg_h, dim), dim, a)) a = {1.0, 0.0, 0.0, 1.0};
  } else {
    a.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) a[i * dim + i] = 1.0;
  }
  a.resize(dim * dim);
  double log_det_a = 0.0;
  for (std::size_t i = 0; i < dim; ++i) log_det_a += std::log(a[i * dim + i]);

  const auto gh = gauss_hermite(nodes);
  std::vector<double> terms;
  terms.reserve(dim == 1 ? nodes : nodes * nodes);
  std::vector<double> t(dim), p(dim);
  const std::size_t total = dim == 1 ? nodes : nodes * nodes;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const std::size_t i0 = idx % nodes, i1 = idx / nodes;
    t[0] = gh.nodes[i0];
    double lw = gh.log_weights[i0] + t[0] * t[0];
    if (dim == 2) {
      t[1] = gh.nodes[i1];
      lw += gh.log_weights[i1] + t[1] * t[1];
    }
    for (std::size_t i = 0; i < dim; ++i) {
      p[i] = c[i];
      for (std::size_t j = 0; j <= i; ++j) p[i] += std::sqrt(2.0) * a[i * dim + j] * t[j];
    }
    terms.push_back(lw + log_f(p));
  }
  return ad::logsumexp(terms) + 0.5 * static_cast<double>(dim) * std::log(2.0) + log_det_a;
}

double quadrature_joint_nll(const ModelView<double>& v, std::span<const double> xs,
                            std::size_t nodes) {
  if (v.latent_dim() > 2 || v.n_factors() != 1) {
    throw UsageError("quadrature oracle supports latent dimension 1 or 2 only");
  }
  const LogF log_joint = [&](std::span<const double> c) {
    double s = v.prior_logpdf(c);
    for (double x : xs) s += v.obs_logpdf(c, x);
    return s;
  };
  const auto q = v.encode_class(xs);
  return -adaptive_gh_log_integral(log_joint, q.mean, nodes) / static_cast<double>(xs.size());
}

double quadrature_joint_nll(const Model& m, const synth::Dataset& ds, std::size_t nodes) {
  require_flat(m);
  const auto v = model::view(m);
  const double total = ordered_sum(ds.classes.size(), [&](std::size_t c) {
    return quadrature_joint_nll(v, ds.classes[c].elements, nodes);
  });
  return total / static_cast<double>(ds.classes.size());
}

// ---------------------------------------------------------------------------
// Conjugate oracles

double exact_conjugate_logpX(const ConjugateHyper& h, std::span<const double> xs) {
  // Sigma = s2 I + t2 11^T; Sherman-Morrison for the inverse and determinant.
  const double n = static_cast<double>(xs.size());
  const double s2 = h.sigma * h.sigma, t2 = h.tau0 * h.tau0;
  double sum_r = 0.0, sum_r2 = 0.0;
  for (double x : xs) {
    const double r = x - h.m0;
    sum_r += r;
    sum_r2 += r * r;
  }
  const double quad = (sum_r2 - t2 * sum_r * sum_r / (s2 + n * t2)) / s2;
  const double log_det = n * std::log(s2) + std::log1p(n * t2 / s2);
  return -0.5 * (n * dists::kLogTwoPi + log_det + quad);
}

std::pair<double, double> conjugate_posterior(const ConjugateHyper& h, std::span<const double> xs) {
  const double s2 = h.sigma * h.sigma, t2 = h.tau0 * h.tau0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double prec = 1.0 / t2 + static_cast<double>(xs.size()) / s2;
  return {(h.m0 / t2 + sum / s2) / prec, 1.0 / prec};
}

double kl_gauss_1d(double m1, double v1, double m2, double v2) {
  return 0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
}

double conjugate_elbo(const ConjugateHyper& h, std::span<const double> xs, double mean, double var) {
  const double s2 = h.sigma * h.sigma;
  double recon = 0.0;
  for (double x : xs) {
    recon += -0.5 * (dists::kLogTwoPi + std::log(s2)) - ((x - mean) * (x - mean) + var) / (2.0 * s2);
  }
  return recon - kl_gauss_1d(mean, var, h.m0, h.tau0 * h.tau0);
}

double conjugate_predictive_logpdf(const ConjugateHyper& h, std::span<const double> d, double x) {
  const auto [mu, var] = conjugate_posterior(h, d);
  const double v = var + h.sigma * h.sigma;
  return -0.5 * (dists::kLogTwoPi + std::log(v) + (x - mu) * (x - mu) / v);
}

// ---------------------------------------------------------------------------
// Suite and CSV

std::vector<MetricRecord> run_metric_suite(const Model& m, const synth::Dataset& ds,
                                           const EvalConfig& cfg, const std::string& objective,
                                           std::uint64_t train_seed) {
  cfg.validate();
  require_flat(m);
  if (m.config.family != ds.meta.family) throw ConfigError("model and dataset families differ");
  auto rec = [&](const char* metric, double value) {
    return MetricRecord{objective,
                        std::string(dists::family_name(m.config.family)),
                        cfg.d_size,
                        m.config.latent_dim,
                        train_seed,
                        metric,
                        value};
  };
  std::vector<MetricRecord> out;
  out.push_back(rec("encoded_information",
                    encoded_information(m, ds, cfg.d_size, cfg.seed, cfg.episodes_per_class)));
  out.push_back(rec("fewshot_nll", fewshot_generation_nll(m, ds, cfg)));
  out.push_back(rec("classification_error", fewshot_classification_error(m, ds, cfg)));
  out.push_back(rec("joint_nll", joint_nll(m, ds, cfg.k, cfg.seed)));
  if (cfg.quadrature) {
    if (m.config.latent_dim > 2) {
      throw ConfigError("quadrature oracle needs latent dimension 1 or 2, model has " +
                        std::to_string(m.config.latent_dim));
    }
    out.push_back(rec("quadrature_joint_nll", quadrature_joint_nll(m, ds, cfg.nodes)));
  }
  return out;
}

std::string metrics_csv_header() { return "objective,family,d_size,latent_dim,seed,metric,value\n"; }

std::string metrics_csv_rows(std::span<const MetricRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.objective + "," + r.family + "," + std::to_string(r.d_size) + "," +
           std::to_string(r.latent_dim) + "," + std::to_string(r.seed) + "," + r.metric + "," +
           io::format_double(r.value) + "\n";
  }
  return out;
}

std::vector<MetricRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<MetricRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line + "\n" == metrics_csv_header()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw ParseError(line_no, "expected 7 columns");
    try {
      out.push_back(MetricRecord{f[0], f[1], std::stoul(f[2]), std::stoul(f[3]), std::stoull(f[4]),
                                 f[5], std::stod(f[6])});
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace homoenc::eval
