#include <algorithm>
#include <cmath>

#include "homoenc/errors.hpp"
#include "homoenc/model/model.hpp"

namespace homoenc::model {

template <class T>
ModelView<T>::ModelView(const ModelConfig& config, const ParamLayout& layout,
                        std::span<const T> params)
    : config_(&config), layout_(&layout), params_(params) {
  if (params.size() != layout.total()) throw UsageError("parameter vector does not match layout");
}

template <class T>
std::size_t ModelView<T>::n_factors() const {
  return config_->structure == Structure::kFactorial ? 2 : 1;
}

template <class T>
std::vector<double> ModelView<T>::pooled_features(std::span<const double> d) const {
  if (d.empty()) throw UsageError("cannot encode an empty support set");
  // Sorting first makes the pooled sum independent of the order of D.
  std::vector<double> xs(d.begin(), d.end());
  std::sort(xs.begin(), xs.end());
  const Family f = config_->family;
  std::vector<double> pooled(feature_dim(f), 0.0);
  for (double x : xs) {
    const auto phi = feature_map(f, x);
    for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] += phi[k];
  }
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    pooled[k] /= static_cast<double>(xs.size());
    if (!config_->feat_shift.empty()) {
      pooled[k] = (pooled[k] - config_->feat_shift[k]) / config_->feat_scale[k];
    }
  }
  return pooled;
}

template <class T>
GaussianPosterior<T> ModelView<T>::encode(std::string_view prefix, std::span<const double> d) const {
  const auto phi = pooled_features(d);
  const std::string p(prefix);
  const Slice& w_mu = slice(p + ".w_mu");
  const Slice& b_mu = slice(p + ".b_mu");
  const Slice& w_lv = slice(p + ".w_lv");
  const Slice& b_lv = slice(p + ".b_lv");
  GaussianPosterior<T> q;
  for (std::size_t j = 0; j < w_mu.rows; ++j) {
    T mu = param(b_mu, j);
    T lv = param(b_lv, j);
    for (std::size_t k = 0; k < phi.size(); ++k) {
      if (phi[k] == 0.0) continue;
      mu += param(w_mu, j, k) * phi[k];
      lv += param(w_lv, j, k) * phi[k];
    }
    q.mean.push_back(mu);
    q.log_var.push_back(lv);
  }
  return q;
}

template <class T>
GaussianPosterior<T> ModelView<T>::encode_class_given(std::span<const double> d,
                                                      std::span<const T> a) const {
  auto q = encode("enc", d);
  const Slice& u_mu = slice("enc.u_mu");
  const Slice& u_lv = slice("enc.u_lv");
  if (a.size() != u_mu.cols) throw UsageError("group latent has the wrong dimension");
  for (std::size_t j = 0; j < q.dim(); ++j) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      q.mean[j] += param(u_mu, j, k) * a[k];
      q.log_var[j] += param(u_lv, j, k) * a[k];
    }
  }
  return q;
}

template <class T>
GaussianPosterior<T> ModelView<T>::encode_z(double x, std::span<const T> c) const {
  if (!config_->z_branch) throw ConfigError("model has no per-element latent branch");
  auto phi = feature_map(config_->family, x);
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (!config_->feat_shift.empty()) phi[k] = (phi[k] - config_->feat_shift[k]) / config_->feat_scale[k];
  }
  const Slice& w_x = slice("encz.w_x");
  const Slice& v_x = slice("encz.v_x");
  T mu = param(slice("encz.b"), 0);
  T lv = param(slice("encz.v_b"), 0);
  for (std::size_t k = 0; k < phi.size(); ++k) {
    mu += param(w_x, 0, k) * phi[k];
    lv += param(v_x, 0, k) * phi[k];
  }
  if (config_->z_conditions_on_c) {
    const Slice& u_c = slice("encz.u_c");
    const Slice& v_c = slice("encz.v_c");
    if (c.size() != u_c.cols) throw UsageError("class latent has the wrong dimension");
    for (std::size_t k = 0; k < c.size(); ++k) {
      mu += param(u_c, 0, k) * c[k];
      lv += param(v_c, 0, k) * c[k];
    }
  }
  GaussianPosterior<T> q;
  q.mean.push_back(mu);
  q.log_var.push_back(lv);
  return q;
}

template <class T>
std::vector<T> ModelView<T>::decoder_affine(std::span<const T> c, std::span<const T> z) const {
  const Slice& w = slice("dec.w");
  const Slice& b = slice("dec.b");
  if (c.size() != w.cols) {
    throw UsageError("decoder expects a latent of size " + std::to_string(w.cols) + ", got " +
                     std::to_string(c.size()));
  }
  std::vector<T> out;
  out.reserve(w.rows);
  for (std::size_t j = 0; j < w.rows; ++j) {
    T v = param(b, j);
    for (std::size_t k = 0; k < c.size(); ++k) v += param(w, j, k) * c[k];
    out.push_back(v);
  }
  if (!z.empty()) {
    if (!config_->z_branch || z.size() != 1) throw UsageError("unexpected per-element latent");
    out[0] += param(slice("dec.w_z"), 0) * z[0];
  }
  return out;
}

namespace {

template <class T>
FamilyParams<T> link(const ModelConfig& cfg, const std::vector<T>& aff, const T* scale) {
  switch (cfg.family) {
    case Family::kGaussian:
      return dists::Gaussian<T>{aff[0], ad::softplus(*scale)};
    case Family::kMixture2:
      return dists::Mixture2<T>{aff[0], cfg.mix_half_sep, cfg.mix_sigma};
    case Family::kVonMises:
      return dists::VonMises<T>{ad::atan2(aff[1], aff[0]), ad::softplus(*scale)};
    case Family::kGamma:
      return dists::GammaShape<T>{ad::softplus(aff[0]), cfg.gamma_beta};
    case Family::kDiscrete: {
      const T lse = ad::logsumexp(std::span<const T>(aff));
      std::array<T, dists::kDiscreteSymbols> probs{aff[0], aff[1], aff[2], aff[3],
                                                   aff[4], aff[5], aff[6], aff[7]};
      for (auto& p : probs) p = ad::exp(p - lse);
      return dists::Discrete<T>{probs};
    }
  }
  throw ConfigError("unknown family");
}

}  // namespace

template <class T>
FamilyParams<T> ModelView<T>::decode_params(std::span<const T> c) const {
  const auto aff = decoder_affine(c);
  std::optional<T> scale;
  if (const Slice* s = find("dec.scale")) scale = param(*s, 0);
  return link<T>(*config_, aff, scale ? &*scale : nullptr);
}

template <class T>
T ModelView<T>::obs_logpdf(std::span<const T> c, double x, std::span<const T> z) const {
  const auto aff = decoder_affine(c, z);
  if (config_->family == Family::kDiscrete) {
    dists::check_support(Family::kDiscrete, x);
    const auto k = static_cast<std::size_t>(std::lround(x)) - 1;
    return aff[k] - ad::logsumexp(std::span<const T>(aff));
  }
  std::optional<T> scale;
  if (const Slice* s = find("dec.scale")) scale = param(*s, 0);
  return dists::family_logpdf<T>(link<T>(*config_, aff, scale ? &*scale : nullptr), x);
}

template <class T>
T ModelView<T>::prior_logpdf(std::span<const T> c) const {
  if (c.empty()) throw UsageError("empty latent");
  T acc = -0.5 * ad::square(c[0]);
  for (std::size_t i = 1; i < c.size(); ++i) acc -= 0.5 * ad::square(c[i]);
  return acc - 0.5 * dists::kLogTwoPi * static_cast<double>(c.size());
}

template <class T>
GaussianPosterior<T> ModelView<T>::conditional_prior(std::span<const T> a) const {
  const Slice& w = slice("cond.w");
  const Slice& b = slice("cond.b");
  const Slice& lv = slice("cond.log_var");
  if (a.size() != w.cols) throw UsageError("group latent has the wrong dimension");
  GaussianPosterior<T> p;
  for (std::size_t j = 0; j < w.rows; ++j) {
    T m = param(b, j);
    for (std::size_t k = 0; k < a.size(); ++k) m += param(w, j, k) * a[k];
    p.mean.push_back(m);
    p.log_var.push_back(param(lv, j));
  }
  return p;
}

template <class T>
T ModelView<T>::conditional_logpdf(std::span<const T> c, std::span<const T> a) const {
  const auto p = conditional_prior(a);
  if (c.size() != p.dim()) throw UsageError("class latent has the wrong dimension");
  T acc = -0.5 * (dists::kLogTwoPi + p.log_var[0] + ad::square(c[0] - p.mean[0]) / ad::exp(p.log_var[0]));
  for (std::size_t i = 1; i < c.size(); ++i) {
    acc -= 0.5 * (dists::kLogTwoPi + p.log_var[i] + ad::square(c[i] - p.mean[i]) / ad::exp(p.log_var[i]));
  }
  return acc;
}

template <class T>
std::vector<T> ModelView<T>::aux_log_r(std::span<const T> c, std::size_t first_row,
                                       std::size_t class_size) const {
  if (config_->aux_embed_dim == 0) throw ConfigError("model has no auxiliary inverse model");
  const Slice& w_f = slice("aux.w_f");
  const Slice& b_f = slice("aux.b_f");
  const Slice& xi = slice("aux.xi");
  if (first_row + class_size > xi.rows) {
    throw ConfigError("auxiliary embeddings missing for rows " + std::to_string(first_row) + ".." +
                      std::to_string(first_row + class_size - 1));
  }
  if (c.size() != w_f.cols) throw UsageError("class latent has the wrong dimension");
  std::vector<T> f;
  for (std::size_t e = 0; e < w_f.rows; ++e) {
    T v = param(b_f, e);
    for (std::size_t k = 0; k < c.size(); ++k) v += param(w_f, e, k) * c[k];
    f.push_back(v);
  }
  std::vector<T> scores;
  scores.reserve(class_size);
  for (std::size_t d = 0; d < class_size; ++d) {
    T s = f[0] * param(xi, first_row + d, 0);
    for (std::size_t e = 1; e < f.size(); ++e) s += f[e] * param(xi, first_row + d, e);
    scores.push_back(s);
  }
  const T lse = ad::logsumexp(std::span<const T>(scores));
  for (auto& s : scores) s = s - lse;
  return scores;
}

template class ModelView<double>;
template class ModelView<ad::Var>;

}  // namespace homoenc::model
