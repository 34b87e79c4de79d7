#include "homoenc/objectives/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "homoenc/dists/sampling.hpp"
#include "homoenc/errors.hpp"

namespace homoenc::obj {

using dists::GaussianPosterior;

std::string_view objective_name(Kind k) {
  switch (k) {
    case Kind::kVae: return "vae";
    case Kind::kNs: return "ns";
    case Kind::kVhe: return "vhe";
    case Kind::kResample: return "resample";
    case Kind::kRescale: return "rescale";
    case Kind::kVheZ: return "vhe_z";
    case Kind::kStructured: return "structured";
    case Kind::kHierarchical: return "hierarchical";
    case Kind::kTightened: return "tightened";
  }
  return "?";
}

Kind parse_objective(std::string_view name) {
  for (Kind k : {Kind::kVae, Kind::kNs, Kind::kVhe, Kind::kResample, Kind::kRescale, Kind::kVheZ,
                 Kind::kStructured, Kind::kHierarchical, Kind::kTightened}) {
    if (objective_name(k) == name) return k;
  }
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

void ObjectiveSpec::validate() const {
  if (d_size < 1) throw ConfigError("d_size must be >= 1");
  if (mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
  if (kl_weight_override && !(*kl_weight_override >= 0.0)) {
    throw ConfigError("kl weight override must be >= 0");
  }
}

template <class T>
const Term<T>* LossBreakdown<T>::find(std::string_view name) const {
  for (const auto& t : terms) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

template <class T>
T LossBreakdown<T>::term(std::string_view name) const {
  if (const auto* t = find(name)) return t->value;
  throw UsageError("loss has no term '" + std::string(name) + "'");
}

template <class T>
double LossBreakdown<T>::weight(std::string_view name) const {
  if (const auto* t = find(name)) return t->weight;
  throw UsageError("loss has no term '" + std::string(name) + "'");
}

double log_binomial(std::size_t n, std::size_t k) {
  if (k > n) throw UsageError("log_binomial: k > n");
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  return std::lgamma(d(n) + 1.0) - std::lgamma(d(k) + 1.0) - std::lgamma(d(n - k) + 1.0);
}

namespace {

template <class T>
T mean_of(const std::vector<T>& xs) {
  if (xs.size() == 1) return xs[0];
  return ad::sum(std::span<const T>(xs)) * (1.0 / static_cast<double>(xs.size()));
}

template <class T>
LossBreakdown<T> finish(T recon, std::vector<Term<T>> terms) {
  T penalty = terms[0].value * terms[0].weight;
  for (std::size_t i = 1; i < terms.size(); ++i) penalty += terms[i].value * terms[i].weight;
  return LossBreakdown<T>{penalty - recon, recon, std::move(terms)};
}

void check_samples(const LossOptions& opt) {
  if (opt.mc_samples < 1) throw UsageError("mc_samples must be >= 1");
}

}  // namespace

template <class T>
LossBreakdown<T> loss_vhe(const ModelView<T>& m, double x, std::span<const double> d,
                          std::size_t class_size, Rng& rng, const LossOptions& opt) {
  check_samples(opt);
  if (class_size < d.size()) {
    throw UsageError("class size " + std::to_string(class_size) + " is smaller than |D| = " +
                     std::to_string(d.size()));
  }
  const auto q = m.encode_class(d);
  std::vector<T> recon;
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    const auto noise = dists::standard_normals(rng, q.dim());
    const auto c = dists::reparam_sample(q, noise);
    recon.push_back(m.obs_logpdf(c, x));
  }
  std::vector<Term<T>> terms;
  terms.push_back({"kl_c", dists::kl_to_standard_normal(q),
                   opt.kl_scale / static_cast<double>(class_size)});
  return finish(mean_of(recon), std::move(terms));
}

template <class T>
LossBreakdown<T> loss_vae(const ModelView<T>& m, double x, Rng& rng, const LossOptions& opt) {
  const double d[1] = {x};
  return loss_vhe(m, x, std::span<const double>(d), 1, rng, opt);
}

template <class T>
LossBreakdown<T> loss_ns(const ModelView<T>& m, std::span<const double> d, Rng& rng,
                         const LossOptions& opt) {
  check_samples(opt);
  const auto q = m.encode_class(d);
  std::vector<T> recon;
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    const auto noise = dists::standard_normals(rng, q.dim());
    const auto c = dists::reparam_sample(q, noise);
    std::vector<T> per;
    per.reserve(d.size());
    for (double x : d) per.push_back(m.obs_logpdf(c, x));
    recon.push_back(ad::sum(std::span<const T>(per)));
  }
  std::vector<Term<T>> terms;
  terms.push_back({"kl_c", dists::kl_to_standard_normal(q), opt.kl_scale});
  return finish(mean_of(recon), std::move(terms));
}

template <class T>
LossBreakdown<T> loss_resample(const ModelView<T>& m, double x, std::span<const double> d, Rng& rng,
                               const LossOptions& opt) {
  return loss_vhe(m, x, d, d.size(), rng, opt);
}

template <class T>
LossBreakdown<T> loss_rescale(const ModelView<T>& m, double x, std::span<const double> d,
                              std::size_t class_size, Rng& rng, const LossOptions& opt) {
  if (std::find(d.begin(), d.end(), x) == d.end()) {
    throw UsageError("rescale objective: x is not an element of D");
  }
  return loss_vhe(m, x, d, class_size, rng, opt);
}

template <class T>
LossBreakdown<T> loss_vhe_z(const ModelView<T>& m, double x, std::span<const double> d,
                            std::size_t class_size, Rng& rng, const LossOptions& opt) {
  check_samples(opt);
  if (!m.config().z_branch) throw ConfigError("vhe_z needs a model with a per-element latent");
  if (class_size < d.size()) throw UsageError("class size is smaller than |D|");
  const auto q = m.encode_class(d);
  std::vector<T> recon, kl_z;
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    const auto noise_c = dists::standard_normals(rng, q.dim());
    const auto noise_z = dists::standard_normals(rng, 1);
    const auto c = dists::reparam_sample(q, noise_c);
    const auto qz = m.encode_z(x, c);
    const auto z = dists::reparam_sample(qz, noise_z);
    recon.push_back(m.obs_logpdf(c, x, z));
    kl_z.push_back(dists::kl_to_standard_normal(qz));
  }
  std::vector<Term<T>> terms;
  terms.push_back({"kl_c", dists::kl_to_standard_normal(q),
                   opt.kl_scale / static_cast<double>(class_size)});
  terms.push_back({"kl_z", mean_of(kl_z), opt.kl_scale});
  return finish(mean_of(recon), std::move(terms));
}

template <class T>
LossBreakdown<T> loss_structured(const ModelView<T>& m, double x,
                                 std::span<const FactorSupport> supports, Rng& rng,
                                 const LossOptions& opt) {
  check_samples(opt);
  const auto structure = m.config().structure;
  if (structure == synth::Structure::kHierarchical) {
    throw ConfigError("structured objective needs a flat or factorial model");
  }
  const std::size_t n = m.n_factors();
  if (supports.size() != n) {
    throw UsageError("structured objective: model has " + std::to_string(n) +
                     " factor(s) but " + std::to_string(supports.size()) + " support(s) given");
  }
  static const char* const kFlat[] = {"enc"};
  static const char* const kFactorial[] = {"enc_content", "enc_style"};
  static const char* const kFlatTerms[] = {"kl_c"};
  static const char* const kFactorialTerms[] = {"kl_content", "kl_style"};
  const auto* prefixes = n == 1 ? kFlat : kFactorial;
  const auto* names = n == 1 ? kFlatTerms : kFactorialTerms;

  std::vector<GaussianPosterior<T>> qs;
  for (std::size_t i = 0; i < n; ++i) {
    if (supports[i].d.empty()) throw UsageError("structured objective: empty support");
    if (supports[i].set_size < supports[i].d.size()) {
      throw UsageError("structured objective: set size smaller than its support");
    }
    qs.push_back(m.encode(prefixes[i], supports[i].d));
  }
  std::vector<T> recon;
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    std::vector<T> c;
    for (const auto& q : qs) {
      const auto noise = dists::standard_normals(rng, q.dim());
      const auto ci = dists::reparam_sample(q, noise);
      c.insert(c.end(), ci.begin(), ci.end());
    }
    recon.push_back(m.obs_logpdf(c, x));
  }
  std::vector<Term<T>> terms;
  for (std::size_t i = 0; i < n; ++i) {
    terms.push_back({names[i], dists::kl_to_standard_normal(qs[i]),
                     opt.kl_scale / static_cast<double>(supports[i].set_size)});
  }
  return finish(mean_of(recon), std::move(terms));
}

template <class T>
LossBreakdown<T> loss_hierarchical(const ModelView<T>& m, double x, std::span<const double> d_a,
                                   std::span<const double> d_c, std::size_t group_size,
                                   std::size_t class_size, Rng& rng, const LossOptions& opt) {
  check_samples(opt);
  if (m.config().structure != synth::Structure::kHierarchical) {
    throw ConfigError("hierarchical objective needs a hierarchical model");
  }
  if (d_a.size() > group_size || d_c.size() > class_size || class_size > group_size) {
    throw UsageError("hierarchical objective: need |D_a| <= |group|, |D_c| <= |class| <= |group|");
  }
  const auto qa = m.encode("enc_a", d_a);
  std::vector<T> recon, kl_c;
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    const auto noise_c = dists::standard_normals(rng, m.latent_dim());
    const auto noise_a = dists::standard_normals(rng, m.latent_dim());
    const auto a = dists::reparam_sample(qa, noise_a);
    const auto qc = m.encode_class_given(d_c, a);
    const auto c = dists::reparam_sample(qc, noise_c);
    recon.push_back(m.obs_logpdf(c, x));
    kl_c.push_back(dists::gaussian_kl(qc, m.conditional_prior(a)));
  }
  std::vector<Term<T>> terms;
  terms.push_back({"kl_c", mean_of(kl_c), opt.kl_scale / static_cast<double>(class_size)});
  terms.push_back({"kl_a", dists::kl_to_standard_normal(qa),
                   opt.kl_scale / static_cast<double>(group_size)});
  return finish(mean_of(recon), std::move(terms));
}

template <class T>
LossBreakdown<T> loss_tightened(const ModelView<T>& m, double x,
                                std::span<const double> class_elements,
                                std::span<const std::size_t> d_indices, std::size_t first_row,
                                Rng& rng, const LossOptions& opt) {
  check_samples(opt);
  const std::size_t n = class_elements.size();
  if (d_indices.empty() || d_indices.size() > n) throw UsageError("tightened objective: bad |D|");
  std::vector<double> d;
  for (auto i : d_indices) {
    if (i >= n) throw UsageError("tightened objective: support index out of range");
    d.push_back(class_elements[i]);
  }
  const double log_q_prime = -log_binomial(n, d.size());
  const auto q = m.encode_class(d);
  std::vector<T> recon, log_ratio;
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    const auto noise = dists::standard_normals(rng, q.dim());
    const auto c = dists::reparam_sample(q, noise);
    recon.push_back(m.obs_logpdf(c, x));
    const auto log_r = m.aux_log_r(c, first_row, n);
    std::vector<T> picked;
    for (auto i : d_indices) picked.push_back(log_r[i]);
    log_ratio.push_back(log_q_prime - ad::sum(std::span<const T>(picked)));
  }
  const double w = opt.kl_scale / static_cast<double>(n);
  std::vector<Term<T>> terms;
  terms.push_back({"kl_c", dists::kl_to_standard_normal(q), w});
  terms.push_back({"log_ratio", mean_of(log_ratio), w});
  return finish(mean_of(recon), std::move(terms));
}

void check_compatible(const ObjectiveSpec& spec, const model::ModelConfig& config,
                      const synth::Dataset& ds) {
  spec.validate();
  const auto name = std::string(objective_name(spec.kind));
  const auto ds_structure = std::string(synth::structure_name(ds.meta.structure));
  auto mismatch = [&](const std::string& need) {
    throw ConfigError("objective '" + name + "' needs " + need + ", but the dataset is " +
                      ds_structure);
  };
  if (config.family != ds.meta.family || config.structure != ds.meta.structure) {
    throw ConfigError("model and dataset disagree on family or structure");
  }
  switch (spec.kind) {
    case Kind::kHierarchical:
      if (ds.meta.structure != synth::Structure::kHierarchical) mismatch("a hierarchical dataset");
      if (spec.group_support() > ds.meta.classes_per_group * ds.meta.n_per_class) {
        throw ConfigError("group support larger than a group");
      }
      break;
    case Kind::kStructured:
      if (ds.meta.structure == synth::Structure::kHierarchical) {
        mismatch("a flat or factorial dataset");
      }
      break;
    default:
      if (ds.meta.structure != synth::Structure::kFlat) mismatch("a flat dataset");
      break;
  }
  if (spec.kind == Kind::kVheZ && !config.z_branch) {
    throw ConfigError("objective 'vhe_z' needs a model with a per-element latent");
  }
  if (spec.kind == Kind::kTightened && config.aux_rows < ds.total_elements()) {
    throw ConfigError("objective 'tightened' needs one auxiliary embedding per dataset element");
  }
  if (spec.kind == Kind::kStructured && ds.meta.structure == synth::Structure::kFactorial) {
    const std::size_t smallest =
        std::min(ds.meta.n_contents, ds.meta.n_styles) * ds.meta.n_per_class;
    if (spec.d_size > smallest) throw ConfigError("d_size exceeds a factor set");
  } else if (spec.d_size > ds.meta.n_per_class) {
    throw ConfigError("d_size " + std::to_string(spec.d_size) + " exceeds the class size " +
                      std::to_string(ds.meta.n_per_class));
  }
}

template <class T>
LossBreakdown<T> episode_loss(const ObjectiveSpec& spec, const ModelView<T>& m,
                              const synth::Dataset& ds, std::size_t class_id, Rng& rng,
                              const LossOptions& opt) {
  switch (spec.kind) {
    case Kind::kStructured: {
      if (ds.meta.structure == synth::Structure::kFactorial) {
        const auto e = synth::sample_factorial_episode(ds, class_id, spec.d_size, rng);
        std::vector<FactorSupport> sup;
        for (const auto& s : e.supports) sup.push_back({s.values, s.set_size});
        return loss_structured(m, e.x, std::span<const FactorSupport>(sup), rng, opt);
      }
      const auto e = synth::sample_episode(ds, class_id, spec.d_size, rng);
      const FactorSupport sup[1] = {{e.support, e.class_size}};
      return loss_structured(m, e.x, std::span<const FactorSupport>(sup), rng, opt);
    }
    case Kind::kHierarchical: {
      const auto e =
          synth::sample_hierarchical_episode(ds, class_id, spec.group_support(), spec.d_size, rng);
      return loss_hierarchical(m, e.x, e.supports[0].values, e.supports[1].values,
                               e.supports[0].set_size, e.supports[1].set_size, rng, opt);
    }
    default: break;
  }
  const auto e = synth::sample_episode(ds, class_id, spec.d_size, rng);
  switch (spec.kind) {
    case Kind::kVae: return loss_vae(m, e.x, rng, opt);
    case Kind::kNs: return loss_ns(m, e.support, rng, opt);
    case Kind::kVhe: return loss_vhe(m, e.x, e.support, e.class_size, rng, opt);
    case Kind::kResample: return loss_resample(m, e.x, e.support, rng, opt);
    case Kind::kRescale: return loss_rescale(m, e.support[0], e.support, e.class_size, rng, opt);
    case Kind::kVheZ: return loss_vhe_z(m, e.x, e.support, e.class_size, rng, opt);
    case Kind::kTightened:
      return loss_tightened(m, e.x, ds.classes[class_id].elements, e.support_indices,
                            class_id * ds.meta.n_per_class, rng, opt);
    default: break;
  }
  throw UsageError("unhandled objective");
}

#define HOMOENC_INSTANTIATE(T)                                                                   \
  template struct LossBreakdown<T>;                                                              \
  template LossBreakdown<T> loss_vae(const ModelView<T>&, double, Rng&, const LossOptions&);     \
  template LossBreakdown<T> loss_vhe(const ModelView<T>&, double, std::span<const double>,       \
                                     std::size_t, Rng&, const LossOptions&);                     \
  template LossBreakdown<T> loss_ns(const ModelView<T>&, std::span<const double>, Rng&,          \
                                    const LossOptions&);                                         \
  template LossBreakdown<T> loss_resample(const ModelView<T>&, double, std::span<const double>,  \
                                          Rng&, const LossOptions&);                             \
  template LossBreakdown<T> loss_rescale(const ModelView<T>&, double, std::span<const double>,   \
                                         std::size_t, Rng&, const LossOptions&);                 \
  template LossBreakdown<T> loss_vhe_z(const ModelView<T>&, double, std::span<const double>,     \
                                       std::size_t, Rng&, const LossOptions&);                   \
  template LossBreakdown<T> loss_structured(const ModelView<T>&, double,                         \
                                            std::span<const FactorSupport>, Rng&,                \
                                            const LossOptions&);                                 \
  template LossBreakdown<T> loss_hierarchical(const ModelView<T>&, double,                       \
                                              std::span<const double>, std::span<const double>,  \
                                              std::size_t, std::size_t, Rng&, const LossOptions&); \
  template LossBreakdown<T> loss_tightened(const ModelView<T>&, double, std::span<const double>, \
                                           std::span<const std::size_t>, std::size_t, Rng&,      \
                                           const LossOptions&);                                  \
  template LossBreakdown<T> episode_loss(const ObjectiveSpec&, const ModelView<T>&,              \
                                         const synth::Dataset&, std::size_t, Rng&,               \
                                         const LossOptions&);

HOMOENC_INSTANTIATE(double)
HOMOENC_INSTANTIATE(ad::Var)

#undef HOMOENC_INSTANTIATE

}  // namespace homoenc::obj
