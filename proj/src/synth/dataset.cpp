#include "homoenc/synth/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "homoenc/dists/sampling.hpp"
#include "homoenc/errors.hpp"
#include "homoenc/io/json_writer.hpp"
#include "json.hpp"

namespace homoenc::synth {

using dists::Family;
using dists::FamilyParams;

std::string_view structure_name(Structure s) {
  switch (s) {
    case Structure::kFlat: return "flat";
    case Structure::kHierarchical: return "hierarchical";
    case Structure::kFactorial: return "factorial";
  }
  return "?";
}

Structure parse_structure(std::string_view name) {
  for (Structure s : {Structure::kFlat, Structure::kHierarchical, Structure::kFactorial}) {
    if (structure_name(s) == name) return s;
  }
  throw ConfigError("unknown structure '" + std::string(name) + "'");
}

void Hyper::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("hyper: ") + name + " must be > 0");
  };
  if (!std::isfinite(gaussian_mu_mean)) throw ConfigError("hyper: gaussian_mu_mean must be finite");
  positive(gaussian_mu_sd, "gaussian_mu_sd");
  positive(gaussian_sigma, "gaussian_sigma");
  positive(mixture_center_sd, "mixture_center_sd");
  positive(mixture_sigma, "mixture_sigma");
  if (!(mixture_half_sep >= 0.0)) throw ConfigError("hyper: mixture_half_sep must be >= 0");
  if (!(von_mises_kappa >= 0.0)) throw ConfigError("hyper: von_mises_kappa must be >= 0");
  positive(gamma_alpha_lo, "gamma_alpha_lo");
  if (!(gamma_alpha_hi > gamma_alpha_lo)) throw ConfigError("hyper: gamma_alpha_hi must exceed gamma_alpha_lo");
  positive(gamma_beta, "gamma_beta");
  positive(hier_tau, "hier_tau");
  positive(hier_sigma_c, "hier_sigma_c");
  positive(hier_sigma_x, "hier_sigma_x");
  positive(fact_content_sd, "fact_content_sd");
  positive(fact_style_sd, "fact_style_sd");
  positive(fact_noise, "fact_noise");
}

std::size_t Dataset::total_elements() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.elements.size();
  return n;
}

namespace {

template <class Pred>
std::vector<std::size_t> members(const Dataset& ds, Pred pred) {
  std::vector<std::size_t> out;
  for (const auto& c : ds.classes) {
    if (pred(c)) out.push_back(c.class_id);
  }
  return out;
}

void require_counts(std::initializer_list<std::size_t> counts) {
  for (auto c : counts) {
    if (c < 1) throw ConfigError("counts must be >= 1");
  }
}

FamilyParams<double> draw_class_params(Family family, const Hyper& h, Rng& rng) {
  using dists::standard_normal;
  switch (family) {
    case Family::kGaussian:
      return dists::Gaussian<double>{h.gaussian_mu_mean + h.gaussian_mu_sd * standard_normal(rng),
                                     h.gaussian_sigma};
    case Family::kMixture2:
      return dists::Mixture2<double>{h.mixture_center_sd * standard_normal(rng), h.mixture_half_sep,
                                     h.mixture_sigma};
    case Family::kVonMises: {
      const double mu = dists::wrap_angle(std::numbers::pi * (2.0 * uniform01(rng) - 1.0));
      return dists::VonMises<double>{mu, h.von_mises_kappa};
    }
    case Family::kGamma:
      return dists::GammaShape<double>{
          h.gamma_alpha_lo + (h.gamma_alpha_hi - h.gamma_alpha_lo) * uniform01(rng), h.gamma_beta};
    case Family::kDiscrete: {
      dists::Discrete<double> d{};
      d.probs.fill(0.0);
      const auto type = uniform_index(rng, 4);
      for (int s = 1; s <= dists::kDiscreteSymbols; ++s) {
        bool in = false;
        switch (type) {
          case 0: in = s <= 4; break;
          case 1: in = s >= 5; break;
          case 2: in = s % 2 == 1; break;
          default: in = s % 2 == 0; break;
        }
        if (in) d.probs[s - 1] = 0.25;
      }
      return d;
    }
  }
  throw ConfigError("unknown family");
}

std::vector<double> draw_elements(const FamilyParams<double>& p, std::size_t n, Rng& rng) {
  std::vector<double> xs(n);
  for (auto& x : xs) x = dists::family_sample(p, rng);
  return xs;
}

// Pooled elements of several classes addressed by a flat index.
struct PooledSet {
  const Dataset* ds;
  std::vector<std::size_t> class_ids;

  std::size_t size() const { return class_ids.size() * ds->meta.n_per_class; }
  double at(std::size_t i) const {
    const std::size_t n = ds->meta.n_per_class;
    return ds->classes[class_ids[i / n]].elements[i % n];
  }
};

Support draw_support(const PooledSet& set, std::size_t d_size, Rng& rng) {
  if (d_size < 1 || d_size > set.size()) {
    throw UsageError("support size " + std::to_string(d_size) + " not in [1, " +
                     std::to_string(set.size()) + "]");
  }
  Support s;
  s.set_size = set.size();
  for (auto i : sample_subset(rng, set.size(), d_size)) s.values.push_back(set.at(i));
  return s;
}

}  // namespace

std::vector<std::size_t> Dataset::group_members(std::size_t g) const {
  return members(*this, [g](const ClassRecord& c) { return c.group_id == g; });
}

std::vector<std::size_t> Dataset::content_members(std::size_t i) const {
  return members(*this, [i](const ClassRecord& c) { return c.content_id == i; });
}

std::vector<std::size_t> Dataset::style_members(std::size_t j) const {
  return members(*this, [j](const ClassRecord& c) { return c.style_id == j; });
}

Dataset generate(Family family, std::size_t n_classes, std::size_t n_per_class,
                 std::uint64_t seed, const Hyper& hyper) {
  require_counts({n_classes, n_per_class});
  hyper.validate();
  Dataset ds;
  ds.meta.family = family;
  ds.meta.structure = Structure::kFlat;
  ds.meta.seed = seed;
  ds.meta.n_classes = n_classes;
  ds.meta.n_per_class = n_per_class;
  ds.meta.hyper = hyper;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_classes; ++i) {
    ClassRecord c;
    c.class_id = i;
    c.true_params = draw_class_params(family, hyper, rng);
    c.elements = draw_elements(c.true_params, n_per_class, rng);
    ds.classes.push_back(std::move(c));
  }
  return ds;
}

Dataset generate_hierarchical(std::size_t n_groups, std::size_t classes_per_group,
                              std::size_t n_per_class, std::uint64_t seed, const Hyper& hyper) {
  require_counts({n_groups, classes_per_group, n_per_class});
  hyper.validate();
  Dataset ds;
  auto& m = ds.meta;
  m.family = Family::kGaussian;
  m.structure = Structure::kHierarchical;
  m.seed = seed;
  m.n_classes = n_groups * classes_per_group;
  m.n_per_class = n_per_class;
  m.hyper = hyper;
  m.n_groups = n_groups;
  m.classes_per_group = classes_per_group;
  Rng rng(seed);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const double a = hyper.hier_tau * dists::standard_normal(rng);
    m.group_means.push_back(a);
    for (std::size_t k = 0; k < classes_per_group; ++k) {
      ClassRecord c;
      c.class_id = ds.classes.size();
      c.group_id = g;
      const double mean = a + hyper.hier_sigma_c * dists::standard_normal(rng);
      c.true_params = dists::Gaussian<double>{mean, hyper.hier_sigma_x};
      c.elements = draw_elements(c.true_params, n_per_class, rng);
      ds.classes.push_back(std::move(c));
    }
  }
  return ds;
}

Dataset generate_factorial(std::size_t n_contents, std::size_t n_styles, std::size_t n_per_cell,
                           std::uint64_t seed, const Hyper& hyper) {
  require_counts({n_contents, n_styles, n_per_cell});
  hyper.validate();
  Dataset ds;
  auto& m = ds.meta;
  m.family = Family::kGaussian;
  m.structure = Structure::kFactorial;
  m.seed = seed;
  m.n_classes = n_contents * n_styles;
  m.n_per_class = n_per_cell;
  m.hyper = hyper;
  m.n_contents = n_contents;
  m.n_styles = n_styles;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_contents; ++i) {
    m.content_means.push_back(hyper.fact_content_sd * dists::standard_normal(rng));
  }
  for (std::size_t j = 0; j < n_styles; ++j) {
    m.style_offsets.push_back(hyper.fact_style_sd * dists::standard_normal(rng));
  }
  for (std::size_t i = 0; i < n_contents; ++i) {
    for (std::size_t j = 0; j < n_styles; ++j) {
      ClassRecord c;
      c.class_id = ds.classes.size();
      c.content_id = i;
      c.style_id = j;
      c.true_params =
          dists::Gaussian<double>{m.content_means[i] + m.style_offsets[j], hyper.fact_noise};
      c.elements = draw_elements(c.true_params, n_per_cell, rng);
      ds.classes.push_back(std::move(c));
    }
  }
  return ds;
}

std::vector<std::size_t> sample_subset(Rng& rng, std::size_t n, std::size_t k) {
  if (k > n) throw UsageError("sample_subset: k > n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

Episode sample_episode(const Dataset& ds, std::size_t class_id, std::size_t d_size, Rng& rng) {
  if (class_id >= ds.classes.size()) throw UsageError("sample_episode: class id out of range");
  const auto& c = ds.classes[class_id];
  const std::size_t n = c.elements.size();
  if (d_size < 1 || d_size > n) {
    throw UsageError("sample_episode: d_size " + std::to_string(d_size) + " not in [1, " +
                     std::to_string(n) + "]");
  }
  Episode e;
  e.class_id = class_id;
  e.class_size = n;
  e.x_index = static_cast<std::size_t>(uniform_index(rng, n));
  e.x = c.elements[e.x_index];
  e.support_indices = sample_subset(rng, n, d_size);
  e.support.reserve(d_size);
  for (auto i : e.support_indices) e.support.push_back(c.elements[i]);
  return e;
}

StructuredEpisode sample_factorial_episode(const Dataset& ds, std::size_t class_id,
                                           std::size_t d_size, Rng& rng) {
  if (ds.meta.structure != Structure::kFactorial) {
    throw ConfigError("factorial episode requested on a " +
                      std::string(structure_name(ds.meta.structure)) + " dataset");
  }
  const auto& c = ds.classes.at(class_id);
  StructuredEpisode e;
  e.class_id = class_id;
  e.x = c.elements[uniform_index(rng, c.elements.size())];
  e.supports.push_back(draw_support({&ds, ds.content_members(*c.content_id)}, d_size, rng));
  e.supports.push_back(draw_support({&ds, ds.style_members(*c.style_id)}, d_size, rng));
  return e;
}

StructuredEpisode sample_hierarchical_episode(const Dataset& ds, std::size_t class_id,
                                              std::size_t d_group, std::size_t d_class, Rng& rng) {
  if (ds.meta.structure != Structure::kHierarchical) {
    throw ConfigError("hierarchical episode requested on a " +
                      std::string(structure_name(ds.meta.structure)) + " dataset");
  }
  const auto& c = ds.classes.at(class_id);
  StructuredEpisode e;
  e.class_id = class_id;
  e.x = c.elements[uniform_index(rng, c.elements.size())];
  e.supports.push_back(draw_support({&ds, ds.group_members(*c.group_id)}, d_group, rng));
  e.supports.push_back(draw_support({&ds, {class_id}}, d_class, rng));
  return e;
}

// ---------------------------------------------------------------------------
// JSONL persistence

namespace {

void write_params(io::JsonWriter& w, const FamilyParams<double>& params) {
  w.begin_object();
  w.field("family", dists::family_name(dists::family_of(params)));
  std::visit(
      [&w](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, dists::Gaussian<double>>) {
          w.field("mu", p.mu).field("sigma", p.sigma);
        } else if constexpr (std::is_same_v<P, dists::Mixture2<double>>) {
          w.field("center", p.center).field("half_sep", p.half_sep).field("sigma", p.sigma);
        } else if constexpr (std::is_same_v<P, dists::VonMises<double>>) {
          w.field("mu", p.mu).field("kappa", p.kappa);
        } else if constexpr (std::is_same_v<P, dists::GammaShape<double>>) {
          w.field("alpha", p.alpha).field("beta", p.beta);
        } else {
          w.key("probs").array(std::vector<double>(p.probs.begin(), p.probs.end()));
        }
      },
      params);
  w.end_object();
}

FamilyParams<double> read_params(const nlohmann::json& j) {
  const Family f = dists::parse_family(j.at("family").get<std::string>());
  FamilyParams<double> p;
  switch (f) {
    case Family::kGaussian:
      p = dists::Gaussian<double>{j.at("mu").get<double>(), j.at("sigma").get<double>()};
      break;
    case Family::kMixture2:
      p = dists::Mixture2<double>{j.at("center").get<double>(), j.at("half_sep").get<double>(),
                                  j.at("sigma").get<double>()};
      break;
    case Family::kVonMises:
      p = dists::VonMises<double>{j.at("mu").get<double>(), j.at("kappa").get<double>()};
      break;
    case Family::kGamma:
      p = dists::GammaShape<double>{j.at("alpha").get<double>(), j.at("beta").get<double>()};
      break;
    case Family::kDiscrete: {
      const auto v = j.at("probs").get<std::vector<double>>();
      if (v.size() != dists::kDiscreteSymbols) throw ConfigError("discrete: need 8 probabilities");
      dists::Discrete<double> d{};
      std::copy(v.begin(), v.end(), d.probs.begin());
      p = d;
      break;
    }
  }
  dists::validate(p);
  return p;
}

void write_hyper(io::JsonWriter& w, const Hyper& h) {
  w.begin_object()
      .field("gaussian_mu_mean", h.gaussian_mu_mean)
      .field("gaussian_mu_sd", h.gaussian_mu_sd)
      .field("gaussian_sigma", h.gaussian_sigma)
      .field("mixture_center_sd", h.mixture_center_sd)
      .field("mixture_half_sep", h.mixture_half_sep)
      .field("mixture_sigma", h.mixture_sigma)
      .field("von_mises_kappa", h.von_mises_kappa)
      .field("gamma_alpha_lo", h.gamma_alpha_lo)
      .field("gamma_alpha_hi", h.gamma_alpha_hi)
      .field("gamma_beta", h.gamma_beta)
      .field("hier_tau", h.hier_tau)
      .field("hier_sigma_c", h.hier_sigma_c)
      .field("hier_sigma_x", h.hier_sigma_x)
      .field("fact_content_sd", h.fact_content_sd)
      .field("fact_style_sd", h.fact_style_sd)
      .field("fact_noise", h.fact_noise)
      .end_object();
}

Hyper read_hyper(const nlohmann::json& j) {
  Hyper h;
  h.gaussian_mu_mean = j.at("gaussian_mu_mean").get<double>();
  h.gaussian_mu_sd = j.at("gaussian_mu_sd").get<double>();
  h.gaussian_sigma = j.at("gaussian_sigma").get<double>();
  h.mixture_center_sd = j.at("mixture_center_sd").get<double>();
  h.mixture_half_sep = j.at("mixture_half_sep").get<double>();
  h.mixture_sigma = j.at("mixture_sigma").get<double>();
  h.von_mises_kappa = j.at("von_mises_kappa").get<double>();
  h.gamma_alpha_lo = j.at("gamma_alpha_lo").get<double>();
  h.gamma_alpha_hi = j.at("gamma_alpha_hi").get<double>();
  h.gamma_beta = j.at("gamma_beta").get<double>();
  h.hier_tau = j.at("hier_tau").get<double>();
  h.hier_sigma_c = j.at("hier_sigma_c").get<double>();
  h.hier_sigma_x = j.at("hier_sigma_x").get<double>();
  h.fact_content_sd = j.at("fact_content_sd").get<double>();
  h.fact_style_sd = j.at("fact_style_sd").get<double>();
  h.fact_noise = j.at("fact_noise").get<double>();
  h.validate();
  return h;
}

}  // namespace

std::string to_jsonl(const Dataset& ds) {
  const auto& m = ds.meta;
  std::string out;
  {
    io::JsonWriter w;
    w.begin_object()
        .field("format", "homoenc-dataset")
        .field("version", 1)
        .field("family", dists::family_name(m.family))
        .field("structure", structure_name(m.structure))
        .field("seed", m.seed)
        .field("n_classes", m.n_classes)
        .field("n_per_class", m.n_per_class);
    w.key("hyper");
    write_hyper(w, m.hyper);
    if (m.structure == Structure::kHierarchical) {
      w.field("n_groups", m.n_groups).field("classes_per_group", m.classes_per_group);
      w.key("group_means").array(m.group_means);
    }
    if (m.structure == Structure::kFactorial) {
      w.field("n_contents", m.n_contents).field("n_styles", m.n_styles);
      w.key("content_means").array(m.content_means);
      w.key("style_offsets").array(m.style_offsets);
    }
    w.end_object();
    out += w.str();
    out += '\n';
  }
  for (const auto& c : ds.classes) {
    io::JsonWriter w;
    w.begin_object().field("class_id", c.class_id);
    w.key("true_params");
    write_params(w, c.true_params);
    w.key("elements").array(c.elements);
    if (c.group_id) w.field("group_id", *c.group_id);
    if (c.content_id) w.field("content_id", *c.content_id);
    if (c.style_id) w.field("style_id", *c.style_id);
    w.end_object();
    out += w.str();
    out += '\n';
  }
  return out;
}

Dataset from_jsonl(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  auto parse = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  };
  auto guarded = [&](auto&& fn) {
    try {
      fn();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  };

  if (!std::getline(in, line)) throw ParseError(1, "empty dataset file");
  ++line_no;
  const auto meta = parse(line);
  auto& m = ds.meta;
  guarded([&] {
    if (meta.at("format").get<std::string>() != "homoenc-dataset") {
      throw ConfigError("not a homoenc dataset");
    }
    m.family = dists::parse_family(meta.at("family").get<std::string>());
    m.structure = parse_structure(meta.at("structure").get<std::string>());
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.n_classes = meta.at("n_classes").get<std::size_t>();
    m.n_per_class = meta.at("n_per_class").get<std::size_t>();
    m.hyper = read_hyper(meta.at("hyper"));
    if (m.structure == Structure::kHierarchical) {
      m.n_groups = meta.at("n_groups").get<std::size_t>();
      m.classes_per_group = meta.at("classes_per_group").get<std::size_t>();
      m.group_means = meta.at("group_means").get<std::vector<double>>();
    }
    if (m.structure == Structure::kFactorial) {
      m.n_contents = meta.at("n_contents").get<std::size_t>();
      m.n_styles = meta.at("n_styles").get<std::size_t>();
      m.content_means = meta.at("content_means").get<std::vector<double>>();
      m.style_offsets = meta.at("style_offsets").get<std::vector<double>>();
    }
  });

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = parse(line);
    guarded([&] {
      ClassRecord c;
      c.class_id = j.at("class_id").get<std::size_t>();
      if (c.class_id != ds.classes.size()) throw ConfigError("class ids must be 0..n-1 in order");
      c.true_params = read_params(j.at("true_params"));
      c.elements = j.at("elements").get<std::vector<double>>();
      if (c.elements.size() != m.n_per_class) {
        throw ConfigError("class " + std::to_string(c.class_id) + " has " +
                          std::to_string(c.elements.size()) + " elements, expected " +
                          std::to_string(m.n_per_class));
      }
      for (double x : c.elements) dists::check_support(m.family, x);
      if (j.contains("group_id")) c.group_id = j.at("group_id").get<std::size_t>();
      if (j.contains("content_id")) c.content_id = j.at("content_id").get<std::size_t>();
      if (j.contains("style_id")) c.style_id = j.at("style_id").get<std::size_t>();
      ds.classes.push_back(std::move(c));
    });
  }
  if (ds.classes.size() != m.n_classes) {
    throw ParseError(line_no + 1, "expected " + std::to_string(m.n_classes) + " classes, found " +
                                      std::to_string(ds.classes.size()) + " (truncated file?)");
  }
  return ds;
}

void save(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_jsonl(ds);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Dataset load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return from_jsonl(in);
}

}  // namespace homoenc::synth
