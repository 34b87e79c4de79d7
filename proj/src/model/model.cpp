#include "homoenc/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "homoenc/dists/sampling.hpp"
#include "homoenc/errors.hpp"
#include "json.hpp"

namespace homoenc::model {

using nlohmann::json;

std::size_t feature_dim(Family f) {
  return f == Family::kDiscrete ? dists::kDiscreteSymbols : 2;
}

std::size_t decoder_outputs(Family f) {
  switch (f) {
    case Family::kVonMises: return 2;
    case Family::kDiscrete: return dists::kDiscreteSymbols;
    default: return 1;
  }
}

bool has_decoder_scale(Family f) {
  return f == Family::kGaussian || f == Family::kVonMises;
}

std::vector<double> feature_map(Family f, double x) {
  switch (f) {
    case Family::kVonMises: return {std::cos(x), std::sin(x)};
    case Family::kDiscrete: {
      dists::check_support(f, x);
      std::vector<double> v(dists::kDiscreteSymbols, 0.0);
      v[static_cast<std::size_t>(std::lround(x)) - 1] = 1.0;
      return v;
    }
    default: return {x, x * x};
  }
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (z_branch && family != Family::kGaussian) {
    throw ConfigError("the per-element latent is only defined for the gaussian family");
  }
  if (z_conditions_on_c && !z_branch) throw ConfigError("z_conditions_on_c requires z_branch");
  if (aux_embed_dim > 0 && structure != Structure::kFlat) {
    throw ConfigError("the tightened-bound auxiliary model needs a flat structure");
  }
  if ((aux_embed_dim == 0) != (aux_rows == 0)) {
    throw ConfigError("aux_embed_dim and aux_rows must both be zero or both positive");
  }
  if (!(mix_sigma > 0.0) || !(mix_half_sep >= 0.0) || !(gamma_beta > 0.0)) {
    throw ConfigError("invalid fixed decoder constants");
  }
  const std::size_t f = feature_dim(family);
  if (!feat_shift.empty() || !feat_scale.empty()) {
    if (feat_shift.size() != f || feat_scale.size() != f) {
      throw ConfigError("feature standardisation must have one entry per feature");
    }
    for (double s : feat_scale) {
      if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("feature scales must be positive");
    }
  }
}

ModelConfig config_for(const synth::Dataset& ds, std::size_t latent_dim) {
  ModelConfig c;
  c.family = ds.meta.family;
  c.structure = ds.meta.structure;
  c.latent_dim = latent_dim;
  c.mix_half_sep = ds.meta.hyper.mixture_half_sep;
  c.mix_sigma = ds.meta.hyper.mixture_sigma;
  c.gamma_beta = ds.meta.hyper.gamma_beta;
  if (c.family == Family::kGaussian || c.family == Family::kMixture2 || c.family == Family::kGamma) {
    double n = 0.0;
    std::vector<double> mean(2, 0.0), m2(2, 0.0);
    for (const auto& cls : ds.classes) {
      for (double x : cls.elements) {
        const auto f = feature_map(c.family, x);
        n += 1.0;
        for (std::size_t k = 0; k < 2; ++k) {
          const double d = f[k] - mean[k];
          mean[k] += d / n;
          m2[k] += d * (f[k] - mean[k]);
        }
      }
    }
    c.feat_shift = mean;
    c.feat_scale.resize(2);
    for (std::size_t k = 0; k < 2; ++k) {
      const double sd = n > 1.0 ? std::sqrt(m2[k] / (n - 1.0)) : 0.0;
      c.feat_scale[k] = sd > 0.0 ? sd : 1.0;
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Layout

const Slice& ParamLayout::add(std::string name, std::size_t rows, std::size_t cols, SliceKind kind) {
  if (find(name)) throw UsageError("duplicate slice " + name);
  slices_.push_back(Slice{std::move(name), total_, rows, cols, kind});
  total_ += rows * cols;
  return slices_.back();
}

const Slice* ParamLayout::find(std::string_view name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Slice& ParamLayout::at(std::string_view name) const {
  if (const Slice* s = find(name)) return *s;
  throw ConfigError("model has no parameter slice '" + std::string(name) + "'");
}

namespace {

void add_encoder(ParamLayout& l, const std::string& prefix, std::size_t latent, std::size_t feat) {
  l.add(prefix + ".w_mu", latent, feat, SliceKind::kWeight);
  l.add(prefix + ".b_mu", latent, 1, SliceKind::kBias);
  l.add(prefix + ".w_lv", latent, feat, SliceKind::kWeight);
  l.add(prefix + ".b_lv", latent, 1, SliceKind::kBias);
}

}  // namespace

ParamLayout make_layout(const ModelConfig& c) {
  c.validate();
  const std::size_t L = c.latent_dim;
  const std::size_t F = feature_dim(c.family);
  ParamLayout l;
  std::size_t n_factors = 1;
  switch (c.structure) {
    case Structure::kFlat:
      add_encoder(l, "enc", L, F);
      break;
    case Structure::kFactorial:
      add_encoder(l, "enc_content", L, F);
      add_encoder(l, "enc_style", L, F);
      n_factors = 2;
      break;
    case Structure::kHierarchical:
      add_encoder(l, "enc_a", L, F);
      add_encoder(l, "enc", L, F);
      l.add("enc.u_mu", L, L, SliceKind::kWeight);
      l.add("enc.u_lv", L, L, SliceKind::kWeight);
      l.add("cond.w", L, L, SliceKind::kWeight);
      l.add("cond.b", L, 1, SliceKind::kBias);
      l.add("cond.log_var", L, 1, SliceKind::kBias);
      break;
  }
  l.add("dec.w", decoder_outputs(c.family), n_factors * L, SliceKind::kWeight);
  l.add("dec.b", decoder_outputs(c.family), 1, SliceKind::kBias);
  if (has_decoder_scale(c.family)) l.add("dec.scale", 1, 1, SliceKind::kScale);
  if (c.z_branch) {
    l.add("dec.w_z", 1, 1, SliceKind::kWeight);
    l.add("encz.w_x", 1, F, SliceKind::kWeight);
    l.add("encz.b", 1, 1, SliceKind::kBias);
    l.add("encz.v_x", 1, F, SliceKind::kWeight);
    l.add("encz.v_b", 1, 1, SliceKind::kBias);
    if (c.z_conditions_on_c) {
      l.add("encz.u_c", 1, L, SliceKind::kWeight);
      l.add("encz.v_c", 1, L, SliceKind::kWeight);
    }
  }
  if (c.aux_embed_dim > 0) {
    l.add("aux.w_f", c.aux_embed_dim, L, SliceKind::kWeight);
    l.add("aux.b_f", c.aux_embed_dim, 1, SliceKind::kBias);
    l.add("aux.xi", c.aux_rows, c.aux_embed_dim, SliceKind::kWeight);
  }
  return l;
}

Model Model::zeros(const ModelConfig& config) {
  Model m;
  m.config = config;
  m.layout = make_layout(config);
  m.params.assign(m.layout.total(), 0.0);
  return m;
}

Model Model::init(const ModelConfig& config, Rng& rng) {
  Model m = zeros(config);
  for (const auto& s : m.layout.slices()) {
    if (s.kind != SliceKind::kWeight) continue;
    for (std::size_t i = 0; i < s.size(); ++i) {
      m.params[s.offset + i] = 0.01 * dists::standard_normal(rng);
    }
  }
  if (config.family == Family::kVonMises) m.slice("dec.b")[0] = 1.0;
  return m;
}

std::span<double> Model::slice(std::string_view name) {
  const Slice& s = layout.at(name);
  return std::span<double>(params).subspan(s.offset, s.size());
}

std::span<const double> Model::slice(std::string_view name) const {
  const Slice& s = layout.at(name);
  return std::span<const double>(params).subspan(s.offset, s.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json config_json(const ModelConfig& c) {
  return json{{"family", dists::family_name(c.family)},
              {"structure", synth::structure_name(c.structure)},
              {"latent_dim", c.latent_dim},
              {"z_branch", c.z_branch},
              {"z_conditions_on_c", c.z_conditions_on_c},
              {"aux_embed_dim", c.aux_embed_dim},
              {"aux_rows", c.aux_rows},
              {"mix_half_sep", c.mix_half_sep},
              {"mix_sigma", c.mix_sigma},
              {"gamma_beta", c.gamma_beta},
              {"feat_shift", c.feat_shift},
              {"feat_scale", c.feat_scale}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.family = dists::parse_family(j.at("family").get<std::string>());
  c.structure = synth::parse_structure(j.at("structure").get<std::string>());
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.z_branch = j.at("z_branch").get<bool>();
  c.z_conditions_on_c = j.at("z_conditions_on_c").get<bool>();
  c.aux_embed_dim = j.at("aux_embed_dim").get<std::size_t>();
  c.aux_rows = j.at("aux_rows").get<std::size_t>();
  c.mix_half_sep = j.at("mix_half_sep").get<double>();
  c.mix_sigma = j.at("mix_sigma").get<double>();
  c.gamma_beta = j.at("gamma_beta").get<double>();
  c.feat_shift = j.at("feat_shift").get<std::vector<double>>();
  c.feat_scale = j.at("feat_scale").get<std::vector<double>>();
  c.validate();
  return c;
}

}  // namespace

std::string to_json(const Model& m) {
  json slices = json::array();
  for (const auto& s : m.layout.slices()) {
    slices.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  }
  json j{{"format", "homoenc-model"},
         {"version", 1},
         {"meta", config_json(m.config)},
         {"slices", slices},
         {"params", m.params}};
  return j.dump() + "\n";
}

Model model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "homoenc-model") {
      throw ConfigError("not a homoenc model checkpoint");
    }
    Model m = Model::zeros(config_from(j.at("meta")));
    const auto& slices = j.at("slices");
    if (slices.size() != m.layout.slices().size()) throw ConfigError("checkpoint slice table mismatch");
    for (std::size_t i = 0; i < slices.size(); ++i) {
      const Slice& s = m.layout.slices()[i];
      if (slices[i].at("name").get<std::string>() != s.name ||
          slices[i].at("offset").get<std::size_t>() != s.offset ||
          slices[i].at("rows").get<std::size_t>() != s.rows ||
          slices[i].at("cols").get<std::size_t>() != s.cols) {
        throw ConfigError("checkpoint slice '" + s.name + "' does not match the model layout");
      }
    }
    m.params = j.at("params").get<std::vector<double>>();
    if (m.params.size() != m.layout.total()) throw ConfigError("checkpoint parameter count mismatch");
    return m;
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json(m);
  if (!out) throw IoError("write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace homoenc::model
