#pragma once

// Linear encoders and decoders over a flat parameter vector.
//
// Every learnable quantity lives in one std::vector<double> addressed through
// named slices. ModelView<T> reads that vector as plain doubles or as tape
// leaves, so the same forward code serves evaluation and gradients.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homoenc/adiff/tape.hpp"
#include "homoenc/dists/families.hpp"
#include "homoenc/rng.hpp"
#include "homoenc/synth/dataset.hpp"

namespace homoenc::model {

using dists::Family;
using dists::FamilyParams;
using dists::GaussianPosterior;
using synth::Structure;

struct ModelConfig {
  Family family = Family::kGaussian;
  Structure structure = Structure::kFlat;
  std::size_t latent_dim = 2;
  // Per-element latent z (gaussian family only): p(z) = N(0, 1),
  // p(x|c,z) = N(w.c + w_z z + b, sigma^2).
  bool z_branch = false;
  bool z_conditions_on_c = false;
  // Auxiliary inverse model for the tightened bound: f(c) = W_f c + b_f and
  // one embedding row per dataset element.
  std::size_t aux_embed_dim = 0;
  std::size_t aux_rows = 0;
  // Generator constants the decoder keeps fixed.
  double mix_half_sep = 2.0;
  double mix_sigma = 0.5;
  double gamma_beta = 1.0;
  // Fixed affine standardisation of the feature map (empty = identity).
  std::vector<double> feat_shift;
  std::vector<double> feat_scale;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

std::size_t feature_dim(Family f);
/// Number of affine decoder outputs (before links).
std::size_t decoder_outputs(Family f);
/// Whether the decoder has a learned scalar (sigma or kappa).
bool has_decoder_scale(Family f);

/// Raw feature map: (x, x^2), (cos x, sin x) or one-hot(8).
std::vector<double> feature_map(Family f, double x);

/// Model config for `ds` with latent dimension `latent_dim`; generator
/// constants are copied from the dataset meta and the feature standardisation
/// is fitted to its elements.
ModelConfig config_for(const synth::Dataset& ds, std::size_t latent_dim);

enum class SliceKind { kWeight, kBias, kScale };

struct Slice {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  SliceKind kind = SliceKind::kWeight;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Slice&) const = default;
};

class ParamLayout {
 public:
  const Slice& add(std::string name, std::size_t rows, std::size_t cols, SliceKind kind);
  /// nullptr when absent.
  const Slice* find(std::string_view name) const;
  const Slice& at(std::string_view name) const;
  std::size_t total() const { return total_; }
  const std::vector<Slice>& slices() const { return slices_; }
  bool operator==(const ParamLayout&) const = default;

 private:
  std::vector<Slice> slices_;
  std::size_t total_ = 0;
};

ParamLayout make_layout(const ModelConfig& config);

struct Model {
  ModelConfig config;
  ParamLayout layout;
  std::vector<double> params;

  /// All parameters zero (the posterior then equals the prior).
  static Model zeros(const ModelConfig& config);
  /// Weights ~ N(0, 0.01^2), biases and scales 0. The von Mises decoder bias
  /// starts at (1, 0) so the mean direction is defined.
  static Model init(const ModelConfig& config, Rng& rng);

  std::span<double> slice(std::string_view name);
  std::span<const double> slice(std::string_view name) const;
};

std::string to_json(const Model& m);
Model model_from_json(const std::string& text);
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

/// Reads a parameter vector as T (double or ad::Var).
template <class T>
class ModelView {
 public:
  ModelView(const ModelConfig& config, const ParamLayout& layout, std::span<const T> params);

  const ModelConfig& config() const { return *config_; }
  std::size_t latent_dim() const { return config_->latent_dim; }
  /// Number of class-level factors the decoder consumes (1, or 2 for factorial).
  std::size_t n_factors() const;

  /// Mean-pooled standardised features of D, then the affine heads under
  /// `prefix` ("enc", "enc_content", "enc_style", "enc_a").
  GaussianPosterior<T> encode(std::string_view prefix, std::span<const double> d) const;
  GaussianPosterior<T> encode_class(std::span<const double> d) const { return encode("enc", d); }
  /// Hierarchical q_c(c; D, a): the class head plus U a.
  GaussianPosterior<T> encode_class_given(std::span<const double> d, std::span<const T> a) const;
  /// q(z; x) or q(z; c, x).
  GaussianPosterior<T> encode_z(double x, std::span<const T> c) const;

  /// Decoder input is c (or [c_content; c_style] for factorial models).
  std::vector<T> decoder_affine(std::span<const T> c, std::span<const T> z = {}) const;
  FamilyParams<T> decode_params(std::span<const T> c) const;
  /// log p(x | c [, z]); uses a log-softmax for the discrete family.
  T obs_logpdf(std::span<const T> c, double x, std::span<const T> z = {}) const;

  T prior_logpdf(std::span<const T> c) const;
  /// Parameters of p(c | a) = N(W a + b, diag(exp(log_var))).
  GaussianPosterior<T> conditional_prior(std::span<const T> a) const;
  T conditional_logpdf(std::span<const T> c, std::span<const T> a) const;

  /// Tightened bound inverse model: log r(d | c) over the `class_size` rows
  /// starting at `first_row`, one entry per element.
  std::vector<T> aux_log_r(std::span<const T> c, std::size_t first_row, std::size_t class_size) const;

  T param(const Slice& s, std::size_t r, std::size_t col = 0) const {
    return params_[s.offset + r * s.cols + col];
  }
  const Slice& slice(std::string_view name) const { return layout_->at(name); }
  const Slice* find(std::string_view name) const { return layout_->find(name); }

 private:
  std::vector<double> pooled_features(std::span<const double> d) const;

  const ModelConfig* config_;
  const ParamLayout* layout_;
  std::span<const T> params_;
};

extern template class ModelView<double>;
extern template class ModelView<ad::Var>;

inline ModelView<double> view(const Model& m) {
  return ModelView<double>(m.config, m.layout, std::span<const double>(m.params));
}

}  // namespace homoenc::model
