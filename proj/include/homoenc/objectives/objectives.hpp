#pragma once

// Episodic training objectives as negated bounds (smaller is better).
//
// Every loss draws its reparameterisation noise from the rng it is given, in a
// fixed order: the class latent c first, then z, then any further factors.
// Calling two losses with copies of the same rng therefore shares the c sample.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homoenc/model/model.hpp"
#include "homoenc/rng.hpp"
#include "homoenc/synth/dataset.hpp"

namespace homoenc::obj {

using model::ModelView;

enum class Kind { kVae, kNs, kVhe, kResample, kRescale, kVheZ, kStructured, kHierarchical, kTightened };

std::string_view objective_name(Kind k);
Kind parse_objective(std::string_view name);

struct ObjectiveSpec {
  Kind kind = Kind::kVhe;
  std::size_t d_size = 1;
  /// Group-level support size for the hierarchical objective; 0 means d_size.
  std::size_t d_group = 0;
  std::optional<double> kl_weight_override;
  std::size_t mc_samples = 1;

  void validate() const;
  std::size_t group_support() const { return d_group == 0 ? d_size : d_group; }
};

struct LossOptions {
  /// Multiplies every KL weight (override times annealing weight).
  double kl_scale = 1.0;
  std::size_t mc_samples = 1;
};

/// A weighted penalty: kl_c, kl_z, kl_a, kl_content, kl_style or log_ratio.
template <class T>
struct Term {
  std::string name;
  T value;
  double weight;
};

/// total = -(recon - sum_i weight_i * value_i).
template <class T>
struct LossBreakdown {
  T total;
  T recon;
  std::vector<Term<T>> terms;

  const Term<T>* find(std::string_view name) const;
  /// Value of the named term; throws UsageError when absent.
  T term(std::string_view name) const;
  double weight(std::string_view name) const;
};

/// Support for one latent factor: a subset of the set X_i that contains x.
struct FactorSupport {
  std::span<const double> d;
  std::size_t set_size = 0;
};

template <class T>
LossBreakdown<T> loss_vae(const ModelView<T>& m, double x, Rng& rng, const LossOptions& opt = {});

template <class T>
LossBreakdown<T> loss_vhe(const ModelView<T>& m, double x, std::span<const double> d,
                          std::size_t class_size, Rng& rng, const LossOptions& opt = {});

template <class T>
LossBreakdown<T> loss_ns(const ModelView<T>& m, std::span<const double> d, Rng& rng,
                         const LossOptions& opt = {});

template <class T>
LossBreakdown<T> loss_resample(const ModelView<T>& m, double x, std::span<const double> d, Rng& rng,
                               const LossOptions& opt = {});

/// x must be an element of D.
template <class T>
LossBreakdown<T> loss_rescale(const ModelView<T>& m, double x, std::span<const double> d,
                              std::size_t class_size, Rng& rng, const LossOptions& opt = {});

template <class T>
LossBreakdown<T> loss_vhe_z(const ModelView<T>& m, double x, std::span<const double> d,
                            std::size_t class_size, Rng& rng, const LossOptions& opt = {});

/// One support per factor of the model (1 for flat, {content, style} for
/// factorial), each KL weighted by 1 / set_size.
template <class T>
LossBreakdown<T> loss_structured(const ModelView<T>& m, double x,
                                 std::span<const FactorSupport> supports, Rng& rng,
                                 const LossOptions& opt = {});

template <class T>
LossBreakdown<T> loss_hierarchical(const ModelView<T>& m, double x, std::span<const double> d_a,
                                   std::span<const double> d_c, std::size_t group_size,
                                   std::size_t class_size, Rng& rng, const LossOptions& opt = {});

/// D is given by its indices into the class; the class's auxiliary embeddings
/// start at row `first_row`. The subset proposal q' is uniform over subsets
/// of size |D| and r is a per-element softmax over the class.
template <class T>
LossBreakdown<T> loss_tightened(const ModelView<T>& m, double x,
                                std::span<const double> class_elements,
                                std::span<const std::size_t> d_indices, std::size_t first_row,
                                Rng& rng, const LossOptions& opt = {});

/// log C(n, k).
double log_binomial(std::size_t n, std::size_t k);

/// Throws ConfigError when the objective cannot run on this model/dataset.
void check_compatible(const ObjectiveSpec& spec, const model::ModelConfig& config,
                      const synth::Dataset& ds);

/// Samples the episode the objective needs from class `class_id` and
/// evaluates it. Episode sampling and noise both come from `rng`.
template <class T>
LossBreakdown<T> episode_loss(const ObjectiveSpec& spec, const ModelView<T>& m,
                              const synth::Dataset& ds, std::size_t class_id, Rng& rng,
                              const LossOptions& opt);

}  // namespace homoenc::obj
