#pragma once

// Class-structured 1D datasets: generation, episodic subsampling, and JSONL
// persistence.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homoenc/dists/families.hpp"
#include "homoenc/rng.hpp"

namespace homoenc::synth {

enum class Structure { kFlat, kHierarchical, kFactorial };

std::string_view structure_name(Structure s);
Structure parse_structure(std::string_view name);

/// Hyperprior settings. Every value is written into the dataset meta line.
struct Hyper {
  double gaussian_mu_mean = 0.0;
  double gaussian_mu_sd = 10.0;
  double gaussian_sigma = 1.0;
  double mixture_center_sd = 10.0;
  double mixture_half_sep = 2.0;
  double mixture_sigma = 0.5;
  double von_mises_kappa = 2.0;
  double gamma_alpha_lo = 1.0;
  double gamma_alpha_hi = 5.0;
  double gamma_beta = 1.0;
  double hier_tau = 5.0;
  double hier_sigma_c = 1.0;
  double hier_sigma_x = 0.5;
  double fact_content_sd = 5.0;
  double fact_style_sd = 2.0;
  double fact_noise = 0.3;

  void validate() const;
  bool operator==(const Hyper&) const = default;
};

struct DatasetMeta {
  dists::Family family = dists::Family::kGaussian;
  Structure structure = Structure::kFlat;
  std::uint64_t seed = 0;
  std::size_t n_classes = 0;
  std::size_t n_per_class = 0;
  Hyper hyper;
  // hierarchical
  std::size_t n_groups = 0;
  std::size_t classes_per_group = 0;
  std::vector<double> group_means;
  // factorial
  std::size_t n_contents = 0;
  std::size_t n_styles = 0;
  std::vector<double> content_means;
  std::vector<double> style_offsets;
};

struct ClassRecord {
  std::size_t class_id = 0;
  dists::FamilyParams<double> true_params;
  std::vector<double> elements;
  std::optional<std::size_t> group_id;
  std::optional<std::size_t> content_id;
  std::optional<std::size_t> style_id;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<ClassRecord> classes;

  std::size_t n_classes() const { return classes.size(); }
  std::size_t total_elements() const;
  /// Class ids sharing the given group / content / style, ascending.
  std::vector<std::size_t> group_members(std::size_t group_id) const;
  std::vector<std::size_t> content_members(std::size_t content_id) const;
  std::vector<std::size_t> style_members(std::size_t style_id) const;
};

/// Target element x and support D drawn from its class. D is uniform without
/// replacement and independent of x, so x may appear in D.
struct Episode {
  double x = 0.0;
  std::size_t x_index = 0;
  std::vector<double> support;
  std::vector<std::size_t> support_indices;
  std::size_t class_size = 0;
  std::size_t class_id = 0;
};

/// One subsampled set per latent factor that contains x.
struct Support {
  std::vector<double> values;
  std::size_t set_size = 0;
};

/// Factorial: supports are {content set, style set}. Hierarchical: supports
/// are {group set, class set}.
struct StructuredEpisode {
  double x = 0.0;
  std::size_t class_id = 0;
  std::vector<Support> supports;
};

Dataset generate(dists::Family family, std::size_t n_classes, std::size_t n_per_class,
                 std::uint64_t seed, const Hyper& hyper = {});

Dataset generate_hierarchical(std::size_t n_groups, std::size_t classes_per_group,
                              std::size_t n_per_class, std::uint64_t seed,
                              const Hyper& hyper = {});

/// Each (content, style) cell becomes one class record of n_per_cell elements
/// x = mu_content + delta_style + noise.
Dataset generate_factorial(std::size_t n_contents, std::size_t n_styles, std::size_t n_per_cell,
                           std::uint64_t seed, const Hyper& hyper = {});

/// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_subset(Rng& rng, std::size_t n, std::size_t k);

Episode sample_episode(const Dataset& ds, std::size_t class_id, std::size_t d_size, Rng& rng);

/// x from class `class_id`; content and style supports of size d_size drawn
/// from the union of the cells sharing x's content / style.
StructuredEpisode sample_factorial_episode(const Dataset& ds, std::size_t class_id,
                                           std::size_t d_size, Rng& rng);

/// x from class `class_id`; group support (elements pooled over every class in
/// x's group) of size d_group, class support of size d_class.
StructuredEpisode sample_hierarchical_episode(const Dataset& ds, std::size_t class_id,
                                              std::size_t d_group, std::size_t d_class, Rng& rng);

void save(const Dataset& ds, const std::string& path);
Dataset load(const std::string& path);

std::string to_jsonl(const Dataset& ds);
Dataset from_jsonl(std::istream& in);

}  // namespace homoenc::synth
