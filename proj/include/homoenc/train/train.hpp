#pragma once

// Minibatch episodic training with Adam and linear KL annealing.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "homoenc/adiff/tape.hpp"
#include "homoenc/model/model.hpp"
#include "homoenc/objectives/objectives.hpp"
#include "homoenc/synth/dataset.hpp"

namespace homoenc::train {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

/// Bias-corrected Adam update at step t >= 1. Throws NumericError on a
/// non-finite gradient, leaving params untouched.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const AdamConfig& cfg, std::uint64_t t);

/// min(1, (epoch + 1) / anneal_epochs), or 1 when anneal_epochs == 0.
double anneal_weight(std::size_t epoch, std::size_t anneal_epochs);

struct TrainConfig {
  obj::ObjectiveSpec objective;
  std::size_t M = 16;
  /// Epochs at full KL weight, run after the annealing epochs.
  std::size_t epochs = 200;
  std::size_t anneal_epochs = 50;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t runs = 3;
  /// Parameter slices whose names start with any of these are not updated.
  std::vector<std::string> frozen;
  /// Use the OpenMP minibatch kernel (results are identical either way).
  bool parallel = true;

  void validate() const;
  std::size_t total_epochs() const { return anneal_epochs + epochs; }
};

struct TrainHistory {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss;
  std::vector<double> kl_c;
  std::vector<double> anneal;
  model::Model model;
  double wall_seconds = 0.0;

  double final_loss() const { return loss.empty() ? 0.0 : loss.back(); }
};

/// Summed loss, summed kl_c and summed gradient over the episodes of one step.
struct BatchResult {
  double loss_sum = 0.0;
  double kl_sum = 0.0;
  std::vector<double> grad_sum;
};

/// Where one episode of a minibatch comes from.
struct EpisodeSlot {
  std::size_t class_id = 0;
  std::uint64_t seed = 0;
  /// (run, epoch, step, slot).
  std::array<std::uint64_t, 4> path{};
};

/// Loss and gradient of a single episode on a caller-owned tape.
void episode_gradient(const obj::ObjectiveSpec& spec, const model::Model& m,
                      const synth::Dataset& ds, const EpisodeSlot& slot,
                      const obj::LossOptions& opt, ad::Tape& tape, double& loss, double& kl,
                      std::span<double> grad);

/// Reference kernel: episodes evaluated one after another.
BatchResult batch_gradient_serial(const obj::ObjectiveSpec& spec, const model::Model& m,
                                  const synth::Dataset& ds, std::span<const EpisodeSlot> slots,
                                  const obj::LossOptions& opt);

/// OpenMP kernel: episodes evaluated concurrently on per-thread tapes, then
/// reduced in slot order, so the result equals the serial kernel bit for bit.
BatchResult batch_gradient_parallel(const obj::ObjectiveSpec& spec, const model::Model& m,
                                    const synth::Dataset& ds, std::span<const EpisodeSlot> slots,
                                    const obj::LossOptions& opt);

using EpochCallback = std::function<void(std::size_t run, std::size_t epoch, double loss,
                                         double kl_c, double anneal)>;

/// One training run from `init`. Deterministic given (dataset, init, config, run).
TrainHistory train_run(const synth::Dataset& ds, model::Model init, const TrainConfig& config,
                       std::size_t run, const EpochCallback& on_epoch = {});

/// `config.runs` restarts, each initialised from its own stream.
std::vector<TrainHistory> train(const synth::Dataset& ds, const model::ModelConfig& model_config,
                                const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Lowest final-epoch loss; ties go to the lowest index.
const TrainHistory& select_best(std::span<const TrainHistory> histories);
std::size_t select_best_index(std::span<const TrainHistory> histories);

/// CSV with columns epoch,anneal,loss,kl_c (17 significant digits).
std::string history_csv(const TrainHistory& h);

}  // namespace homoenc::train
