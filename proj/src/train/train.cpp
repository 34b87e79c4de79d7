#include "homoenc/train/train.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <string>

#include "homoenc/errors.hpp"
#include "homoenc/io/json_writer.hpp"

namespace homoenc::train {

namespace {

// Stream tags keep shuffles and initialisation apart from episode streams.
constexpr std::uint64_t kShuffleTag = 0x5348;
constexpr std::uint64_t kInitTag = 0x494e;

std::string param_name(const model::Model& m, std::size_t i) {
  for (const auto& s : m.layout.slices()) {
    if (i >= s.offset && i < s.offset + s.size()) {
      return s.name + "[" + std::to_string(i - s.offset) + "]";
    }
  }
  return "#" + std::to_string(i);
}

}  // namespace

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const AdamConfig& cfg, std::uint64_t t) {
  if (t < 1) throw UsageError("adam_step: t must be >= 1");
  if (grads.size() != params.size()) throw UsageError("adam_step: size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient at parameter " + std::to_string(i));
    }
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  const double td = static_cast<double>(t);
  const double c1 = 1.0 - std::pow(cfg.beta1, td);
  const double c2 = 1.0 - std::pow(cfg.beta2, td);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = c1 > 0.0 ? state.m[i] / c1 : state.m[i];
    const double v_hat = c2 > 0.0 ? state.v[i] / c2 : state.v[i];
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

double anneal_weight(std::size_t epoch, std::size_t anneal_epochs) {
  if (anneal_epochs == 0) return 1.0;
  return std::min(1.0, static_cast<double>(epoch + 1) / static_cast<double>(anneal_epochs));
}

void TrainConfig::validate() const {
  objective.validate();
  if (M < 1) throw ConfigError("minibatch size M must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(adam.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (runs < 1) throw ConfigError("runs must be >= 1");
}

void episode_gradient(const obj::ObjectiveSpec& spec, const model::Model& m,
                      const synth::Dataset& ds, const EpisodeSlot& slot,
                      const obj::LossOptions& opt, ad::Tape& tape, double& loss, double& kl,
                      std::span<double> grad) {
  tape.clear();
  std::vector<ad::Var> leaves;
  leaves.reserve(m.params.size());
  for (double p : m.params) leaves.push_back(tape.input(p));
  const model::ModelView<ad::Var> view(m.config, m.layout, std::span<const ad::Var>(leaves));
  Rng rng = derive_rng(slot.seed, std::span<const std::uint64_t>(slot.path));
  auto where = [&] {
    return "class " + std::to_string(slot.class_id) + " (epoch " + std::to_string(slot.path[1]) +
           ", step " + std::to_string(slot.path[2]) + ")";
  };
  // Parameters that drive an op out of its domain are a diverged run.
  std::optional<obj::LossBreakdown<ad::Var>> res;
  try {
    res = obj::episode_loss(spec, view, ds, slot.class_id, rng, opt);
  } catch (const DomainError& e) {
    throw NumericError(std::string(e.what()) + " on " + where());
  }
  const auto& b = *res;
  loss = b.total.value();
  const auto* kl_term = b.find("kl_c");
  kl = (kl_term ? kl_term->value : b.terms.front().value).value();
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite loss on " + where());
  }
  tape.backward(b.total);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    grad[i] = tape.grad(leaves[i]);
    if (!std::isfinite(grad[i])) {
      throw NumericError("non-finite gradient for " + param_name(m, i) + " on class " +
                         std::to_string(slot.class_id) + " (epoch " +
                         std::to_string(slot.path[1]) + ")");
    }
  }
}

namespace {

BatchResult reduce(const std::vector<double>& losses, const std::vector<double>& kls,
                   const std::vector<double>& grads, std::size_t n_params) {
  BatchResult r;
  r.grad_sum.assign(n_params, 0.0);
  for (std::size_t k = 0; k < losses.size(); ++k) {
    r.loss_sum += losses[k];
    r.kl_sum += kls[k];
    for (std::size_t i = 0; i < n_params; ++i) r.grad_sum[i] += grads[k * n_params + i];
  }
  return r;
}

}  // namespace

BatchResult batch_gradient_serial(const obj::ObjectiveSpec& spec, const model::Model& m,
                                  const synth::Dataset& ds, std::span<const EpisodeSlot> slots,
                                  const obj::LossOptions& opt) {
  const std::size_t n = m.params.size();
  std::vector<double> losses(slots.size()), kls(slots.size()), grads(slots.size() * n);
  ad::Tape tape;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    episode_gradient(spec, m, ds, slots[k], opt, tape, losses[k], kls[k],
                     std::span<double>(grads).subspan(k * n, n));
  }
  return reduce(losses, kls, grads, n);
}

BatchResult batch_gradient_parallel(const obj::ObjectiveSpec& spec, const model::Model& m,
                                    const synth::Dataset& ds, std::span<const EpisodeSlot> slots,
                                    const obj::LossOptions& opt) {
  const std::size_t n = m.params.size();
  const auto count = static_cast<std::ptrdiff_t>(slots.size());
  std::vector<double> losses(slots.size()), kls(slots.size()), grads(slots.size() * n);
  std::vector<std::exception_ptr> errors(slots.size());
#pragma omp parallel if (!omp_in_parallel())
  {
    ad::Tape tape;
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      const auto u = static_cast<std::size_t>(k);
      try {
        episode_gradient(spec, m, ds, slots[u], opt, tape, losses[u], kls[u],
                         std::span<double>(grads).subspan(u * n, n));
      } catch (...) {
        errors[u] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return reduce(losses, kls, grads, n);
}

TrainHistory train_run(const synth::Dataset& ds, model::Model init, const TrainConfig& config,
                       std::size_t run, const EpochCallback& on_epoch) {
  config.validate();
  obj::check_compatible(config.objective, init.config, ds);
  const auto start = std::chrono::steady_clock::now();

  TrainHistory h;
  h.run = run;
  h.seed = config.seed;
  h.model = std::move(init);
  model::Model& m = h.model;
  const std::size_t n_params = m.params.size();

  std::vector<bool> frozen(n_params, false);
  for (const auto& s : m.layout.slices()) {
    for (const auto& prefix : config.frozen) {
      if (s.name.rfind(prefix, 0) == 0) {
        std::fill(frozen.begin() + static_cast<std::ptrdiff_t>(s.offset),
                  frozen.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size()), true);
      }
    }
  }

  const std::size_t n_classes = ds.classes.size();
  const double override_w = config.objective.kl_weight_override.value_or(1.0);
  AdamState adam;
  std::uint64_t t = 0;
  std::vector<std::vector<std::size_t>> order(config.M);
  std::vector<EpisodeSlot> slots(config.M);

  for (std::size_t epoch = 0; epoch < config.total_epochs(); ++epoch) {
    const double w = anneal_weight(epoch, config.anneal_epochs);
    obj::LossOptions opt;
    opt.kl_scale = override_w * w;
    opt.mc_samples = config.objective.mc_samples;

    for (std::size_t k = 0; k < config.M; ++k) {
      order[k].resize(n_classes);
      std::iota(order[k].begin(), order[k].end(), std::size_t{0});
      Rng rng = derive_rng(config.seed, {run, epoch, kShuffleTag, k});
      for (std::size_t i = n_classes; i > 1; --i) {
        std::swap(order[k][i - 1], order[k][uniform_index(rng, i)]);
      }
    }

    double loss_sum = 0.0, kl_sum = 0.0;
    for (std::size_t step = 0; step < n_classes; ++step) {
      for (std::size_t k = 0; k < config.M; ++k) {
        slots[k] = EpisodeSlot{order[k][step], config.seed, {run, epoch, step, k}};
      }
      const auto batch = config.parallel
                             ? batch_gradient_parallel(config.objective, m, ds, slots, opt)
                             : batch_gradient_serial(config.objective, m, ds, slots, opt);
      loss_sum += batch.loss_sum;
      kl_sum += batch.kl_sum;
      std::vector<double> g(n_params);
      const double inv_m = 1.0 / static_cast<double>(config.M);
      for (std::size_t i = 0; i < n_params; ++i) g[i] = frozen[i] ? 0.0 : batch.grad_sum[i] * inv_m;
      adam_step(adam, m.params, g, config.adam, ++t);
    }
    const double denom = static_cast<double>(n_classes * config.M);
    h.loss.push_back(loss_sum / denom);
    h.kl_c.push_back(kl_sum / denom);
    h.anneal.push_back(w);
    if (on_epoch) on_epoch(run, epoch, h.loss.back(), h.kl_c.back(), w);
  }
  h.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return h;
}

std::vector<TrainHistory> train(const synth::Dataset& ds, const model::ModelConfig& model_config,
                                const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  std::vector<TrainHistory> out(config.runs);
  std::vector<std::exception_ptr> errors(config.runs);
  const auto runs = static_cast<std::ptrdiff_t>(config.runs);
#pragma omp parallel for schedule(dynamic) if (config.parallel && config.runs > 1)
  for (std::ptrdiff_t r = 0; r < runs; ++r) {
    const auto u = static_cast<std::size_t>(r);
    try {
      Rng rng = derive_rng(config.seed, {u, kInitTag});
      out[u] = train_run(ds, model::Model::init(model_config, rng), config, u, on_epoch);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::size_t select_best_index(std::span<const TrainHistory> histories) {
  if (histories.empty()) throw UsageError("select_best: no runs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < histories.size(); ++i) {
    if (histories[i].final_loss() < histories[best].final_loss()) best = i;
  }
  return best;
}

const TrainHistory& select_best(std::span<const TrainHistory> histories) {
  return histories[select_best_index(histories)];
}

std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,anneal,loss,kl_c\n";
  for (std::size_t e = 0; e < h.loss.size(); ++e) {
    out += std::to_string(e) + "," + io::format_double(h.anneal[e]) + "," +
           io::format_double(h.loss[e]) + "," + io::format_double(h.kl_c[e]) + "\n";
  }
  return out;
}

}  // namespace homoenc::train
