// Serial vs OpenMP minibatch kernel on a gaussian dataset. Prints wall time
// per kernel and checks that both produce the same gradient bits.
//
//   bench_train [classes] [per_class] [M] [steps]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "homoenc/model/model.hpp"
#include "homoenc/synth/dataset.hpp"
#include "homoenc/train/train.hpp"

using namespace homoenc;

namespace {

std::size_t arg_or(int argc, char** argv, int i, std::size_t fallback) {
  return argc > i ? std::strtoull(argv[i], nullptr, 10) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t classes = arg_or(argc, argv, 1, 100);
  const std::size_t per_class = arg_or(argc, argv, 2, 100);
  const std::size_t M = arg_or(argc, argv, 3, 64);
  const std::size_t steps = arg_or(argc, argv, 4, 200);

  const auto ds = synth::generate(dists::Family::kGaussian, classes, per_class, 1);
  Rng init_rng(7);
  const auto m = model::Model::init(model::config_for(ds, 2), init_rng);

  obj::ObjectiveSpec spec;
  spec.kind = obj::Kind::kVhe;
  spec.d_size = 5;
  const obj::LossOptions opt;

  std::vector<train::EpisodeSlot> slots(M);
  auto fill = [&](std::size_t step) {
    for (std::size_t k = 0; k < M; ++k) slots[k] = {(step * M + k) % classes, 1, {0, 0, step, k}};
  };

  using clock = std::chrono::steady_clock;
  double t_serial = 0.0, t_parallel = 0.0;
  std::size_t mismatches = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    fill(s);
    auto t0 = clock::now();
    const auto a = train::batch_gradient_serial(spec, m, ds, slots, opt);
    auto t1 = clock::now();
    const auto b = train::batch_gradient_parallel(spec, m, ds, slots, opt);
    auto t2 = clock::now();
    t_serial += std::chrono::duration<double>(t1 - t0).count();
    t_parallel += std::chrono::duration<double>(t2 - t1).count();
    if (a.loss_sum != b.loss_sum ||
        std::memcmp(a.grad_sum.data(), b.grad_sum.data(), a.grad_sum.size() * sizeof(double)) != 0) {
      ++mismatches;
    }
  }

  std::printf("threads=%d classes=%zu per_class=%zu M=%zu steps=%zu\n", omp_get_max_threads(),
              classes, per_class, M, steps);
  std::printf("serial   %.4f s  (%.1f us/episode)\n", t_serial, 1e6 * t_serial / double(steps * M));
  std::printf("parallel %.4f s  (%.1f us/episode)  speedup %.2fx\n", t_parallel,
              1e6 * t_parallel / double(steps * M), t_serial / t_parallel);
  std::printf("bitwise mismatches: %zu\n", mismatches);
  return mismatches == 0 ? 0 : 1;
}
