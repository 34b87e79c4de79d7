// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "homoenc/eval/eval.hpp"
#include "homoenc/train/train.hpp"
#include "homoenc/verify/verify.hpp"

#ifndef HOMOENC_CLI_PATH
#error "HOMOENC_CLI_PATH must name the homoenc executable"
#endif

using namespace homoenc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& note) {
    passed = passed && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + note);
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

void run_suite_checks(Outcome& o, const std::string& suite, const verify::Options& opt) {
  for (const auto& c : verify::run_suite(suite, opt)) {
    o.require(c.passed, verify::format_check(c).substr(5));
  }
}

Outcome criterion_1() {
  Outcome o;
  const auto t0 = Clock::now();
  verify::Options opt;
  opt.grad_points = 20;
  run_suite_checks(o, "gradients", opt);
  const double t = seconds_since(t0);
  o.require(t < 60.0, fmt("runtime %.1f s < 60 s", t));
  return o;
}

Outcome criterion_2() {
  Outcome o;
  run_suite_checks(o, "special", {});
  return o;
}

Outcome criterion_3() {
  Outcome o;
  run_suite_checks(o, "identities", {});
  return o;
}

Outcome criterion_4() {
  Outcome o;
  const auto t0 = Clock::now();
  verify::Options opt;
  opt.bound_episodes = 100000;
  run_suite_checks(o, "bounds", opt);
  const double t = seconds_since(t0);
  o.require(t < 120.0, fmt("runtime %.1f s < 120 s", t));
  return o;
}

Outcome criterion_5() {
  Outcome o;
  run_suite_checks(o, "gap", {});
  return o;
}

Outcome criterion_6() {
  Outcome o;
  run_suite_checks(o, "estimator", {});

  // A trained 1-dim latent model: IW against quadrature on its training set.
  const auto ds = synth::generate(dists::Family::kGaussian, 50, 20, 3);
  train::TrainConfig cfg;
  cfg.objective.kind = obj::Kind::kVhe;
  cfg.objective.d_size = 20;
  cfg.seed = 4;
  cfg.runs = 1;
  const auto runs = train::train(ds, model::config_for(ds, 1), cfg);
  const auto& m = train::select_best(runs).model;
  const double iw = eval::joint_nll(m, ds, 200, 5);
  const double quad = eval::quadrature_joint_nll(m, ds, 64);
  o.require(std::abs(iw - quad) < 0.05,
            fmt("trained model: |IW(k=200) - quadrature| = |%.5f - ", iw) +
                fmt("%.5f| < 0.05 nats/element", quad));
  return o;
}

Outcome criterion_7() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto train_ds = synth::generate(dists::Family::kGaussian, 100, 100, 1);
  const auto test_ds = synth::generate(dists::Family::kGaussian, 100, 100, 2);
  const auto mc = model::config_for(train_ds, 2);

  eval::EvalConfig ec;
  ec.d_size = 1;
  ec.seed = 7;
  struct Result {
    double info = 0.0;
    double error = 0.0;
  };
  auto fit = [&](obj::Kind kind) {
    train::TrainConfig cfg;
    cfg.objective.kind = kind;
    cfg.objective.d_size = 1;
    cfg.seed = 1;
    cfg.runs = 3;
    const auto runs = train::train(train_ds, mc, cfg);
    const auto& m = train::select_best(runs).model;
    return Result{eval::encoded_information(m, test_ds, 1, ec.seed),
                  eval::fewshot_classification_error(m, test_ds, ec)};
  };
  const Result ns = fit(obj::Kind::kNs);
  const Result vhe = fit(obj::Kind::kVhe);
  o.require(ns.info < 0.1, fmt("NS encoded information %.4f nats < 0.1", ns.info));
  o.require(vhe.info > 1.0, fmt("VHE encoded information %.4f nats > 1.0", vhe.info));
  o.require(vhe.error <= ns.error,
            fmt("VHE classification error %.4f <= NS error %.4f", vhe.error, ns.error));
  const double t = seconds_since(t0);
  o.require(t < 600.0, fmt("runtime %.1f s <= 600 s", t));
  return o;
}

// Mean -log p(x | content code, style code) over `xs`, codes at the
// posterior means of the factor encoders.
double coded_nll(const model::ModelView<double>& v, std::span<const double> content_support,
                 std::span<const double> style_support, std::span<const double> xs) {
  const auto qc = v.encode("enc_content", content_support);
  const auto qs = v.encode("enc_style", style_support);
  std::vector<double> code = qc.mean;
  code.insert(code.end(), qs.mean.begin(), qs.mean.end());
  double s = 0.0;
  for (double x : xs) s -= v.obs_logpdf(code, x);
  return s / static_cast<double>(xs.size());
}

Outcome criterion_8() {
  Outcome o;
  constexpr std::size_t kContents = 4, kStyles = 3, kTrain = 30, kHeld = 10;
  const auto full = synth::generate_factorial(kContents, kStyles, kTrain + kHeld, 8);
  synth::Dataset train_ds = full;
  std::map<std::size_t, std::vector<double>> held;
  for (auto& c : train_ds.classes) {
    held[c.class_id].assign(c.elements.begin() + kTrain, c.elements.end());
    c.elements.resize(kTrain);
  }
  train_ds.meta.n_per_class = kTrain;

  train::TrainConfig cfg;
  cfg.objective.kind = obj::Kind::kStructured;
  // Supports as large as a content set (3 x 30). A small random draw from a
  // style pool mixes contents unevenly, and the content spread then swamps
  // the style offset in the pooled mean.
  cfg.objective.d_size = kStyles * kTrain;
  cfg.seed = 9;
  cfg.runs = 3;
  const auto runs = train::train(train_ds, model::config_for(train_ds, 1), cfg);
  const auto& m = train::select_best(runs).model;
  const auto v = model::view(m);

  auto pooled = [&](const std::vector<std::size_t>& ids) {
    std::vector<double> out;
    for (auto id : ids) {
      const auto& e = train_ds.classes[id].elements;
      out.insert(out.end(), e.begin(), e.end());
    }
    return out;
  };
  std::size_t wins = 0;
  for (const auto& c : train_ds.classes) {
    const auto content = pooled(train_ds.content_members(*c.content_id));
    const double matched =
        coded_nll(v, content, pooled(train_ds.style_members(*c.style_id)), held[c.class_id]);
    bool best = true;
    for (std::size_t s = 0; s < kStyles; ++s) {
      if (s == *c.style_id) continue;
      best = best && matched < coded_nll(v, content, pooled(train_ds.style_members(s)),
                                         held[c.class_id]);
    }
    wins += best ? 1 : 0;
  }
  const double frac = static_cast<double>(wins) / static_cast<double>(train_ds.n_classes());
  o.require(frac >= 0.8,
            fmt("matched style beats every mismatched style in %.0f%% of cells", 100.0 * frac) +
                fmt(" (%.0f of %.0f, need >= 80%%)", static_cast<double>(wins),
                    static_cast<double>(train_ds.n_classes())));
  return o;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

Outcome criterion_9() {
  Outcome o;
  const std::string cli = HOMOENC_CLI_PATH;
  const std::vector<std::string> commands = {
      "gen-data --classes 8 --per-class 12 --seed 5 --out d.jsonl",
      "gen-data --structure factorial --contents 3 --styles 2 --per-class 6 --seed 5 --out f.jsonl",
      "train --data d.jsonl --epochs 3 --anneal-epochs 2 --runs 2 --d-size 2 --out run",
      "train --data f.jsonl --objective structured --epochs 2 --anneal-epochs 1 --runs 1 "
      "--d-size 2 --out run_f",
      "eval --model run/model.json --data d.jsonl --d-sizes 1,2 --k 10 --oracle quadrature "
      "--out m.csv",
      "sweep --objectives vhe,ns --d-sizes 1,2 --classes 6 --per-class 8 --epochs 2 "
      "--anneal-epochs 1 --runs 1 --k 5 --jobs 2 --out sweep",
      "verify --suite special,identities,gap",
  };
  const fs::path base = fs::temp_directory_path() / "homoenc_acceptance_c9";
  fs::remove_all(base);
  std::map<std::string, std::string> first;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = base / (rep == 0 ? "a" : "b");
    fs::create_directories(dir);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const std::string line = "cd '" + dir.string() + "' && '" + cli + "' " + commands[i] +
                               " > stdout_" + std::to_string(i) + ".txt 2>&1";
      const int rc = std::system(line.c_str());
      if (rep == 0) o.require(rc == 0, "exit 0: homoenc " + commands[i]);
    }
    const auto snap = snapshot(dir);
    if (rep == 0) {
      first = snap;
      continue;
    }
    std::size_t differing = 0;
    for (const auto& [name, bytes] : snap) {
      const auto it = first.find(name);
      if (it == first.end() || it->second != bytes) {
        ++differing;
        o.require(false, "differs between repeats: " + name);
      }
    }
    o.require(snap.size() == first.size(), fmt("file count %.0f in both repeats",
                                               static_cast<double>(first.size())));
    o.require(differing == 0, fmt("%.0f output files byte-identical across repeats",
                                  static_cast<double>(snap.size())));
  }
  fs::remove_all(base);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", criterion_1},
      {2, "special functions", criterion_2},
      {3, "objective identity chain", criterion_3},
      {4, "bound validity", criterion_4},
      {5, "gap identity", criterion_5},
      {6, "estimator certification", criterion_6},
      {7, "NS collapse vs VHE at |D|=1", criterion_7},
      {8, "factorial disentanglement", criterion_8},
      {9, "CLI determinism", criterion_9},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.require(false, std::string("threw: ") + e.what());
    }
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::printf("%s criterion %d: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", c.id, c.title,
                seconds_since(t0));
    std::fflush(stdout);
    failed += o.passed ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
