#include "homoenc/cli/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "homoenc/errors.hpp"
#include "homoenc/eval/eval.hpp"
#include "homoenc/io/json_writer.hpp"
#include "homoenc/model/model.hpp"
#include "homoenc/objectives/objectives.hpp"
#include "homoenc/synth/dataset.hpp"
#include "homoenc/train/train.hpp"
#include "homoenc/verify/verify.hpp"

namespace homoenc::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void remove_marker(const fs::path& p) {
  std::error_code ec;
  fs::remove(p, ec);
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Settings shared by train and sweep.

struct TrainSettings {
  std::string objective = "vhe";
  std::size_t d_size = 1;
  std::size_t d_group = 0;
  std::optional<double> kl_weight;
  std::size_t mc_samples = 1;
  std::size_t latent_dim = 2;
  bool z_conditions_on_c = false;
  std::size_t aux_embed_dim = 4;
  std::size_t M = 16;
  std::size_t epochs = 200;
  std::size_t anneal_epochs = 50;
  double lr = 1e-2;
  std::size_t runs = 3;
  std::uint64_t seed = 0;
  bool serial = false;
  bool verbose = false;
};

void add_train_options(CLI::App* app, TrainSettings& s, bool with_objective) {
  if (with_objective) {
    app->add_option("--objective", s.objective,
                    "vae, ns, vhe, resample, rescale, vhe_z, structured, hierarchical, tightened")
        ->capture_default_str();
    app->add_option("--d-size", s.d_size, "support size |D|")->capture_default_str();
  }
  app->add_option("--d-group", s.d_group, "group support size (hierarchical; 0 = d-size)");
  app->add_option("--kl-weight", s.kl_weight, "fixed KL weight override");
  app->add_option("--mc-samples", s.mc_samples, "latent samples per episode")->capture_default_str();
  app->add_option("--latent-dim", s.latent_dim)->capture_default_str();
  app->add_flag("--z-conditions-on-c", s.z_conditions_on_c, "vhe_z: q(z) also sees c");
  app->add_option("--aux-embed-dim", s.aux_embed_dim, "tightened: inverse-model embedding size")
      ->capture_default_str();
  app->add_option("--batch", s.M, "episodes per minibatch (M)")->capture_default_str();
  app->add_option("--epochs", s.epochs, "epochs at full KL weight")->capture_default_str();
  app->add_option("--anneal-epochs", s.anneal_epochs, "KL warm-up epochs")->capture_default_str();
  app->add_option("--lr", s.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--runs", s.runs, "random restarts; the lowest final loss is kept")
      ->capture_default_str();
  app->add_flag("--serial", s.serial, "use the serial minibatch kernel");
  app->add_flag("--verbose", s.verbose, "print per-epoch progress");
}

train::TrainConfig to_train_config(const TrainSettings& s) {
  train::TrainConfig c;
  c.objective.kind = obj::parse_objective(s.objective);
  c.objective.d_size = s.d_size;
  c.objective.d_group = s.d_group;
  c.objective.kl_weight_override = s.kl_weight;
  c.objective.mc_samples = s.mc_samples;
  c.M = s.M;
  c.epochs = s.epochs;
  c.anneal_epochs = s.anneal_epochs;
  c.adam.lr = s.lr;
  c.runs = s.runs;
  c.seed = s.seed;
  c.parallel = !s.serial;
  c.validate();
  return c;
}

model::ModelConfig to_model_config(const TrainSettings& s, const train::TrainConfig& tc,
                                   const synth::Dataset& ds) {
  auto mc = model::config_for(ds, s.latent_dim);
  if (tc.objective.kind == obj::Kind::kVheZ) {
    mc.z_branch = true;
    mc.z_conditions_on_c = s.z_conditions_on_c;
  }
  if (tc.objective.kind == obj::Kind::kTightened) {
    mc.aux_embed_dim = s.aux_embed_dim;
    mc.aux_rows = ds.total_elements();
  }
  mc.validate();
  obj::check_compatible(tc.objective, mc, ds);
  return mc;
}

json train_config_json(const std::string& data, const train::TrainConfig& tc,
                       const model::ModelConfig& mc, const std::string& out_dir) {
  json j;
  j["command"] = "train";
  j["data"] = data;
  j["objective"] = {{"kind", std::string(obj::objective_name(tc.objective.kind))},
                    {"d_size", tc.objective.d_size},
                    {"d_group", tc.objective.group_support()},
                    {"kl_weight_override", tc.objective.kl_weight_override
                                               ? json(*tc.objective.kl_weight_override)
                                               : json(nullptr)},
                    {"mc_samples", tc.objective.mc_samples}};
  j["model"] = {{"family", std::string(dists::family_name(mc.family))},
                {"structure", std::string(synth::structure_name(mc.structure))},
                {"latent_dim", mc.latent_dim},
                {"z_branch", mc.z_branch},
                {"z_conditions_on_c", mc.z_conditions_on_c},
                {"aux_embed_dim", mc.aux_embed_dim},
                {"aux_rows", mc.aux_rows}};
  j["train"] = {{"batch", tc.M},
                {"epochs", tc.epochs},
                {"anneal_epochs", tc.anneal_epochs},
                {"lr", tc.adam.lr},
                {"beta1", tc.adam.beta1},
                {"beta2", tc.adam.beta2},
                {"eps", tc.adam.eps},
                {"runs", tc.runs},
                {"seed", tc.seed},
                {"parallel", tc.parallel}};
  j["output_dir"] = out_dir;
  return j;
}

// Writes config.json, then trains and writes model.json, history.csv and
// runs.csv. A numeric abort leaves an ABORTED marker with the message.
void train_to_dir(const synth::Dataset& ds, const std::string& data_path, const TrainSettings& s,
                  const fs::path& out) {
  const auto tc = to_train_config(s);
  const auto mc = to_model_config(s, tc, ds);
  make_dirs(out);
  remove_marker(out / "ABORTED");
  write_file(out / "config.json", train_config_json(data_path, tc, mc, out.string()).dump(2) + "\n");

  train::EpochCallback cb;
  if (s.verbose) {
    cb = [](std::size_t run, std::size_t epoch, double loss, double kl, double w) {
#pragma omp critical(homoenc_cli_log)
      std::printf("run %zu epoch %zu loss %.6f kl_c %.6f anneal %.3f\n", run, epoch, loss, kl, w);
    };
  }
  std::vector<train::TrainHistory> runs;
  try {
    runs = train::train(ds, mc, tc, cb);
  } catch (const NumericError& e) {
    write_file(out / "ABORTED", std::string(e.what()) + "\n");
    throw;
  }
  const std::size_t best = train::select_best_index(runs);
  model::save_checkpoint(runs[best].model, (out / "model.json").string());
  write_file(out / "history.csv", train::history_csv(runs[best]));
  std::string summary = "run,final_loss,selected\n";
  for (const auto& h : runs) {
    summary += std::to_string(h.run) + "," + io::format_double(h.final_loss()) + "," +
               (h.run == runs[best].run ? "1" : "0") + "\n";
  }
  write_file(out / "runs.csv", summary);
}

// ---------------------------------------------------------------------------

struct EvalSettings {
  std::vector<std::size_t> d_sizes;
  std::size_t k = 200;
  std::size_t mc_outer = 20;
  std::size_t n_way = 2;
  std::size_t nodes = 64;
  std::size_t episodes_per_class = 10;
  std::size_t heldout = 10;
  std::string oracle = "none";
  std::string score = "expected";
  std::uint64_t seed = 0;
};

void add_eval_options(CLI::App* app, EvalSettings& s) {
  app->add_option("--k", s.k, "importance samples for the joint NLL")->capture_default_str();
  app->add_option("--mc-outer", s.mc_outer, "samples of c per generation/classification estimate")
      ->capture_default_str();
  app->add_option("--n-way", s.n_way, "candidates per classification query")->capture_default_str();
  app->add_option("--nodes", s.nodes, "Gauss-Hermite nodes per latent dimension")
      ->capture_default_str();
  app->add_option("--episodes-per-class", s.episodes_per_class)->capture_default_str();
  app->add_option("--heldout", s.heldout, "held-out points per generation episode")
      ->capture_default_str();
  app->add_option("--oracle", s.oracle, "none or quadrature")
      ->check(CLI::IsMember({"none", "quadrature"}))
      ->capture_default_str();
  app->add_option("--score", s.score, "classification score: expected or mean-log")
      ->check(CLI::IsMember({"expected", "mean-log"}))
      ->capture_default_str();
}

std::vector<eval::MetricRecord> evaluate(const model::Model& m, const synth::Dataset& ds,
                                         const EvalSettings& s, std::span<const std::size_t> d_sizes,
                                         const std::string& objective, std::uint64_t train_seed) {
  std::vector<eval::MetricRecord> out;
  for (std::size_t d : d_sizes) {
    eval::EvalConfig c;
    c.d_size = d;
    c.k = s.k;
    c.mc_outer = s.mc_outer;
    c.n_way = s.n_way;
    c.nodes = s.nodes;
    c.seed = s.seed;
    c.episodes_per_class = s.episodes_per_class;
    c.heldout = s.heldout;
    c.quadrature = s.oracle == "quadrature";
    c.expected_likelihood = s.score == "expected";
    c.validate();
    const auto recs = eval::run_metric_suite(m, ds, c, objective, train_seed);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

void write_metrics(const fs::path& path, std::span<const eval::MetricRecord> recs, bool append) {
  std::error_code ec;
  const bool has_content = append && fs::exists(path, ec) && fs::file_size(path, ec) > 0;
  if (has_content) {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    if (header + "\n" != eval::metrics_csv_header()) {
      throw IoError("'" + path.string() + "' is not a metrics CSV (header mismatch)");
    }
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << eval::metrics_csv_rows(recs);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  } else {
    write_file(path, eval::metrics_csv_header() + eval::metrics_csv_rows(recs));
  }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const std::string& family, const std::string& structure, std::size_t classes,
                 std::size_t per_class, std::size_t groups, std::size_t per_group,
                 std::size_t contents, std::size_t styles, std::uint64_t seed,
                 const std::string& out) {
  const auto st = synth::parse_structure(structure);
  synth::Dataset ds;
  switch (st) {
    case synth::Structure::kFlat:
      ds = synth::generate(dists::parse_family(family), classes, per_class, seed);
      break;
    case synth::Structure::kHierarchical:
      ds = synth::generate_hierarchical(groups, per_group, per_class, seed);
      break;
    case synth::Structure::kFactorial:
      ds = synth::generate_factorial(contents, styles, per_class, seed);
      break;
  }
  synth::save(ds, out);
  std::printf("wrote %s: %s %s, %zu classes, %zu elements, seed %llu\n", out.c_str(),
              std::string(dists::family_name(ds.meta.family)).c_str(),
              std::string(synth::structure_name(ds.meta.structure)).c_str(), ds.n_classes(),
              ds.total_elements(), static_cast<unsigned long long>(seed));
  return kOk;
}

int cmd_train(const TrainSettings& s, const std::string& data, const std::string& out) {
  const auto ds = synth::load(data);
  train_to_dir(ds, data, s, out);
  const auto runs = read_file((fs::path(out) / "runs.csv").string());
  std::printf("trained %s (|D|=%zu) on %s; outputs in %s\n%s", s.objective.c_str(), s.d_size,
              data.c_str(), out.c_str(), runs.c_str());
  return kOk;
}

int cmd_eval(const EvalSettings& s, const std::string& model_path, const std::string& data,
             std::string objective, std::optional<std::uint64_t> train_seed, const std::string& out,
             bool append) {
  const auto m = model::load_checkpoint(model_path);
  const auto ds = synth::load(data);
  // Labels default to the training run's resolved config when it sits next
  // to the checkpoint.
  const fs::path cfg_path = fs::path(model_path).parent_path() / "config.json";
  std::optional<std::size_t> trained_d;
  if (fs::exists(cfg_path)) {
    try {
      const auto j = json::parse(read_file(cfg_path.string()));
      if (objective.empty()) objective = j.at("objective").at("kind").get<std::string>();
      if (!train_seed) train_seed = j.at("train").at("seed").get<std::uint64_t>();
      trained_d = j.at("objective").at("d_size").get<std::size_t>();
    } catch (const json::exception& e) {
      throw IoError("malformed '" + cfg_path.string() + "': " + e.what());
    }
  }
  if (objective.empty()) objective = "unknown";
  std::vector<std::size_t> d_sizes = s.d_sizes;
  if (d_sizes.empty()) d_sizes = {trained_d.value_or(1)};
  const auto recs = evaluate(m, ds, s, d_sizes, objective, train_seed.value_or(0));
  write_metrics(out, recs, append);
  std::printf("wrote %zu metric rows to %s (d sizes %s)\n", recs.size(), out.c_str(),
              join(d_sizes).c_str());
  return kOk;
}

struct SweepSettings {
  std::vector<std::string> objectives{"vhe", "ns", "resample", "rescale"};
  std::vector<std::size_t> d_sizes{1, 2, 5, 10};
  std::vector<std::string> families{"gaussian"};
  std::vector<std::size_t> eval_d_sizes;
  std::size_t classes = 100;
  std::size_t per_class = 100;
  std::uint64_t data_seed = 1;
  std::uint64_t test_seed = 2;
  std::size_t jobs = 1;
  std::string out;
};

int cmd_sweep(const SweepSettings& sw, TrainSettings ts, EvalSettings es) {
  for (const auto& o : sw.objectives) {
    const auto k = obj::parse_objective(o);
    if (k == obj::Kind::kVheZ || k == obj::Kind::kStructured || k == obj::Kind::kHierarchical) {
      throw UsageError("sweep evaluates flat models only; objective '" + o + "' is not supported");
    }
  }
  for (const auto& f : sw.families) dists::parse_family(f);
  if (sw.jobs < 1) throw UsageError("--jobs must be >= 1");

  const fs::path root(sw.out);
  make_dirs(root / "data");
  json cfg;
  cfg["command"] = "sweep";
  cfg["objectives"] = sw.objectives;
  cfg["d_sizes"] = sw.d_sizes;
  cfg["families"] = sw.families;
  cfg["eval_d_sizes"] = sw.eval_d_sizes;
  cfg["classes"] = sw.classes;
  cfg["per_class"] = sw.per_class;
  cfg["data_seed"] = sw.data_seed;
  cfg["test_seed"] = sw.test_seed;
  cfg["seed"] = ts.seed;
  cfg["eval_seed"] = es.seed;
  write_file(root / "sweep.json", cfg.dump(2) + "\n");

  struct Cell {
    std::string family, objective;
    std::size_t d;
    fs::path dir;
  };
  std::vector<Cell> cells;
  for (const auto& f : sw.families) {
    for (const auto& o : sw.objectives) {
      for (std::size_t d : sw.d_sizes) {
        cells.push_back({f, o, d, root / "cells" / f / o / ("d" + std::to_string(d))});
      }
    }
  }

  std::map<std::string, std::pair<synth::Dataset, synth::Dataset>> data;
  for (const auto& f : sw.families) {
    const auto fam = dists::parse_family(f);
    auto tr = synth::generate(fam, sw.classes, sw.per_class, sw.data_seed);
    auto te = synth::generate(fam, sw.classes, sw.per_class, sw.test_seed);
    synth::save(tr, (root / "data" / (f + "_train.jsonl")).string());
    synth::save(te, (root / "data" / (f + "_test.jsonl")).string());
    data.emplace(f, std::make_pair(std::move(tr), std::move(te)));
  }

  std::vector<int> codes(cells.size(), kOk);
  std::vector<std::string> messages(cells.size());
  std::vector<bool> skipped(cells.size(), false);
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
  const int jobs = static_cast<int>(sw.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& c = cells[static_cast<std::size_t>(i)];
    const auto u = static_cast<std::size_t>(i);
    if (fs::exists(c.dir / "DONE")) {
      skipped[u] = true;
      continue;
    }
    try {
      remove_marker(c.dir / "FAILED");
      TrainSettings cell_ts = ts;
      cell_ts.objective = c.objective;
      cell_ts.d_size = c.d;
      const auto& [tr, te] = data.at(c.family);
      train_to_dir(tr, (root / "data" / (c.family + "_train.jsonl")).string(), cell_ts, c.dir);
      const auto m = model::load_checkpoint((c.dir / "model.json").string());
      const std::vector<std::size_t> ed =
          sw.eval_d_sizes.empty() ? std::vector<std::size_t>{c.d} : sw.eval_d_sizes;
      const auto recs = evaluate(m, te, es, ed, c.objective, ts.seed);
      write_metrics(c.dir / "metrics.csv", recs, false);
      write_file(c.dir / "DONE", "");
    } catch (...) {
      codes[u] = exit_code_for_current_exception();
      try {
        std::rethrow_exception(std::current_exception());
      } catch (const std::exception& e) {
        messages[u] = e.what();
      } catch (...) {
        messages[u] = "unknown error";
      }
      try {
        make_dirs(c.dir);
        write_file(c.dir / "FAILED", messages[u] + "\n");
      } catch (...) {
      }
    }
  }

  std::string merged = eval::metrics_csv_header();
  std::size_t done = 0, failed = 0, skip = 0;
  int exit = kOk;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (codes[i] != kOk) {
      ++failed;
      if (exit == kOk) exit = codes[i];
      std::fprintf(stderr, "cell %s/%s/d%zu failed: %s\n", c.family.c_str(), c.objective.c_str(),
                   c.d, messages[i].c_str());
      continue;
    }
    skip += skipped[i] ? 1 : 0;
    ++done;
    const auto text = read_file((c.dir / "metrics.csv").string());
    merged += text.substr(text.find('\n') + 1);
  }
  write_file(root / "metrics.csv", merged);
  std::printf("sweep: %zu cells, %zu done (%zu already complete), %zu failed; merged CSV %s\n",
              cells.size(), done, skip, failed, (root / "metrics.csv").string().c_str());
  return exit;
}

int cmd_verify(const std::vector<std::string>& suites, const verify::Options& opt) {
  const auto names = suites.empty() ? verify::suite_names() : suites;
  std::size_t passed = 0, total = 0;
  std::vector<std::string> failures;
  for (const auto& s : names) {
    for (const auto& c : verify::run_suite(s, opt)) {
      std::printf("%s\n", verify::format_check(c).c_str());
      std::fflush(stdout);
      ++total;
      if (c.passed) {
        ++passed;
      } else {
        failures.push_back(c.suite + "/" + c.name);
      }
    }
  }
  std::printf("%zu/%zu checks passed\n", passed, total);
  for (const auto& f : failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
  return failures.empty() ? kOk : kVerifyFailed;
}

}  // namespace

// ---------------------------------------------------------------------------

unsigned long long default_seed() {
  const char* env = std::getenv("HOMOENC_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  return (end && *end == '\0') ? v : 0;
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const NumericError&) {
    return kNumeric;
  } catch (const IoError&) {
    return kIo;
  } catch (const ParseError&) {
    return kIo;
  } catch (const UsageError&) {
    return kUsage;
  } catch (const ConfigError&) {
    return kUsage;
  } catch (const DomainError&) {
    return kUsage;
  } catch (const CLI::ParseError&) {
    return kUsage;
  } catch (...) {
    return kVerifyFailed;
  }
}

std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const std::string& config_text) {
  json j;
  try {
    j = json::parse(config_text);
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto scalar = [](const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return v.dump();
    throw ConfigError("config value " + v.dump() + " is not a string or number");
  };
  std::vector<std::string> out = args;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (key == "config" || given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_array()) {
      std::string list;
      for (std::size_t i = 0; i < value.size(); ++i) list += (i ? "," : "") + scalar(value[i]);
      out.push_back(flag);
      out.push_back(list);
    } else if (!value.is_null()) {
      out.push_back(flag);
      out.push_back(scalar(value));
    }
  }
  return out;
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

int run(const std::vector<std::string>& raw_args) {
  try {
    std::vector<std::string> args = raw_args;
    for (std::size_t i = 1; i < raw_args.size(); ++i) {
      std::string path;
      if (raw_args[i] == "--config" && i + 1 < raw_args.size()) path = raw_args[i + 1];
      if (raw_args[i].rfind("--config=", 0) == 0) path = raw_args[i].substr(9);
      if (!path.empty()) args = merge_config(raw_args, read_file(path));
    }

    CLI::App app{"Few-shot generative model toolkit: synthetic data, training, evaluation, sweeps, checks"};
    app.name("homoenc");
    app.require_subcommand(1);
    app.set_version_flag("--version", "homoenc 1.0.0");
    std::string config_path;
    app.add_option("--config", config_path, "JSON file of flag values (command-line flags win)");
    const std::uint64_t seed0 = default_seed();

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset (JSONL)");
    std::string family = "gaussian", structure = "flat", gen_out;
    std::size_t classes = 100, per_class = 100, groups = 10, per_group = 10, contents = 4, styles = 3;
    std::uint64_t gen_seed = seed0;
    gen->add_option("--config", config_path);
    gen->add_option("--family", family, "gaussian, mixture2, von_mises, gamma, discrete")
        ->capture_default_str();
    gen->add_option("--structure", structure, "flat, hierarchical, factorial")->capture_default_str();
    gen->add_option("--classes", classes)->capture_default_str();
    gen->add_option("--per-class", per_class, "elements per class (per cell when factorial)")
        ->capture_default_str();
    gen->add_option("--groups", groups, "hierarchical: number of groups")->capture_default_str();
    gen->add_option("--classes-per-group", per_group)->capture_default_str();
    gen->add_option("--contents", contents, "factorial: content values")->capture_default_str();
    gen->add_option("--styles", styles, "factorial: style values")->capture_default_str();
    gen->add_option("--seed", gen_seed)->capture_default_str();
    gen->add_option("--out", gen_out, "output JSONL path")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a model with restarts and keep the best run");
    TrainSettings ts;
    ts.seed = seed0;
    std::string tr_data, tr_out;
    tr->add_option("--config", config_path);
    add_train_options(tr, ts, true);
    tr->add_option("--seed", ts.seed)->capture_default_str();
    tr->add_option("--data", tr_data, "dataset JSONL")->required();
    tr->add_option("--out", tr_out, "output directory")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint and write metric rows");
    EvalSettings es;
    es.seed = seed0;
    std::string ev_model, ev_data, ev_out, ev_objective;
    std::optional<std::uint64_t> ev_train_seed;
    bool ev_append = false;
    ev->add_option("--config", config_path);
    ev->add_option("--model", ev_model, "model.json checkpoint")->required();
    ev->add_option("--data", ev_data, "dataset JSONL")->required();
    ev->add_option("--out", ev_out, "metrics CSV")->required();
    ev->add_option("--d-sizes", es.d_sizes, "support sizes (default: the training |D|)")
        ->delimiter(',');
    ev->add_option("--seed", es.seed)->capture_default_str();
    ev->add_option("--objective-label", ev_objective, "objective column (default: from config.json)");
    ev->add_option("--train-seed", ev_train_seed, "seed column (default: from config.json)");
    ev->add_flag("--append", ev_append, "append rows instead of overwriting");
    add_eval_options(ev, es);

    // sweep
    auto* sw = app.add_subcommand("sweep", "train and evaluate an objectives x |D| x family grid");
    SweepSettings ss;
    TrainSettings sts;
    sts.seed = seed0;
    EvalSettings ses;
    ses.seed = seed0;
    sw->add_option("--config", config_path);
    sw->add_option("--objectives", ss.objectives)->delimiter(',')->capture_default_str();
    sw->add_option("--d-sizes", ss.d_sizes)->delimiter(',')->capture_default_str();
    sw->add_option("--families", ss.families)->delimiter(',')->capture_default_str();
    sw->add_option("--eval-d-sizes", ss.eval_d_sizes, "evaluation sizes (default: each cell's |D|)")
        ->delimiter(',');
    sw->add_option("--classes", ss.classes)->capture_default_str();
    sw->add_option("--per-class", ss.per_class)->capture_default_str();
    sw->add_option("--data-seed", ss.data_seed, "training data seed")->capture_default_str();
    sw->add_option("--test-seed", ss.test_seed, "evaluation data seed")->capture_default_str();
    sw->add_option("--jobs", ss.jobs, "cells trained concurrently")->capture_default_str();
    sw->add_option("--seed", sts.seed, "training seed")->capture_default_str();
    sw->add_option("--eval-seed", ses.seed)->capture_default_str();
    sw->add_option("--out", ss.out, "output directory")->required();
    add_train_options(sw, sts, false);
    add_eval_options(sw, ses);

    // verify
    auto* vf = app.add_subcommand("verify", "run the property and oracle suites");
    std::vector<std::string> suites;
    verify::Options vo;
    vf->add_option("--config", config_path);
    vf->add_option("--suite", suites, "special, dists, gradients, identities, bounds, gap, estimator")
        ->delimiter(',');
    vf->add_option("--seed", vo.seed)->capture_default_str();
    vf->add_option("--bound-episodes", vo.bound_episodes)->capture_default_str();
    vf->add_option("--grad-points", vo.grad_points)->capture_default_str();

    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
      app.parse(rest);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? kOk : kUsage;
    }

    if (*gen) {
      return cmd_gen_data(family, structure, classes, per_class, groups, per_group, contents, styles,
                          gen_seed, gen_out);
    }
    if (*tr) return cmd_train(ts, tr_data, tr_out);
    if (*ev) return cmd_eval(es, ev_model, ev_data, ev_objective, ev_train_seed, ev_out, ev_append);
    if (*sw) return cmd_sweep(ss, sts, ses);
    if (*vf) return cmd_verify(suites, vo);
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for_current_exception();
  }
}

}  // namespace homoenc::cli
