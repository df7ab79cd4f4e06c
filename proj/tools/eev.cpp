// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

// eev: robustness verification of binarized networks from the command line.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eev/backends.hpp"
#include "eev/dataset.hpp"
#include "eev/encoder.hpp"
#include "eev/model.hpp"
#include "eev/verifier.hpp"

namespace {

constexpr int kExitRan = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCounterexample = 10;
constexpr int kExitRobust = 20;
constexpr int kExitTimeout = 30;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QueryArgs {
  std::vector<std::string> models;
  std::string image;
  std::string dataset;
  double eps = 0;
  int label = -1;
  double timeout = 0;
  long long conflicts = -1;
  std::string backend = "native";
  unsigned long long seed = eev::SolverConfig{}.seed;
  bool phase_saving = false;
  bool json = false;
  bool timings = false;
  std::string cex_out;
  std::string report;
  int threads = 1;
  long long limit = -1;
};

void add_model_and_input(CLI::App* cmd, QueryArgs& a, bool many_models) {
  if (many_models)
    cmd->add_option("-m,--model", a.models, "Model JSON files (two or more)")->required()->check(CLI::ExistingFile);
  else
    cmd->add_option("-m,--model", a.models, "Model JSON file")->required()->expected(1)->check(CLI::ExistingFile);
  cmd->add_option("--eps", a.eps, "L-infinity perturbation bound")->required()->check(CLI::NonNegativeNumber);
  cmd->add_option("--label", a.label, "True class (default: image label, else clean prediction)");
}

void add_solver_options(CLI::App* cmd, QueryArgs& a) {
  cmd->add_option("--timeout", a.timeout, "Solver wall-clock budget in seconds (0 = none)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--conflicts", a.conflicts, "Solver conflict budget (-1 = none)");
  cmd->add_option("--backend", a.backend, "native or seqcnt")
      ->check(CLI::IsMember({"native", "seqcnt"}));
  cmd->add_option("--seed", a.seed, "Solver seed (EEV_SEED overrides)");
  cmd->add_flag("--phase-saving", a.phase_saving, "Enable phase saving");
}

eev::VerifyOptions verify_options(const QueryArgs& a) {
  eev::VerifyOptions o;
  if (a.timeout > 0) o.timeout = a.timeout;
  o.conflict_budget = a.conflicts;
  o.backend = a.backend == "seqcnt" ? eev::Backend::SeqCnt : eev::Backend::Native;
  o.solver.seed = a.seed;
  if (const char* env = std::getenv("EEV_SEED")) {
    try {
      o.solver.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("EEV_SEED is not an unsigned integer: ") + env);
    }
  }
  o.solver.phase_saving = a.phase_saving;
  return o;
}

std::vector<eev::BnnModel> load_models(const std::vector<std::string>& paths) {
  std::vector<eev::BnnModel> models;
  for (const auto& p : paths) models.push_back(eev::load_model(p));
  return models;
}

std::vector<const eev::BnnModel*> pointers(const std::vector<eev::BnnModel>& models) {
  std::vector<const eev::BnnModel*> out;
  for (const auto& m : models) out.push_back(&m);
  return out;
}

std::int32_t resolve_label(const QueryArgs& a, const eev::Image& img,
                           const std::vector<const eev::BnnModel*>& models) {
  if (a.label >= 0) return a.label;
  if (img.label) return *img.label;
  const eev::BnnModel& m = *models[0];
  return eev::infer(m, eev::quantize(m, img.pixels)).predicted;
}

int verdict_exit(eev::Verdict v) {
  switch (v) {
    case eev::Verdict::Counterexample: return kExitCounterexample;
    case eev::Verdict::Robust: return kExitRobust;
    case eev::Verdict::Timeout: return kExitTimeout;
  }
  return kExitFailure;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_single(const QueryArgs& a, const std::vector<const eev::BnnModel*>& models, bool oracle) {
  eev::Image img = eev::load_image(a.image);
  const std::int32_t label = resolve_label(a, img, models);
  eev::VerifyOutcome out;
  if (oracle) {
    out = models.size() == 1 ? eev::brute_force_verify(*models[0], img.pixels, a.eps, label)
                             : eev::brute_force_ensemble(models, img.pixels, a.eps, label);
  } else {
    eev::Verifier v;
    out = models.size() == 1 ? v.verify_one(*models[0], img.pixels, a.eps, label, verify_options(a))
                             : v.verify_ensemble(models, img.pixels, a.eps, label, verify_options(a));
  }
  std::cout << eev::to_string(out.status) << " label=" << label;
  if (out.counterexample) std::cout << " predicted=" << out.predicted;
  if (out.clean_misclassified) std::cout << " (clean input)";
  std::cout << " build=" << out.build_seconds << "s solve=" << out.solve_seconds << "s\n";
  if (out.counterexample && !a.cex_out.empty()) {
    eev::CounterexampleFile cex{out.counterexample->values, a.eps, label, out.predicted, img.pixels};
    write_text(a.cex_out, eev::counterexample_to_json(cex));
  }
  if (a.json) {
    eev::BatchReport r;
    for (auto* m : models) r.model_hashes.push_back(m->content_hash());
    r.eps = a.eps;
    eev::BatchRow row;
    row.label = label;
    row.clean_correct = !out.clean_misclassified;
    row.outcome = out;
    r.rows.push_back(row);
    r.totals = eev::aggregate(r.rows);
    std::cout << eev::report_to_json(r, a.timings);
  }
  return verdict_exit(out.status);
}

int run_batch(const QueryArgs& a, const std::vector<const eev::BnnModel*>& models) {
  eev::Dataset data = eev::load_dataset(a.dataset);
  eev::BatchOptions o;
  o.eps = a.eps;
  o.verify = verify_options(a);
  o.threads = a.threads;
  if (a.limit >= 0) o.limit = static_cast<std::size_t>(a.limit);
  eev::BatchReport r = eev::verify_batch(models, data, o);
  std::cout << eev::report_table(r);
  const std::string json = eev::report_to_json(r, a.timings);
  if (!a.report.empty()) write_text(a.report, json);
  if (a.json) std::cout << json;
  return kExitRan;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eev: exact robustness verification for binarized neural networks"};
  app.require_subcommand(1);

  QueryArgs q;
  auto add_query = [&](CLI::App* cmd, bool ensemble) {
    add_model_and_input(cmd, q, ensemble);
    auto* img = cmd->add_option("-i,--image", q.image, "Image (.npy or .json)")->check(CLI::ExistingFile);
    auto* ds = cmd->add_option("--dataset", q.dataset, "Dataset (.npz or IDX images) for batch mode")
                   ->check(CLI::ExistingFile);
    img->excludes(ds);
    add_solver_options(cmd, q);
    cmd->add_flag("--json", q.json, "Print the JSON report");
    cmd->add_flag("--timings", q.timings, "Include timings in the JSON report");
    cmd->add_option("--cex-out", q.cex_out, "Write a counterexample file (single query)");
    cmd->add_option("--report", q.report, "Write the JSON report (batch mode)");
    cmd->add_option("--threads", q.threads, "Worker threads (batch mode)")->check(CLI::PositiveNumber);
    cmd->add_option("--limit", q.limit, "Verify only the first N images (batch mode)");
  };
  auto* verify = app.add_subcommand("verify", "Verify one image or a dataset");
  add_query(verify, false);
  auto* ensemble = app.add_subcommand("verify-ensemble", "Verify an ensemble with reject option");
  add_query(ensemble, true);

  auto* oracle = app.add_subcommand("oracle", "Brute-force reference verdict for one image");
  add_model_and_input(oracle, q, false);
  oracle->add_option("-i,--image", q.image, "Image (.npy or .json)")->required()->check(CLI::ExistingFile);

  std::string out_path, format = "native";
  auto* encode = app.add_subcommand("encode", "Write the constraint system of one query");
  add_model_and_input(encode, q, false);
  encode->add_option("-i,--image", q.image, "Image (.npy or .json)")->required()->check(CLI::ExistingFile);
  encode->add_option("-o,--output", out_path, "Output file")->required();
  encode->add_option("--format", format, "native, cnf or opb")->check(CLI::IsMember({"native", "cnf", "opb"}));

  std::vector<std::string> cex_models;
  std::string cex_path, cex_image;
  auto* check = app.add_subcommand("check-cex", "Validate a counterexample file");
  check->add_option("-m,--model", cex_models, "Model JSON file(s)")->required()->check(CLI::ExistingFile);
  check->add_option("--cex", cex_path, "Counterexample JSON")->required()->check(CLI::ExistingFile);
  check->add_option("-i,--image", cex_image, "Original image (overrides x0 in the file)")->check(CLI::ExistingFile);

  int repeats = 1;
  auto* bench = app.add_subcommand("bench", "Compare native and sequential-counter CNF solving");
  add_model_and_input(bench, q, false);
  bench->add_option("--dataset", q.dataset, "Dataset (.npz or IDX images)")->required()->check(CLI::ExistingFile);
  bench->add_option("--timeout", q.timeout, "Per-solve budget in seconds")->check(CLI::NonNegativeNumber);
  bench->add_option("--limit", q.limit, "Use only the first N images");
  bench->add_option("--repeats", repeats, "Solves per instance and backend (minimum kept)")->check(CLI::PositiveNumber);
  bench->add_option("--seed", q.seed, "Solver seed (EEV_SEED overrides)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*verify || *ensemble) {
      if (*ensemble && q.models.size() < 2) throw UsageError("verify-ensemble needs at least two models");
      if (q.image.empty() == q.dataset.empty()) throw UsageError("give exactly one of --image or --dataset");
      auto models = load_models(q.models);
      auto ptrs = pointers(models);
      return q.dataset.empty() ? run_single(q, ptrs, false) : run_batch(q, ptrs);
    }
    if (*oracle) {
      auto models = load_models(q.models);
      return run_single(q, pointers(models), true);
    }
    if (*encode) {
      auto models = load_models(q.models);
      eev::Image img = eev::load_image(q.image);
      const std::int32_t label = resolve_label(q, img, pointers(models));
      eev::Encoder enc;
      eev::ConstraintSystem sys = enc.encode_query(models[0], img.pixels, q.eps, label);
      if (format == "native") {
        eev::write_native(sys, std::filesystem::path(out_path));
      } else if (format == "cnf") {
        eev::write_dimacs(eev::cnf_lower(sys), std::filesystem::path(out_path));
      } else {
        eev::write_opb(sys, std::filesystem::path(out_path));
      }
      std::cout << "wrote " << out_path << ": " << sys.num_vars << " variables, " << sys.clauses.size()
                << " clauses, " << sys.cards.size() << " cardinality constraints\n";
      return kExitRan;
    }
    if (*check) {
      auto models = load_models(cex_models);
      eev::CounterexampleFile cex = eev::counterexample_from_json(read_text(cex_path));
      if (!cex_image.empty()) cex.x0 = eev::load_image(cex_image).pixels;
      eev::CexCheck r = eev::check_counterexample(pointers(models), cex);
      if (r.valid) {
        std::cout << "VALID predicted=" << r.predicted << " source=" << cex.source_class << '\n';
        return kExitRan;
      }
      std::cout << "INVALID: " << r.reason << '\n';
      return kExitFailure;
    }
    if (*bench) {
      auto models = load_models(q.models);
      eev::Dataset data = eev::load_dataset(q.dataset);
      std::size_t n = data.images.size();
      if (q.limit >= 0) n = std::min(n, static_cast<std::size_t>(q.limit));
      std::vector<eev::BenchQuery> queries;
      for (std::size_t i = 0; i < n; ++i)
        queries.push_back({&models[0], data.images[i], q.eps, data.labels[i]});
      eev::BenchOptions o;
      if (q.timeout > 0) o.timeout = q.timeout;
      o.repeats = repeats;
      o.solver = verify_options(q).solver;
      eev::BenchComparison cmp = eev::bench_compare(queries, o);
      std::cout << eev::bench_table(cmp);
      return kExitRan;
    }
  } catch (const UsageError& e) {
    std::cerr << "eev: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "eev: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
