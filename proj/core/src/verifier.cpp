// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/verifier.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "eev/backends.hpp"
#include "eev/dataset.hpp"
#include "json.hpp"

namespace eev {

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SolverConfig solver_config(const VerifyOptions& o) {
  SolverConfig cfg = o.solver;
  cfg.conflict_budget = o.conflict_budget;
  cfg.time_budget = o.timeout;
  return cfg;
}

SolveResult run_solver(Solver& s, std::int32_t original_vars, Clock::time_point t0) {
  SolveResult r;
  r.status = s.solve();
  r.seconds = seconds_since(t0);
  r.stats = s.stats();
  if (r.status == SolveStatus::Sat)
    r.model.assign(s.model().begin(), s.model().begin() + original_vars);
  return r;
}

SolveResult solve_cnf(const CnfSystem& cnf, const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  Solver s(cfg);
  s.reserve_vars(cnf.num_vars);
  for (const auto& cl : cnf.clauses)
    if (!s.add_clause(cl)) break;
  return run_solver(s, cnf.original_vars, t0);
}

Verdict verdict_of(SolveStatus s) {
  switch (s) {
    case SolveStatus::Sat: return Verdict::Counterexample;
    case SolveStatus::Unsat: return Verdict::Robust;
    case SolveStatus::Unknown: return Verdict::Timeout;
  }
  return Verdict::Timeout;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

[[noreturn]] void soundness_failure(const std::string& what, const ConstraintSystem& sys,
                                    std::span<const BnnModel* const> models) {
  static std::atomic<int> serial{0};
  namespace fs = std::filesystem;
  std::string where;
  try {
    fs::path dir = fs::temp_directory_path() /
                   ("eev-soundness-" + hex64(models[0]->content_hash()) + "-" +
                    std::to_string(serial++));
    fs::create_directories(dir);
    write_native(sys, dir / "query.eevc");
    for (std::size_t m = 0; m < models.size(); ++m)
      save_model(*models[m], dir / ("model" + std::to_string(m) + ".json"));
    where = " (system and model dumped to " + dir.string() + ")";
  } catch (const std::exception& e) {
    where = std::string(" (dump failed: ") + e.what() + ")";
  }
  throw SoundnessError(what + where);
}

void check_box(const std::vector<std::int32_t>& values, const std::vector<PixelInterval>& box,
               const ConstraintSystem& sys, std::span<const BnnModel* const> models) {
  if (values.size() != box.size()) soundness_failure("decoded input has the wrong size", sys, models);
  for (std::size_t i = 0; i < box.size(); ++i)
    if (values[i] < box[i].lo || values[i] > box[i].hi)
      soundness_failure("decoded pixel " + std::to_string(i) + " lies outside its interval", sys, models);
}

void check_input_size(const BnnModel& model, std::span<const double> x0) {
  if (static_cast<std::int64_t>(x0.size()) != model.input_size())
    throw std::invalid_argument("input has " + std::to_string(x0.size()) +
                                " values, model expects " + std::to_string(model.input_size()));
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Robust: return "ROBUST";
    case Verdict::Counterexample: return "COUNTEREXAMPLE";
    case Verdict::Timeout: return "TIMEOUT";
  }
  return "?";
}

const char* to_string(Backend b) { return b == Backend::Native ? "native" : "seqcnt-cnf"; }

SolveResult solve_system(const ConstraintSystem& sys, const VerifyOptions& options) {
  const SolverConfig cfg = solver_config(options);
  if (options.backend == Backend::SeqCnt) return solve_cnf(cnf_lower(sys), cfg);
  const auto t0 = Clock::now();
  Solver s(cfg);
  s.load(sys);
  return run_solver(s, sys.num_vars, t0);
}

std::vector<PixelInterval> input_box(const BnnModel& model, std::span<const double> x0, double eps) {
  check_input_size(model, x0);
  std::vector<PixelInterval> box;
  box.reserve(x0.size());
  for (double x : x0) box.push_back(pixel_interval(x, eps, model.quant_step(), model.input_levels()));
  return box;
}

std::int32_t ensemble_attack_class(std::span<const BnnModel* const> models,
                                   std::span<const std::int32_t> input, std::int32_t label) {
  std::int32_t agreed = -1;
  for (const BnnModel* m : models) {
    std::int32_t w = strict_argmax(*m, infer(*m, input));
    if (w < 0 || w == label || (agreed >= 0 && w != agreed)) return -1;
    agreed = w;
  }
  return agreed;
}

VerifyOutcome Verifier::verify_one(const BnnModel& model, std::span<const double> x0, double eps,
                                   std::int32_t label, const VerifyOptions& options) {
  if (label < 0 || label >= model.num_classes()) throw std::invalid_argument("label out of range");
  const auto t0 = Clock::now();
  VerifyOutcome out;
  QuantInput clean = quantize(model, x0);
  Inference clean_inf = infer(model, clean);
  if (misclassified(model, clean_inf, label)) {
    out.status = Verdict::Counterexample;
    out.counterexample = std::move(clean);
    out.predicted = clean_inf.predicted;
    out.clean_misclassified = true;
    out.build_seconds = seconds_since(t0);
    return out;
  }
  ConstraintSystem sys = encoder_.encode_query(model, x0, eps, label);
  out.build_seconds = seconds_since(t0);
  SolveResult r = solve_system(sys, options);
  out.solve_seconds = r.seconds;
  out.stats = r.stats;
  out.status = verdict_of(r.status);
  if (out.status == Verdict::Counterexample) {
    const BnnModel* ms[] = {&model};
    QuantInput q{decode_inputs(sys, r.model)};
    check_box(q.values, input_box(model, x0, eps), sys, ms);
    Inference inf = infer(model, q);
    if (!misclassified(model, inf, label))
      soundness_failure("decoded counterexample is classified correctly", sys, ms);
    out.predicted = inf.predicted;
    out.counterexample = std::move(q);
  }
  return out;
}

VerifyOutcome Verifier::verify_ensemble(std::span<const BnnModel* const> models,
                                        std::span<const double> x0, double eps,
                                        std::int32_t label, const VerifyOptions& options) {
  if (models.empty()) throw std::invalid_argument("ensemble: no models");
  if (label < 0 || label >= models[0]->num_classes()) throw std::invalid_argument("label out of range");
  const auto t0 = Clock::now();
  VerifyOutcome out;
  QuantInput clean = quantize(*models[0], x0);
  if (std::int32_t c = ensemble_attack_class(models, clean.values, label); c >= 0) {
    out.status = Verdict::Counterexample;
    out.counterexample = std::move(clean);
    out.predicted = c;
    out.clean_misclassified = true;
    out.build_seconds = seconds_since(t0);
    return out;
  }
  ConstraintSystem sys = encoder_.encode_ensemble_query(models, x0, eps, label);
  out.build_seconds = seconds_since(t0);
  SolveResult r = solve_system(sys, options);
  out.solve_seconds = r.seconds;
  out.stats = r.stats;
  out.status = verdict_of(r.status);
  if (out.status == Verdict::Counterexample) {
    QuantInput q{decode_inputs(sys, r.model)};
    check_box(q.values, input_box(*models[0], x0, eps), sys, models);
    std::int32_t c = ensemble_attack_class(models, q.values, label);
    if (c < 0) soundness_failure("decoded input does not fool the ensemble", sys, models);
    out.predicted = c;
    out.counterexample = std::move(q);
  }
  return out;
}

VerifyOutcome verify_one(const BnnModel& model, std::span<const double> x0, double eps,
                         std::int32_t label, const VerifyOptions& options) {
  static Verifier shared;
  return shared.verify_one(model, x0, eps, label, options);
}

// --- brute force ---------------------------------------------------------------------

namespace {

template <typename Attacked>
VerifyOutcome enumerate_box(const std::vector<PixelInterval>& box, std::uint64_t max_points,
                            Attacked attacked) {
  std::uint64_t points = 1;
  for (const auto& iv : box) {
    points *= static_cast<std::uint64_t>(iv.hi - iv.lo + 1);
    if (points > max_points)
      throw OracleGuardError("brute force: box exceeds " + std::to_string(max_points) + " points");
  }
  const auto t0 = Clock::now();
  VerifyOutcome out;
  std::vector<std::int32_t> x(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) x[i] = box[i].lo;
  for (;;) {
    if (std::int32_t c = attacked(x); c >= 0) {
      out.status = Verdict::Counterexample;
      out.counterexample = QuantInput{x};
      out.predicted = c;
      break;
    }
    std::size_t i = box.size();
    while (i > 0 && x[i - 1] == box[i - 1].hi) {
      x[i - 1] = box[i - 1].lo;
      --i;
    }
    if (i == 0) break;
    ++x[i - 1];
  }
  out.solve_seconds = seconds_since(t0);
  return out;
}

}  // namespace

VerifyOutcome brute_force_verify(const BnnModel& model, std::span<const double> x0, double eps,
                                 std::int32_t label, std::uint64_t max_points) {
  if (label < 0 || label >= model.num_classes()) throw std::invalid_argument("label out of range");
  VerifyOutcome out = enumerate_box(input_box(model, x0, eps), max_points,
                                    [&](std::span<const std::int32_t> x) -> std::int32_t {
                                      Inference inf = infer(model, x);
                                      return misclassified(model, inf, label) ? inf.predicted : -1;
                                    });
  if (out.counterexample && *out.counterexample == quantize(model, x0)) out.clean_misclassified = true;
  return out;
}

VerifyOutcome brute_force_ensemble(std::span<const BnnModel* const> models,
                                   std::span<const double> x0, double eps, std::int32_t label,
                                   std::uint64_t max_points) {
  if (models.empty()) throw std::invalid_argument("ensemble: no models");
  return enumerate_box(input_box(*models[0], x0, eps), max_points,
                       [&](std::span<const std::int32_t> x) {
                         return ensemble_attack_class(models, x, label);
                       });
}

// --- counterexample files ------------------------------------------------------------

std::string counterexample_to_json(const CounterexampleFile& cex) {
  nlohmann::json j;
  j["input_q"] = cex.input_q;
  j["eps"] = cex.eps;
  j["source_class"] = cex.source_class;
  j["predicted"] = cex.predicted;
  if (cex.x0) j["x0"] = *cex.x0;
  return j.dump() + "\n";
}

CounterexampleFile counterexample_from_json(std::string_view text) {
  CounterexampleFile cex;
  try {
    auto j = nlohmann::json::parse(text);
    cex.input_q = j.at("input_q").get<std::vector<std::int32_t>>();
    cex.eps = j.at("eps").get<double>();
    cex.source_class = j.at("source_class").get<std::int32_t>();
    if (j.contains("predicted")) cex.predicted = j["predicted"].get<std::int32_t>();
    if (j.contains("x0")) cex.x0 = j["x0"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("counterexample: ") + e.what());
  }
  return cex;
}

CexCheck check_counterexample(std::span<const BnnModel* const> models, const CounterexampleFile& cex) {
  CexCheck r;
  const BnnModel& m0 = *models[0];
  if (static_cast<std::int64_t>(cex.input_q.size()) != m0.input_size()) {
    r.reason = "input_q has " + std::to_string(cex.input_q.size()) + " values, model expects " +
               std::to_string(m0.input_size());
    return r;
  }
  if (cex.source_class < 0 || cex.source_class >= m0.num_classes()) {
    r.reason = "source_class out of range";
    return r;
  }
  for (std::size_t i = 0; i < cex.input_q.size(); ++i)
    if (cex.input_q[i] < 0 || cex.input_q[i] > m0.input_levels()) {
      r.reason = "pixel " + std::to_string(i) + " is off the quantization grid";
      return r;
    }
  if (cex.x0) {
    auto box = input_box(m0, *cex.x0, cex.eps);
    for (std::size_t i = 0; i < box.size(); ++i)
      if (cex.input_q[i] < box[i].lo || cex.input_q[i] > box[i].hi) {
        r.reason = "pixel " + std::to_string(i) + " exceeds the perturbation bound";
        return r;
      }
  }
  if (models.size() == 1) {
    Inference inf = infer(m0, cex.input_q);
    r.predicted = inf.predicted;
    r.valid = misclassified(m0, inf, cex.source_class);
  } else {
    r.predicted = ensemble_attack_class(models, cex.input_q, cex.source_class);
    r.valid = r.predicted >= 0;
  }
  if (!r.valid) r.reason = "input is classified as the source class";
  return r;
}

// --- batches -------------------------------------------------------------------------

BatchAggregates aggregate(std::span<const BatchRow> rows) {
  BatchAggregates a;
  std::size_t natural = 0;
  double solve_sum = 0, build_sum = 0;
  for (const auto& r : rows) {
    if (!r.outcome) {
      ++a.errors;
      continue;
    }
    ++a.total;
    natural += r.clean_correct ? 1 : 0;
    switch (r.outcome->status) {
      case Verdict::Robust: ++a.robust; break;
      case Verdict::Counterexample: ++a.counterexamples; break;
      case Verdict::Timeout: ++a.timeouts; break;
    }
    solve_sum += r.outcome->solve_seconds;
    build_sum += r.outcome->build_seconds;
    a.max_solve_seconds = std::max(a.max_solve_seconds, r.outcome->solve_seconds);
  }
  if (a.total > 0) {
    const auto n = static_cast<double>(a.total);
    a.natural_accuracy = static_cast<double>(natural) / n;
    a.verifiable_accuracy = static_cast<double>(a.robust) / n;
    a.timeout_rate = static_cast<double>(a.timeouts) / n;
    a.attack_success_rate = static_cast<double>(a.counterexamples) / n;
    a.mean_solve_seconds = solve_sum / n;
    a.mean_build_seconds = build_sum / n;
  }
  return a;
}

BatchReport verify_batch(std::span<const BnnModel* const> models, const Dataset& data,
                         const BatchOptions& options) {
  if (models.empty()) throw std::invalid_argument("verify_batch: no models");
  for (const BnnModel* m : models)
    if (m->input_size() != data.shape.size())
      throw std::invalid_argument("dataset images have " + std::to_string(data.shape.size()) +
                                  " pixels, model expects " + std::to_string(m->input_size()));
  BatchReport report;
  for (const BnnModel* m : models) report.model_hashes.push_back(m->content_hash());
  report.eps = options.eps;
  std::size_t n = data.images.size();
  if (options.limit) n = std::min(n, *options.limit);
  report.rows.resize(n);

  Verifier verifier;
  for (const BnnModel* m : models) verifier.encoder().network(*m);

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      BatchRow& row = report.rows[i];
      row.index = i;
      row.label = data.labels[i];
      try {
        const auto& x0 = data.images[i];
        if (models.size() == 1) {
          row.clean_correct = !misclassified(*models[0], infer(*models[0], quantize(*models[0], x0)), row.label);
          row.outcome = verifier.verify_one(*models[0], x0, options.eps, row.label, options.verify);
        } else {
          row.clean_correct =
              ensemble_attack_class(models, quantize(*models[0], x0).values, row.label) < 0;
          row.outcome = verifier.verify_ensemble(models, x0, options.eps, row.label, options.verify);
        }
      } catch (const SoundnessError&) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next = n;
        return;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const std::int32_t threads = std::max(1, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::int32_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  report.totals = aggregate(report.rows);
  return report;
}

std::string report_to_json(const BatchReport& report, bool include_timings) {
  using nlohmann::json;
  json j;
  j["eps"] = report.eps;
  j["models"] = json::array();
  for (auto h : report.model_hashes) j["models"].push_back(hex64(h));
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row;
    row["index"] = r.index;
    row["label"] = r.label;
    row["clean_correct"] = r.clean_correct;
    if (!r.outcome) {
      row["error"] = r.error;
    } else {
      const auto& o = *r.outcome;
      row["status"] = to_string(o.status);
      row["clean_misclassified"] = o.clean_misclassified;
      if (o.counterexample) {
        row["input_q"] = o.counterexample->values;
        row["predicted"] = o.predicted;
      }
      row["conflicts"] = o.stats.conflicts;
      row["decisions"] = o.stats.decisions;
      row["propagations"] = o.stats.propagations;
      if (include_timings) {
        row["build_seconds"] = o.build_seconds;
        row["solve_seconds"] = o.solve_seconds;
      }
    }
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  const auto& a = report.totals;
  json agg;
  agg["total"] = a.total;
  agg["errors"] = a.errors;
  agg["robust"] = a.robust;
  agg["counterexamples"] = a.counterexamples;
  agg["timeouts"] = a.timeouts;
  agg["natural_accuracy"] = a.natural_accuracy;
  agg["verifiable_accuracy"] = a.verifiable_accuracy;
  agg["timeout_rate"] = a.timeout_rate;
  agg["attack_success_rate"] = a.attack_success_rate;
  if (include_timings) {
    agg["mean_solve_seconds"] = a.mean_solve_seconds;
    agg["max_solve_seconds"] = a.max_solve_seconds;
    agg["mean_build_seconds"] = a.mean_build_seconds;
  }
  j["aggregates"] = std::move(agg);
  return j.dump(2) + "\n";
}

std::string report_table(const BatchReport& report) {
  std::ostringstream s;
  char line[160];
  s << "  index  label  status           build(s)   solve(s)\n";
  for (const auto& r : report.rows) {
    if (!r.outcome) {
      std::snprintf(line, sizeof line, "%7zu  %5d  ERROR: %s\n", r.index, r.label, r.error.c_str());
    } else {
      std::snprintf(line, sizeof line, "%7zu  %5d  %-15s %9.4f  %9.4f\n", r.index, r.label,
                    to_string(r.outcome->status), r.outcome->build_seconds, r.outcome->solve_seconds);
    }
    s << line;
  }
  const auto& a = report.totals;
  std::snprintf(line, sizeof line,
                "verifiable %.2f%%  natural %.2f%%  attack %.2f%%  timeout %.2f%%  "
                "mean solve %.4fs  max solve %.4fs  (%zu images, %zu errors)\n",
                100 * a.verifiable_accuracy, 100 * a.natural_accuracy, 100 * a.attack_success_rate,
                100 * a.timeout_rate, a.mean_solve_seconds, a.max_solve_seconds, a.total, a.errors);
  s << line;
  return s.str();
}

// --- backend comparison ----------------------------------------------------------------

TimeSummary summarize(std::vector<double> t) {
  TimeSummary s;
  if (t.empty()) return s;
  std::sort(t.begin(), t.end());
  s.min = t.front();
  s.max = t.back();
  s.mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  const std::size_t m = t.size() / 2;
  s.median = t.size() % 2 ? t[m] : (t[m - 1] + t[m]) / 2;
  return s;
}

BenchComparison bench_compare(std::span<const BenchQuery> queries, const BenchOptions& options) {
  BenchComparison cmp;
  Encoder encoder;
  VerifyOptions vo;
  vo.timeout = options.timeout;
  vo.solver = options.solver;
  const SolverConfig cfg = solver_config(vo);
  std::vector<double> native_t, cnf_t;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& q = queries[qi];
    ConstraintSystem sys = encoder.encode_query(*q.model, q.x0, q.eps, q.label);
    CnfSystem cnf = cnf_lower(sys);
    BenchInstance inst;
    inst.cnf_aux_vars = cnf.num_vars - cnf.original_vars;
    inst.native_seconds = inst.cnf_seconds = std::numeric_limits<double>::infinity();
    for (std::int32_t rep = 0; rep < std::max(1, options.repeats); ++rep) {
      SolveResult a = solve_system(sys, vo);
      SolveResult b = solve_cnf(cnf, cfg);
      inst.native = verdict_of(a.status);
      inst.cnf = verdict_of(b.status);
      inst.native_seconds = std::min(inst.native_seconds, a.seconds);
      inst.cnf_seconds = std::min(inst.cnf_seconds, b.seconds);
    }
    if (inst.native != Verdict::Timeout && inst.cnf != Verdict::Timeout) {
      ++cmp.compared;
      if (inst.native != inst.cnf)
        throw DifferentialError("query " + std::to_string(qi) + ": native says " +
                                to_string(inst.native) + ", seqcnt-cnf says " + to_string(inst.cnf));
      ++cmp.agreed;
    }
    native_t.push_back(inst.native_seconds);
    cnf_t.push_back(inst.cnf_seconds);
    cmp.worst_slowdown = std::max(cmp.worst_slowdown, inst.native_seconds / inst.cnf_seconds);
    cmp.instances.push_back(inst);
  }
  cmp.native = summarize(native_t);
  cmp.cnf = summarize(cnf_t);
  cmp.median_speedup = cmp.native.median > 0 ? cmp.cnf.median / cmp.native.median : 0;
  return cmp;
}

std::string bench_table(const BenchComparison& cmp) {
  std::ostringstream s;
  char line[160];
  s << "backend        min(s)     median(s)  mean(s)    max(s)\n";
  for (auto [name, t] : {std::pair{"native", cmp.native}, std::pair{"seqcnt-cnf", cmp.cnf}}) {
    std::snprintf(line, sizeof line, "%-12s %10.5f %10.5f %10.5f %10.5f\n", name, t.min, t.median,
                  t.mean, t.max);
    s << line;
  }
  std::snprintf(line, sizeof line,
                "instances %zu  compared %zu  agreed %zu  median speedup %.2fx  worst slowdown %.2fx\n",
                cmp.instances.size(), cmp.compared, cmp.agreed, cmp.median_speedup, cmp.worst_slowdown);
  s << line;
  return s.str();
}

}  // namespace eev
