// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails. Every threshold and workload size is pinned below.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eev/backends.hpp"
#include "eev/dataset.hpp"
#include "eev/encoder.hpp"
#include "eev/solver.hpp"
#include "eev/verifier.hpp"
#include "fixtures.hpp"

namespace {

using namespace eev;
using testing::Rng;
using Clock = std::chrono::steady_clock;

// Criterion 1
constexpr int kSolverSystems = 1000;
constexpr std::int32_t kSolverMaxVars = 15;
constexpr std::int32_t kSolverMaxConstraints = 10;
constexpr double kSolverSecondsLimit = 60.0;
// Criterion 2
constexpr std::int32_t kPropagationMaxOperands = 6;
// Criterion 3
constexpr int kTinyQueries = 500;
constexpr std::int64_t kTinyMaxSteps = 12;
constexpr double kTinySecondsLimit = 300.0;
// Criterion 4
constexpr std::int32_t kEquisatMaxOperands = 8;
// Criterion 5
constexpr int kDifferentialQueries = 200;
constexpr double kDifferentialTimeout = 10.0;
// Criterion 6
constexpr int kPerfQueries = 50;
constexpr double kPerfMinCnfMedian = 0.050;
constexpr double kPerfMinMedianSpeedup = 5.0;
constexpr double kPerfMaxSlowdown = 2.0;
constexpr double kPerfTimeout = 10.0;
constexpr double kPerfEpsMin = 0.10;
constexpr double kPerfEpsMax = 0.30;
constexpr int kPerfRepeats = 3;
// Criterion 7
constexpr std::size_t kDeterminismImages = 40;
// Criterion 8
constexpr std::int32_t kThermometerMaxBits = 6;
// Criterion 9
constexpr int kEnsembleFixtures = 100;
constexpr std::int64_t kEnsembleMaxSteps = 10;

struct Result {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------------

Result solver_vs_enumeration() {
  Rng rng(0xC1);
  const auto t0 = Clock::now();
  int agree = 0;
  for (int i = 0; i < kSolverSystems; ++i) {
    ConstraintSystem sys = testing::random_system(rng, kSolverMaxVars, kSolverMaxConstraints);
    Solver s;
    s.load(sys);
    const SolveStatus st = s.solve();
    const bool sat = testing::enumerate_sat(sys).has_value();
    bool ok = (st == SolveStatus::Sat) == sat && st != SolveStatus::Unknown;
    if (ok && sat) ok = system_holds(sys, s.model());
    agree += ok ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  return {agree == kSolverSystems && secs < kSolverSecondsLimit,
          std::to_string(agree) + "/" + std::to_string(kSolverSystems) + " agree in " + fmt("%.1f s", secs) +
              " (limit " + fmt("%.0f s", kSolverSecondsLimit) + ")"};
}

// ---------------------------------------------------------------------------------

// For one constraint, compares the solver state after assuming every partial
// assignment against the semantic closure computed by enumeration.
struct PropagationTally {
  std::uint64_t cases = 0;
  std::uint64_t mismatches = 0;
};

void check_card_partials(const CardConstraint& c, std::int32_t num_vars, PropagationTally& tally,
                         std::array<std::uint64_t, 4>& rule_hits) {
  std::uint64_t total = 1;
  for (std::int32_t v = 0; v < num_vars; ++v) total *= 3;
  std::vector<LBool> partial(static_cast<std::size_t>(num_vars));
  std::vector<LBool> full(static_cast<std::size_t>(num_vars));
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t rest = code;
    for (auto& p : partial) {
      p = rest % 3 == 0 ? LBool::Undef : rest % 3 == 1 ? LBool::True : LBool::False;
      rest /= 3;
    }
    // Semantic closure.
    bool any = false;
    std::vector<int> seen_true(partial.size(), 0), seen_false(partial.size(), 0);
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << num_vars); ++bits) {
      bool fits = true;
      for (std::size_t v = 0; v < full.size(); ++v) {
        full[v] = to_lbool((bits >> v) & 1);
        if (partial[v] != LBool::Undef && partial[v] != full[v]) fits = false;
      }
      if (!fits) continue;
      if (!card_holds(c, full)) continue;
      any = true;
      for (std::size_t v = 0; v < full.size(); ++v) (full[v] == LBool::True ? seen_true : seen_false)[v] = 1;
    }
    // Solver.
    Solver s;
    s.reserve_vars(num_vars);
    bool ok = s.add_card(c);
    for (std::size_t v = 0; ok && v < partial.size(); ++v)
      if (partial[v] != LBool::Undef) ok = s.assume(Lit::make(static_cast<Var>(v), partial[v] == LBool::False));
    ++tally.cases;
    bool match = ok == any;
    if (match && ok) {
      for (std::size_t v = 0; v < partial.size(); ++v) {
        LBool expected = seen_true[v] && seen_false[v] ? LBool::Undef : seen_true[v] ? LBool::True : LBool::False;
        if (s.value(Lit::make(static_cast<Var>(v))) != expected) match = false;
      }
      if (!s.counters_consistent()) match = false;
    }
    if (!match) ++tally.mismatches;
    for (int r = 0; r < 4; ++r) rule_hits[static_cast<std::size_t>(r)] += s.stats().card_rule_propagations[static_cast<std::size_t>(r)];
  }
}

Result propagation_rules() {
  Rng rng(0xC2);
  PropagationTally tally;
  // Indexed by [target negated][rule].
  std::array<std::array<std::uint64_t, 4>, 2> hits{};
  std::uint64_t constraints = 0;
  for (std::int32_t n = 1; n <= kPropagationMaxOperands; ++n) {
    for (std::int64_t bound = -1; bound <= n; ++bound) {
      for (int target_neg = 0; target_neg < 2; ++target_neg) {
        // Operand sign patterns: all positive, all negative, mixed, mixed with repeats.
        for (int pattern = 0; pattern < 4; ++pattern) {
          CardConstraint c;
          c.target = Lit::make(0, target_neg == 1);
          std::int32_t vars = n + 1;
          for (std::int32_t i = 0; i < n; ++i) {
            Var v = i + 1;
            if (pattern == 3 && i > 0 && testing::coin(rng)) v = static_cast<Var>(testing::uniform(rng, 1, i));
            const bool neg = pattern == 1 || (pattern >= 2 && testing::coin(rng));
            c.operands.push_back(Lit::make(v, neg));
          }
          if (pattern == 3) {
            Var top = 0;
            for (Lit l : c.operands) top = std::max(top, l.var());
            vars = top + 1;
          }
          c.bound = bound;
          check_card_partials(c, vars, tally, hits[static_cast<std::size_t>(target_neg)]);
          ++constraints;
        }
      }
    }
  }
  bool covered = true;
  std::ostringstream rules;
  for (int pol = 0; pol < 2; ++pol)
    for (int r = 0; r < 4; ++r) {
      covered = covered && hits[static_cast<std::size_t>(pol)][static_cast<std::size_t>(r)] > 0;
      rules << (r || pol ? "," : "") << hits[static_cast<std::size_t>(pol)][static_cast<std::size_t>(r)];
    }
  const std::uint64_t exact = tally.cases - tally.mismatches;
  return {tally.mismatches == 0 && covered,
          std::to_string(exact) + "/" + std::to_string(tally.cases) + " partial assignments exact over " +
              std::to_string(constraints) + " constraints; rule firings [+target|-target] " + rules.str()};
}

// ---------------------------------------------------------------------------------

Result tiny_bnn_queries() {
  Rng rng(0xC3);
  Verifier verifier;
  const auto t0 = Clock::now();
  int agree = 0, cex = 0, valid = 0, robust = 0, generated = 0;
  while (generated < kTinyQueries) {
    testing::NetSpec spec = testing::random_tiny_spec(rng);
    spec.tie_free = testing::coin(rng);
    BnnModel m = testing::random_model(rng, spec);
    auto x0 = testing::random_image(rng, m.input_size(), m.quant_step());
    const double eps = testing::uniform_real(rng, 0, 3 * m.quant_step());
    if (testing::box_steps(m, x0, eps) > kTinyMaxSteps) continue;
    ++generated;
    const std::int32_t clean = infer(m, quantize(m, x0)).predicted;
    const std::int32_t label = testing::coin(rng, 0.85)
                                   ? clean
                                   : static_cast<std::int32_t>(testing::uniform(rng, 0, m.num_classes() - 1));
    VerifyOutcome got = verifier.verify_one(m, x0, eps, label);
    VerifyOutcome want = brute_force_verify(m, x0, eps, label);
    agree += got.status == want.status ? 1 : 0;
    if (got.status == Verdict::Robust) ++robust;
    if (got.counterexample) {
      ++cex;
      std::vector<const BnnModel*> models{&m};
      CounterexampleFile file{got.counterexample->values, eps, label, got.predicted, x0};
      valid += check_counterexample(models, file).valid ? 1 : 0;
    }
  }
  const double secs = seconds_since(t0);
  return {agree == kTinyQueries && valid == cex && secs < kTinySecondsLimit,
          std::to_string(agree) + "/" + std::to_string(kTinyQueries) + " verdicts agree (" + std::to_string(robust) +
              " robust, " + std::to_string(cex) + " counterexamples, " + std::to_string(valid) + " validated) in " +
              fmt("%.1f s", secs) + " (limit " + fmt("%.0f s", kTinySecondsLimit) + ")"};
}

// ---------------------------------------------------------------------------------

// Independent checker for linear constraints read back from OPB text.
bool toy_pb_satisfied(const std::vector<PbConstraint>& rows, const std::vector<LBool>& a) {
  for (const auto& r : rows) {
    std::int64_t lhs = 0;
    for (const auto& t : r.terms) {
      const bool val = a[static_cast<std::size_t>(t.lit.var())] == LBool::True;
      if (val != t.lit.negated()) lhs += t.coef;
    }
    if (lhs < r.rhs) return false;
  }
  return true;
}

Result equisatisfiability() {
  Rng rng(0xC4);
  std::uint64_t constraints = 0, assignments = 0, mismatches = 0;
  for (std::int32_t n = 1; n <= kEquisatMaxOperands; ++n) {
    const std::int32_t vars = n + 1;
    for (std::int64_t bound = -1; bound <= n + 1; ++bound) {
      // Exhaustive sign masks up to 5 operands, sampled above.
      const std::uint32_t masks = n <= 5 ? (1u << n) : 24u;
      for (std::uint32_t mi = 0; mi < masks; ++mi) {
        const std::uint32_t mask = n <= 5 ? mi : static_cast<std::uint32_t>(testing::uniform(rng, 0, (1 << n) - 1));
        for (int target_neg = 0; target_neg < 2; ++target_neg) {
          CardConstraint c;
          c.target = Lit::make(0, target_neg == 1);
          for (std::int32_t i = 0; i < n; ++i) c.operands.push_back(Lit::make(i + 1, (mask >> i) & 1));
          c.bound = bound;
          ++constraints;

          ConstraintSystem sys;
          sys.num_vars = vars;
          sys.cards.push_back(c);
          CnfSystem cnf = cnf_lower(sys);
          std::stringstream opb;
          write_opb(sys, opb);
          const auto rows = read_opb(opb);

          Solver native;
          native.reserve_vars(vars);
          const bool loaded = native.add_card(c);
          for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << vars); ++bits) {
            std::vector<LBool> a(static_cast<std::size_t>(vars));
            for (std::int32_t v = 0; v < vars; ++v) a[static_cast<std::size_t>(v)] = to_lbool((bits >> v) & 1);
            bool in_native = loaded;
            for (std::int32_t v = 0; in_native && v < vars; ++v)
              in_native = native.assume(Lit::make(v, a[static_cast<std::size_t>(v)] == LBool::False));
            native.backtrack(0);
            std::vector<LBool> ext(a);
            ext.resize(static_cast<std::size_t>(cnf.num_vars), LBool::Undef);
            bool in_cnf = testing::unit_propagate(cnf.clauses, ext);
            for (LBool v : ext) in_cnf = in_cnf && v != LBool::Undef;
            const bool in_pb = toy_pb_satisfied(rows, a);
            const bool truth = card_holds(c, a);
            ++assignments;
            if (in_native != truth || in_cnf != truth || in_pb != truth) ++mismatches;
          }
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(assignments - mismatches) + "/" + std::to_string(assignments) +
                               " (y, l) assignments classified identically over " + std::to_string(constraints) +
                               " constraints"};
}

// ---------------------------------------------------------------------------------

// Medium models: conv front end, dense hidden layer, 10 classes.
BnnModel medium_model(Rng& rng, std::int32_t side, std::int32_t hidden) {
  testing::NetSpec spec;
  spec.input = {side, side, 1};
  spec.quant_step = 1.0 / 16.0;
  testing::ConvSpec conv;
  conv.channels = 3;
  conv.geometry = {3, 3, 2, 2, 1, 1};
  spec.conv = conv;
  spec.dense_hidden = {hidden};
  spec.classes = 10;
  spec.tie_free = false;
  spec.zero_weight_prob = 0.1;
  return testing::random_model(rng, spec);
}

Result differential_benchmark() {
  Rng rng(0xC5);
  std::vector<BnnModel> models;
  models.reserve(10);
  for (int i = 0; i < 10; ++i) models.push_back(medium_model(rng, 8 + (i % 3) * 2, 16 + 4 * (i % 4)));
  std::vector<BenchQuery> queries;
  for (int q = 0; q < kDifferentialQueries; ++q) {
    const BnnModel& m = models[static_cast<std::size_t>(q % 10)];
    auto x0 = testing::random_image(rng, m.input_size(), m.quant_step());
    const double eps = testing::uniform_real(rng, 0.02, 0.25);
    const std::int32_t label = infer(m, quantize(m, x0)).predicted;
    queries.push_back({&m, std::move(x0), eps, label});
  }
  BenchOptions opts;
  opts.timeout = kDifferentialTimeout;
  try {
    BenchComparison cmp = bench_compare(queries, opts);
    std::size_t sat = 0;
    for (const auto& i : cmp.instances) sat += i.native == Verdict::Counterexample ? 1 : 0;
    return {cmp.agreed == cmp.compared && cmp.compared > 0,
            std::to_string(cmp.agreed) + "/" + std::to_string(cmp.compared) + " non-timeout verdicts agree (" +
                std::to_string(sat) + " counterexamples, " + std::to_string(cmp.instances.size() - cmp.compared) +
                " timeouts)"};
  } catch (const DifferentialError& e) {
    return {false, e.what()};
  }
}

// ---------------------------------------------------------------------------------

Result performance() {
  Rng rng(0xC6);
  std::vector<BnnModel> models;
  models.reserve(5);
  for (int i = 0; i < 5; ++i) {
    // Sparse MLP, about 17% nonzero weights.
    testing::NetSpec spec;
    spec.input = {16, 16, 1};
    spec.quant_step = 1.0 / 16.0;
    spec.dense_hidden = {100, 50};
    spec.classes = 10;
    spec.tie_free = false;
    spec.zero_weight_prob = 0.83;
    models.push_back(testing::random_model(rng, spec));
  }
  std::vector<BenchQuery> queries;
  for (int q = 0; q < kPerfQueries; ++q) {
    const BnnModel& m = models[static_cast<std::size_t>(q % 5)];
    auto x0 = testing::random_image(rng, m.input_size(), m.quant_step());
    const double eps = testing::uniform_real(rng, kPerfEpsMin, kPerfEpsMax);
    const std::int32_t label = infer(m, quantize(m, x0)).predicted;
    queries.push_back({&m, std::move(x0), eps, label});
  }
  BenchOptions opts;
  opts.timeout = kPerfTimeout;
  opts.repeats = kPerfRepeats;
  BenchComparison cmp;
  try {
    cmp = bench_compare(queries, opts);
  } catch (const DifferentialError& e) {
    return {false, e.what()};
  }
  // CNF timeouts enter the statistics at the budget, which understates the speedup.
  std::size_t native_timeouts = 0, cnf_timeouts = 0;
  for (const auto& i : cmp.instances) {
    native_timeouts += i.native == Verdict::Timeout;
    cnf_timeouts += i.cnf == Verdict::Timeout;
  }
  std::printf("       %-10s %10s %10s %10s %10s\n", "backend", "min(s)", "median(s)", "mean(s)", "max(s)");
  for (auto [name, t] : {std::pair{"native", cmp.native}, std::pair{"seqcnt-cnf", cmp.cnf}})
    std::printf("       %-10s %10.4f %10.4f %10.4f %10.4f\n", name, t.min, t.median, t.mean, t.max);
  const bool pass = cmp.cnf.median >= kPerfMinCnfMedian && cmp.median_speedup >= kPerfMinMedianSpeedup &&
                    cmp.worst_slowdown <= kPerfMaxSlowdown && native_timeouts == 0;
  return {pass, "median speedup " + fmt("%.2fx", cmp.median_speedup) + " (need >= " +
                    fmt("%.0fx", kPerfMinMedianSpeedup) + "), worst native/cnf ratio " +
                    fmt("%.2f", cmp.worst_slowdown) + " (need <= " + fmt("%.0f", kPerfMaxSlowdown) +
                    "), cnf median " + fmt("%.3f s", cmp.cnf.median) + " (need >= " +
                    fmt("%.3f s", kPerfMinCnfMedian) + "), timeouts native " + std::to_string(native_timeouts) +
                    " / cnf " + std::to_string(cnf_timeouts)};
}

// ---------------------------------------------------------------------------------

Result determinism() {
  Rng rng(0xC7);
  BnnModel m = medium_model(rng, 8, 20);
  Dataset data;
  data.shape = m.input_shape();
  for (std::size_t i = 0; i < kDeterminismImages; ++i) {
    data.images.push_back(testing::random_image(rng, m.input_size(), m.quant_step()));
    data.labels.push_back(static_cast<std::int32_t>(testing::uniform(rng, 0, 9)));
  }
  std::vector<const BnnModel*> models{&m};
  BatchOptions opts;
  opts.eps = 0.1;
  opts.threads = 4;
  const std::string first = report_to_json(verify_batch(models, data, opts), false);
  const std::string second = report_to_json(verify_batch(models, data, opts), false);
  opts.threads = 1;
  const std::string serial = report_to_json(verify_batch(models, data, opts), false);
  const bool same = first == second && first == serial;
  return {same, std::string(same ? "identical" : "different") + " reports (" + std::to_string(first.size()) +
                    " bytes) across two 4-thread runs and one serial run"};
}

// ---------------------------------------------------------------------------------

Result thermometer() {
  int blocks = 0, exact = 0;
  const double step = 1.0 / 32.0;
  for (std::int32_t k = 0; k <= kThermometerMaxBits; ++k)
    for (std::int32_t base = 0; base + k <= 32; base += 4) {
      // x0 at the interval midpoint; eps reaches exactly k/2 steps each side.
      ConstraintSystem sys;
      const double x0 = (base + k / 2.0) * step;
      std::vector<double> pixel{x0};
      encode_input_space(pixel, k / 2.0 * step, step, 32, sys);
      ++blocks;
      const InputBlock& b = sys.inputs[0];
      if (static_cast<std::int32_t>(b.bits.size()) != k || b.base != base) continue;
      std::set<std::int32_t> values;
      int models = 0;
      for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << sys.num_vars); ++bits) {
        std::vector<LBool> a(static_cast<std::size_t>(sys.num_vars));
        for (std::int32_t v = 0; v < sys.num_vars; ++v) a[static_cast<std::size_t>(v)] = to_lbool((bits >> v) & 1);
        if (!system_holds(sys, a)) continue;
        ++models;
        values.insert(decode_inputs(sys, a)[0]);
      }
      if (models == k + 1 && static_cast<int>(values.size()) == k + 1 && *values.begin() == base &&
          *values.rbegin() == base + k)
        ++exact;
    }
  return {exact == blocks, std::to_string(exact) + "/" + std::to_string(blocks) +
                               " blocks (k = 0.." + std::to_string(kThermometerMaxBits) +
                               ") have exactly k+1 distinct solutions"};
}

// ---------------------------------------------------------------------------------

Result ensemble_attack_sets() {
  Rng rng(0xC9);
  Encoder encoder;
  int matched = 0, fixtures = 0;
  std::size_t attack_points = 0, nonempty = 0;
  while (fixtures < kEnsembleFixtures) {
    testing::NetSpec spec = testing::random_tiny_spec(rng);
    BnnModel a = testing::random_model(rng, spec);
    BnnModel b = testing::random_model(rng, spec);
    auto x0 = testing::random_image(rng, a.input_size(), a.quant_step());
    const double eps = testing::uniform_real(rng, 0.5 * a.quant_step(), 3 * a.quant_step());
    if (testing::box_steps(a, x0, eps) > kEnsembleMaxSteps) continue;
    ++fixtures;
    std::vector<const BnnModel*> models{&a, &b};
    const auto label = static_cast<std::int32_t>(testing::uniform(rng, 0, spec.classes - 1));

    std::set<std::vector<std::int32_t>> expected;
    auto box = input_box(a, x0, eps);
    std::vector<std::int32_t> q(box.size());
    std::function<void(std::size_t)> walk = [&](std::size_t i) {
      if (i == box.size()) {
        if (ensemble_attack_class(models, q, label) >= 0) expected.insert(q);
        return;
      }
      for (q[i] = box[i].lo; q[i] <= box[i].hi; ++q[i]) walk(i + 1);
    };
    walk(0);

    ConstraintSystem sys = encoder.encode_ensemble_query(models, x0, eps, label);
    Solver s;
    s.load(sys);
    std::set<std::vector<std::int32_t>> found;
    bool sound = true;
    while (s.solve() == SolveStatus::Sat) {
      std::vector<LBool> model(s.model().begin(), s.model().end());
      auto input = decode_inputs(sys, model);
      if (!found.insert(input).second) sound = false;
      std::vector<Lit> block;
      for (const auto& in : sys.inputs)
        for (Lit bit : in.bits) block.push_back(lit_value(bit, model) == LBool::True ? ~bit : bit);
      if (block.empty() || !s.add_clause(block)) break;
    }
    if (sound && found == expected) ++matched;
    attack_points += expected.size();
    nonempty += expected.empty() ? 0 : 1;
  }
  return {matched == kEnsembleFixtures,
          std::to_string(matched) + "/" + std::to_string(kEnsembleFixtures) + " attack sets equal (" +
              std::to_string(nonempty) + " nonempty, " + std::to_string(attack_points) + " attack points)"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    Result (*run)();
  };
  const Criterion criteria[] = {
      {"C1 solver vs enumeration", solver_vs_enumeration},
      {"C2 propagation rules vs semantic closure", propagation_rules},
      {"C3 tiny BNN queries vs brute force", tiny_bnn_queries},
      {"C4 native / seqcnt CNF / PB equisatisfiability", equisatisfiability},
      {"C5 native vs CNF verdicts", differential_benchmark},
      {"C6 native vs CNF performance", performance},
      {"C7 deterministic reports", determinism},
      {"C8 thermometer blocks", thermometer},
      {"C9 ensemble attack sets", ensemble_attack_sets},
  };
  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (argc > 1 && std::strncmp(c.name, argv[1], std::strlen(argv[1])) != 0) continue;
    ++ran;
    const auto t0 = Clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %s: %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", c.name, r.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
