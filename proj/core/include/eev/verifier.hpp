// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eev/constraint_system.hpp"
#include "eev/encoder.hpp"
#include "eev/model.hpp"
#include "eev/solver.hpp"

namespace eev {

enum class Verdict : std::uint8_t { Robust, Counterexample, Timeout };
const char* to_string(Verdict v);

/// How cardinality constraints reach the solver.
enum class Backend : std::uint8_t {
  Native,  // reified cardinality constraints with dedicated propagation
  SeqCnt,  // lowered to sequential-counter CNF, clauses only
};
const char* to_string(Backend b);

struct VerifyOptions {
  /// Wall-clock budget for the solver, in seconds.
  std::optional<double> timeout;
  /// Conflict budget; negative means unlimited. Deterministic alternative
  /// to `timeout`.
  std::int64_t conflict_budget = -1;
  Backend backend = Backend::Native;
  SolverConfig solver;
};

struct VerifyOutcome {
  Verdict status = Verdict::Robust;
  /// Present for counterexamples.
  std::optional<QuantInput> counterexample;
  /// Class the model (or, for ensembles, every model) assigns to the
  /// counterexample; -1 otherwise.
  std::int32_t predicted = -1;
  /// The clean input was already misclassified; no solver call was made.
  bool clean_misclassified = false;
  double build_seconds = 0;
  double solve_seconds = 0;
  SolverStats stats;
};

/// A SAT answer decoded to an input that is not a valid counterexample.
class SoundnessError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The brute-force oracle refused a query whose box is too large.
class OracleGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Unknown;
  std::vector<LBool> model;  // original variables only
  SolverStats stats;
  double seconds = 0;  // load + search
};

/// Solves a system through the chosen backend.
SolveResult solve_system(const ConstraintSystem& sys, const VerifyOptions& options);

/// The integer box of every pixel around x0.
std::vector<PixelInterval> input_box(const BnnModel& model, std::span<const double> x0, double eps);

/// Single models: `label` is misclassified. Ensembles: every model's strict
/// winner is the same class other than `label`; returns that class or -1.
std::int32_t ensemble_attack_class(std::span<const BnnModel* const> models,
                                   std::span<const std::int32_t> input, std::int32_t label);

class Verifier {
 public:
  VerifyOutcome verify_one(const BnnModel& model, std::span<const double> x0, double eps,
                           std::int32_t label, const VerifyOptions& options = {});
  /// Ensemble with reject: an attack must make all models agree on one
  /// wrong class.
  VerifyOutcome verify_ensemble(std::span<const BnnModel* const> models,
                                std::span<const double> x0, double eps, std::int32_t label,
                                const VerifyOptions& options = {});

  Encoder& encoder() { return encoder_; }

 private:
  Encoder encoder_;
};

/// Convenience wrapper around a process-wide Verifier.
VerifyOutcome verify_one(const BnnModel& model, std::span<const double> x0, double eps,
                         std::int32_t label, const VerifyOptions& options = {});

/// Enumerates every quantized input in the box (row-major, first pixel
/// slowest); the first misclassification wins. Refuses boxes with more
/// than `max_points` points.
inline constexpr std::uint64_t kOracleMaxPoints = std::uint64_t{1} << 20;
VerifyOutcome brute_force_verify(const BnnModel& model, std::span<const double> x0, double eps,
                                 std::int32_t label, std::uint64_t max_points = kOracleMaxPoints);
VerifyOutcome brute_force_ensemble(std::span<const BnnModel* const> models,
                                   std::span<const double> x0, double eps, std::int32_t label,
                                   std::uint64_t max_points = kOracleMaxPoints);

// --- counterexample files -----------------------------------------------------------

/// {"input_q": [...], "eps": e, "source_class": c, "predicted": p, "x0": [...]};
/// x0 is optional and enables the perturbation-bound check.
struct CounterexampleFile {
  std::vector<std::int32_t> input_q;
  double eps = 0;
  std::int32_t source_class = 0;
  std::int32_t predicted = -1;
  std::optional<std::vector<double>> x0;
};
std::string counterexample_to_json(const CounterexampleFile& cex);
CounterexampleFile counterexample_from_json(std::string_view text);

struct CexCheck {
  bool valid = false;
  std::int32_t predicted = -1;
  std::string reason;
};
/// Valid iff the input lies on the model's grid (and inside the eps box
/// when x0 is present) and is misclassified (for ensembles: attacked).
CexCheck check_counterexample(std::span<const BnnModel* const> models, const CounterexampleFile& cex);

// --- batches -------------------------------------------------------------------------

struct Dataset;

struct BatchOptions {
  double eps = 0;
  VerifyOptions verify;
  std::int32_t threads = 1;
  std::optional<std::size_t> limit;
};

struct BatchRow {
  std::size_t index = 0;
  std::int32_t label = 0;
  /// The clean input is not attacked (natural accuracy numerator).
  bool clean_correct = false;
  std::optional<VerifyOutcome> outcome;
  std::string error;
};

struct BatchAggregates {
  std::size_t total = 0;
  std::size_t errors = 0;
  std::size_t robust = 0;
  std::size_t counterexamples = 0;
  std::size_t timeouts = 0;
  double natural_accuracy = 0;
  double verifiable_accuracy = 0;
  double timeout_rate = 0;
  double attack_success_rate = 0;
  double mean_solve_seconds = 0;
  double max_solve_seconds = 0;
  double mean_build_seconds = 0;
};

BatchAggregates aggregate(std::span<const BatchRow> rows);

struct BatchReport {
  std::vector<std::uint64_t> model_hashes;
  double eps = 0;
  std::vector<BatchRow> rows;
  BatchAggregates totals;
};

/// Verifies every image with a pool of `threads` workers sharing one
/// encoder. More than one model runs the ensemble query.
BatchReport verify_batch(std::span<const BnnModel* const> models, const Dataset& data,
                         const BatchOptions& options);

/// JSON report; timings are omitted unless requested so that reports of
/// identical runs are byte-identical.
std::string report_to_json(const BatchReport& report, bool include_timings);
std::string report_table(const BatchReport& report);

// --- backend comparison ------------------------------------------------------------

struct BenchQuery {
  const BnnModel* model = nullptr;
  std::vector<double> x0;
  double eps = 0;
  std::int32_t label = 0;
};

struct TimeSummary {
  double min = 0;
  double median = 0;
  double mean = 0;
  double max = 0;
};
TimeSummary summarize(std::vector<double> seconds);

struct BenchInstance {
  Verdict native = Verdict::Robust;
  Verdict cnf = Verdict::Robust;
  double native_seconds = 0;
  double cnf_seconds = 0;
  std::int64_t cnf_aux_vars = 0;
};

struct BenchComparison {
  std::vector<BenchInstance> instances;
  TimeSummary native;
  TimeSummary cnf;
  std::size_t compared = 0;  // pairs where neither side timed out
  std::size_t agreed = 0;
  /// cnf median / native median.
  double median_speedup = 0;
  /// Largest native / cnf time ratio over all instances.
  double worst_slowdown = 0;
};

struct BenchOptions {
  std::optional<double> timeout;
  /// Each instance is solved this many times per backend; the minimum is kept.
  std::int32_t repeats = 1;
  SolverConfig solver;
};

class DifferentialError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Solves the same encoded queries natively and through CNF lowering on the
/// same solver core. Throws DifferentialError on a verdict disagreement.
BenchComparison bench_compare(std::span<const BenchQuery> queries, const BenchOptions& options);
std::string bench_table(const BenchComparison& cmp);

}  // namespace eev
