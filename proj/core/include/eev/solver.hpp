// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "eev/constraint_system.hpp"
#include "eev/lit.hpp"

namespace eev {

enum class Polarity : std::uint8_t { Random, Negative, Positive };

struct SolverConfig {
  Polarity polarity = Polarity::Random;
  bool phase_saving = false;
  double var_decay = 0.95;
  double clause_decay = 0.999;
  /// Luby restarts: the i-th run allows luby(i) * restart_unit conflicts.
  std::int64_t restart_unit = 100;
  std::uint64_t seed = 91648253;
  /// Negative means unlimited.
  std::int64_t conflict_budget = -1;
  /// Wall-clock budget in seconds; unset means unlimited.
  std::optional<double> time_budget;
  /// Called with every learned clause (asserting literal first).
  std::function<void(std::span<const Lit>)> on_learned;
};

/// Cardinality propagation rules, in the order used by SolverStats.
enum class CardRule : std::uint8_t {
  OperandToFalse,  // target true, enough operands true
  OperandToTrue,   // target false, enough operands false
  TargetToFalse,   // more than `bound` operands true
  TargetToTrue,    // at most `bound` operands can still be true
};

struct SolverStats {
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t clause_propagations = 0;
  std::array<std::uint64_t, 4> card_rule_propagations{};
  std::uint64_t card_propagations = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t learned = 0;
  std::uint64_t learned_literals = 0;
  std::uint64_t restarts = 0;
  /// Operand-array scans triggered by operand-inferring rules and the
  /// number of operand entries they visited.
  std::uint64_t card_scans = 0;
  std::uint64_t card_scan_steps = 0;
  double solve_seconds = 0;

  friend bool operator==(const SolverStats&, const SolverStats&) = default;
};

enum class SolveStatus : std::uint8_t { Sat, Unsat, Unknown };

/// A model failed the final semantic check; indicates a solver bug.
class SolverInvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// CDCL solver over disjunctive clauses and reified cardinality constraints
///   target <=> (sum of operands) <= bound
/// Cardinality constraints keep running counts of true and false operands,
/// updated when an assignment is processed from the propagation queue and
/// undone on backtrack. Their reasons are synthesized lazily during conflict
/// analysis from the earliest-assigned operands that triggered the rule.
class Solver {
 public:
  explicit Solver(SolverConfig config = {});

  Var new_var();
  void reserve_vars(std::int32_t n);
  std::int32_t num_vars() const { return static_cast<std::int32_t>(assigns_.size()); }

  /// Adds a clause at decision level 0. Returns false once the system is
  /// known to be unsatisfiable.
  bool add_clause(std::span<const Lit> lits);
  bool add_clause(std::initializer_list<Lit> lits) {
    return add_clause(std::span<const Lit>(lits.begin(), lits.size()));
  }
  /// Adds target <=> (sum of operands) <= bound. The target variable must
  /// not occur among the operands. Constant literals are folded.
  bool add_card(Lit target, std::span<const Lit> operands, std::int64_t bound);
  bool add_card(const CardConstraint& c) { return add_card(c.target, c.operands, c.bound); }
  /// Loads every variable and constraint of a system.
  bool load(const ConstraintSystem& sys);

  SolveStatus solve();
  bool okay() const { return ok_; }

  /// Assignment after a Sat answer, indexed by variable.
  std::span<const LBool> model() const { return model_; }
  const SolverStats& stats() const { return stats_; }
  const SolverConfig& config() const { return config_; }

  // Stepping interface used by tests and diagnostics.

  /// Opens a decision level, assigns `p` and propagates to fixpoint.
  /// Returns false on conflict; the conflict is kept for analyze_conflict().
  /// Assuming a literal that is already false returns false without
  /// opening a level.
  bool assume(Lit p);
  /// First-UIP analysis of the last conflict. Requires decision level > 0.
  struct Learned {
    std::vector<Lit> clause;  // asserting literal first
    int backjump_level = 0;
  };
  Learned analyze_conflict();
  void backtrack(int level);
  int decision_level() const { return static_cast<int>(trail_lim_.size()); }
  LBool value(Lit p) const {
    return assigns_[static_cast<std::size_t>(p.var())] ^ p.negated();
  }
  int level(Var v) const { return level_[static_cast<std::size_t>(v)]; }
  /// The reason clause of an implied literal (implied literal first), or
  /// empty for decisions and unassigned variables.
  std::vector<Lit> reason_clause(Var v);
  /// Recomputes every cardinality counter from the processed trail prefix.
  bool counters_consistent() const;

 private:
  using CRef = std::uint32_t;
  static constexpr std::uint32_t kNoReason = 0xffffffffu;
  static constexpr std::uint32_t kCardTag = 0x80000000u;

  struct ClauseHeader {
    std::uint32_t start;
    std::uint32_t size;
    float activity;
    bool learnt;
    bool deleted;
  };
  struct Watcher {
    CRef cref;
    Lit blocker;
  };
  struct Card {
    Lit target;
    std::int64_t bound;
    std::int64_t total;     // operand count with multiplicity
    std::int32_t max_mult;
    std::int64_t num_true = 0;
    std::int64_t num_false = 0;
    std::vector<Lit> ops;             // distinct variables
    std::vector<std::int32_t> mult;   // multiplicity per op
  };
  enum class OccKind : std::uint8_t { OpTrue, OpFalse, TargetTrue, TargetFalse };
  struct CardOcc {
    std::uint32_t card;
    std::int32_t mult;
    OccKind kind;
  };
  struct Conflict {
    bool present = false;
    std::vector<Lit> lits;  // all false
  };

  // Clause storage.
  CRef alloc_clause(std::span<const Lit> lits, bool learnt);
  std::span<Lit> clause_lits(CRef cr) {
    const auto& h = headers_[cr];
    return {clause_mem_.data() + h.start, h.size};
  }
  void attach_clause(CRef cr);
  bool locked(CRef cr);
  void reduce_db();
  void collect_garbage();

  // Assignment.
  void enqueue(Lit p, std::uint32_t reason);
  bool propagate();  // false on conflict (stored in conflict_)
  bool propagate_clauses(Lit p);
  bool check_card_rules(Lit p);
  bool imply_from_card(std::uint32_t ci, Lit q, CardRule rule);
  void scan_operands(std::uint32_t ci, bool target_true);
  void synthesize_card_reason(std::uint32_t ci, Lit implied, std::size_t limit_pos,
                              std::vector<Lit>& out) const;
  void cancel_until(int level);

  // Search.
  Lit pick_branch_lit();
  void bump_var(Var v);
  void bump_clause(CRef cr);
  void analyze(std::vector<Lit>& out_learnt, int& out_btlevel);
  void reason_lits(Var v, std::vector<Lit>& out);
  bool lit_redundant(Lit p, std::uint32_t levels);
  std::uint32_t abstract_level(Var v) const {
    return 1u << (static_cast<unsigned>(level_[static_cast<std::size_t>(v)]) & 31u);
  }
  enum class SearchResult : std::uint8_t { Sat, Unsat, Restart, Budget };
  SearchResult search(std::int64_t conflict_limit);
  bool budget_exhausted();
  void verify_model() const;

  // Heap over variable activities.
  void heap_insert(Var v);
  void heap_up(std::size_t i);
  void heap_down(std::size_t i);
  Var heap_pop();
  bool heap_less(Var a, Var b) const { return activity_[static_cast<std::size_t>(a)] > activity_[static_cast<std::size_t>(b)]; }

  SolverConfig config_;
  SolverStats stats_;
  bool ok_ = true;
  std::mt19937_64 rng_;

  std::vector<LBool> assigns_;
  std::vector<int> level_;
  std::vector<std::uint32_t> reason_;
  std::vector<std::uint32_t> trail_pos_;
  std::vector<std::uint8_t> saved_phase_;
  std::vector<double> activity_;
  std::vector<std::uint8_t> seen_;
  double var_inc_ = 1.0;
  double cla_inc_ = 1.0;

  std::vector<Var> heap_;
  std::vector<std::int32_t> heap_index_;

  std::vector<Lit> trail_;
  std::vector<std::size_t> trail_lim_;
  std::size_t qhead_ = 0;

  std::vector<Lit> clause_mem_;
  std::vector<ClauseHeader> headers_;
  std::vector<CRef> problem_clauses_;
  std::vector<CRef> learnts_;
  std::size_t wasted_lits_ = 0;
  double max_learnts_ = 0;
  double learnt_adjust_confl_ = 100;
  std::int64_t learnt_adjust_cnt_ = 100;
  std::vector<std::vector<Watcher>> watches_;

  std::vector<Card> cards_;
  std::vector<std::vector<CardOcc>> card_occ_;

  // Original constraints for the final model check.
  std::vector<std::vector<Lit>> original_clauses_;
  std::vector<CardConstraint> original_cards_;

  Conflict conflict_;
  std::vector<Lit> scratch_reason_;
  std::vector<Lit> analyze_stack_;
  std::vector<Lit> analyze_toclear_;
  std::vector<LBool> model_;
  std::chrono::steady_clock::time_point deadline_;
  bool has_deadline_ = false;
  std::uint64_t conflicts_at_start_ = 0;
};

}  // namespace eev
