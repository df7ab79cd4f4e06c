// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eev/lit.hpp"

namespace eev {

/// Reified cardinality constraint in canonical form:
///   target  <=>  (sum of operands) <= bound
/// Operands form a multiset; a repeated literal counts once per occurrence.
struct CardConstraint {
  Lit target;
  std::vector<Lit> operands;
  std::int64_t bound = 0;

  friend bool operator==(const CardConstraint&, const CardConstraint&) = default;
};

/// Builds the canonical form of `target <=> (sum of operands) >= bound`.
CardConstraint card_at_least(Lit target, std::span<const Lit> operands,
                             std::int64_t bound);

/// Whether `target <=> (count <= bound)` holds under a full assignment
/// (indexed by variable).
bool card_holds(const CardConstraint& c, std::span<const LBool> assignment);
bool clause_holds(std::span<const Lit> clause, std::span<const LBool> assignment);

inline LBool lit_value(Lit l, std::span<const LBool> assignment) {
  if (l.is_constant()) return to_lbool(l.constant_value());
  return assignment[static_cast<std::size_t>(l.var())] ^ l.negated();
}

/// An integer-valued input pixel: value = base + number of true bits.
/// Bits are a thermometer block: bit i true implies bit j true for j < i.
struct InputBlock {
  std::int32_t base = 0;
  std::vector<Lit> bits;

  friend bool operator==(const InputBlock&, const InputBlock&) = default;
};

/// Variables, disjunctive clauses and reified cardinality constraints, plus
/// the maps needed to interpret a model of the system.
struct ConstraintSystem {
  std::int32_t num_vars = 0;
  std::vector<std::vector<Lit>> clauses;
  std::vector<CardConstraint> cards;
  /// One block per input pixel, in the model's flattened HWC order.
  std::vector<InputBlock> inputs;
  /// activations[model][hidden layer][unit]; constant literals for folded units.
  std::vector<std::vector<std::vector<Lit>>> activations;
  /// Literals of the top-level attack-goal disjunction after folding.
  std::vector<Lit> goal;

  Lit new_var() { return Lit::make(num_vars++); }

  friend bool operator==(const ConstraintSystem&, const ConstraintSystem&) = default;
};

/// Checks every clause and cardinality constraint under a full assignment.
bool system_holds(const ConstraintSystem& sys, std::span<const LBool> assignment);

/// Reads the integer value of every input block under an assignment.
std::vector<std::int32_t> decode_inputs(const ConstraintSystem& sys,
                                        std::span<const LBool> assignment);

}  // namespace eev
