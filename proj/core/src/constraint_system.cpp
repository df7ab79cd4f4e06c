// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/constraint_system.hpp"

namespace eev {

CardConstraint card_at_least(Lit target, std::span<const Lit> operands,
                             std::int64_t bound) {
  CardConstraint c;
  c.target = target;
  c.operands.reserve(operands.size());
  for (Lit l : operands) c.operands.push_back(~l);
  c.bound = static_cast<std::int64_t>(operands.size()) - bound;
  return c;
}

bool card_holds(const CardConstraint& c, std::span<const LBool> assignment) {
  std::int64_t count = 0;
  for (Lit l : c.operands)
    if (lit_value(l, assignment) == LBool::True) ++count;
  bool rhs = count <= c.bound;
  return (lit_value(c.target, assignment) == LBool::True) == rhs;
}

bool clause_holds(std::span<const Lit> clause, std::span<const LBool> assignment) {
  for (Lit l : clause)
    if (lit_value(l, assignment) == LBool::True) return true;
  return false;
}

bool system_holds(const ConstraintSystem& sys, std::span<const LBool> assignment) {
  for (const auto& cl : sys.clauses)
    if (!clause_holds(cl, assignment)) return false;
  for (const auto& c : sys.cards)
    if (!card_holds(c, assignment)) return false;
  return true;
}

std::vector<std::int32_t> decode_inputs(const ConstraintSystem& sys,
                                        std::span<const LBool> assignment) {
  std::vector<std::int32_t> values;
  values.reserve(sys.inputs.size());
  for (const auto& block : sys.inputs) {
    std::int32_t v = block.base;
    for (Lit t : block.bits)
      if (lit_value(t, assignment) == LBool::True) ++v;
    values.push_back(v);
  }
  return values;
}

}  // namespace eev
