// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eev/constraint_system.hpp"

namespace eev {

/// Pure CNF. Variables [0, original_vars) keep their meaning from the source
/// system; aux_origin[v - original_vars] names the cardinality constraint
/// that introduced auxiliary variable v.
struct CnfSystem {
  std::int32_t num_vars = 0;
  std::int32_t original_vars = 0;
  std::vector<std::vector<Lit>> clauses;
  std::vector<std::int32_t> aux_origin;

  Lit new_aux(std::int32_t origin) {
    aux_origin.push_back(origin);
    return Lit::make(num_vars++);
  }
};

/// Removes constants from a cardinality constraint: true operands lower the
/// bound, false operands are dropped. The target is kept as given.
CardConstraint fold_card_constants(const CardConstraint& c);

/// Appends the reified sequential-counter encoding of `c` to `out`. Every
/// register is fully defined (both implication directions), so projecting
/// the solutions onto the original variables yields exactly the semantic
/// truth table. Returns the number of auxiliary variables introduced, which
/// never exceeds n * (bound + 1) for n operands.
std::int64_t seqcnt_encode(const CardConstraint& c, CnfSystem& out, std::int32_t origin = -1);

/// Replaces every cardinality constraint by its sequential-counter encoding;
/// clauses pass through with constants folded.
CnfSystem cnf_lower(const ConstraintSystem& sys);

/// sum coef_i * lit_i >= rhs with positive coefficients.
struct PbConstraint {
  struct Term {
    std::int64_t coef;
    Lit lit;
    friend bool operator==(const Term&, const Term&) = default;
  };
  std::vector<Term> terms;
  std::int64_t rhs = 0;

  friend bool operator==(const PbConstraint&, const PbConstraint&) = default;
};

bool pb_holds(const PbConstraint& c, std::span<const LBool> assignment);

/// y <=> (sum of operands) >= bound as the two linear constraints
///   sum l + bound * ~y >= bound
///   (n - bound + 1) * y + sum ~l >= n - bound + 1
/// with n counting operand multiplicity. A family that is vacuous for the
/// given bound is returned with no terms and rhs 0.
std::array<PbConstraint, 2> pb_export_at_least(Lit y, std::span<const Lit> operands,
                                               std::int64_t bound);
/// Same, for a canonical (at-most) constraint; constants are folded first.
std::array<PbConstraint, 2> pb_export(const CardConstraint& c);

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::int64_t line);
  std::int64_t line() const { return line_; }

 private:
  std::int64_t line_;
};

/// Native line format:
///   p cnf+card VARS
///   c l1 ... lk 0           clause
///   k y <= b l1 ... ln 0    y <=> (l1 + ... + ln) <= b
///   i base b1 ... bk 0      input block (in pixel order)
///   a model layer l1 ... 0  activation literals of one hidden layer
///   g l1 ... lk 0           goal literals
/// Literals are signed 1-based integers or the constants T and F. Lines
/// starting with '#' are comments.
void write_native(const ConstraintSystem& sys, std::ostream& out);
ConstraintSystem read_native(std::istream& in);
void write_native(const ConstraintSystem& sys, const std::filesystem::path& path);
ConstraintSystem read_native(const std::filesystem::path& path);

void write_dimacs(const CnfSystem& cnf, std::ostream& out);
void write_dimacs(const CnfSystem& cnf, const std::filesystem::path& path);
CnfSystem read_dimacs(std::istream& in);

/// OPB (PB competition format): clauses as sum >= 1, cardinality
/// constraints as their two linear constraints.
void write_opb(const ConstraintSystem& sys, std::ostream& out);
void write_opb(const ConstraintSystem& sys, const std::filesystem::path& path);
/// Minimal OPB reader for linear constraints written by write_opb.
std::vector<PbConstraint> read_opb(std::istream& in, std::int32_t* num_vars = nullptr);

}  // namespace eev
