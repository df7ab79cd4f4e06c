// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <compare>
#include <cstdlib>

namespace eev {

using Var = std::int32_t;

/// A Boolean literal: a variable or its negation, or one of the constants
/// TRUE / FALSE. Variables are 0-based; code = 2 * var + negated.
class Lit {
 public:
  constexpr Lit() = default;

  static constexpr Lit make(Var v, bool negated = false) {
    return Lit(2 * v + (negated ? 1 : 0));
  }
  static constexpr Lit constant(bool value) {
    return Lit(value ? kTrueCode : kFalseCode);
  }
  static constexpr Lit True() { return constant(true); }
  static constexpr Lit False() { return constant(false); }
  static constexpr Lit from_code(std::int32_t code) { return Lit(code); }

  /// DIMACS-style signed, 1-based integer.
  static constexpr Lit from_dimacs(int value) {
    return make(std::abs(value) - 1, value < 0);
  }
  constexpr int to_dimacs() const { return negated() ? -(var() + 1) : var() + 1; }

  constexpr bool is_undef() const { return code_ == kUndefCode; }
  constexpr bool is_constant() const {
    return code_ == kTrueCode || code_ == kFalseCode;
  }
  constexpr bool is_var() const { return code_ >= 0; }
  constexpr bool constant_value() const { return code_ == kTrueCode; }

  constexpr Var var() const { return code_ >> 1; }
  constexpr bool negated() const { return (code_ & 1) != 0; }
  /// Dense index for per-literal tables; only valid for variable literals.
  constexpr std::uint32_t index() const { return static_cast<std::uint32_t>(code_); }
  constexpr std::int32_t code() const { return code_; }

  constexpr Lit operator~() const {
    if (code_ >= 0) return Lit(code_ ^ 1);
    if (code_ == kTrueCode) return Lit(kFalseCode);
    if (code_ == kFalseCode) return Lit(kTrueCode);
    return *this;
  }
  /// Literal XOR a sign: flips when `flip` is true.
  constexpr Lit operator^(bool flip) const { return flip ? ~*this : *this; }

  friend constexpr auto operator<=>(Lit, Lit) = default;

 private:
  static constexpr std::int32_t kUndefCode = -1;
  static constexpr std::int32_t kTrueCode = -2;
  static constexpr std::int32_t kFalseCode = -3;

  constexpr explicit Lit(std::int32_t code) : code_(code) {}

  std::int32_t code_ = kUndefCode;
};

enum class LBool : std::uint8_t { True, False, Undef };

constexpr LBool to_lbool(bool b) { return b ? LBool::True : LBool::False; }
constexpr LBool operator^(LBool v, bool flip) {
  if (v == LBool::Undef || !flip) return v;
  return v == LBool::True ? LBool::False : LBool::True;
}

}  // namespace eev
