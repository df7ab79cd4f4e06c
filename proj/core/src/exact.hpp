// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

// Exact rational helpers. Every double is a dyadic rational, so thresholds
// derived from stored floats can be evaluated without rounding.

#pragma once

#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

namespace eev::exact {

using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

inline Rational from_double(double x) { return Rational(x); }

inline Integer floor(const Rational& r) {
  Integer q = numerator(r) / denominator(r);  // truncates toward zero
  if (r < 0 && q * denominator(r) != numerator(r)) q -= 1;
  return q;
}

inline Integer ceil(const Rational& r) {
  Integer q = numerator(r) / denominator(r);
  if (r > 0 && q * denominator(r) != numerator(r)) q += 1;
  return q;
}

inline Integer round_half_away(const Rational& r) {
  Rational half(1, 2);
  return r >= 0 ? floor(r + half) : ceil(r - half);
}

/// Saturating conversion; callers only need values well inside +-2^50.
inline std::int64_t to_int64(const Integer& v) {
  constexpr std::int64_t kLimit = std::int64_t{1} << 50;
  if (v > kLimit) return kLimit;
  if (v < -kLimit) return -kLimit;
  return v.convert_to<std::int64_t>();
}

}  // namespace eev::exact
