// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

// Generators and independent reference implementations shared by the unit
// and acceptance tests.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "eev/constraint_system.hpp"
#include "eev/model.hpp"

namespace eev::testing {

using Rng = std::mt19937_64;

inline std::int64_t uniform(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}
inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

struct ConvSpec {
  std::int32_t channels = 2;
  ConvGeometry geometry;
};

struct NetSpec {
  Shape3 input{3, 3, 1};
  double quant_step = 0.25;
  std::optional<ConvSpec> conv;           // first hidden layer
  std::vector<std::int32_t> dense_hidden;  // further hidden layers
  std::int32_t classes = 3;
  double zero_weight_prob = 0.2;
  /// BN parameters keep every pre-activation at least a half step away
  /// from its threshold, so floating-point references cannot disagree.
  bool tie_free = true;
  double negative_gamma_prob = 0.3;
  double zero_gamma_prob = 0.0;
};

BnnModel random_model(Rng& rng, const NetSpec& spec);

/// 2 or 3 layers including one convolution, on a tiny input.
NetSpec random_tiny_spec(Rng& rng);

/// Pixels in [0, 1]; with probability `on_grid` a pixel sits exactly on a
/// quantization level.
std::vector<double> random_image(Rng& rng, std::int64_t size, double quant_step, double on_grid = 0.3);

/// Total number of integer steps the perturbation box allows.
std::int64_t box_steps(const BnnModel& model, const std::vector<double>& x0, double eps);

/// Random system of clauses and reified cardinality constraints.
ConstraintSystem random_system(Rng& rng, std::int32_t max_vars, std::int32_t max_constraints);

/// Exhaustive satisfiability check; returns a model when satisfiable.
std::optional<std::vector<LBool>> enumerate_sat(const ConstraintSystem& sys);
/// Number of satisfying assignments of all variables.
std::uint64_t count_models(const ConstraintSystem& sys);

/// Unit propagation to fixpoint over `clauses`, extending `assignment`.
/// Returns false when some clause is falsified.
bool unit_propagate(const std::vector<std::vector<Lit>>& clauses, std::vector<LBool>& assignment);

/// Long-double forward pass computed from the raw weights and BN
/// parameters, independent of the connectivity and threshold code.
struct ReferenceResult {
  std::vector<long double> logits;
};
ReferenceResult reference_infer(const BnnModel& model, const std::vector<std::int32_t>& input);
bool reference_misclassified(const ReferenceResult& r, std::int32_t label);
/// Strict winner or -1.
std::int32_t reference_winner(const ReferenceResult& r);

}  // namespace eev::testing
