// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "eev/constraint_system.hpp"
#include "eev/model.hpp"

namespace eev {

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A single-bit term: value 1 when `l` is true. Constants become bases.
InputBlock term_of(Lit l);

/// Encodes `rule(sum_j weights[j] * value(inputs[input_index[j]]))` as a
/// literal. Negative weights substitute negated bits; weights of magnitude
/// above one repeat the operand. Vacuous or impossible thresholds fold to a
/// constant. When `target` is a variable the constraint is tied to it
/// (a folded constant becomes a unit clause) and `target` is returned.
Lit encode_linear_rule(std::span<const std::int32_t> input_index,
                       std::span<const std::int32_t> weights,
                       std::span<const InputBlock> inputs, const UnitRule& rule,
                       ConstraintSystem& sys, Lit target = Lit());

/// Encodes every unit of hidden layer `layer` over the given inputs.
/// With `targets` empty, fresh variables are allocated for non-constant units.
std::vector<Lit> encode_layer(const BnnModel& model, std::size_t layer,
                              std::span<const InputBlock> inputs, ConstraintSystem& sys,
                              std::span<const Lit> targets = {});

struct PixelInterval {
  std::int32_t lo = 0;
  std::int32_t hi = 0;
};

/// Quantized values reachable from x0 under an l-infinity perturbation of eps:
/// [round(max(0, x0-eps)/step), round(min(1, x0+eps)/step)], computed exactly.
PixelInterval pixel_interval(double x0, double eps, double step, std::int32_t levels);

/// Allocates a thermometer block per pixel (with its ordering clauses) and
/// stores the blocks in `sys.inputs`.
void encode_input_space(std::span<const double> x0, double eps, double step,
                        std::int32_t levels, ConstraintSystem& sys);

/// r <=> class `hi` strictly outscores class `lo`, over the last hidden layer
/// (or the input blocks for a single-layer model).
Lit encode_margin(const BnnModel& model, std::span<const InputBlock> last_inputs,
                  std::int32_t hi, std::int32_t lo, ConstraintSystem& sys);

/// Untargeted goal: OR over i != label of (score_i > score_label).
/// Adds the goal clause (unless trivially true) and records it in sys.goal.
std::vector<Lit> encode_attack_goal(const BnnModel& model,
                                    std::span<const InputBlock> last_inputs,
                                    std::int32_t label, ConstraintSystem& sys);

/// Ensemble-with-reject goal: some class i != label strictly outscores every
/// other class in every model. f_i is defined by a full Tseitin biconditional.
std::vector<Lit> encode_ensemble_goal(std::span<const BnnModel* const> models,
                                      std::span<const std::vector<InputBlock>> last_inputs,
                                      std::int32_t label, ConstraintSystem& sys);

/// Network constraints that do not depend on the query: variables
/// [0, first_layer_units) stand for the first layer's outputs and the
/// remaining hidden layers are encoded over them.
struct NetworkTemplate {
  std::uint64_t model_hash = 0;
  std::int32_t num_vars = 0;
  std::int32_t first_layer_units = 0;
  std::vector<std::vector<Lit>> clauses;
  std::vector<CardConstraint> cards;
  /// Hidden-layer literals, layer 0 first.
  std::vector<std::vector<Lit>> activations;
};

NetworkTemplate build_network_template(const BnnModel& model);

struct EncoderCacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

/// Lowers robustness queries into constraint systems, caching the network
/// part per model content hash. Safe to share between threads.
class Encoder {
 public:
  std::shared_ptr<const NetworkTemplate> network(const BnnModel& model);

  ConstraintSystem encode_query(const BnnModel& model, std::span<const double> x0, double eps,
                                std::int32_t label);
  ConstraintSystem encode_ensemble_query(std::span<const BnnModel* const> models,
                                         std::span<const double> x0, double eps,
                                         std::int32_t label);

  EncoderCacheStats cache_stats() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<const NetworkTemplate>> cache_;
  EncoderCacheStats stats_;
};

}  // namespace eev
