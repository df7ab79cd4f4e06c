// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exact.hpp"

namespace eev {

InputBlock term_of(Lit l) {
  if (l.is_constant()) return {l.constant_value() ? 1 : 0, {}};
  return {0, {l}};
}

Lit encode_linear_rule(std::span<const std::int32_t> input_index,
                       std::span<const std::int32_t> weights,
                       std::span<const InputBlock> inputs, const UnitRule& rule,
                       ConstraintSystem& sys, Lit target) {
  auto finish_constant = [&](bool value) {
    if (target.is_undef()) return Lit::constant(value);
    sys.clauses.push_back({value ? target : ~target});
    return target;
  };
  if (rule.kind == UnitRule::Kind::Constant) return finish_constant(rule.value);

  // sum_j w_j * (base_j + sum of bits_j) = offset + (count of true operands)
  std::vector<Lit> ops;
  std::int64_t offset = 0;
  for (std::size_t e = 0; e < input_index.size(); ++e) {
    const InputBlock& in = inputs[static_cast<std::size_t>(input_index[e])];
    const std::int32_t w = weights[e];
    offset += std::int64_t{w} * in.base;
    if (w > 0) {
      for (std::int32_t r = 0; r < w; ++r) ops.insert(ops.end(), in.bits.begin(), in.bits.end());
    } else if (w < 0) {
      // -x = ~x - 1 for each bit
      offset += std::int64_t{w} * static_cast<std::int64_t>(in.bits.size());
      for (std::int32_t r = 0; r < -w; ++r)
        for (Lit b : in.bits) ops.push_back(~b);
    }
  }
  const auto n = static_cast<std::int64_t>(ops.size());
  CardConstraint c;
  if (rule.kind == UnitRule::Kind::AtLeast) {
    std::int64_t t = rule.bound - offset;  // count >= t
    if (t <= 0) return finish_constant(true);
    if (t > n) return finish_constant(false);
    c.target = target.is_undef() ? sys.new_var() : target;
    c.operands.reserve(ops.size());
    for (Lit l : ops) c.operands.push_back(~l);
    c.bound = n - t;
  } else {
    std::int64_t t = rule.bound - offset;  // count <= t
    if (t >= n) return finish_constant(true);
    if (t < 0) return finish_constant(false);
    c.target = target.is_undef() ? sys.new_var() : target;
    c.operands = std::move(ops);
    c.bound = t;
  }
  Lit out = c.target;
  sys.cards.push_back(std::move(c));
  return out;
}

std::vector<Lit> encode_layer(const BnnModel& model, std::size_t layer,
                              std::span<const InputBlock> inputs, ConstraintSystem& sys,
                              std::span<const Lit> targets) {
  const BnnLayer& l = model.layers()[layer];
  if (l.is_output) throw EncodeError("encode_layer: layer " + std::to_string(layer) + " is the output layer");
  if (static_cast<std::int64_t>(inputs.size()) != l.in_shape.size())
    throw EncodeError("encode_layer: layer " + std::to_string(layer) + " expects " +
                      std::to_string(l.in_shape.size()) + " inputs");
  const Connectivity& conn = model.connectivity(layer);
  auto rules = model.unit_rules(layer);
  if (!targets.empty() && targets.size() != conn.rows())
    throw EncodeError("encode_layer: target count mismatch");
  std::vector<Lit> out;
  out.reserve(conn.rows());
  std::vector<std::int32_t> weights;
  for (std::size_t u = 0; u < conn.rows(); ++u) {
    auto b = static_cast<std::size_t>(conn.row_start[u]);
    auto e = static_cast<std::size_t>(conn.row_start[u + 1]);
    std::span<const std::int32_t> idx(conn.input.data() + b, e - b);
    weights.assign(conn.weight.begin() + static_cast<std::ptrdiff_t>(b),
                   conn.weight.begin() + static_cast<std::ptrdiff_t>(e));
    Lit target = targets.empty() ? Lit() : targets[u];
    out.push_back(encode_linear_rule(idx, weights, inputs, rules[u], sys, target));
  }
  return out;
}

PixelInterval pixel_interval(double x0, double eps, double step, std::int32_t levels) {
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw EncodeError("pixel value outside [0, 1]");
  if (!(eps >= 0.0)) throw EncodeError("eps must be >= 0");
  using exact::Rational;
  Rational x = exact::from_double(x0);
  Rational e = exact::from_double(eps);
  Rational s = exact::from_double(step);
  Rational lo = x - e;
  Rational hi = x + e;
  if (lo < 0) lo = 0;
  if (hi > 1) hi = 1;
  auto a = static_cast<std::int32_t>(exact::to_int64(exact::round_half_away(lo / s)));
  auto b = static_cast<std::int32_t>(exact::to_int64(exact::round_half_away(hi / s)));
  return {std::clamp(a, 0, levels), std::clamp(b, 0, levels)};
}

void encode_input_space(std::span<const double> x0, double eps, double step,
                        std::int32_t levels, ConstraintSystem& sys) {
  sys.inputs.clear();
  sys.inputs.reserve(x0.size());
  for (double x : x0) {
    PixelInterval iv = pixel_interval(x, eps, step, levels);
    InputBlock block;
    block.base = iv.lo;
    for (std::int32_t i = iv.lo; i < iv.hi; ++i) block.bits.push_back(sys.new_var());
    // Thermometer order: t_i or ~t_j for i < j.
    for (std::size_t i = 0; i < block.bits.size(); ++i)
      for (std::size_t j = i + 1; j < block.bits.size(); ++j)
        sys.clauses.push_back({block.bits[i], ~block.bits[j]});
    sys.inputs.push_back(std::move(block));
  }
}

Lit encode_margin(const BnnModel& model, std::span<const InputBlock> last_inputs,
                  std::int32_t hi, std::int32_t lo, ConstraintSystem& sys) {
  const std::size_t out_layer = model.layers().size() - 1;
  const Connectivity& conn = model.connectivity(out_layer);
  if (static_cast<std::int64_t>(last_inputs.size()) != model.layers()[out_layer].in_shape.size())
    throw EncodeError("encode_margin: input count mismatch");
  // Merge the two sorted rows into hi - lo with weights in {-2..2}.
  std::vector<std::int32_t> idx, w;
  auto a = static_cast<std::size_t>(conn.row_start[static_cast<std::size_t>(hi)]);
  auto ae = static_cast<std::size_t>(conn.row_start[static_cast<std::size_t>(hi) + 1]);
  auto b = static_cast<std::size_t>(conn.row_start[static_cast<std::size_t>(lo)]);
  auto be = static_cast<std::size_t>(conn.row_start[static_cast<std::size_t>(lo) + 1]);
  while (a < ae || b < be) {
    std::int32_t ia = a < ae ? conn.input[a] : INT32_MAX;
    std::int32_t ib = b < be ? conn.input[b] : INT32_MAX;
    std::int32_t j = std::min(ia, ib);
    std::int32_t d = 0;
    if (ia == j) d += conn.weight[a++];
    if (ib == j) d -= conn.weight[b++];
    if (d != 0) {
      idx.push_back(j);
      w.push_back(d);
    }
  }
  return encode_linear_rule(idx, w, last_inputs, model.margin_rule(hi, lo), sys);
}

std::vector<Lit> encode_attack_goal(const BnnModel& model,
                                    std::span<const InputBlock> last_inputs,
                                    std::int32_t label, ConstraintSystem& sys) {
  if (label < 0 || label >= model.num_classes()) throw EncodeError("label out of range");
  std::vector<Lit> goal;
  bool trivially_true = false;
  for (std::int32_t i = 0; i < model.num_classes(); ++i) {
    if (i == label) continue;
    Lit r = encode_margin(model, last_inputs, i, label, sys);
    if (r.is_constant()) {
      trivially_true |= r.constant_value();
      continue;
    }
    goal.push_back(r);
  }
  if (trivially_true) goal = {Lit::True()};
  else sys.clauses.push_back(goal);
  sys.goal = goal;
  return goal;
}

std::vector<Lit> encode_ensemble_goal(std::span<const BnnModel* const> models,
                                      std::span<const std::vector<InputBlock>> last_inputs,
                                      std::int32_t label, ConstraintSystem& sys) {
  if (models.empty()) throw EncodeError("ensemble: no models");
  const std::int32_t classes = models[0]->num_classes();
  for (const BnnModel* m : models)
    if (m->num_classes() != classes) throw EncodeError("ensemble: class count mismatch");
  if (label < 0 || label >= classes) throw EncodeError("label out of range");

  std::vector<Lit> goal;
  bool trivially_true = false;
  for (std::int32_t i = 0; i < classes; ++i) {
    if (i == label) continue;
    std::vector<Lit> conj;
    bool dead = false;
    for (std::size_t m = 0; m < models.size() && !dead; ++m) {
      for (std::int32_t j = 0; j < classes && !dead; ++j) {
        if (j == i) continue;
        Lit r = encode_margin(*models[m], last_inputs[m], i, j, sys);
        if (r.is_constant()) dead = !r.constant_value();
        else conj.push_back(r);
      }
    }
    if (dead) continue;
    if (conj.empty()) {
      trivially_true = true;
      continue;
    }
    Lit f = sys.new_var();
    std::vector<Lit> back{f};
    for (Lit r : conj) {
      sys.clauses.push_back({~f, r});
      back.push_back(~r);
    }
    sys.clauses.push_back(std::move(back));
    goal.push_back(f);
  }
  if (trivially_true) goal = {Lit::True()};
  else sys.clauses.push_back(goal);
  sys.goal = goal;
  return goal;
}

// --- templates and the query encoder -------------------------------------------

NetworkTemplate build_network_template(const BnnModel& model) {
  NetworkTemplate t;
  t.model_hash = model.content_hash();
  auto layers = model.layers();
  if (layers.size() == 1) return t;
  ConstraintSystem sys;
  std::vector<Lit> current;
  for (std::int64_t u = 0; u < layers[0].out_shape.size(); ++u) current.push_back(sys.new_var());
  t.first_layer_units = sys.num_vars;
  t.activations.push_back(current);
  for (std::size_t li = 1; li + 1 < layers.size(); ++li) {
    std::vector<InputBlock> terms;
    terms.reserve(current.size());
    for (Lit l : current) terms.push_back(term_of(l));
    current = encode_layer(model, li, terms, sys);
    t.activations.push_back(current);
  }
  t.num_vars = sys.num_vars;
  t.clauses = std::move(sys.clauses);
  t.cards = std::move(sys.cards);
  return t;
}

namespace {

Lit shift(Lit l, std::int32_t offset) {
  return l.is_var() ? Lit::make(l.var() + offset, l.negated()) : l;
}

// Appends a template at the current variable offset; returns its shifted
// hidden-layer literals.
std::vector<std::vector<Lit>> append_template(const NetworkTemplate& t, ConstraintSystem& sys) {
  const std::int32_t offset = sys.num_vars;
  sys.num_vars += t.num_vars;
  for (const auto& cl : t.clauses) {
    std::vector<Lit> c;
    c.reserve(cl.size());
    for (Lit l : cl) c.push_back(shift(l, offset));
    sys.clauses.push_back(std::move(c));
  }
  for (const auto& card : t.cards) {
    CardConstraint c;
    c.target = shift(card.target, offset);
    c.bound = card.bound;
    c.operands.reserve(card.operands.size());
    for (Lit l : card.operands) c.operands.push_back(shift(l, offset));
    sys.cards.push_back(std::move(c));
  }
  std::vector<std::vector<Lit>> acts;
  for (const auto& layer : t.activations) {
    std::vector<Lit> a;
    a.reserve(layer.size());
    for (Lit l : layer) a.push_back(shift(l, offset));
    acts.push_back(std::move(a));
  }
  return acts;
}

std::vector<InputBlock> terms_of(std::span<const Lit> lits) {
  std::vector<InputBlock> out;
  out.reserve(lits.size());
  for (Lit l : lits) out.push_back(term_of(l));
  return out;
}

void check_input(const BnnModel& model, std::span<const double> x0) {
  if (static_cast<std::int64_t>(x0.size()) != model.input_size())
    throw EncodeError("input has " + std::to_string(x0.size()) + " values, model expects " +
                      std::to_string(model.input_size()));
}

}  // namespace

std::shared_ptr<const NetworkTemplate> Encoder::network(const BnnModel& model) {
  const std::uint64_t key = model.content_hash();
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++stats_.hits;
      return it->second;
    }
  }
  auto built = std::make_shared<const NetworkTemplate>(build_network_template(model));
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.emplace(key, built);
  if (inserted) ++stats_.misses;
  else ++stats_.hits;
  return it->second;
}

EncoderCacheStats Encoder::cache_stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

ConstraintSystem Encoder::encode_query(const BnnModel& model, std::span<const double> x0,
                                       double eps, std::int32_t label) {
  check_input(model, x0);
  ConstraintSystem sys;
  auto tpl = network(model);
  auto acts = append_template(*tpl, sys);
  encode_input_space(x0, eps, model.quant_step(), model.input_levels(), sys);
  if (model.layers().size() == 1) {
    encode_attack_goal(model, sys.inputs, label, sys);
  } else {
    encode_layer(model, 0, sys.inputs, sys, acts[0]);
    auto last = terms_of(acts.back());
    encode_attack_goal(model, last, label, sys);
  }
  sys.activations.push_back(std::move(acts));
  return sys;
}

ConstraintSystem Encoder::encode_ensemble_query(std::span<const BnnModel* const> models,
                                                std::span<const double> x0, double eps,
                                                std::int32_t label) {
  if (models.empty()) throw EncodeError("ensemble: no models");
  for (const BnnModel* m : models) {
    if (!(m->input_shape() == models[0]->input_shape()) ||
        m->quant_step() != models[0]->quant_step())
      throw EncodeError("ensemble: models disagree on input shape or quant_step");
    check_input(*m, x0);
  }
  ConstraintSystem sys;
  std::vector<std::vector<std::vector<Lit>>> acts;
  for (const BnnModel* m : models) acts.push_back(append_template(*network(*m), sys));
  encode_input_space(x0, eps, models[0]->quant_step(), models[0]->input_levels(), sys);
  std::vector<std::vector<InputBlock>> last;
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m]->layers().size() == 1) {
      last.push_back(sys.inputs);
    } else {
      encode_layer(*models[m], 0, sys.inputs, sys, acts[m][0]);
      last.push_back(terms_of(acts[m].back()));
    }
  }
  encode_ensemble_goal(models, last, label, sys);
  sys.activations = std::move(acts);
  return sys;
}

}  // namespace eev
