// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <cmath>
#include <stdexcept>

#include "eev/encoder.hpp"

namespace eev::testing {

namespace {

std::vector<std::int8_t> random_weights(Rng& rng, std::size_t n, double zero_prob) {
  std::vector<std::int8_t> w(n);
  for (auto& x : w) x = coin(rng, zero_prob) ? 0 : (coin(rng) ? 1 : -1);
  return w;
}

double random_gamma(Rng& rng, const NetSpec& spec) {
  if (coin(rng, spec.zero_gamma_prob)) return 0.0;
  static constexpr double kMagnitudes[] = {0.5, 1.0, 2.0};
  double g = spec.tie_free ? kMagnitudes[uniform(rng, 0, 2)] : uniform_real(rng, 0.05, 3.0);
  return coin(rng, spec.negative_gamma_prob) ? -g : g;
}

// Hidden BN over integer sums S with input scale `scale`.
BatchNorm hidden_bn(Rng& rng, const NetSpec& spec, std::int32_t units, std::int64_t fan_in,
                    double scale) {
  BatchNorm bn;
  const auto reach = std::max<std::int64_t>(1, fan_in / 2);
  for (std::int32_t u = 0; u < units; ++u) {
    bn.gamma.push_back(random_gamma(rng, spec));
    if (spec.tie_free) {
      bn.var.push_back(1.0);
      bn.beta.push_back(0.0);
      bn.mean.push_back(scale * (static_cast<double>(uniform(rng, -reach, reach)) + 0.5));
    } else {
      bn.var.push_back(uniform_real(rng, 0.1, 4.0));
      bn.beta.push_back(uniform_real(rng, -1.0, 1.0));
      bn.mean.push_back(scale * uniform_real(rng, -static_cast<double>(reach), static_cast<double>(reach)));
    }
  }
  return bn;
}

BatchNorm output_bn(Rng& rng, const NetSpec& spec, std::int32_t classes, std::int64_t fan_in,
                    double scale) {
  BatchNorm bn;
  NetSpec no_zero = spec;
  no_zero.zero_gamma_prob = 0;
  bn.gamma.push_back(random_gamma(rng, no_zero));
  bn.var.push_back(spec.tie_free ? 1.0 : uniform_real(rng, 0.1, 4.0));
  const auto reach = std::max<std::int64_t>(1, fan_in / 3);
  for (std::int32_t c = 0; c < classes; ++c) {
    if (spec.tie_free) {
      // Distinct sixteenths keep every pairwise margin off the integer grid.
      bn.beta.push_back(0.0);
      bn.mean.push_back(scale * (static_cast<double>(uniform(rng, -reach, reach)) + (c + 1) / 16.0));
    } else {
      bn.beta.push_back(uniform_real(rng, -1.0, 1.0));
      bn.mean.push_back(scale * uniform_real(rng, -static_cast<double>(reach), static_cast<double>(reach)));
    }
  }
  return bn;
}

}  // namespace

BnnModel random_model(Rng& rng, const NetSpec& spec) {
  if (spec.tie_free && spec.classes > 15) throw std::invalid_argument("tie-free models support <= 15 classes");
  std::vector<BnnLayer> layers;
  Shape3 shape = spec.input;
  double scale = spec.quant_step;
  // Fan-in of the average unit, used to center BN means.
  auto positive_fan = [&](std::int64_t fan) { return std::max<std::int64_t>(fan, 1); };
  if (spec.conv) {
    const auto& g = spec.conv->geometry;
    const std::int64_t fan = std::int64_t{g.kernel_h} * g.kernel_w * shape.c;
    const std::size_t n = static_cast<std::size_t>(spec.conv->channels) * static_cast<std::size_t>(fan);
    layers.push_back(BnnLayer::convolution(
        spec.conv->channels, g, random_weights(rng, n, spec.zero_weight_prob),
        hidden_bn(rng, spec, spec.conv->channels, positive_fan(fan) * (scale == 1.0 ? 1 : 2), scale)));
    shape = {(shape.h + 2 * g.pad_h - g.kernel_h) / g.stride_h + 1,
             (shape.w + 2 * g.pad_w - g.kernel_w) / g.stride_w + 1, spec.conv->channels};
    scale = 1.0;
  }
  for (std::int32_t units : spec.dense_hidden) {
    const std::int64_t fan = shape.size();
    layers.push_back(BnnLayer::dense(
        units, random_weights(rng, static_cast<std::size_t>(units * fan), spec.zero_weight_prob),
        hidden_bn(rng, spec, units, positive_fan(fan) * (scale == 1.0 ? 1 : 2), scale)));
    shape = {1, 1, units};
    scale = 1.0;
  }
  const std::int64_t fan = shape.size();
  layers.push_back(BnnLayer::dense(
      spec.classes,
      random_weights(rng, static_cast<std::size_t>(spec.classes * fan), spec.zero_weight_prob),
      output_bn(rng, spec, spec.classes, positive_fan(fan), scale), true));
  return BnnModel(spec.input, spec.quant_step, std::move(layers));
}

NetSpec random_tiny_spec(Rng& rng) {
  NetSpec s;
  s.input = {static_cast<std::int32_t>(uniform(rng, 2, 3)), static_cast<std::int32_t>(uniform(rng, 2, 3)),
             static_cast<std::int32_t>(uniform(rng, 1, 2))};
  s.quant_step = coin(rng) ? 0.25 : 0.125;
  ConvSpec conv;
  conv.channels = static_cast<std::int32_t>(uniform(rng, 1, 3));
  conv.geometry.kernel_h = static_cast<std::int32_t>(uniform(rng, 1, 2));
  conv.geometry.kernel_w = static_cast<std::int32_t>(uniform(rng, 1, 2));
  conv.geometry.stride_h = conv.geometry.stride_w = static_cast<std::int32_t>(uniform(rng, 1, 2));
  conv.geometry.pad_h = conv.geometry.pad_w = static_cast<std::int32_t>(uniform(rng, 0, 1));
  s.conv = conv;
  if (coin(rng)) s.dense_hidden.push_back(static_cast<std::int32_t>(uniform(rng, 2, 5)));
  s.classes = static_cast<std::int32_t>(uniform(rng, 2, 4));
  s.zero_weight_prob = uniform_real(rng, 0.0, 0.4);
  s.zero_gamma_prob = coin(rng, 0.2) ? 0.1 : 0.0;
  return s;
}

std::vector<double> random_image(Rng& rng, std::int64_t size, double quant_step, double on_grid) {
  const auto levels = static_cast<std::int64_t>(std::llround(1.0 / quant_step));
  std::vector<double> x(static_cast<std::size_t>(size));
  for (auto& v : x)
    v = coin(rng, on_grid) ? static_cast<double>(uniform(rng, 0, levels)) * quant_step
                           : uniform_real(rng, 0.0, 1.0);
  return x;
}

std::int64_t box_steps(const BnnModel& model, const std::vector<double>& x0, double eps) {
  std::int64_t total = 0;
  for (double x : x0) {
    PixelInterval iv = pixel_interval(x, eps, model.quant_step(), model.input_levels());
    total += iv.hi - iv.lo;
  }
  return total;
}

ConstraintSystem random_system(Rng& rng, std::int32_t max_vars, std::int32_t max_constraints) {
  ConstraintSystem sys;
  sys.num_vars = static_cast<std::int32_t>(uniform(rng, 1, max_vars));
  const auto count = uniform(rng, 1, max_constraints);
  auto random_lit = [&] {
    return Lit::make(static_cast<Var>(uniform(rng, 0, sys.num_vars - 1)), coin(rng));
  };
  for (std::int64_t i = 0; i < count; ++i) {
    if (sys.num_vars >= 2 && coin(rng, 0.6)) {
      CardConstraint c;
      const Var target = static_cast<Var>(uniform(rng, 0, sys.num_vars - 1));
      c.target = Lit::make(target, coin(rng));
      const auto n = uniform(rng, 1, std::min<std::int64_t>(sys.num_vars + 2, 10));
      for (std::int64_t j = 0; j < n; ++j) {
        Lit l = random_lit();
        if (l.var() == target) continue;
        c.operands.push_back(l);
      }
      c.bound = uniform(rng, 0, static_cast<std::int64_t>(c.operands.size()));
      sys.cards.push_back(std::move(c));
    } else {
      std::vector<Lit> cl;
      const auto n = uniform(rng, 1, 4);
      for (std::int64_t j = 0; j < n; ++j) cl.push_back(random_lit());
      sys.clauses.push_back(std::move(cl));
    }
  }
  return sys;
}

namespace {

template <typename F>
void for_each_assignment(std::int32_t n, F&& f) {
  if (n > 24) throw std::invalid_argument("enumeration limited to 24 variables");
  std::vector<LBool> a(static_cast<std::size_t>(n));
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    for (std::int32_t v = 0; v < n; ++v) a[static_cast<std::size_t>(v)] = to_lbool((bits >> v) & 1);
    if (!f(a)) return;
  }
}

}  // namespace

std::optional<std::vector<LBool>> enumerate_sat(const ConstraintSystem& sys) {
  std::optional<std::vector<LBool>> found;
  for_each_assignment(sys.num_vars, [&](const std::vector<LBool>& a) {
    if (!system_holds(sys, a)) return true;
    found = a;
    return false;
  });
  return found;
}

std::uint64_t count_models(const ConstraintSystem& sys) {
  std::uint64_t n = 0;
  for_each_assignment(sys.num_vars, [&](const std::vector<LBool>& a) {
    n += system_holds(sys, a) ? 1 : 0;
    return true;
  });
  return n;
}

bool unit_propagate(const std::vector<std::vector<Lit>>& clauses, std::vector<LBool>& assignment) {
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& cl : clauses) {
      Lit unit;
      int open = 0;
      bool sat = false;
      for (Lit l : cl) {
        LBool v = lit_value(l, assignment);
        if (v == LBool::True) {
          sat = true;
          break;
        }
        if (v == LBool::Undef) {
          ++open;
          unit = l;
        }
      }
      if (sat) continue;
      if (open == 0) return false;
      if (open == 1) {
        assignment[static_cast<std::size_t>(unit.var())] = to_lbool(!unit.negated());
        changed = true;
      }
    }
  }
  return true;
}

ReferenceResult reference_infer(const BnnModel& model, const std::vector<std::int32_t>& input) {
  Shape3 shape = model.input_shape();
  std::vector<long double> x(input.size());
  for (std::size_t i = 0; i < input.size(); ++i)
    x[i] = static_cast<long double>(input[i]) * static_cast<long double>(model.quant_step());
  ReferenceResult out;
  for (const BnnLayer& l : model.layers()) {
    std::vector<long double> z;
    Shape3 next;
    if (l.kind == LayerKind::Conv) {
      const auto& g = l.conv;
      next = {(shape.h + 2 * g.pad_h - g.kernel_h) / g.stride_h + 1,
              (shape.w + 2 * g.pad_w - g.kernel_w) / g.stride_w + 1, l.out_units};
      z.assign(static_cast<std::size_t>(next.size()), 0.0L);
      for (int oy = 0; oy < next.h; ++oy)
        for (int ox = 0; ox < next.w; ++ox)
          for (int oc = 0; oc < next.c; ++oc) {
            long double acc = 0;
            for (int ky = 0; ky < g.kernel_h; ++ky)
              for (int kx = 0; kx < g.kernel_w; ++kx)
                for (int ic = 0; ic < shape.c; ++ic) {
                  int iy = oy * g.stride_h - g.pad_h + ky;
                  int ix = ox * g.stride_w - g.pad_w + kx;
                  if (iy < 0 || iy >= shape.h || ix < 0 || ix >= shape.w) continue;
                  int w = l.weight_sign[static_cast<std::size_t>(((oc * g.kernel_h + ky) * g.kernel_w + kx) * shape.c + ic)];
                  acc += w * x[static_cast<std::size_t>((iy * shape.w + ix) * shape.c + ic)];
                }
            z[static_cast<std::size_t>((oy * next.w + ox) * next.c + oc)] = acc;
          }
    } else {
      next = {1, 1, l.out_units};
      const std::size_t in = x.size();
      z.assign(static_cast<std::size_t>(l.out_units), 0.0L);
      for (std::size_t o = 0; o < z.size(); ++o)
        for (std::size_t i = 0; i < in; ++i) z[o] += l.weight_sign[o * in + i] * x[i];
    }
    const auto& bn = l.bn;
    if (l.is_output) {
      const long double k = bn.gamma[0] / std::sqrt(static_cast<long double>(bn.var[0]) + bn.eps);
      for (std::size_t c = 0; c < z.size(); ++c) out.logits.push_back(k * (z[c] - bn.mean[c]) + bn.beta[c]);
      return out;
    }
    const std::int64_t per_channel = l.kind == LayerKind::Conv ? next.c : next.size();
    for (std::size_t u = 0; u < z.size(); ++u) {
      const auto ch = static_cast<std::size_t>(static_cast<std::int64_t>(u) % per_channel);
      const long double k = bn.gamma[ch] / std::sqrt(static_cast<long double>(bn.var[ch]) + bn.eps);
      z[u] = (k * (z[u] - bn.mean[ch]) + bn.beta[ch]) >= 0 ? 1.0L : 0.0L;
    }
    x = std::move(z);
    shape = next;
  }
  return out;
}

bool reference_misclassified(const ReferenceResult& r, std::int32_t label) {
  for (std::size_t c = 0; c < r.logits.size(); ++c)
    if (static_cast<std::int32_t>(c) != label && r.logits[c] > r.logits[static_cast<std::size_t>(label)])
      return true;
  return false;
}

std::int32_t reference_winner(const ReferenceResult& r) {
  for (std::size_t c = 0; c < r.logits.size(); ++c) {
    bool wins = true;
    for (std::size_t o = 0; o < r.logits.size(); ++o)
      if (o != c && !(r.logits[c] > r.logits[o])) wins = false;
    if (wins) return static_cast<std::int32_t>(c);
  }
  return -1;
}

}  // namespace eev::testing
