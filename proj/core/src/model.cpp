// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "exact.hpp"
#include "json.hpp"

namespace eev {

using nlohmann::json;

BnnLayer BnnLayer::dense(std::int32_t out_units, std::vector<std::int8_t> weights,
                         BatchNorm bn, bool is_output) {
  BnnLayer l;
  l.kind = LayerKind::Dense;
  l.out_units = out_units;
  l.weight_sign = std::move(weights);
  l.bn = std::move(bn);
  l.is_output = is_output;
  return l;
}

BnnLayer BnnLayer::convolution(std::int32_t out_channels, ConvGeometry geometry,
                               std::vector<std::int8_t> weights, BatchNorm bn) {
  BnnLayer l;
  l.kind = LayerKind::Conv;
  l.out_units = out_channels;
  l.conv = geometry;
  l.weight_sign = std::move(weights);
  l.bn = std::move(bn);
  return l;
}

BnAffine bn_to_affine(const BnnLayer& layer) {
  BnAffine a;
  const auto& bn = layer.bn;
  if (layer.is_output) {
    double k = bn.gamma[0] / std::sqrt(bn.var[0] + bn.eps);
    a.k = {k};
    for (std::size_t i = 0; i < bn.beta.size(); ++i) a.b.push_back(bn.beta[i] - k * bn.mean[i]);
    return a;
  }
  for (std::size_t i = 0; i < bn.gamma.size(); ++i) {
    double k = bn.gamma[i] / std::sqrt(bn.var[i] + bn.eps);
    a.k.push_back(k);
    a.b.push_back(bn.beta[i] - k * bn.mean[i]);
  }
  return a;
}

UnitRule activation_rule(double k, double scale, double b) {
  using exact::Rational;
  Rational kk = exact::from_double(k) * exact::from_double(scale);
  if (kk == 0) return {UnitRule::Kind::Constant, 0, b >= 0};
  Rational beta = -exact::from_double(b) / kk;
  if (kk > 0) return {UnitRule::Kind::AtLeast, exact::to_int64(exact::ceil(beta)), false};
  return {UnitRule::Kind::AtMost, exact::to_int64(exact::floor(beta)), false};
}

UnitRule strict_margin_rule(double k, double scale, double b_hi, double b_lo) {
  using exact::Rational;
  Rational kk = exact::from_double(k) * exact::from_double(scale);
  Rational db = exact::from_double(b_hi) - exact::from_double(b_lo);
  if (kk == 0) return {UnitRule::Kind::Constant, 0, db > 0};
  Rational beta = -db / kk;
  // Smallest integer strictly above beta, or largest strictly below.
  if (kk > 0) return {UnitRule::Kind::AtLeast, exact::to_int64(exact::floor(beta) + 1), false};
  return {UnitRule::Kind::AtMost, exact::to_int64(exact::ceil(beta) - 1), false};
}

namespace {

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void check_finite(const std::vector<double>& v, const std::string& path) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) throw ModelError(at(path, i) + ": must be finite");
}

void validate_bn(const BnnLayer& layer, std::size_t units, const std::string& path) {
  const auto& bn = layer.bn;
  std::size_t scale_len = layer.is_output ? 1 : units;
  auto expect = [&](const std::vector<double>& v, std::size_t n, const char* name) {
    if (v.size() != n)
      throw ModelError(path + ".bn." + name + ": expected " + std::to_string(n) +
                       " entries, got " + std::to_string(v.size()));
    check_finite(v, path + ".bn." + name);
  };
  expect(bn.gamma, scale_len, "gamma");
  expect(bn.var, scale_len, "var");
  expect(bn.beta, units, "beta");
  expect(bn.mean, units, "mean");
  for (std::size_t i = 0; i < bn.var.size(); ++i)
    if (bn.var[i] < 0) throw ModelError(at(path + ".bn.var", i) + ": must be >= 0");
  if (!(bn.eps > 0) || !std::isfinite(bn.eps)) throw ModelError(path + ".bn.eps: must be > 0");
}

Connectivity dense_connectivity(const BnnLayer& l, std::int64_t in_size) {
  Connectivity c;
  c.row_start.push_back(0);
  for (std::int32_t i = 0; i < l.out_units; ++i) {
    for (std::int64_t j = 0; j < in_size; ++j) {
      std::int8_t w = l.weight_sign[static_cast<std::size_t>(i * in_size + j)];
      if (w == 0) continue;
      c.input.push_back(static_cast<std::int32_t>(j));
      c.weight.push_back(w);
    }
    c.row_start.push_back(static_cast<std::int64_t>(c.input.size()));
  }
  return c;
}

Connectivity conv_connectivity(const BnnLayer& l) {
  const Shape3& in = l.in_shape;
  const Shape3& out = l.out_shape;
  const ConvGeometry& g = l.conv;
  Connectivity c;
  c.row_start.push_back(0);
  for (std::int32_t oh = 0; oh < out.h; ++oh) {
    for (std::int32_t ow = 0; ow < out.w; ++ow) {
      for (std::int32_t oc = 0; oc < out.c; ++oc) {
        for (std::int32_t ki = 0; ki < g.kernel_h; ++ki) {
          std::int32_t ih = oh * g.stride_h - g.pad_h + ki;
          for (std::int32_t kj = 0; kj < g.kernel_w; ++kj) {
            std::int32_t iw = ow * g.stride_w - g.pad_w + kj;
            // Padded positions hold activation 0 and contribute nothing.
            if (ih < 0 || ih >= in.h || iw < 0 || iw >= in.w) continue;
            for (std::int32_t ic = 0; ic < in.c; ++ic) {
              std::size_t widx =
                  ((static_cast<std::size_t>(oc) * g.kernel_h + ki) * g.kernel_w + kj) * in.c + ic;
              std::int8_t w = l.weight_sign[widx];
              if (w == 0) continue;
              c.input.push_back((ih * in.w + iw) * in.c + ic);
              c.weight.push_back(w);
            }
          }
        }
        c.row_start.push_back(static_cast<std::int64_t>(c.input.size()));
      }
    }
  }
  return c;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

BnnModel::BnnModel(Shape3 input_shape, double quant_step, std::vector<BnnLayer> layers)
    : input_shape_(input_shape), quant_step_(quant_step), layers_(std::move(layers)) {
  if (input_shape_.h <= 0 || input_shape_.w <= 0 || input_shape_.c <= 0)
    throw ModelError("input_shape: dimensions must be positive");
  if (!(quant_step_ > 0) || !std::isfinite(quant_step_))
    throw ModelError("quant_step: must be a positive finite number");
  input_levels_ = quantize_value(1.0, quant_step_);
  if (input_levels_ < 1) throw ModelError("quant_step: round(1/quant_step) must be >= 1");
  if (layers_.empty()) throw ModelError("layers: model has no layers");

  Shape3 shape = input_shape_;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    BnnLayer& l = layers_[li];
    const std::string path = at("layers", li);
    bool last = li + 1 == layers_.size();
    if (l.is_output != last)
      throw ModelError(path + ".is_output: exactly the last layer must be the output layer");
    if (l.out_units <= 0) throw ModelError(path + ": layer has no output units");
    for (std::size_t i = 0; i < l.weight_sign.size(); ++i) {
      int w = l.weight_sign[i];
      if (w < -1 || w > 1)
        throw ModelError(path + ".weight_sign: weight_sign out of range (" + std::to_string(w) +
                         " at flat index " + std::to_string(i) + ")");
    }
    l.in_shape = shape;
    if (l.kind == LayerKind::Dense) {
      std::int64_t expected = std::int64_t{l.out_units} * shape.size();
      if (static_cast<std::int64_t>(l.weight_sign.size()) != expected)
        throw ModelError(path + ".weight_sign: expected " + std::to_string(l.out_units) + " rows of " +
                         std::to_string(shape.size()) + " inputs");
      l.out_shape = Shape3{1, 1, l.out_units};
      conn_.push_back(dense_connectivity(l, shape.size()));
    } else {
      if (l.is_output) throw ModelError(path + ".kind: the output layer must be dense");
      const ConvGeometry& g = l.conv;
      if (g.kernel_h <= 0 || g.kernel_w <= 0 || g.stride_h <= 0 || g.stride_w <= 0 ||
          g.pad_h < 0 || g.pad_w < 0)
        throw ModelError(path + ".conv: invalid kernel/stride/padding");
      std::int32_t oh = (shape.h + 2 * g.pad_h - g.kernel_h) / g.stride_h + 1;
      std::int32_t ow = (shape.w + 2 * g.pad_w - g.kernel_w) / g.stride_w + 1;
      if (shape.h + 2 * g.pad_h < g.kernel_h || shape.w + 2 * g.pad_w < g.kernel_w || oh <= 0 || ow <= 0)
        throw ModelError(path + ".conv: kernel larger than padded input");
      std::int64_t expected = std::int64_t{l.out_units} * g.kernel_h * g.kernel_w * shape.c;
      if (static_cast<std::int64_t>(l.weight_sign.size()) != expected)
        throw ModelError(path + ".weight_sign: expected shape [" + std::to_string(l.out_units) + "][" +
                         std::to_string(g.kernel_h) + "][" + std::to_string(g.kernel_w) + "][" +
                         std::to_string(shape.c) + "]");
      l.out_shape = Shape3{oh, ow, l.out_units};
      conn_.push_back(conv_connectivity(l));
    }
    validate_bn(l, static_cast<std::size_t>(l.out_units), path);
    affine_.push_back(bn_to_affine(l));
    shape = l.out_shape;
  }

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const BnnLayer& l = layers_[li];
    const BnAffine& a = affine_[li];
    double scale = li == 0 ? quant_step_ : 1.0;
    std::vector<UnitRule> rules;
    if (!l.is_output) {
      std::int64_t units = l.out_shape.size();
      rules.reserve(static_cast<std::size_t>(units));
      for (std::int64_t u = 0; u < units; ++u) {
        std::size_t ch = static_cast<std::size_t>(u % l.out_units);
        rules.push_back(activation_rule(a.k[ch], scale, a.b[ch]));
      }
    } else {
      std::int32_t n = l.out_units;
      margin_rules_.resize(static_cast<std::size_t>(n * n));
      for (std::int32_t hi = 0; hi < n; ++hi)
        for (std::int32_t lo = 0; lo < n; ++lo)
          margin_rules_[static_cast<std::size_t>(hi * n + lo)] =
              hi == lo ? UnitRule{UnitRule::Kind::Constant, 0, false}
                       : strict_margin_rule(a.k[0], scale, a.b[hi], a.b[lo]);
    }
    rules_.push_back(std::move(rules));
  }
  hash_ = fnv1a(model_to_json(*this));
}

std::int32_t quantize_value(double x, double step) {
  exact::Rational r = exact::from_double(x) / exact::from_double(step);
  return static_cast<std::int32_t>(exact::to_int64(exact::round_half_away(r)));
}

QuantInput quantize(const BnnModel& model, std::span<const double> x) {
  if (static_cast<std::int64_t>(x.size()) != model.input_size())
    throw ModelError("input: expected " + std::to_string(model.input_size()) + " values, got " +
                     std::to_string(x.size()));
  QuantInput q;
  q.values.reserve(x.size());
  for (double v : x) {
    std::int32_t iv = quantize_value(v, model.quant_step());
    q.values.push_back(std::clamp(iv, 0, model.input_levels()));
  }
  return q;
}

Inference infer(const BnnModel& model, std::span<const std::int32_t> input) {
  if (static_cast<std::int64_t>(input.size()) != model.input_size())
    throw ModelError("infer: layers[0] expects " + std::to_string(model.input_size()) +
                     " inputs, got " + std::to_string(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i)
    if (input[i] < 0 || input[i] > model.input_levels())
      throw ModelError("infer: input[" + std::to_string(i) + "] = " + std::to_string(input[i]) +
                       " outside [0, " + std::to_string(model.input_levels()) + "]");

  Inference out;
  std::vector<std::int32_t> current(input.begin(), input.end());
  auto layers = model.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Connectivity& conn = model.connectivity(li);
    std::vector<std::int64_t> sums(conn.rows());
    for (std::size_t u = 0; u < conn.rows(); ++u) {
      std::int64_t s = 0;
      for (auto e = conn.row_start[u]; e < conn.row_start[u + 1]; ++e)
        s += conn.weight[static_cast<std::size_t>(e)] * current[static_cast<std::size_t>(conn.input[static_cast<std::size_t>(e)])];
      sums[u] = s;
    }
    if (!layers[li].is_output) {
      auto rules = model.unit_rules(li);
      std::vector<std::uint8_t> act(sums.size());
      for (std::size_t u = 0; u < sums.size(); ++u) act[u] = rules[u].holds(sums[u]) ? 1 : 0;
      current.assign(act.begin(), act.end());
      out.activations.push_back(std::move(act));
    } else {
      const BnAffine& a = model.affine(li);
      double scale = li == 0 ? model.quant_step() : 1.0;
      out.class_sums = sums;
      for (std::size_t c = 0; c < sums.size(); ++c)
        out.logits.push_back(a.k[0] * scale * static_cast<double>(sums[c]) + a.b[c]);
    }
  }
  std::int32_t best = 0;
  for (std::int32_t c = 1; c < model.num_classes(); ++c)
    if (outscores(model, out, c, best)) best = c;
  out.predicted = best;
  return out;
}

bool outscores(const BnnModel& model, const Inference& inf, std::int32_t hi, std::int32_t lo) {
  if (hi == lo) return false;
  return model.margin_rule(hi, lo).holds(inf.class_sums[static_cast<std::size_t>(hi)] -
                                         inf.class_sums[static_cast<std::size_t>(lo)]);
}

bool misclassified(const BnnModel& model, const Inference& inf, std::int32_t label) {
  for (std::int32_t c = 0; c < model.num_classes(); ++c)
    if (c != label && outscores(model, inf, c, label)) return true;
  return false;
}

std::int32_t strict_argmax(const BnnModel& model, const Inference& inf) {
  for (std::int32_t c = 0; c < model.num_classes(); ++c) {
    bool wins = true;
    for (std::int32_t o = 0; o < model.num_classes() && wins; ++o)
      if (o != c && !outscores(model, inf, c, o)) wins = false;
    if (wins) return c;
  }
  return -1;
}

// --- JSON ---------------------------------------------------------------------

namespace {

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ModelError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ModelError(path + "." + key + ": missing field");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ModelError(path + ": expected a number");
  return v.get<double>();
}

std::int32_t integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ModelError(path + ": expected an integer");
  return v.get<std::int32_t>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ModelError(path + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], at(path, i)));
  return out;
}

std::array<std::int32_t, 2> pair(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw ModelError(path + ": expected [a, b]");
  return {integer(v[0], at(path, 0)), integer(v[1], at(path, 1))};
}

// Flattens a nested integer array of the given depth, recording its dims.
void flatten_weights(const json& v, std::size_t depth, const std::string& path,
                     std::vector<std::int32_t>& dims, std::size_t level,
                     std::vector<std::int8_t>& out) {
  if (level == depth) {
    std::int32_t w = integer(v, path);
    if (w < -1 || w > 1)
      throw ModelError(path + ": weight_sign out of range (" + std::to_string(w) + ")");
    out.push_back(static_cast<std::int8_t>(w));
    return;
  }
  if (!v.is_array()) throw ModelError(path + ": expected a nested array of depth " + std::to_string(depth));
  auto n = static_cast<std::int32_t>(v.size());
  if (dims.size() <= level) dims.push_back(n);
  else if (dims[level] != n)
    throw ModelError(path + ": ragged array (expected " + std::to_string(dims[level]) + " entries)");
  for (std::size_t i = 0; i < v.size(); ++i)
    flatten_weights(v[i], depth, at(path, i), dims, level + 1, out);
}

json nest_weights(const std::vector<std::int8_t>& flat, std::span<const std::int32_t> dims,
                  std::size_t& pos) {
  json arr = json::array();
  for (std::int32_t i = 0; i < dims[0]; ++i) {
    if (dims.size() == 1) arr.push_back(static_cast<int>(flat[pos++]));
    else arr.push_back(nest_weights(flat, dims.subspan(1), pos));
  }
  return arr;
}

}  // namespace

BnnModel model_from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("$: JSON parse error: ") + e.what());
  }
  const std::string top = "$";
  const json& shape = member(root, "input_shape", top);
  if (!shape.is_array() || shape.size() != 3) throw ModelError("$.input_shape: expected [H, W, C]");
  Shape3 in{integer(shape[0], "$.input_shape[0]"), integer(shape[1], "$.input_shape[1]"),
            integer(shape[2], "$.input_shape[2]")};
  double step = number(member(root, "quant_step", top), "$.quant_step");
  const json& jl = member(root, "layers", top);
  if (!jl.is_array()) throw ModelError("$.layers: expected an array");

  std::vector<BnnLayer> layers;
  for (std::size_t li = 0; li < jl.size(); ++li) {
    const std::string path = at("$.layers", li);
    const json& l = jl[li];
    const json& kind = member(l, "kind", path);
    if (!kind.is_string() || (kind != "dense" && kind != "conv"))
      throw ModelError(path + ".kind: expected \"dense\" or \"conv\"");
    bool is_output = false;
    if (auto it = l.find("is_output"); it != l.end()) {
      if (!it->is_boolean()) throw ModelError(path + ".is_output: expected a boolean");
      is_output = it->get<bool>();
    }
    const json& jbn = member(l, "bn", path);
    BatchNorm bn;
    bn.gamma = numbers(member(jbn, "gamma", path + ".bn"), path + ".bn.gamma");
    bn.beta = numbers(member(jbn, "beta", path + ".bn"), path + ".bn.beta");
    bn.mean = numbers(member(jbn, "mean", path + ".bn"), path + ".bn.mean");
    bn.var = numbers(member(jbn, "var", path + ".bn"), path + ".bn.var");
    if (auto it = jbn.find("eps"); it != jbn.end()) bn.eps = number(*it, path + ".bn.eps");

    std::vector<std::int32_t> dims;
    std::vector<std::int8_t> weights;
    bool dense = kind == "dense";
    flatten_weights(member(l, "weight_sign", path), dense ? 2 : 4, path + ".weight_sign", dims, 0,
                    weights);
    if (dims.empty()) throw ModelError(path + ".weight_sign: empty");
    if (dense) {
      layers.push_back(BnnLayer::dense(dims[0], std::move(weights), std::move(bn), is_output));
    } else {
      const json& jc = member(l, "conv", path);
      auto k = pair(member(jc, "kernel", path + ".conv"), path + ".conv.kernel");
      ConvGeometry g{k[0], k[1]};
      if (auto it = jc.find("stride"); it != jc.end()) {
        auto s = pair(*it, path + ".conv.stride");
        g.stride_h = s[0];
        g.stride_w = s[1];
      }
      if (auto it = jc.find("padding"); it != jc.end()) {
        auto p = pair(*it, path + ".conv.padding");
        g.pad_h = p[0];
        g.pad_w = p[1];
      }
      if (dims.size() == 4 && (dims[1] != g.kernel_h || dims[2] != g.kernel_w))
        throw ModelError(path + ".weight_sign: kernel dims disagree with conv.kernel");
      BnnLayer cl = BnnLayer::convolution(dims[0], g, std::move(weights), std::move(bn));
      cl.is_output = is_output;
      layers.push_back(std::move(cl));
    }
  }
  return BnnModel(in, step, std::move(layers));
}

std::string model_to_json(const BnnModel& model) {
  json root;
  const Shape3& s = model.input_shape();
  root["input_shape"] = {s.h, s.w, s.c};
  root["quant_step"] = model.quant_step();
  json layers = json::array();
  for (const BnnLayer& l : model.layers()) {
    json jl;
    jl["kind"] = l.kind == LayerKind::Dense ? "dense" : "conv";
    jl["is_output"] = l.is_output;
    jl["bn"] = {{"gamma", l.bn.gamma}, {"beta", l.bn.beta}, {"mean", l.bn.mean},
                {"var", l.bn.var},     {"eps", l.bn.eps}};
    std::size_t pos = 0;
    if (l.kind == LayerKind::Dense) {
      std::array<std::int32_t, 2> dims{l.out_units, static_cast<std::int32_t>(l.in_shape.size())};
      jl["weight_sign"] = nest_weights(l.weight_sign, dims, pos);
    } else {
      std::array<std::int32_t, 4> dims{l.out_units, l.conv.kernel_h, l.conv.kernel_w, l.in_shape.c};
      jl["weight_sign"] = nest_weights(l.weight_sign, dims, pos);
      jl["conv"] = {{"kernel", {l.conv.kernel_h, l.conv.kernel_w}},
                    {"stride", {l.conv.stride_h, l.conv.stride_w}},
                    {"padding", {l.conv.pad_h, l.conv.pad_w}}};
    }
    layers.push_back(std::move(jl));
  }
  root["layers"] = std::move(layers);
  return root.dump();
}

BnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

void save_model(const BnnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model file " + path.string());
  out << model_to_json(model) << '\n';
}

}  // namespace eev
