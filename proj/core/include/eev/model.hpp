// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eev {

/// Raised for malformed model files and invariant violations. The message
/// names the offending JSON path or field.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape3 {
  std::int32_t h = 1;
  std::int32_t w = 1;
  std::int32_t c = 1;

  std::int64_t size() const { return std::int64_t{h} * w * c; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct BatchNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mean;
  std::vector<double> var;
  double eps = 1e-5;

  friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

enum class LayerKind { Dense, Conv };

struct ConvGeometry {
  std::int32_t kernel_h = 1;
  std::int32_t kernel_w = 1;
  std::int32_t stride_h = 1;
  std::int32_t stride_w = 1;
  std::int32_t pad_h = 0;
  std::int32_t pad_w = 0;

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// One linear-BatchNorm-binarize block. Weights are stored flat, row-major:
/// dense layers as [out][in], conv layers as [out_c][kh][kw][in_c].
struct BnnLayer {
  LayerKind kind = LayerKind::Dense;
  std::vector<std::int8_t> weight_sign;
  /// Output units (dense) or output channels (conv).
  std::int32_t out_units = 0;
  ConvGeometry conv;
  BatchNorm bn;
  /// The final layer: no binarization, scalar gamma/var over the feature map.
  bool is_output = false;

  // Derived when the owning model is constructed.
  Shape3 in_shape;
  Shape3 out_shape;

  static BnnLayer dense(std::int32_t out_units, std::vector<std::int8_t> weights,
                        BatchNorm bn, bool is_output = false);
  static BnnLayer convolution(std::int32_t out_channels, ConvGeometry geometry,
                              std::vector<std::int8_t> weights, BatchNorm bn);

  friend bool operator==(const BnnLayer&, const BnnLayer&) = default;
};

/// Batch norm folded into `k * x + b`. The output layer has a single k.
struct BnAffine {
  std::vector<double> k;
  std::vector<double> b;
};

BnAffine bn_to_affine(const BnnLayer& layer);

/// An integer threshold on an integer dot product S:
/// AtLeast: S >= bound, AtMost: S <= bound, Constant: `value`.
struct UnitRule {
  enum class Kind : std::uint8_t { AtLeast, AtMost, Constant };
  Kind kind = Kind::Constant;
  std::int64_t bound = 0;
  bool value = false;

  bool holds(std::int64_t s) const {
    switch (kind) {
      case Kind::AtLeast: return s >= bound;
      case Kind::AtMost: return s <= bound;
      case Kind::Constant: return value;
    }
    return value;
  }
  friend bool operator==(const UnitRule&, const UnitRule&) = default;
};

/// Exact rule for `k * scale * S + b >= 0` over integer S.
UnitRule activation_rule(double k, double scale, double b);
/// Exact rule for `k * scale * D + (b_hi - b_lo) > 0` over integer D.
UnitRule strict_margin_rule(double k, double scale, double b_hi, double b_lo);

/// Sparse signed connectivity of one layer, CSR by output unit.
struct Connectivity {
  std::vector<std::int64_t> row_start;
  std::vector<std::int32_t> input;
  std::vector<std::int8_t> weight;

  std::size_t rows() const { return row_start.empty() ? 0 : row_start.size() - 1; }
};

/// A validated, immutable binarized network. Construction derives layer
/// shapes, connectivity and the exact integer thresholds used by both
/// inference and encoding.
class BnnModel {
 public:
  BnnModel(Shape3 input_shape, double quant_step, std::vector<BnnLayer> layers);

  const Shape3& input_shape() const { return input_shape_; }
  std::int64_t input_size() const { return input_shape_.size(); }
  double quant_step() const { return quant_step_; }
  /// Largest quantized input value, round(1 / quant_step).
  std::int32_t input_levels() const { return input_levels_; }
  std::span<const BnnLayer> layers() const { return layers_; }
  std::int32_t num_classes() const { return layers_.back().out_units; }

  const Connectivity& connectivity(std::size_t layer) const { return conn_[layer]; }
  const BnAffine& affine(std::size_t layer) const { return affine_[layer]; }
  /// Per-unit activation rules of a hidden layer.
  std::span<const UnitRule> unit_rules(std::size_t layer) const { return rules_[layer]; }
  /// Rule on D = S_hi - S_lo deciding whether class `hi` strictly outscores `lo`.
  const UnitRule& margin_rule(std::int32_t hi, std::int32_t lo) const {
    return margin_rules_[static_cast<std::size_t>(hi * num_classes() + lo)];
  }
  /// FNV-1a hash of the canonical JSON form.
  std::uint64_t content_hash() const { return hash_; }

  friend bool operator==(const BnnModel& a, const BnnModel& b) {
    return a.input_shape_ == b.input_shape_ && a.quant_step_ == b.quant_step_ &&
           a.layers_ == b.layers_;
  }

 private:
  Shape3 input_shape_;
  double quant_step_;
  std::int32_t input_levels_ = 0;
  std::vector<BnnLayer> layers_;
  std::vector<Connectivity> conn_;
  std::vector<BnAffine> affine_;
  std::vector<std::vector<UnitRule>> rules_;
  std::vector<UnitRule> margin_rules_;
  std::uint64_t hash_ = 0;
};

/// Integer-grid input: real pixel value is values[i] * quant_step.
struct QuantInput {
  std::vector<std::int32_t> values;
  friend bool operator==(const QuantInput&, const QuantInput&) = default;
};

/// round-half-away-from-zero of x / step, computed exactly.
std::int32_t quantize_value(double x, double step);
QuantInput quantize(const BnnModel& model, std::span<const double> x);

struct Inference {
  /// Hidden activation bits, one vector per hidden layer.
  std::vector<std::vector<std::uint8_t>> activations;
  /// Integer dot products of the output layer, one per class.
  std::vector<std::int64_t> class_sums;
  /// Output scores in double precision (reporting only; decisions use exact rules).
  std::vector<double> logits;
  /// Lowest-index class not strictly outscored by any other class.
  std::int32_t predicted = 0;
};

Inference infer(const BnnModel& model, std::span<const std::int32_t> input);
inline Inference infer(const BnnModel& model, const QuantInput& input) {
  return infer(model, input.values);
}

/// True iff class `hi` scores strictly higher than class `lo`.
bool outscores(const BnnModel& model, const Inference& inf, std::int32_t hi,
               std::int32_t lo);
/// Untargeted attack success: some class other than `label` strictly outscores it.
bool misclassified(const BnnModel& model, const Inference& inf, std::int32_t label);
/// The class that strictly outscores every other class, or -1.
std::int32_t strict_argmax(const BnnModel& model, const Inference& inf);

BnnModel model_from_json(std::string_view text);
std::string model_to_json(const BnnModel& model);
BnnModel load_model(const std::filesystem::path& path);
void save_model(const BnnModel& model, const std::filesystem::path& path);

}  // namespace eev
