// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "json.hpp"

namespace eev {
namespace {

using testing::Rng;

BatchNorm identity_bn(std::size_t units) {
  BatchNorm bn;
  bn.gamma.assign(units, 1.0);
  bn.beta.assign(units, 0.0);
  bn.mean.assign(units, 0.0);
  bn.var.assign(units, 1.0 - 1e-5);
  return bn;
}

BatchNorm output_bn(std::size_t classes) {
  BatchNorm bn;
  bn.gamma = {1.0};
  bn.var = {1.0};
  bn.beta.assign(classes, 0.0);
  bn.mean.assign(classes, 0.0);
  return bn;
}

TEST(BnAffine, IdentityNormalization) {
  BnnLayer l = BnnLayer::dense(1, {1}, identity_bn(1));
  BnAffine a = bn_to_affine(l);
  EXPECT_NEAR(a.k[0], 1.0, 1e-12);
  EXPECT_NEAR(a.b[0], 0.0, 1e-12);
}

TEST(BnAffine, HandCheckedAlgebra) {
  BatchNorm bn;
  bn.gamma = {2.0};
  bn.beta = {3.0};
  bn.mean = {1.0};
  bn.var = {4.0 - 1e-5};
  BnAffine a = bn_to_affine(BnnLayer::dense(1, {1}, bn));
  EXPECT_NEAR(a.k[0], 1.0, 1e-12);
  EXPECT_NEAR(a.b[0], 2.0, 1e-12);
}

TEST(BnAffine, MatchesDirectEvaluation) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    BatchNorm bn;
    bn.gamma = {testing::uniform_real(rng, -3, 3)};
    bn.beta = {testing::uniform_real(rng, -3, 3)};
    bn.mean = {testing::uniform_real(rng, -3, 3)};
    bn.var = {testing::uniform_real(rng, 0, 5)};
    BnAffine a = bn_to_affine(BnnLayer::dense(1, {1}, bn));
    for (int i = 0; i < 10; ++i) {
      double x = testing::uniform_real(rng, -20, 20);
      double direct = bn.gamma[0] * (x - bn.mean[0]) / std::sqrt(bn.var[0] + bn.eps) + bn.beta[0];
      EXPECT_NEAR(a.k[0] * x + a.b[0], direct, 1e-9);
    }
  }
}

TEST(UnitRule, ExactThresholds) {
  // k * S + b >= 0
  EXPECT_EQ(activation_rule(1.0, 1.0, 0.0), (UnitRule{UnitRule::Kind::AtLeast, 0, false}));
  EXPECT_EQ(activation_rule(1.0, 1.0, -0.5), (UnitRule{UnitRule::Kind::AtLeast, 1, false}));
  EXPECT_EQ(activation_rule(-1.0, 1.0, 1.0), (UnitRule{UnitRule::Kind::AtMost, 1, false}));
  EXPECT_EQ(activation_rule(-2.0, 1.0, 1.0), (UnitRule{UnitRule::Kind::AtMost, 0, false}));
  EXPECT_EQ(activation_rule(0.0, 1.0, 3.0), (UnitRule{UnitRule::Kind::Constant, 0, true}));
  EXPECT_EQ(activation_rule(0.0, 1.0, -3.0), (UnitRule{UnitRule::Kind::Constant, 0, false}));
  // First-layer scale: 0.25 * S - 0.5 >= 0 <=> S >= 2.
  EXPECT_EQ(activation_rule(1.0, 0.25, -0.5), (UnitRule{UnitRule::Kind::AtLeast, 2, false}));
  // 0.1 is not exactly representable; the bound follows the stored doubles.
  UnitRule r = activation_rule(1.0, 0.1, -0.3);
  EXPECT_EQ(r.kind, UnitRule::Kind::AtLeast);
  EXPECT_EQ(r.bound, 3);
}

TEST(UnitRule, StrictMargins) {
  // k * D + db > 0
  EXPECT_EQ(strict_margin_rule(1.0, 1.0, 0.0, 0.0).bound, 1);
  EXPECT_EQ(strict_margin_rule(1.0, 1.0, 0.5, 0.0).bound, 0);
  EXPECT_EQ(strict_margin_rule(-1.0, 1.0, 0.0, 0.0), (UnitRule{UnitRule::Kind::AtMost, -1, false}));
  EXPECT_EQ(strict_margin_rule(0.0, 1.0, 0.0, 0.0), (UnitRule{UnitRule::Kind::Constant, 0, false}));
  EXPECT_EQ(strict_margin_rule(0.0, 1.0, 1.0, 0.0), (UnitRule{UnitRule::Kind::Constant, 0, true}));
  // Brute-force the semantics over a range of integer margins.
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    double k = testing::uniform_real(rng, -2, 2);
    double bh = testing::uniform_real(rng, -3, 3), bl = testing::uniform_real(rng, -3, 3);
    if (trial % 5 == 0) bh = bl + std::round(testing::uniform_real(rng, -3, 3)) * k;
    UnitRule rule = strict_margin_rule(k, 1.0, bh, bl);
    for (std::int64_t d = -10; d <= 10; ++d) {
      long double exact = static_cast<long double>(k) * d + (static_cast<long double>(bh) - bl);
      if (std::fabs(static_cast<double>(exact)) < 1e-12) continue;
      EXPECT_EQ(rule.holds(d), exact > 0) << "k=" << k << " d=" << d;
    }
  }
}

TEST(Quantize, RoundHalfAwayFromZero) {
  EXPECT_EQ(quantize_value(0.125, 0.25), 1);  // 0.5 -> 1
  EXPECT_EQ(quantize_value(0.375, 0.25), 2);  // 1.5 -> 2
  EXPECT_EQ(quantize_value(0.1249, 0.25), 0);
  EXPECT_EQ(quantize_value(1.0, 0.25), 4);
  EXPECT_EQ(quantize_value(0.0, 0.25), 0);
  // 0.3 / 0.1 is just below 3 in exact arithmetic on the stored doubles.
  EXPECT_EQ(quantize_value(0.3, 0.1), 3);
}

TEST(Infer, SingleDenseLayerExamples) {
  std::vector<BnnLayer> layers;
  layers.push_back(BnnLayer::dense(1, {1, -1}, identity_bn(1)));
  layers.push_back(BnnLayer::dense(2, {1, -1}, output_bn(2), true));
  BnnModel m({1, 2, 1}, 1.0, std::move(layers));
  EXPECT_EQ(infer(m, std::vector<std::int32_t>{1, 0}).activations[0][0], 1);
  EXPECT_EQ(infer(m, std::vector<std::int32_t>{0, 1}).activations[0][0], 0);
  EXPECT_EQ(infer(m, std::vector<std::int32_t>{0, 0}).activations[0][0], 1);  // 0 >= 0
}

TEST(Infer, MatchesStraightLineReference) {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    testing::NetSpec spec = testing::random_tiny_spec(rng);
    BnnModel m = testing::random_model(rng, spec);
    for (int i = 0; i < 40; ++i) {
      std::vector<std::int32_t> x(static_cast<std::size_t>(m.input_size()));
      for (auto& v : x) v = static_cast<std::int32_t>(testing::uniform(rng, 0, m.input_levels()));
      Inference inf = infer(m, x);
      auto ref = testing::reference_infer(m, x);
      ASSERT_EQ(ref.logits.size(), inf.logits.size());
      for (std::int32_t label = 0; label < m.num_classes(); ++label)
        EXPECT_EQ(misclassified(m, inf, label), testing::reference_misclassified(ref, label));
      EXPECT_EQ(strict_argmax(m, inf), testing::reference_winner(ref));
      for (std::size_t c = 0; c < ref.logits.size(); ++c)
        EXPECT_NEAR(inf.logits[c], static_cast<double>(ref.logits[c]), 1e-9);
    }
  }
}

TEST(Infer, ExhaustiveTwoLayerAgreement) {
  Rng rng(99);
  testing::NetSpec spec;
  spec.input = {1, 4, 1};
  spec.quant_step = 0.5;
  spec.dense_hidden = {3};
  spec.classes = 3;
  for (int trial = 0; trial < 10; ++trial) {
    BnnModel m = testing::random_model(rng, spec);
    std::vector<std::int32_t> x(4, 0);
    for (int code = 0; code < 81; ++code) {
      int c = code;
      for (auto& v : x) {
        v = c % 3;
        c /= 3;
      }
      Inference inf = infer(m, x);
      auto ref = testing::reference_infer(m, x);
      for (std::int32_t label = 0; label < 3; ++label)
        EXPECT_EQ(misclassified(m, inf, label), testing::reference_misclassified(ref, label));
    }
  }
}

TEST(Infer, RejectsOutOfRangeInput) {
  Rng rng(1);
  BnnModel m = testing::random_model(rng, testing::NetSpec{});
  std::vector<std::int32_t> x(static_cast<std::size_t>(m.input_size()), 0);
  x[0] = m.input_levels() + 1;
  EXPECT_THROW(infer(m, x), ModelError);
  x.pop_back();
  EXPECT_THROW(infer(m, x), ModelError);
}

TEST(ModelJson, RoundTrip) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    testing::NetSpec spec = testing::random_tiny_spec(rng);
    spec.tie_free = trial % 2 == 0;
    BnnModel m = testing::random_model(rng, spec);
    std::string text = model_to_json(m);
    BnnModel back = model_from_json(text);
    EXPECT_EQ(back, m);
    EXPECT_EQ(model_to_json(back), text);
    EXPECT_EQ(back.content_hash(), m.content_hash());
  }
}

TEST(ModelJson, SaveLoadFile) {
  Rng rng(6);
  BnnModel m = testing::random_model(rng, testing::random_tiny_spec(rng));
  auto path = std::filesystem::temp_directory_path() / "eev_model_test.json";
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  std::filesystem::remove(path);
}

std::string minimal_model(const std::string& weight) {
  return R"({"input_shape":[1,2,1],"quant_step":0.5,"layers":[
    {"kind":"dense","weight_sign":[[1,)" + weight + R"(]],
     "bn":{"gamma":[1],"beta":[0],"mean":[0],"var":[1],"eps":1e-5}},
    {"kind":"dense","is_output":true,"weight_sign":[[1],[-1]],
     "bn":{"gamma":[1],"beta":[0,0],"mean":[0,0],"var":[1],"eps":1e-5}}]})";
}

TEST(ModelJson, ValidationErrorsNameTheField) {
  EXPECT_NO_THROW(model_from_json(minimal_model("-1")));
  try {
    model_from_json(minimal_model("2"));
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("weight_sign out of range"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("$.layers[0].weight_sign[0][1]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(model_from_json("{"), ModelError);
  EXPECT_THROW(model_from_json(R"({"input_shape":[1,2,1],"layers":[]})"), ModelError);
}

TEST(ModelJson, StructuralInvariants) {
  auto j = nlohmann::json::parse(minimal_model("0"));
  auto bad = j;
  bad["layers"][1]["is_output"] = false;
  EXPECT_THROW(model_from_json(bad.dump()), ModelError);
  bad = j;
  bad["layers"][0]["is_output"] = true;
  EXPECT_THROW(model_from_json(bad.dump()), ModelError);
  bad = j;
  bad["layers"][0]["bn"]["var"] = {-1.0};
  EXPECT_THROW(model_from_json(bad.dump()), ModelError);
  bad = j;
  bad["layers"][1]["bn"]["gamma"] = {1.0, 1.0};
  EXPECT_THROW(model_from_json(bad.dump()), ModelError);
  bad = j;
  bad["quant_step"] = 0.0;
  EXPECT_THROW(model_from_json(bad.dump()), ModelError);
  bad = j;
  bad["layers"][1]["weight_sign"] = {{1, 1}, {1, 1}};
  EXPECT_THROW(model_from_json(bad.dump()), ModelError);
}

TEST(Model, ConvConnectivitySkipsPadding) {
  ConvGeometry g{3, 3, 1, 1, 1, 1};
  std::vector<std::int8_t> w(9, 1);
  std::vector<BnnLayer> layers;
  layers.push_back(BnnLayer::convolution(1, g, w, identity_bn(1)));
  layers.push_back(BnnLayer::dense(2, std::vector<std::int8_t>(8, 1), output_bn(2), true));
  BnnModel m({2, 2, 1}, 0.5, std::move(layers));
  EXPECT_EQ(m.layers()[0].out_shape, (Shape3{2, 2, 1}));
  const Connectivity& c = m.connectivity(0);
  ASSERT_EQ(c.rows(), 4u);
  for (std::size_t u = 0; u < 4; ++u) EXPECT_EQ(c.row_start[u + 1] - c.row_start[u], 4);
}

TEST(Model, HashChangesWithContent) {
  auto a = model_from_json(minimal_model("0"));
  auto b = model_from_json(minimal_model("1"));
  EXPECT_NE(a.content_hash(), b.content_hash());
  EXPECT_EQ(a.content_hash(), model_from_json(minimal_model("0")).content_hash());
}

}  // namespace
}  // namespace eev
