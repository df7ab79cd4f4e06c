// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/dataset.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace eev {
namespace {

const std::filesystem::path kData = EEV_TEST_DATA_DIR;

void expect_tiny(const Dataset& d) {
  EXPECT_EQ(d.shape, (Shape3{2, 3, 1}));
  ASSERT_EQ(d.images.size(), 3u);
  EXPECT_EQ(d.labels, (std::vector<std::int32_t>{2, 0, 1}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 6; ++p)
      EXPECT_NEAR(d.images[i][p], static_cast<double>((i * 6 + p) * 14) / 255.0, 1e-7);
}

TEST(Dataset, CompressedNpz) { expect_tiny(load_npz(kData / "tiny.npz")); }

TEST(Dataset, FloatNpz) { expect_tiny(load_dataset(kData / "tiny_float.npz")); }

TEST(Dataset, GzippedIdx) { expect_tiny(load_dataset(kData / "tiny-images-idx3-ubyte.gz")); }

TEST(Dataset, NpzRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "eev_dataset_test.npz";
  NpyArray images{{2, 1, 2}, "<f8", {0.0, 0.25, 0.5, 1.0}};
  NpyArray labels{{2}, "<i8", {1, 0}};
  write_npz(path, {{"images", images}, {"labels", labels}});
  Dataset d = load_npz(path);
  EXPECT_EQ(d.shape, (Shape3{1, 2, 1}));
  EXPECT_EQ(d.images[1], (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(d.labels, (std::vector<std::int32_t>{1, 0}));
  std::filesystem::remove(path);
}

TEST(Dataset, NpyRoundTrip) {
  NpyArray a{{3}, "<f8", {0.5, -1.0, 2.0}};
  NpyArray b = parse_npy(encode_npy(a));
  EXPECT_EQ(b.shape, a.shape);
  EXPECT_EQ(b.values, a.values);
  EXPECT_THROW(parse_npy("not numpy"), DatasetError);
}

TEST(Dataset, Images) {
  Image npy = load_image(kData / "image.npy");
  ASSERT_EQ(npy.pixels.size(), 6u);
  EXPECT_NEAR(npy.pixels[0], 84.0 / 255.0, 1e-12);
  EXPECT_FALSE(npy.label.has_value());

  auto path = std::filesystem::temp_directory_path() / "eev_image_test.json";
  {
    std::ofstream f(path);
    f << R"({"pixels": [[0.0, 0.5], [1.0, 0.25]], "label": 3})";
  }
  Image js = load_image(path);
  EXPECT_EQ(js.pixels, (std::vector<double>{0.0, 0.5, 1.0, 0.25}));
  EXPECT_EQ(js.label, 3);
  {
    std::ofstream f(path);
    f << "[0.5, 1.5]";
  }
  EXPECT_THROW(load_image(path), DatasetError);
  std::filesystem::remove(path);
}

TEST(Dataset, Errors) {
  EXPECT_THROW(load_dataset(kData / "missing.npz"), DatasetError);
  EXPECT_THROW(load_dataset(kData / "image.npy"), DatasetError);
}

}  // namespace
}  // namespace eev
