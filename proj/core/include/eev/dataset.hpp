// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eev/model.hpp"

namespace eev {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Images in [0, 1], flattened in HWC order.
struct Dataset {
  Shape3 shape;
  std::vector<std::vector<double>> images;
  std::vector<std::int32_t> labels;
};

/// MNIST IDX pair (ubyte images scaled by 1/255, ubyte labels).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Zip archive of .npy arrays: `images` with shape (N,H,W,C), (N,H,W) or
/// (N,D) as float32/float64 in [0,1] or uint8 scaled by 1/255, and `labels`
/// with shape (N,) as any integer type. Stored and deflated members are
/// supported.
Dataset load_npz(const std::filesystem::path& path);

/// Dispatches on the extension: .npz, or an IDX images file whose labels
/// file is found by replacing "images" with "labels" in the name.
Dataset load_dataset(const std::filesystem::path& path);

struct Image {
  std::vector<double> pixels;
  std::optional<std::int32_t> label;
};

/// A single image from .npy (float or uint8 array of any shape) or .json
/// ({"pixels": [...], "label": n} or a bare array, nested arrays flattened).
Image load_image(const std::filesystem::path& path);

/// Raw .npy parse: shape and values converted to double (uint8 unscaled).
struct NpyArray {
  std::vector<std::int64_t> shape;
  std::string dtype;
  std::vector<double> values;
};
NpyArray parse_npy(const std::string& bytes);
/// Writes '<f8' arrays, or '<i8' when dtype names an integer type.
std::string encode_npy(const NpyArray& array);
/// Writes an uncompressed .npz archive; names get a ".npy" suffix.
void write_npz(const std::filesystem::path& path,
               const std::vector<std::pair<std::string, NpyArray>>& arrays);

}  // namespace eev
