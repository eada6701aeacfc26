// Copyright 2026 The TargetDrop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Image datasets: IDX / CIFAR-binary loading, channel normalisation,
// pad-crop-flip augmentation and a procedural toy dataset.
//
// Preprocessing order is fixed: augmentation runs on raw pixel values (so
// the padding really is zero) and normalisation is applied afterwards.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "targetdrop/random.hpp"
#include "targetdrop/tensor.hpp"

namespace targetdrop {

struct ImageDataset {
  Tensor images;  // (N, H, W, C); raw values in [0, 255] until normalised
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  std::string split = "train";
  bool normalized = false;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t height() const { return images.dim(1); }
  std::size_t width() const { return images.dim(2); }
  std::size_t channels() const { return images.dim(3); }
  Tensor image(std::size_t n) const { return images.sample(n); }

  /// Checks N(images) == N(labels), labels < classes and, before
  /// normalisation, pixels in [0, 255].
  void validate() const;
};

// IDX: big-endian u32 magic 0x0000080D (D = number of dims), D big-endian
// u32 extents, then raw unsigned bytes. Images are (N, H, W) or
// (N, H, W, C); labels are (N).
ImageDataset decode_idx(std::string_view image_bytes, std::string_view label_bytes,
                        std::string split = "train");
ImageDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::string split = "train");
std::string encode_idx_images(const ImageDataset& ds);
std::string encode_idx_labels(const ImageDataset& ds);
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const ImageDataset& ds);

/// CIFAR binary batches: records of 1 label byte + 3072 bytes (C, H, W
/// planes of a 32 x 32 RGB image).
ImageDataset load_cifar_batches(const std::vector<std::filesystem::path>& files,
                                std::string split = "train", std::size_t classes = 10);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Per-channel population mean / standard deviation over a dataset.
/// Throws Error("degenerate channel ...") for a constant channel.
NormStats compute_norm_stats(const ImageDataset& ds);

/// (x - mean) / std per channel. Refuses an already normalised dataset
/// unless `force` is set.
void apply_normalization(ImageDataset& ds, const NormStats& stats, bool force = false);

/// Computes statistics on `train` and normalises it in place.
NormStats normalize(ImageDataset& train, bool force = false);

Tensor normalize_image(const Tensor& image, const NormStats& stats);

struct AugmentParams {
  std::size_t offset_row = 4;
  std::size_t offset_col = 4;
  bool flip = false;
  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

struct AugmentOptions {
  std::size_t pad = 4;
  bool crop = true;
  bool flip = true;
};

/// Draws crop offsets uniformly from [0, 2 pad] and a fair coin for the flip.
AugmentParams draw_augment_params(Rng& rng, const AugmentOptions& opts = {});

/// Zero-pads by `pad` on every side, crops the native size at the given
/// offset, then optionally mirrors horizontally.
Tensor augment(const Tensor& image, const AugmentParams& params, std::size_t pad = 4);
Tensor augment(const Tensor& image, std::uint64_t seed, const AugmentOptions& opts = {});

struct ToyDatasetConfig {
  std::size_t classes = 10;
  std::size_t n_per_class = 200;
  std::size_t image_size = 16;
  std::size_t channels = 3;
  double noise = 20.0;  // pixel-level Gaussian noise, in raw intensity units
  std::uint64_t seed = 1;

  void validate() const;
};

/// Parses `key=value` lines (classes, n_per_class, image_size, channels,
/// noise, seed). '#' starts a comment; unknown keys are rejected.
ToyDatasetConfig parse_toy_config(std::string_view text);

/// Procedural dataset: each class is a stripe or ring pattern family at a
/// class-specific spatial frequency, with random phase, contrast, channel
/// gains and additive noise. Label k appears exactly n_per_class times.
/// The split name enters the seed, so "train" and "test" are disjoint draws.
ImageDataset make_toy_dataset(const ToyDatasetConfig& cfg, const std::string& split = "train");

}  // namespace targetdrop
