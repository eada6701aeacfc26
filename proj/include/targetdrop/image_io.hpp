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

// Netpbm output for masks and heatmaps, and a flat tensor file.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "targetdrop/mask.hpp"
#include "targetdrop/tensor.hpp"

namespace targetdrop {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved RGB
};

/// Binary P5 / P6 encodings with maxval 255.
std::string encode_pgm(const GrayImage& img);
std::string encode_ppm(const RgbImage& img);
GrayImage decode_pgm(std::string_view bytes);
RgbImage decode_ppm(std::string_view bytes);

/// Channel c of a mask as an image: 255 kept, 0 dropped.
GrayImage mask_channel_image(const DropMask& mask, std::size_t channel);

/// Writes mask_c{channel}.pgm for every channel plus `regions.txt`, one
/// line per dropped region: channel a b h1 h2 w1 w2 kept_count.
void dump_mask(const std::filesystem::path& dir, const DropMask& mask);
std::string mask_regions_text(const DropMask& mask);

/// All channels of a mask tiled into one image, `columns` tiles per row
/// separated by a 1-pixel mid-grey border.
GrayImage mask_montage(const DropMask& mask, std::size_t columns);

/// Fixed blue-cyan-yellow-red ramp for values in [0, 1].
std::array<std::uint8_t, 3> heat_color(double v);

/// (H, W) tensor with values in [0, 1] rendered through heat_color.
RgbImage heatmap_image(const Tensor& heatmap);

// Flat tensor file: "TDTENS01", u32 rank, rank x u64 extents, then the
// values as little-endian float64.
std::string serialize_tensor(const Tensor& t);
Tensor deserialize_tensor(std::string_view bytes);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace targetdrop
