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

#pragma once

#include <cstdint>
#include <vector>

#include "targetdrop/tensor.hpp"

namespace targetdrop {

/// Inclusive rectangle [h1, h2] x [w1, w2] of a feature map.
struct RegionBounds {
  std::size_t h1 = 0, h2 = 0, w1 = 0, w2 = 0;

  std::size_t cells() const noexcept { return (h2 - h1 + 1) * (w2 - w1 + 1); }
  bool contains(std::size_t i, std::size_t j) const noexcept {
    return h1 <= i && i <= h2 && w1 <= j && j <= w2;
  }
  friend bool operator==(const RegionBounds&, const RegionBounds&) = default;
};

/// A dropped rectangle together with the pixel it was centred on.
struct DropRegion {
  std::size_t channel = 0;
  SpatialIndex center;
  RegionBounds bounds;
  friend bool operator==(const DropRegion&, const DropRegion&) = default;
};

/// Binary (H, W, C) keep-mask plus the bookkeeping that produced it.
///
/// `keep` uses the feature layout (channel fastest); 1 = kept, 0 = dropped.
/// `tags` marks channels the generator targeted (TargetDrop's T, the
/// dropped channels of SpatialDropout); generators without a channel notion
/// leave it all zero. `scale` is the per-channel factor applied to kept
/// units by apply_mask.
struct DropMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> keep;
  std::vector<std::uint8_t> tags;
  std::vector<DropRegion> regions;
  std::vector<std::size_t> kept_counts;
  std::vector<double> scale;

  /// Identity mask: everything kept, scale 1.
  static DropMask ones(std::size_t h, std::size_t w, std::size_t c);

  std::size_t index(std::size_t i, std::size_t j, std::size_t c) const noexcept {
    return (i * width + j) * channels + c;
  }
  bool kept(std::size_t i, std::size_t j, std::size_t c) const noexcept {
    return keep[index(i, j, c)] != 0;
  }
  void drop(std::size_t i, std::size_t j, std::size_t c) noexcept { keep[index(i, j, c)] = 0; }

  std::size_t plane_size() const noexcept { return height * width; }
  Shape shape() const { return {height, width, channels}; }

  /// Recomputes kept_counts from `keep`.
  void recount();

  friend bool operator==(const DropMask&, const DropMask&) = default;
};

/// out = u * s * scale[c]. A single-channel mask is broadcast over all
/// channels of u. Channels whose scale is zero come out as exact zeros.
Tensor apply_mask(const Tensor& u, const DropMask& mask);

}  // namespace targetdrop
