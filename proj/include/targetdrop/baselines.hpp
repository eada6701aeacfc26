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

// Reference mask generators for the comparison methods: unit dropout,
// channel (spatial) dropout, DropBlock and Cutout. All are reproducible
// from their seed.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "targetdrop/mask.hpp"

namespace targetdrop {

enum class DropMethod { kNone, kTargetDrop, kDropout, kSpatialDropout, kDropBlock, kCutout };

std::string to_string(DropMethod m);
/// Accepts none, targetdrop, dropout, spatialdropout, dropblock, cutout.
DropMethod parse_drop_method(const std::string& name);

/// I.i.d. Bernoulli keep(1 - rate) per unit; kept units scale 1 / (1 - rate).
/// rate must lie in [0, 1).
DropMask dropout_mask(const Shape& shape, double rate, std::uint64_t seed);

/// Whole channels dropped i.i.d. with probability `rate`; dropped channels
/// are tagged. Kept channels scale 1 / (1 - rate).
DropMask spatialdropout_mask(const Shape& shape, double rate, std::uint64_t seed);

/// Seed points drawn i.i.d. with probability `seed_rate` per channel from
/// the positions where a full block fits, each expanded to a block x block
/// square. Kept units scale numel / kept over the whole tensor.
DropMask dropblock_mask(const Shape& shape, double seed_rate, std::size_t block,
                        std::uint64_t seed);

/// DropBlock mask from explicit (channel, centre) seeds, clipped at borders.
DropMask dropblock_mask_from_seeds(const Shape& shape, std::size_t block,
                                   std::span<const DropRegion> seeds);

/// Single-channel (H, W, 1) input-space hole of side `size` at a uniform
/// random centre, clipped to the image. No rescaling. The same hole applies
/// to every channel of the image.
DropMask cutout_mask(std::size_t height, std::size_t width, std::size_t size,
                     std::uint64_t seed);
DropMask cutout_mask_at(std::size_t height, std::size_t width, std::size_t size,
                        SpatialIndex centre);

struct MaskStats {
  double drop_fraction = 0.0;
  std::vector<double> per_channel_fractions;
  /// Mean size of 4-connected components of dropped cells, per channel.
  double mean_block_size = 0.0;
  /// Among in-map 4-neighbours of dropped cells, the fraction also dropped.
  double contiguity = 0.0;
};

MaskStats mask_stats(const DropMask& mask);

}  // namespace targetdrop
