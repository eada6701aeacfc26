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

// TargetDrop: attention-guided structured dropout.
//
// In the training phase the layer scores channels with the attention gate,
// tags the floor(gamma * C) highest-scoring channels, and in each tagged
// channel zeroes the k x k block centred on that channel's spatial maximum.
// Surviving units of a channel are rescaled by numel / kept so the channel
// keeps its expected magnitude. In the inference phase the layer is the
// identity.
//
// Rank-3 inputs are a single (H, W, C) sample. Rank-4 inputs (N, H, W, C)
// are processed sample by sample with independent masks.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "targetdrop/attention.hpp"
#include "targetdrop/mask.hpp"

namespace targetdrop {

enum class Phase { kTrain, kInference };

struct DropConfig {
  double gamma = 0.15;
  std::size_t block_size = 5;
  Phase phase = Phase::kTrain;
  /// Only consumed by the random baselines; TargetDrop is deterministic.
  std::uint64_t seed = 0;

  /// Throws ConfigError unless 0 <= gamma <= 1 and block_size is odd.
  void validate() const;
};

/// floor(gamma * C), guarded against products like 0.29 * 100 landing just
/// below an integer.
std::size_t target_count(double gamma, std::size_t channels);

struct TargetSelection {
  std::vector<std::uint8_t> tags;
  std::size_t count = 0;
};

/// Tags exactly target_count(gamma, C) channels holding the largest scores.
/// Equal scores are ranked by ascending channel index.
TargetSelection select_target_channels(std::span<const double> scores, double gamma);

/// k x k block centred on (a, b), clipped to the map.
RegionBounds region_bounds(std::size_t a, std::size_t b, std::size_t k, std::size_t height,
                           std::size_t width);

/// Mask for one (H, W, C) sample given its attention scores.
DropMask build_mask(const Tensor& u, std::span<const double> scores, const DropConfig& cfg);

/// Applies the mask and rescales every channel by numel / kept. A channel
/// with nothing kept is written as zeros and counted by
/// fully_dropped_channel_events().
Tensor apply_and_normalize(const Tensor& u, const DropMask& mask);

struct TargetDropResult {
  Tensor output;
  /// One mask per sample; empty in the inference phase.
  std::vector<DropMask> masks;
};

TargetDropResult targetdrop_forward(const Tensor& u, const AttentionParams& p,
                                    const DropConfig& cfg);

/// Pull-back through the masked rescale with the masks held constant.
Tensor targetdrop_backward(const Tensor& grad_out, std::span<const DropMask> masks);
Tensor targetdrop_backward(const Tensor& grad_out, const DropMask& mask);

/// Number of fully dropped channels seen by apply_and_normalize in this
/// process.
std::size_t fully_dropped_channel_events() noexcept;
void reset_fully_dropped_channel_events() noexcept;

}  // namespace targetdrop
