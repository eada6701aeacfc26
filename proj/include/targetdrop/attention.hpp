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

// Channel attention gate: pooled channel statistics pushed through a
// bias-free bottleneck, M = sigmoid(W2 relu(W1 v)).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "targetdrop/tensor.hpp"

namespace targetdrop {

struct AttentionParams {
  std::size_t channels = 0;
  std::size_t reduction_ratio = 1;
  std::uint64_t seed = 0;
  /// When false (the default) the gate is a fixed random projection. The
  /// drop layer never back-propagates into the gate; a caller that wants
  /// to learn it must wire its own differentiable path through
  /// attention_backward.
  bool trainable = false;
  Matrix w1;  // (C / r) x C
  Matrix w2;  // C x (C / r)

  std::size_t hidden() const noexcept { return w1.rows(); }
  std::size_t parameter_count() const noexcept { return w1.rows() * w1.cols() + w2.rows() * w2.cols(); }

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

/// Glorot-uniform initialisation, reproducible from `seed`.
/// Throws ConfigError("invalid reduction ratio") unless r divides c.
AttentionParams init_attention(std::size_t c, std::size_t r, std::uint64_t seed,
                               bool trainable = false);

/// Channel attention map of an (H, W, C) tensor; every entry lies in (0, 1).
ChannelVector attention_map(const Tensor& u, const AttentionParams& p);

/// Intermediates of one gate evaluation, kept for attention_backward.
struct AttentionTrace {
  Shape input_shape;
  ChannelVector pooled;
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::vector<double> logits;
  ChannelVector map;
};

AttentionTrace attention_forward(const Tensor& u, const AttentionParams& p);

struct AttentionGrad {
  Matrix grad_w1;
  Matrix grad_w2;
  Tensor grad_input;
};

/// Pull-back of dL/dM through the gate. Only meaningful for callers that
/// route a differentiable loss through M themselves.
AttentionGrad attention_backward(const AttentionTrace& trace, const AttentionParams& p,
                                 std::span<const double> grad_map);

// Flat binary format: "TDATTN01", u64 C, u64 r, u64 seed, then w1 and w2
// row-major as little-endian float64.
std::string serialize_attention(const AttentionParams& p);
AttentionParams deserialize_attention(std::string_view bytes);
void save_attention(const std::filesystem::path& path, const AttentionParams& p);
AttentionParams load_attention(const std::filesystem::path& path);

}  // namespace targetdrop
