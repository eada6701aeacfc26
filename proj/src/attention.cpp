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

#include "targetdrop/attention.hpp"

#include <cmath>

#include "targetdrop/binary_io.hpp"
#include "targetdrop/random.hpp"

namespace targetdrop {

namespace {

constexpr std::string_view kMagic = "TDATTN01";

void fill_glorot(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (auto& x : m.data()) x = rng.uniform(-limit, limit);
}

}  // namespace

AttentionParams init_attention(std::size_t c, std::size_t r, std::uint64_t seed, bool trainable) {
  if (c == 0) throw ConfigError("attention gate needs at least one channel");
  if (r == 0 || c % r != 0) {
    throw ConfigError("invalid reduction ratio: r=" + std::to_string(r) +
                      " does not divide C=" + std::to_string(c));
  }
  AttentionParams p;
  p.channels = c;
  p.reduction_ratio = r;
  p.seed = seed;
  p.trainable = trainable;
  p.w1 = Matrix(c / r, c);
  p.w2 = Matrix(c, c / r);
  Rng rng(seed);
  fill_glorot(p.w1, rng);
  fill_glorot(p.w2, rng);
  return p;
}

AttentionTrace attention_forward(const Tensor& u, const AttentionParams& p) {
  if (u.rank() != 3 || u.dim(2) != p.channels) {
    throw ShapeError("attention_map: input " + shape_to_string(u.shape()) + " does not have " +
                     std::to_string(p.channels) + " channels");
  }
  AttentionTrace t;
  t.input_shape = u.shape();
  t.pooled = global_avg_pool(u);
  t.hidden_pre = matvec(p.w1, t.pooled);
  t.hidden = relu(t.hidden_pre);
  t.logits = matvec(p.w2, t.hidden);
  t.map = sigmoid(t.logits);
  return t;
}

ChannelVector attention_map(const Tensor& u, const AttentionParams& p) {
  return attention_forward(u, p).map;
}

AttentionGrad attention_backward(const AttentionTrace& trace, const AttentionParams& p,
                                 std::span<const double> grad_map) {
  auto g_logits = sigmoid_backward(trace.logits, grad_map);
  auto g2 = matvec_backward(p.w2, trace.hidden, g_logits);
  auto g_hidden_pre = relu_backward(trace.hidden_pre, g2.grad_x);
  auto g1 = matvec_backward(p.w1, trace.pooled, g_hidden_pre);
  return {std::move(g1.grad_w), std::move(g2.grad_w),
          global_avg_pool_backward(g1.grad_x, trace.input_shape)};
}

std::string serialize_attention(const AttentionParams& p) {
  binary::Writer w;
  w.bytes(kMagic);
  w.u64_le(p.channels);
  w.u64_le(p.reduction_ratio);
  w.u64_le(p.seed);
  w.f64_le(p.w1.data());
  w.f64_le(p.w2.data());
  return w.str();
}

AttentionParams deserialize_attention(std::string_view bytes) {
  binary::Reader r(bytes);
  if (r.remaining() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
    throw FormatError("attention file: bad magic at offset 0");
  }
  AttentionParams p;
  p.channels = r.u64_le();
  p.reduction_ratio = r.u64_le();
  p.seed = r.u64_le();
  if (p.channels == 0 || p.reduction_ratio == 0 || p.channels % p.reduction_ratio != 0) {
    throw FormatError("attention file: invalid reduction ratio in header");
  }
  const std::size_t hidden = p.channels / p.reduction_ratio;
  p.w1 = Matrix(hidden, p.channels);
  p.w2 = Matrix(p.channels, hidden);
  for (auto& x : p.w1.data()) x = r.f64_le();
  for (auto& x : p.w2.data()) x = r.f64_le();
  if (r.remaining() != 0) {
    throw FormatError("attention file: trailing bytes at offset " + std::to_string(r.offset()));
  }
  return p;
}

void save_attention(const std::filesystem::path& path, const AttentionParams& p) {
  binary::write_file(path, serialize_attention(p));
}

AttentionParams load_attention(const std::filesystem::path& path) {
  return deserialize_attention(binary::read_file(path));
}

}  // namespace targetdrop
