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

#include "targetdrop/target_drop.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

namespace targetdrop {

namespace {

std::atomic<std::size_t> g_fully_dropped{0};

void require_mask_matches(const Tensor& t, const DropMask& mask, const char* what) {
  const Shape expected = mask.shape();
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": tensor " + shape_to_string(t.shape()) +
                     " does not match mask " + shape_to_string(expected));
  }
}

// Shared by the forward rescale and its pull-back: x * s * numel / kept,
// zeros when nothing survives.
Tensor masked_rescale(const Tensor& x, const DropMask& mask, bool count_events) {
  const std::size_t c = mask.channels;
  const std::size_t numel = mask.plane_size();
  std::vector<double> factor(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (mask.kept_counts[ch] == 0) {
      if (count_events) g_fully_dropped.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    factor[ch] = static_cast<double>(numel) / static_cast<double>(mask.kept_counts[ch]);
  }
  Tensor out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t p = 0; p < numel; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = p * c + ch;
      if (mask.kept_counts[ch] == 0) continue;
      const double s = mask.keep[i];
      o[i] = in[i] * s * factor[ch];
    }
  }
  return out;
}

}  // namespace

void DropConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("drop probability gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
  if (block_size == 0 || block_size % 2 == 0) {
    throw ConfigError("block size k must be a positive odd integer, got " +
                      std::to_string(block_size));
  }
}

std::size_t target_count(double gamma, std::size_t channels) {
  const double exact = gamma * static_cast<double>(channels);
  const auto k = static_cast<std::size_t>(std::floor(exact + 1e-9));
  return std::min(k, channels);
}

TargetSelection select_target_channels(std::span<const double> scores, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  const std::size_t c = scores.size();
  TargetSelection sel;
  sel.tags.assign(c, 0);
  sel.count = target_count(gamma, c);
  if (sel.count == 0) return sel;

  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto higher = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sel.count),
                    order.end(), higher);
  for (std::size_t i = 0; i < sel.count; ++i) sel.tags[order[i]] = 1;
  return sel;
}

RegionBounds region_bounds(std::size_t a, std::size_t b, std::size_t k, std::size_t height,
                           std::size_t width) {
  if (a >= height || b >= width) throw ShapeError("region_bounds: centre outside the map");
  const std::size_t half = k / 2;
  RegionBounds r;
  r.h1 = a >= half ? a - half : 0;
  r.h2 = std::min(a + half, height - 1);
  r.w1 = b >= half ? b - half : 0;
  r.w2 = std::min(b + half, width - 1);
  return r;
}

DropMask build_mask(const Tensor& u, std::span<const double> scores, const DropConfig& cfg) {
  cfg.validate();
  if (u.rank() != 3) throw ShapeError("build_mask: expected (H, W, C) input");
  const std::size_t h = u.dim(0), w = u.dim(1), c = u.dim(2);
  if (scores.size() != c) throw ShapeError("build_mask: one score per channel required");
  if (h == 0 || w == 0) throw ShapeError("build_mask: degenerate shape");

  DropMask mask = DropMask::ones(h, w, c);
  auto sel = select_target_channels(scores, cfg.gamma);
  mask.tags = std::move(sel.tags);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (!mask.tags[ch]) continue;
    const SpatialIndex centre = argmax_spatial(u, ch);
    const RegionBounds r = region_bounds(centre.row, centre.col, cfg.block_size, h, w);
    for (std::size_t i = r.h1; i <= r.h2; ++i) {
      for (std::size_t j = r.w1; j <= r.w2; ++j) mask.drop(i, j, ch);
    }
    mask.regions.push_back({ch, centre, r});
    mask.kept_counts[ch] = h * w - r.cells();
    mask.scale[ch] = mask.kept_counts[ch] == 0
                         ? 0.0
                         : static_cast<double>(h * w) / static_cast<double>(mask.kept_counts[ch]);
  }
  return mask;
}

Tensor apply_and_normalize(const Tensor& u, const DropMask& mask) {
  require_mask_matches(u, mask, "apply_and_normalize");
  return masked_rescale(u, mask, true);
}

TargetDropResult targetdrop_forward(const Tensor& u, const AttentionParams& p,
                                    const DropConfig& cfg) {
  cfg.validate();
  if (cfg.phase == Phase::kInference) return {u, {}};

  if (u.rank() == 3) {
    auto scores = attention_map(u, p);
    auto mask = build_mask(u, scores, cfg);
    auto out = apply_and_normalize(u, mask);
    std::vector<DropMask> masks;
    masks.push_back(std::move(mask));
    return {std::move(out), std::move(masks)};
  }
  if (u.rank() != 4) {
    throw ShapeError("targetdrop_forward: expected (H, W, C) or (N, H, W, C), got " +
                     shape_to_string(u.shape()));
  }
  TargetDropResult result{Tensor(u.shape()), {}};
  result.masks.reserve(u.dim(0));
  for (std::size_t n = 0; n < u.dim(0); ++n) {
    const Tensor x = u.sample(n);
    auto scores = attention_map(x, p);
    auto mask = build_mask(x, scores, cfg);
    result.output.set_sample(n, apply_and_normalize(x, mask));
    result.masks.push_back(std::move(mask));
  }
  return result;
}

Tensor targetdrop_backward(const Tensor& grad_out, const DropMask& mask) {
  require_mask_matches(grad_out, mask, "targetdrop_backward");
  return masked_rescale(grad_out, mask, false);
}

Tensor targetdrop_backward(const Tensor& grad_out, std::span<const DropMask> masks) {
  if (grad_out.rank() == 3) {
    if (masks.size() != 1) throw ShapeError("targetdrop_backward: expected exactly one mask");
    return targetdrop_backward(grad_out, masks[0]);
  }
  if (grad_out.rank() != 4 || grad_out.dim(0) != masks.size()) {
    throw ShapeError("targetdrop_backward: one mask per sample required");
  }
  Tensor grad_in(grad_out.shape());
  for (std::size_t n = 0; n < masks.size(); ++n) {
    grad_in.set_sample(n, targetdrop_backward(grad_out.sample(n), masks[n]));
  }
  return grad_in;
}

std::size_t fully_dropped_channel_events() noexcept {
  return g_fully_dropped.load(std::memory_order_relaxed);
}

void reset_fully_dropped_channel_events() noexcept {
  g_fully_dropped.store(0, std::memory_order_relaxed);
}

}  // namespace targetdrop
