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

#include "targetdrop/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "targetdrop/random.hpp"

namespace targetdrop {

namespace {

void require_feature_shape(const Shape& shape, const char* what) {
  if (shape.size() != 3 || shape[0] == 0 || shape[1] == 0 || shape[2] == 0) {
    throw ShapeError(std::string(what) + ": expected nonempty (H, W, C), got " +
                     shape_to_string(shape));
  }
}

void require_rate(double rate, const char* what) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError(std::string(what) + ": rate must lie in [0, 1), got " +
                      std::to_string(rate));
  }
}

// Clipped interval [centre - size / 2, centre - size / 2 + size - 1].
std::pair<std::size_t, std::size_t> clipped_span(std::size_t centre, std::size_t size,
                                                 std::size_t extent) {
  const auto lo = static_cast<std::ptrdiff_t>(centre) - static_cast<std::ptrdiff_t>(size / 2);
  const auto hi = lo + static_cast<std::ptrdiff_t>(size) - 1;
  return {static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo, 0)),
          static_cast<std::size_t>(std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(extent) - 1))};
}

}  // namespace

std::string to_string(DropMethod m) {
  switch (m) {
    case DropMethod::kNone: return "none";
    case DropMethod::kTargetDrop: return "targetdrop";
    case DropMethod::kDropout: return "dropout";
    case DropMethod::kSpatialDropout: return "spatialdropout";
    case DropMethod::kDropBlock: return "dropblock";
    case DropMethod::kCutout: return "cutout";
  }
  return "unknown";
}

DropMethod parse_drop_method(const std::string& name) {
  for (auto m : {DropMethod::kNone, DropMethod::kTargetDrop, DropMethod::kDropout,
                 DropMethod::kSpatialDropout, DropMethod::kDropBlock, DropMethod::kCutout}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown drop method '" + name + "'");
}

DropMask dropout_mask(const Shape& shape, double rate, std::uint64_t seed) {
  require_feature_shape(shape, "dropout_mask");
  require_rate(rate, "dropout_mask");
  DropMask m = DropMask::ones(shape[0], shape[1], shape[2]);
  if (rate > 0.0) {
    Rng rng(seed);
    for (auto& k : m.keep) k = rng.bernoulli(rate) ? 0 : 1;
    m.recount();
  }
  m.scale.assign(m.channels, 1.0 / (1.0 - rate));
  return m;
}

DropMask spatialdropout_mask(const Shape& shape, double rate, std::uint64_t seed) {
  require_feature_shape(shape, "spatialdropout_mask");
  require_rate(rate, "spatialdropout_mask");
  DropMask m = DropMask::ones(shape[0], shape[1], shape[2]);
  if (rate > 0.0) {
    Rng rng(seed);
    for (std::size_t c = 0; c < m.channels; ++c) m.tags[c] = rng.bernoulli(rate) ? 1 : 0;
    for (std::size_t p = 0; p < m.plane_size(); ++p) {
      for (std::size_t c = 0; c < m.channels; ++c) m.keep[p * m.channels + c] = m.tags[c] ? 0 : 1;
    }
    m.recount();
  }
  m.scale.assign(m.channels, 1.0 / (1.0 - rate));
  return m;
}

DropMask dropblock_mask_from_seeds(const Shape& shape, std::size_t block,
                                   std::span<const DropRegion> seeds) {
  require_feature_shape(shape, "dropblock_mask");
  if (block == 0 || block % 2 == 0) throw ConfigError("dropblock: block size must be odd");
  DropMask m = DropMask::ones(shape[0], shape[1], shape[2]);
  for (const auto& s : seeds) {
    if (s.channel >= m.channels || s.center.row >= m.height || s.center.col >= m.width) {
      throw ShapeError("dropblock: seed outside the tensor");
    }
    const auto [h1, h2] = clipped_span(s.center.row, block, m.height);
    const auto [w1, w2] = clipped_span(s.center.col, block, m.width);
    for (std::size_t i = h1; i <= h2; ++i) {
      for (std::size_t j = w1; j <= w2; ++j) m.drop(i, j, s.channel);
    }
    m.regions.push_back({s.channel, s.center, {h1, h2, w1, w2}});
  }
  m.recount();
  const std::size_t kept = std::accumulate(m.kept_counts.begin(), m.kept_counts.end(), std::size_t{0});
  const double f = kept == 0 ? 0.0 : static_cast<double>(m.keep.size()) / static_cast<double>(kept);
  m.scale.assign(m.channels, f);
  return m;
}

DropMask dropblock_mask(const Shape& shape, double seed_rate, std::size_t block,
                        std::uint64_t seed) {
  require_feature_shape(shape, "dropblock_mask");
  if (!(seed_rate >= 0.0 && seed_rate <= 1.0)) throw ConfigError("dropblock: seed rate must lie in [0, 1]");
  if (block == 0 || block % 2 == 0) throw ConfigError("dropblock: block size must be odd");
  const std::size_t h = shape[0], w = shape[1], c = shape[2];
  const std::size_t half = block / 2;
  std::vector<DropRegion> seeds;
  // Seeds are only drawn where the whole block fits inside the map.
  if (seed_rate > 0.0 && block <= h && block <= w) {
    Rng rng(seed);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = half; i + half < h; ++i) {
        for (std::size_t j = half; j + half < w; ++j) {
          if (rng.bernoulli(seed_rate)) seeds.push_back({ch, {i, j}, {}});
        }
      }
    }
  }
  return dropblock_mask_from_seeds(shape, block, seeds);
}

DropMask cutout_mask_at(std::size_t height, std::size_t width, std::size_t size,
                        SpatialIndex centre) {
  if (size == 0) throw ConfigError("cutout: size must be at least 1");
  if (height == 0 || width == 0) throw ShapeError("cutout: empty image");
  if (centre.row >= height || centre.col >= width) throw ShapeError("cutout: centre outside image");
  DropMask m = DropMask::ones(height, width, 1);
  const auto [h1, h2] = clipped_span(centre.row, size, height);
  const auto [w1, w2] = clipped_span(centre.col, size, width);
  for (std::size_t i = h1; i <= h2; ++i) {
    for (std::size_t j = w1; j <= w2; ++j) m.drop(i, j, 0);
  }
  m.regions.push_back({0, centre, {h1, h2, w1, w2}});
  m.recount();
  return m;
}

DropMask cutout_mask(std::size_t height, std::size_t width, std::size_t size, std::uint64_t seed) {
  if (height == 0 || width == 0) throw ShapeError("cutout: empty image");
  Rng rng(seed);
  const std::size_t row = rng.below(height);
  const std::size_t col = rng.below(width);
  return cutout_mask_at(height, width, size, {row, col});
}

MaskStats mask_stats(const DropMask& mask) {
  MaskStats s;
  const std::size_t h = mask.height, w = mask.width, c = mask.channels;
  const std::size_t plane = mask.plane_size();
  s.per_channel_fractions.assign(c, 0.0);
  std::size_t dropped_total = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t dropped = plane - mask.kept_counts[ch];
    dropped_total += dropped;
    s.per_channel_fractions[ch] = plane ? static_cast<double>(dropped) / static_cast<double>(plane) : 0.0;
  }
  if (!mask.keep.empty()) {
    s.drop_fraction = static_cast<double>(dropped_total) / static_cast<double>(mask.keep.size());
  }

  std::size_t neighbour_pairs = 0, dropped_pairs = 0, components = 0;
  std::vector<std::uint8_t> seen(plane);
  std::vector<std::size_t> stack;
  constexpr int kDi[] = {-1, 1, 0, 0};
  constexpr int kDj[] = {0, 0, -1, 1};
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        if (mask.kept(i, j, ch)) continue;
        for (int d = 0; d < 4; ++d) {
          const auto ni = static_cast<std::ptrdiff_t>(i) + kDi[d];
          const auto nj = static_cast<std::ptrdiff_t>(j) + kDj[d];
          if (ni < 0 || nj < 0 || ni >= static_cast<std::ptrdiff_t>(h) ||
              nj >= static_cast<std::ptrdiff_t>(w)) {
            continue;
          }
          ++neighbour_pairs;
          if (!mask.kept(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj), ch)) ++dropped_pairs;
        }
        if (seen[i * w + j]) continue;
        // Flood fill one component.
        ++components;
        seen[i * w + j] = 1;
        stack.assign(1, i * w + j);
        while (!stack.empty()) {
          const std::size_t p = stack.back();
          stack.pop_back();
          const std::size_t pi = p / w, pj = p % w;
          for (int d = 0; d < 4; ++d) {
            const auto ni = static_cast<std::ptrdiff_t>(pi) + kDi[d];
            const auto nj = static_cast<std::ptrdiff_t>(pj) + kDj[d];
            if (ni < 0 || nj < 0 || ni >= static_cast<std::ptrdiff_t>(h) ||
                nj >= static_cast<std::ptrdiff_t>(w)) {
              continue;
            }
            const std::size_t q = static_cast<std::size_t>(ni) * w + static_cast<std::size_t>(nj);
            if (seen[q] || mask.kept(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj), ch)) continue;
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
  }
  if (components) s.mean_block_size = static_cast<double>(dropped_total) / static_cast<double>(components);
  if (neighbour_pairs) s.contiguity = static_cast<double>(dropped_pairs) / static_cast<double>(neighbour_pairs);
  return s;
}

}  // namespace targetdrop
