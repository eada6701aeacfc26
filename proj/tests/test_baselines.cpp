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

#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "targetdrop/baselines.hpp"
#include "targetdrop/target_drop.hpp"

using namespace targetdrop;

namespace {

std::size_t zeros(const DropMask& m) {
  return m.keep.size() - static_cast<std::size_t>(std::accumulate(m.keep.begin(), m.keep.end(), std::size_t{0}));
}

}  // namespace

TEST_CASE("drop method names round-trip") {
  for (auto m : {DropMethod::kNone, DropMethod::kTargetDrop, DropMethod::kDropout, DropMethod::kSpatialDropout,
                 DropMethod::kDropBlock, DropMethod::kCutout}) {
    CHECK(parse_drop_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_drop_method("attentiondrop"), ConfigError);
}

TEST_CASE("dropout_mask") {
  CHECK(dropout_mask({4, 4, 3}, 0.0, 1).keep == DropMask::ones(4, 4, 3).keep);
  CHECK(dropout_mask({4, 4, 3}, 0.3, 9) == dropout_mask({4, 4, 3}, 0.3, 9));
  CHECK_FALSE(dropout_mask({4, 4, 3}, 0.3, 9) == dropout_mask({4, 4, 3}, 0.3, 10));
  CHECK_THROWS_AS(dropout_mask({4, 4, 3}, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(dropout_mask({4, 4, 3}, -0.1, 1), ConfigError);
  CHECK_THROWS_AS(dropout_mask({4, 4}, 0.1, 1), ShapeError);

  const auto m = dropout_mask({100, 100, 100}, 0.5, 42);
  const double frac = static_cast<double>(zeros(m)) / 1e6;
  CHECK(std::abs(frac - 0.5) <= 0.002);
  CHECK(m.scale[0] == 2.0);
  CHECK(mask_stats(m).drop_fraction == frac);

  const auto stats = mask_stats(dropout_mask({32, 32, 64}, 0.1, 5));
  CHECK(std::abs(stats.drop_fraction - 0.1) <= 0.01);
}

TEST_CASE("spatialdropout_mask") {
  CHECK(spatialdropout_mask({3, 3, 5}, 0.0, 1).keep == DropMask::ones(3, 3, 5).keep);
  const auto m = spatialdropout_mask({2, 2, 1000}, 0.3, 77);
  const auto dropped = static_cast<std::size_t>(std::accumulate(m.tags.begin(), m.tags.end(), 0));
  CHECK(dropped >= 270);
  CHECK(dropped <= 330);
  for (std::size_t c = 0; c < 1000; ++c) {
    CHECK(m.kept_counts[c] == (m.tags[c] ? 0u : 4u));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(m.kept(i, j, c) == !m.tags[c]);
  }
  CHECK_THROWS_AS(spatialdropout_mask({2, 2, 2}, 1.0, 1), ConfigError);
}

TEST_CASE("dropblock_mask") {
  CHECK(dropblock_mask({6, 6, 2}, 0.0, 3, 1).keep == DropMask::ones(6, 6, 2).keep);
  const DropRegion seed{0, {4, 4}, {}};
  const auto one = dropblock_mask_from_seeds({8, 8, 1}, 3, std::span(&seed, 1));
  CHECK(zeros(one) == 9);
  CHECK(one.scale[0] == 64.0 / 55.0);
  CHECK_THROWS_AS(dropblock_mask({6, 6, 2}, 0.1, 4, 1), ConfigError);
  CHECK_THROWS_AS(dropblock_mask({6, 6, 2}, 1.5, 3, 1), ConfigError);
  const DropRegion outside{0, {8, 0}, {}};
  CHECK_THROWS_AS(dropblock_mask_from_seeds({8, 8, 1}, 3, std::span(&outside, 1)), ShapeError);
  // A block that does not fit leaves no valid seed position.
  CHECK(zeros(dropblock_mask({4, 4, 3}, 1.0, 5, 1)) == 0);
}

TEST_CASE("dropblock_mask: seeds stay in the valid interior and the zero-set matches brute force") {
  Rng rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8), c = 1 + rng.below(4);
    const std::size_t block = 1 + 2 * rng.below(3);
    const auto m = dropblock_mask({h, w, c}, rng.uniform(0.0, 0.4), block, rng.next_u64());
    std::vector<std::vector<oracle::Centre>> seeds(c);
    for (const auto& r : m.regions) {
      CHECK(r.center.row >= block / 2);
      CHECK(r.center.col >= block / 2);
      CHECK(r.center.row + block / 2 < h);
      CHECK(r.center.col + block / 2 < w);
      seeds[r.channel].push_back({static_cast<long>(r.center.row), static_cast<long>(r.center.col)});
    }
    CHECK(m.keep == oracle::dropblock_keep(h, w, c, block, seeds));
  }
}

TEST_CASE("cutout_mask") {
  const auto centred = cutout_mask_at(32, 32, 32, {16, 16});
  CHECK(zeros(centred) == 32 * 32);
  const auto interior = cutout_mask_at(32, 32, 16, {16, 16});
  CHECK(zeros(interior) == 256);
  CHECK(interior.channels == 1);
  CHECK(interior.scale[0] == 1.0);
  CHECK(zeros(cutout_mask_at(32, 32, 16, {0, 0})) < 256);
  CHECK(zeros(cutout_mask_at(32, 32, 16, {0, 0})) == 8 * 8);
  CHECK_THROWS_AS(cutout_mask_at(32, 32, 0, {0, 0}), ConfigError);
  CHECK(cutout_mask(32, 32, 16, 3) == cutout_mask(32, 32, 16, 3));

  // One hole shared by every channel of the image.
  Rng rng(3);
  const Tensor img = oracle::random_tensor(rng, {8, 8, 3}, 1, 2);
  const auto hole = cutout_mask_at(8, 8, 4, {3, 5});
  const Tensor out = apply_mask(img, hole);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      for (std::size_t c = 0; c < 3; ++c) {
        const bool in_hole = i >= 1 && i <= 4 && j >= 3 && j <= 6;
        CHECK(out.at(i, j, c) == (in_hole ? 0.0 : img.at(i, j, c)));
      }
}

TEST_CASE("mask_stats") {
  const auto id = mask_stats(DropMask::ones(8, 8, 4));
  CHECK(id.drop_fraction == 0.0);
  CHECK(id.mean_block_size == 0.0);
  CHECK(id.contiguity == 0.0);

  Tensor u({8, 8, 4});
  u.at(4, 4, 1) = 1.0;
  DropConfig cfg;
  cfg.gamma = 0.25;
  cfg.block_size = 5;
  const auto td = build_mask(u, std::vector<double>{0.1, 0.9, 0.2, 0.3}, cfg);
  const auto s = mask_stats(td);
  CHECK(s.per_channel_fractions[1] == 25.0 / 64.0);
  CHECK(s.per_channel_fractions[0] == 0.0);
  CHECK(s.drop_fraction == 25.0 / 256.0);
  CHECK(s.mean_block_size == 25.0);
  // 5x5 block: 100 in-map neighbour slots, 80 of them inside the block.
  CHECK(s.contiguity == 0.8);

  const DropRegion seeds[2] = {{0, {1, 1}, {}}, {0, {6, 6}, {}}};
  const auto two = mask_stats(dropblock_mask_from_seeds({8, 8, 1}, 3, seeds));
  CHECK(two.mean_block_size == 9.0);
}
