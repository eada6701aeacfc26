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

#include <array>
#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "targetdrop/binary_io.hpp"
#include "targetdrop/data.hpp"

using namespace targetdrop;

namespace {

// Four 8x8 single-channel images; pixel (n, i, j) = 64 n + 8 i + j - 1
// (mod 256), labels 3 1 4 1. Headers are written out byte by byte.
std::string fixture_images() {
  std::string s = {'\x00', '\x00', '\x08', '\x03', '\x00', '\x00', '\x00', '\x04',
                   '\x00', '\x00', '\x00', '\x08', '\x00', '\x00', '\x00', '\x08'};
  for (int n = 0; n < 4; ++n)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) s.push_back(static_cast<char>((64 * n + 8 * i + j + 255) % 256));
  return s;
}

std::string fixture_labels() {
  return {'\x00', '\x00', '\x08', '\x01', '\x00', '\x00', '\x00', '\x04', '\x03', '\x01', '\x04', '\x01'};
}

ImageDataset two_value_dataset() {
  // Channel 0 holds 10 and 30 in equal numbers; channel 1 holds 0 three
  // times and 200 once.
  ImageDataset ds;
  ds.classes = 2;
  ds.labels = {0, 1};
  ds.images = Tensor({2, 1, 2, 2}, std::vector<double>{10, 0, 30, 0, 10, 0, 30, 200});
  return ds;
}

}  // namespace

TEST_CASE("decode_idx: authored fixture") {
  const auto ds = decode_idx(fixture_images(), fixture_labels());
  CHECK(ds.images.shape() == Shape{4, 8, 8, 1});
  CHECK(ds.labels == std::vector<std::size_t>{3, 1, 4, 1});
  CHECK(ds.classes == 5);
  CHECK(ds.images.sample(0).at(0, 0, 0) == 255.0);
  CHECK(ds.images.sample(0).at(0, 1, 0) == 0.0);
  CHECK(ds.images.sample(2).at(7, 7, 0) == 190.0);
  CHECK(ds.images.sample(3).at(3, 4, 0) == 219.0);
  CHECK_NOTHROW(ds.validate());
}

TEST_CASE("decode_idx: malformed input reports an offset") {
  CHECK_THROWS_WITH_AS(decode_idx("", fixture_labels()), doctest::Contains("offset 0"), FormatError);
  std::string bad = fixture_images();
  bad[2] = '\x09';
  CHECK_THROWS_WITH_AS(decode_idx(bad, fixture_labels()), doctest::Contains("bad magic"), FormatError);
  const std::string truncated = fixture_images().substr(0, 100);
  CHECK_THROWS_WITH_AS(decode_idx(truncated, fixture_labels()), doctest::Contains("offset 16"), FormatError);
  CHECK_THROWS_AS(decode_idx(fixture_images() + "x", fixture_labels()), FormatError);
  CHECK_THROWS_AS(decode_idx(fixture_images(), fixture_labels().substr(0, 11)), FormatError);
  std::string wrong_count = fixture_labels();
  wrong_count[7] = '\x05';
  CHECK_THROWS_AS(decode_idx(fixture_images(), wrong_count + "\x02"), FormatError);
}

TEST_CASE("IDX write/read round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "targetdrop_idx_test";
  const auto ds = decode_idx(fixture_images(), fixture_labels());
  CHECK(encode_idx_images(ds) == fixture_images());
  CHECK(encode_idx_labels(ds) == fixture_labels());
  write_idx(dir / "img.idx", dir / "lbl.idx", ds);
  const auto back = load_idx(dir / "img.idx", dir / "lbl.idx");
  CHECK(back.images == ds.images);
  CHECK(back.labels == ds.labels);

  ToyDatasetConfig cfg;
  cfg.classes = 3;
  cfg.n_per_class = 4;
  cfg.image_size = 8;
  const auto toy = make_toy_dataset(cfg);
  write_idx(dir / "toy_img.idx", dir / "toy_lbl.idx", toy);
  const auto toy_back = load_idx(dir / "toy_img.idx", dir / "toy_lbl.idx");
  CHECK(toy_back.images == toy.images);
  CHECK(toy_back.labels == toy.labels);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_idx(dir / "missing", dir / "missing"), Error);
}

TEST_CASE("CIFAR binary batches") {
  std::string rec(1 + 3072, '\0');
  rec[0] = 7;
  // Red plane value 1, green 2, blue 3 at pixel (0, 1).
  rec[1 + 0 * 1024 + 1] = 1;
  rec[1 + 1 * 1024 + 1] = 2;
  rec[1 + 2 * 1024 + 1] = 3;
  const auto path = std::filesystem::temp_directory_path() / "targetdrop_cifar_test.bin";
  binary::write_file(path, rec + rec);
  const auto ds = load_cifar_batches({path});
  CHECK(ds.images.shape() == Shape{2, 32, 32, 3});
  CHECK(ds.labels == std::vector<std::size_t>{7, 7});
  const Tensor img = ds.image(1);
  CHECK(img.at(0, 1, 0) == 1.0);
  CHECK(img.at(0, 1, 1) == 2.0);
  CHECK(img.at(0, 1, 2) == 3.0);
  binary::write_file(path, rec.substr(0, 100));
  CHECK_THROWS_AS(load_cifar_batches({path}), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("normalisation") {
  SUBCASE("closed-form statistics of a two-value channel") {
    auto ds = two_value_dataset();
    const auto stats = compute_norm_stats(ds);
    CHECK(stats.mean[0] == 20.0);
    CHECK(stats.stddev[0] == 10.0);
    CHECK(stats.mean[1] == 50.0);
    CHECK(stats.stddev[1] == doctest::Approx(std::sqrt(7500.0)).epsilon(1e-14));
    const auto applied = normalize(ds);
    CHECK(applied == stats);
    CHECK(ds.normalized);
    CHECK(ds.images.sample(0).at(0, 0, 0) == -1.0);
    CHECK(ds.images.sample(0).at(0, 1, 0) == 1.0);
  }
  SUBCASE("normalised training split has zero mean and unit deviation") {
    ToyDatasetConfig cfg;
    cfg.n_per_class = 10;
    auto ds = make_toy_dataset(cfg);
    normalize(ds);
    const auto after = compute_norm_stats(ds);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(after.mean[c]) <= 1e-10);
      CHECK(std::abs(after.stddev[c] - 1.0) <= 1e-10);
    }
  }
  SUBCASE("a constant channel is degenerate") {
    auto ds = two_value_dataset();
    for (std::size_t i = 1; i < ds.images.size(); i += 2) ds.images[i] = 5.0;
    CHECK_THROWS_WITH_AS(compute_norm_stats(ds), doctest::Contains("degenerate channel"), Error);
  }
  SUBCASE("normalising twice is refused unless forced, and differs from once") {
    auto ds = two_value_dataset();
    const auto stats = normalize(ds);
    CHECK_THROWS_AS(normalize(ds), Error);
    CHECK_THROWS_AS(apply_normalization(ds, stats), Error);
    const Tensor once = ds.images;
    apply_normalization(ds, stats, true);
    CHECK_FALSE(ds.images == once);
  }
}

TEST_CASE("augment: identities") {
  Rng rng(1);
  const Tensor img = oracle::random_tensor(rng, {6, 7, 3}, 1, 255);
  CHECK(augment(img, AugmentParams{4, 4, false}) == img);
  const Tensor flipped = augment(img, AugmentParams{4, 4, true});
  CHECK(flipped.at(2, 0, 1) == img.at(2, 6, 1));
  CHECK(augment(flipped, AugmentParams{4, 4, true}) == img);

  // Offset (0, 0) shifts content down-right by 4 and fills with zeros.
  const Tensor shifted = augment(img, AugmentParams{0, 0, false});
  CHECK(shifted.shape() == img.shape());
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      for (std::size_t c = 0; c < 3; ++c) {
        const double expected = i >= 4 && j >= 4 ? img.at(i - 4, j - 4, c) : 0.0;
        CHECK(shifted.at(i, j, c) == expected);
      }
  CHECK(augment(img, 77) == augment(img, 77));
  CHECK_THROWS_AS(augment(img, AugmentParams{9, 0, false}), ShapeError);
}

TEST_CASE("augment: crop offsets are uniform over the 9x9 grid and flips are fair") {
  constexpr int kDraws = 100000;
  std::array<int, 81> counts{};
  int flips = 0;
  for (int s = 0; s < kDraws; ++s) {
    Rng rng(derive_seed(2718, {static_cast<std::uint64_t>(s)}));
    const auto p = draw_augment_params(rng);
    REQUIRE(p.offset_row <= 8);
    REQUIRE(p.offset_col <= 8);
    ++counts[p.offset_row * 9 + p.offset_col];
    flips += p.flip;
  }
  const double expected = kDraws / 81.0;
  double chi2 = 0.0, tv = 0.0;
  for (int c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
    tv += std::abs(c - expected) / kDraws;
  }
  tv /= 2.0;
  // Total variation distance to the uniform law within 2%, and a chi-square
  // statistic below the 0.999 quantile for 80 degrees of freedom.
  CHECK(tv <= 0.02);
  CHECK(chi2 < 124.84);
  CHECK(std::abs(flips / static_cast<double>(kDraws) - 0.5) <= 0.01);
}

TEST_CASE("toy dataset") {
  ToyDatasetConfig cfg;
  cfg.n_per_class = 20;
  const auto a = make_toy_dataset(cfg);
  const auto b = make_toy_dataset(cfg);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK(a.images.shape() == Shape{200, 16, 16, 3});
  std::vector<std::size_t> hist(10, 0);
  for (auto l : a.labels) ++hist[l];
  for (auto h : hist) CHECK(h == 20);
  CHECK_NOTHROW(a.validate());

  const auto test = make_toy_dataset(cfg, "test");
  CHECK_FALSE(test.images == a.images);
  cfg.seed = 2;
  CHECK_FALSE(make_toy_dataset(cfg).images == a.images);

  const auto parsed = parse_toy_config("# toy\nclasses = 4\nn_per_class=3\nimage_size=12\nnoise=0\nseed=9\n");
  CHECK(parsed.classes == 4);
  CHECK(parsed.n_per_class == 3);
  CHECK(parsed.image_size == 12);
  CHECK(parsed.noise == 0.0);
  CHECK(parsed.seed == 9);
  CHECK_THROWS_AS(parse_toy_config("colour=1\n"), ConfigError);
  ToyDatasetConfig bad;
  bad.classes = 1;
  CHECK_THROWS_AS(make_toy_dataset(bad), ConfigError);
}
