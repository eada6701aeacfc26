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

#include <filesystem>

#include "oracles.hpp"
#include "targetdrop/binary_io.hpp"
#include "targetdrop/image_io.hpp"
#include "targetdrop/kv_config.hpp"
#include "targetdrop/target_drop.hpp"

using namespace targetdrop;

TEST_CASE("key=value parsing") {
  const auto kv = parse_key_values("# comment\n\n gamma = 0.15 \nk=5\r\nname=a=b\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0] == std::pair<std::string, std::string>{"gamma", "0.15"});
  CHECK(kv[1].second == "5");
  CHECK(kv[2].second == "a=b");
  CHECK_THROWS_WITH_AS(parse_key_values("a=1\nnonsense\n"), doctest::Contains("line 2"), ConfigError);
  CHECK(split_assignment("k=7").second == "7");
  CHECK_THROWS_AS(split_assignment("=7"), ConfigError);

  CHECK(parse_size("k", "12") == 12);
  CHECK_THROWS_AS(parse_size("k", "-1"), ConfigError);
  CHECK_THROWS_AS(parse_size("k", "3x"), ConfigError);
  CHECK(parse_double("g", "1e-3") == 1e-3);
  CHECK_THROWS_AS(parse_double("g", "nan"), ConfigError);
  CHECK_THROWS_AS(parse_double("g", ""), ConfigError);
  CHECK(parse_bool("b", "on"));
  CHECK_FALSE(parse_bool("b", "false"));
  CHECK_THROWS_AS(parse_bool("b", "maybe"), ConfigError);
  CHECK(parse_double_list("g", "0.05, 0.1,0.15") == std::vector<double>{0.05, 0.1, 0.15});
  CHECK(parse_size_list("k", "3,5,7") == std::vector<std::size_t>{3, 5, 7});
  CHECK(split_list(" ").empty());
}

TEST_CASE("KeyValueConfig rejects unknown keys") {
  KeyValueConfig cfg({{"gamma", "0.15"}, {"k", "5"}});
  cfg.merge_text("k=3\n");
  CHECK(cfg.get_size("k") == 3);
  CHECK(cfg.get_double("gamma") == 0.15);
  CHECK_THROWS_WITH_AS(cfg.set("kk", "3"), doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_AS(cfg.merge_text("bogus=1\n"), ConfigError);
  CHECK(cfg.to_text() == "gamma=0.15\nk=3\n");
}

TEST_CASE("binary reader bounds") {
  binary::Writer w;
  w.u32_be(0x0000080D);
  w.u64_le(42);
  w.f64_le(-0.5);
  const std::string bytes = w.str();
  CHECK(bytes.substr(0, 4) == std::string("\x00\x00\x08\x0D", 4));
  binary::Reader r(bytes);
  CHECK(r.u32_be() == 0x0000080Du);
  CHECK(r.u64_le() == 42u);
  CHECK(r.f64_le() == -0.5);
  CHECK(r.remaining() == 0);
  CHECK_THROWS_WITH_AS(r.u8(), doctest::Contains("offset 20"), FormatError);
}

TEST_CASE("netpbm round trips") {
  GrayImage g{3, 2, {0, 1, 2, 253, 254, 255}};
  const std::string pgm = encode_pgm(g);
  CHECK(pgm.substr(0, 11) == "P5\n3 2\n255\n");
  const auto g2 = decode_pgm(pgm);
  CHECK(g2.width == 3);
  CHECK(g2.height == 2);
  CHECK(g2.pixels == g.pixels);
  CHECK(decode_pgm("P5 # c\n3 2\n255\n" + std::string(6, 'x')).pixels.size() == 6);
  CHECK_THROWS_AS(decode_pgm("P6\n3 2\n255\n" + std::string(6, 'x')), FormatError);
  CHECK_THROWS_AS(decode_pgm(pgm.substr(0, pgm.size() - 1)), FormatError);

  RgbImage c{1, 2, {1, 2, 3, 4, 5, 6}};
  CHECK(decode_ppm(encode_ppm(c)).pixels == c.pixels);
}

TEST_CASE("heat colour ramp") {
  CHECK(heat_color(0.0) == std::array<std::uint8_t, 3>{0, 0, 128});
  CHECK(heat_color(1.0) == std::array<std::uint8_t, 3>{128, 0, 0});
  CHECK(heat_color(0.5) == std::array<std::uint8_t, 3>{128, 255, 128});
  CHECK(heat_color(-3.0) == heat_color(0.0));
  Tensor map({2, 3});
  map[5] = 1.0;
  const auto img = heatmap_image(map);
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  CHECK(img.pixels.size() == 18);
  CHECK(img.pixels[15] == 128);
}

TEST_CASE("mask dumps") {
  Tensor u({8, 8, 3});
  u.at(4, 4, 2) = 1.0;
  DropConfig cfg;
  cfg.gamma = 0.34;
  const auto m = build_mask(u, std::vector<double>{0.1, 0.2, 0.9}, cfg);
  const auto ch = mask_channel_image(m, 2);
  CHECK(ch.pixels[4 * 8 + 4] == 0);
  CHECK(ch.pixels[0] == 255);
  CHECK(mask_regions_text(m) == "# channel a b h1 h2 w1 w2 kept_count\n2 4 4 2 6 2 6 39\n");

  const auto dir = std::filesystem::temp_directory_path() / "targetdrop_mask_dump";
  std::filesystem::remove_all(dir);
  dump_mask(dir, m);
  for (int c = 0; c < 3; ++c) {
    const auto img = decode_pgm(binary::read_file(dir / ("mask_c" + std::to_string(c) + ".pgm")));
    CHECK(img.pixels == mask_channel_image(m, static_cast<std::size_t>(c)).pixels);
  }
  CHECK(binary::read_file(dir / "regions.txt") == mask_regions_text(m));
  std::filesystem::remove_all(dir);

  const auto montage = mask_montage(m, 2);
  CHECK(montage.width == 2 * 9 + 1);
  CHECK(montage.height == 2 * 9 + 1);
  CHECK(montage.pixels[0] == 128);
}

TEST_CASE("tensor files round-trip") {
  Rng rng(1);
  const Tensor t = oracle::random_tensor(rng, {2, 3, 4});
  CHECK(deserialize_tensor(serialize_tensor(t)) == t);
  const std::string bytes = serialize_tensor(t);
  CHECK_THROWS_AS(deserialize_tensor(bytes.substr(0, bytes.size() - 8)), FormatError);
  CHECK_THROWS_AS(deserialize_tensor("XXXXXXXX" + bytes.substr(8)), FormatError);
}
