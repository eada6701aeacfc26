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

#include "targetdrop/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "targetdrop/binary_io.hpp"

namespace targetdrop {

namespace {

constexpr std::string_view kTensorMagic = "TDTENS01";

std::string netpbm_header(const char* magic, std::size_t w, std::size_t h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

// Parses "P5"/"P6" headers: magic, width, height, maxval separated by
// whitespace (comments allowed), then exactly one whitespace byte.
struct NetpbmHeader {
  std::size_t width = 0, height = 0, data_offset = 0;
};

NetpbmHeader parse_netpbm(std::string_view bytes, std::string_view magic) {
  if (bytes.substr(0, 2) != magic) throw FormatError("netpbm: expected magic " + std::string(magic) + " at offset 0");
  std::size_t pos = 2;
  std::size_t fields[3] = {0, 0, 0};
  for (auto& f : fields) {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      f = f * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
    }
    if (pos == start) throw FormatError("netpbm: malformed header at offset " + std::to_string(pos));
  }
  if (fields[2] != 255) throw FormatError("netpbm: only maxval 255 is supported");
  if (pos >= bytes.size()) throw FormatError("netpbm: truncated header");
  return {fields[0], fields[1], pos + 1};
}

}  // namespace

std::string encode_pgm(const GrayImage& img) {
  if (img.pixels.size() != img.width * img.height) throw ShapeError("pgm: pixel count mismatch");
  return netpbm_header("P5", img.width, img.height) + std::string(img.pixels.begin(), img.pixels.end());
}

std::string encode_ppm(const RgbImage& img) {
  if (img.pixels.size() != 3 * img.width * img.height) throw ShapeError("ppm: pixel count mismatch");
  return netpbm_header("P6", img.width, img.height) + std::string(img.pixels.begin(), img.pixels.end());
}

GrayImage decode_pgm(std::string_view bytes) {
  const auto h = parse_netpbm(bytes, "P5");
  GrayImage img{h.width, h.height, {}};
  const std::size_t n = h.width * h.height;
  if (bytes.size() - h.data_offset != n) throw FormatError("pgm: pixel data size mismatch");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end());
  return img;
}

RgbImage decode_ppm(std::string_view bytes) {
  const auto h = parse_netpbm(bytes, "P6");
  RgbImage img{h.width, h.height, {}};
  const std::size_t n = 3 * h.width * h.height;
  if (bytes.size() - h.data_offset != n) throw FormatError("ppm: pixel data size mismatch");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end());
  return img;
}

GrayImage mask_channel_image(const DropMask& mask, std::size_t channel) {
  if (channel >= mask.channels) throw ShapeError("mask channel out of range");
  GrayImage img{mask.width, mask.height, std::vector<std::uint8_t>(mask.plane_size())};
  for (std::size_t i = 0; i < mask.height; ++i) {
    for (std::size_t j = 0; j < mask.width; ++j) {
      img.pixels[i * mask.width + j] = mask.kept(i, j, channel) ? 255 : 0;
    }
  }
  return img;
}

std::string mask_regions_text(const DropMask& mask) {
  std::ostringstream os;
  os << "# channel a b h1 h2 w1 w2 kept_count\n";
  for (const auto& r : mask.regions) {
    os << r.channel << ' ' << r.center.row << ' ' << r.center.col << ' ' << r.bounds.h1 << ' '
       << r.bounds.h2 << ' ' << r.bounds.w1 << ' ' << r.bounds.w2 << ' '
       << mask.kept_counts[r.channel] << '\n';
  }
  return os.str();
}

void dump_mask(const std::filesystem::path& dir, const DropMask& mask) {
  std::filesystem::create_directories(dir);
  for (std::size_t c = 0; c < mask.channels; ++c) {
    binary::write_file(dir / ("mask_c" + std::to_string(c) + ".pgm"),
                       encode_pgm(mask_channel_image(mask, c)));
  }
  binary::write_file(dir / "regions.txt", mask_regions_text(mask));
}

GrayImage mask_montage(const DropMask& mask, std::size_t columns) {
  columns = std::max<std::size_t>(1, std::min(columns, mask.channels));
  const std::size_t rows = (mask.channels + columns - 1) / columns;
  GrayImage img;
  img.width = columns * (mask.width + 1) + 1;
  img.height = rows * (mask.height + 1) + 1;
  img.pixels.assign(img.width * img.height, 128);
  for (std::size_t c = 0; c < mask.channels; ++c) {
    const std::size_t oy = (c / columns) * (mask.height + 1) + 1;
    const std::size_t ox = (c % columns) * (mask.width + 1) + 1;
    for (std::size_t i = 0; i < mask.height; ++i) {
      for (std::size_t j = 0; j < mask.width; ++j) {
        img.pixels[(oy + i) * img.width + ox + j] = mask.kept(i, j, c) ? 255 : 0;
      }
    }
  }
  return img;
}

std::array<std::uint8_t, 3> heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto ch = [v](double centre) {
    const double x = std::clamp(1.5 - std::abs(4.0 * v - centre), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * x));
  };
  return {ch(3.0), ch(2.0), ch(1.0)};
}

RgbImage heatmap_image(const Tensor& heatmap) {
  if (heatmap.rank() != 2) throw ShapeError("heatmap must be (H, W)");
  RgbImage img{heatmap.dim(1), heatmap.dim(0), {}};
  img.pixels.reserve(3 * heatmap.size());
  for (double v : heatmap.data()) {
    const auto rgb = heat_color(v);
    img.pixels.insert(img.pixels.end(), rgb.begin(), rgb.end());
  }
  return img;
}

std::string serialize_tensor(const Tensor& t) {
  binary::Writer w;
  w.bytes(kTensorMagic);
  w.u32_le(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u64_le(d);
  w.f64_le(t.data());
  return w.str();
}

Tensor deserialize_tensor(std::string_view bytes) {
  binary::Reader r(bytes);
  if (r.remaining() < kTensorMagic.size() || r.bytes(kTensorMagic.size()) != kTensorMagic) {
    throw FormatError("tensor file: bad magic at offset 0");
  }
  Shape shape(r.u32_le());
  for (auto& d : shape) d = r.u64_le();
  const std::size_t n = shape_numel(shape);
  if (n > r.remaining() / 8) {
    throw FormatError("tensor file: truncated data at offset " + std::to_string(r.offset()));
  }
  std::vector<double> v(n);
  for (auto& x : v) x = r.f64_le();
  if (r.remaining() != 0) {
    throw FormatError("tensor file: trailing bytes at offset " + std::to_string(r.offset()));
  }
  return Tensor(std::move(shape), std::move(v));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  binary::write_file(path, serialize_tensor(t));
}

Tensor load_tensor(const std::filesystem::path& path) { return deserialize_tensor(binary::read_file(path)); }

}  // namespace targetdrop
