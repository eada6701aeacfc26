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

#include "targetdrop/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "targetdrop/binary_io.hpp"
#include "targetdrop/kv_config.hpp"

namespace targetdrop {

namespace {

constexpr std::uint32_t kIdxUbyte = 0x0800;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::size_t> read_idx_header(binary::Reader& r, const char* what) {
  const std::size_t at = r.offset();
  const std::uint32_t magic = r.u32_be();
  const std::uint32_t dims = magic & 0xff;
  if ((magic & 0xffffff00u) != kIdxUbyte || dims == 0) {
    std::ostringstream os;
    os << what << ": bad magic 0x" << std::hex << magic << std::dec << " at offset " << at;
    throw FormatError(os.str());
  }
  std::vector<std::size_t> extents(dims);
  for (auto& e : extents) e = r.u32_be();
  return extents;
}

}  // namespace

void ImageDataset::validate() const {
  if (images.rank() != 4) throw ShapeError("dataset images must be (N, H, W, C)");
  if (images.dim(0) != labels.size()) {
    throw ShapeError("dataset has " + std::to_string(images.dim(0)) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (auto l : labels) {
    if (l >= classes) throw Error("label " + std::to_string(l) + " outside [0, classes)");
  }
  if (!normalized) {
    for (double v : images.data()) {
      if (!(v >= 0.0 && v <= 255.0)) throw Error("raw pixel value outside [0, 255]");
    }
  }
}

ImageDataset decode_idx(std::string_view image_bytes, std::string_view label_bytes,
                        std::string split) {
  binary::Reader ir(image_bytes);
  const auto dims = read_idx_header(ir, "idx images");
  if (dims.size() != 3 && dims.size() != 4) {
    throw FormatError("idx images: expected 3 or 4 dimensions, got " + std::to_string(dims.size()));
  }
  const std::size_t n = dims[0], h = dims[1], w = dims[2], c = dims.size() == 4 ? dims[3] : 1;
  const auto pixels = ir.bytes(n * h * w * c);
  if (ir.remaining() != 0) {
    throw FormatError("idx images: trailing bytes at offset " + std::to_string(ir.offset()));
  }

  binary::Reader lr(label_bytes);
  const auto ldims = read_idx_header(lr, "idx labels");
  if (ldims.size() != 1 || ldims[0] != n) {
    throw FormatError("idx labels: expected a vector of " + std::to_string(n) + " labels");
  }
  const auto raw_labels = lr.bytes(n);
  if (lr.remaining() != 0) {
    throw FormatError("idx labels: trailing bytes at offset " + std::to_string(lr.offset()));
  }

  ImageDataset ds;
  ds.split = std::move(split);
  std::vector<double> values(pixels.size());
  std::transform(pixels.begin(), pixels.end(), values.begin(),
                 [](char b) { return static_cast<double>(static_cast<std::uint8_t>(b)); });
  ds.images = Tensor({n, h, w, c}, std::move(values));
  ds.labels.resize(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<std::uint8_t>(raw_labels[i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = n ? max_label + 1 : 0;
  return ds;
}

ImageDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::string split) {
  return decode_idx(binary::read_file(images), binary::read_file(labels), std::move(split));
}

std::string encode_idx_images(const ImageDataset& ds) {
  if (ds.normalized) throw Error("idx export needs raw 8-bit pixels");
  ds.validate();
  binary::Writer w;
  const bool single = ds.channels() == 1;
  w.u32_be(kIdxUbyte | (single ? 3u : 4u));
  w.u32_be(static_cast<std::uint32_t>(ds.size()));
  w.u32_be(static_cast<std::uint32_t>(ds.height()));
  w.u32_be(static_cast<std::uint32_t>(ds.width()));
  if (!single) w.u32_be(static_cast<std::uint32_t>(ds.channels()));
  for (double v : ds.images.data()) {
    if (v != std::floor(v)) throw Error("idx export needs integral pixel values");
    w.u8(static_cast<std::uint8_t>(v));
  }
  return w.str();
}

std::string encode_idx_labels(const ImageDataset& ds) {
  binary::Writer w;
  w.u32_be(kIdxUbyte | 1u);
  w.u32_be(static_cast<std::uint32_t>(ds.size()));
  for (auto l : ds.labels) {
    if (l > 255) throw Error("idx labels are single bytes");
    w.u8(static_cast<std::uint8_t>(l));
  }
  return w.str();
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const ImageDataset& ds) {
  binary::write_file(images, encode_idx_images(ds));
  binary::write_file(labels, encode_idx_labels(ds));
}

ImageDataset load_cifar_batches(const std::vector<std::filesystem::path>& files,
                                std::string split, std::size_t classes) {
  constexpr std::size_t kSide = 32, kChannels = 3, kPlane = kSide * kSide;
  constexpr std::size_t kRecord = 1 + kChannels * kPlane;
  std::vector<double> values;
  std::vector<std::size_t> labels;
  for (const auto& f : files) {
    const std::string bytes = binary::read_file(f);
    if (bytes.empty() || bytes.size() % kRecord != 0) {
      throw FormatError("cifar batch " + f.string() + ": size " + std::to_string(bytes.size()) +
                        " is not a multiple of " + std::to_string(kRecord));
    }
    for (std::size_t off = 0; off < bytes.size(); off += kRecord) {
      const auto label = static_cast<std::uint8_t>(bytes[off]);
      if (label >= classes) {
        throw FormatError("cifar batch " + f.string() + ": label " + std::to_string(label) +
                          " at offset " + std::to_string(off));
      }
      labels.push_back(label);
      // Planar CHW on disk, interleaved HWC in memory.
      for (std::size_t p = 0; p < kPlane; ++p) {
        for (std::size_t c = 0; c < kChannels; ++c) {
          values.push_back(static_cast<std::uint8_t>(bytes[off + 1 + c * kPlane + p]));
        }
      }
    }
  }
  ImageDataset ds;
  ds.split = std::move(split);
  ds.classes = classes;
  ds.images = Tensor({labels.size(), kSide, kSide, kChannels}, std::move(values));
  ds.labels = std::move(labels);
  return ds;
}

NormStats compute_norm_stats(const ImageDataset& ds) {
  const std::size_t c = ds.channels();
  const std::size_t count = ds.images.size() / c;
  if (count == 0) throw Error("cannot compute statistics of an empty dataset");
  NormStats s{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  const auto d = ds.images.data();
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) s.mean[ch] += d[i * c + ch];
  }
  for (auto& m : s.mean) m /= static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double dev = d[i * c + ch] - s.mean[ch];
      s.stddev[ch] += dev * dev;
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    s.stddev[ch] = std::sqrt(s.stddev[ch] / static_cast<double>(count));
    if (s.stddev[ch] == 0.0) {
      throw Error("degenerate channel " + std::to_string(ch) + ": zero standard deviation");
    }
  }
  return s;
}

Tensor normalize_image(const Tensor& image, const NormStats& stats) {
  const std::size_t c = image.shape().back();
  if (stats.mean.size() != c || stats.stddev.size() != c) {
    throw ShapeError("normalisation statistics do not match the channel count");
  }
  Tensor out(image.shape());
  auto in = image.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t ch = i % c;
    o[i] = (in[i] - stats.mean[ch]) / stats.stddev[ch];
  }
  return out;
}

void apply_normalization(ImageDataset& ds, const NormStats& stats, bool force) {
  if (ds.normalized && !force) {
    throw Error("dataset '" + ds.split + "' is already normalised");
  }
  ds.images = normalize_image(ds.images, stats);
  ds.normalized = true;
}

NormStats normalize(ImageDataset& train, bool force) {
  if (train.normalized && !force) {
    throw Error("dataset '" + train.split + "' is already normalised");
  }
  auto stats = compute_norm_stats(train);
  apply_normalization(train, stats, force);
  return stats;
}

AugmentParams draw_augment_params(Rng& rng, const AugmentOptions& opts) {
  AugmentParams p{opts.pad, opts.pad, false};
  if (opts.crop) {
    p.offset_row = rng.below(2 * opts.pad + 1);
    p.offset_col = rng.below(2 * opts.pad + 1);
  }
  if (opts.flip) p.flip = rng.bernoulli(0.5);
  return p;
}

Tensor augment(const Tensor& image, const AugmentParams& params, std::size_t pad) {
  if (image.rank() != 3) throw ShapeError("augment: expected (H, W, C) image");
  if (params.offset_row > 2 * pad || params.offset_col > 2 * pad) {
    throw ShapeError("augment: crop offset outside the padded image");
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t i = 0; i < h; ++i) {
    // Row/col in padded coordinates minus the pad gives the source pixel.
    const auto si = static_cast<std::ptrdiff_t>(i + params.offset_row) - static_cast<std::ptrdiff_t>(pad);
    if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
    for (std::size_t j = 0; j < w; ++j) {
      const auto sj = static_cast<std::ptrdiff_t>(j + params.offset_col) - static_cast<std::ptrdiff_t>(pad);
      if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
      const std::size_t dj = params.flip ? w - 1 - j : j;
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.at(i, dj, ch) = image.at(static_cast<std::size_t>(si), static_cast<std::size_t>(sj), ch);
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& image, std::uint64_t seed, const AugmentOptions& opts) {
  Rng rng(seed);
  return augment(image, draw_augment_params(rng, opts), opts.pad);
}

void ToyDatasetConfig::validate() const {
  if (classes < 2 || classes > 15) throw ConfigError("toy dataset supports 2..15 classes");
  if (n_per_class == 0) throw ConfigError("toy dataset needs n_per_class >= 1");
  if (image_size < 8) throw ConfigError("toy dataset image_size must be at least 8");
  if (channels == 0) throw ConfigError("toy dataset needs at least one channel");
  if (!(noise >= 0.0)) throw ConfigError("toy dataset noise must be non-negative");
}

ToyDatasetConfig parse_toy_config(std::string_view text) {
  ToyDatasetConfig cfg;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "classes") cfg.classes = parse_size(key, value);
    else if (key == "n_per_class") cfg.n_per_class = parse_size(key, value);
    else if (key == "image_size") cfg.image_size = parse_size(key, value);
    else if (key == "channels") cfg.channels = parse_size(key, value);
    else if (key == "noise") cfg.noise = parse_double(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else throw ConfigError("unknown toy dataset key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ImageDataset make_toy_dataset(const ToyDatasetConfig& cfg, const std::string& split) {
  cfg.validate();
  const std::size_t n = cfg.classes * cfg.n_per_class;
  const std::size_t side = cfg.image_size, c = cfg.channels;
  Rng rng(derive_seed(cfg.seed, {fnv1a(split)}));

  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % cfg.classes;
  for (std::size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);

  ImageDataset ds;
  ds.split = split;
  ds.classes = cfg.classes;
  ds.images = Tensor({n, side, side, c});
  auto d = ds.images.data();
  const double two_pi = 2.0 * std::numbers::pi;
  const double s = static_cast<double>(side);

  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t label = labels[k];
    const std::size_t family = label % 3;  // 0 horizontal stripes, 1 vertical, 2 rings
    const double cycles = 1.0 + static_cast<double>(label / 3);
    const double phase = rng.uniform(0.0, two_pi);
    const double contrast = rng.uniform(60.0, 100.0);
    const double cy = s / 2.0 + rng.uniform(-2.0, 2.0);
    const double cx = s / 2.0 + rng.uniform(-2.0, 2.0);
    std::vector<double> gain(c);
    for (auto& g : gain) g = rng.uniform(0.7, 1.0);

    for (std::size_t i = 0; i < side; ++i) {
      for (std::size_t j = 0; j < side; ++j) {
        double t;
        switch (family) {
          case 0: t = static_cast<double>(i) / s; break;
          case 1: t = static_cast<double>(j) / s; break;
          default: t = std::hypot(static_cast<double>(i) - cy, static_cast<double>(j) - cx) / s; break;
        }
        const double wave = std::cos(two_pi * cycles * t + phase);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double v = 128.0 + gain[ch] * contrast * wave + cfg.noise * rng.normal();
          d[((k * side + i) * side + j) * c + ch] = std::clamp(std::round(v), 0.0, 255.0);
        }
      }
    }
  }
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace targetdrop
