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

#include <cstdio>
#include <map>
#include <sstream>

#include "targetdrop/binary_io.hpp"
#include "targetdrop/kv_config.hpp"
#include "targetdrop/nn.hpp"

namespace targetdrop {

namespace {

constexpr std::string_view kMagic = "TDCKPT01";

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(std::span<const std::size_t> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

struct NamedTensor {
  std::string name;
  Shape shape;
  std::span<const double> data;
};

std::vector<NamedTensor> stored_tensors(const TinyCNN& model) {
  std::vector<NamedTensor> out;
  for (const auto& p : model.parameters()) out.push_back({p.name, p.value.shape(), p.value.data()});
  for (std::size_t i = 0; i < model.gates().size(); ++i) {
    const auto& g = model.gates()[i];
    out.push_back({"gate" + std::to_string(i) + ".w1", {g.w1.rows(), g.w1.cols()}, g.w1.data()});
    out.push_back({"gate" + std::to_string(i) + ".w2", {g.w2.rows(), g.w2.cols()}, g.w2.data()});
  }
  const auto& norm = model.input_normalization();
  out.push_back({"norm.mean", {norm.mean.size()}, norm.mean});
  out.push_back({"norm.std", {norm.stddev.size()}, norm.stddev});
  return out;
}

}  // namespace

std::string serialize_checkpoint(const TinyCNN& model) {
  const auto& m = model.config();
  const auto& d = model.drop_config();
  std::ostringstream manifest;
  manifest << "in_channels=" << m.in_channels << '\n'
           << "classes=" << m.classes << '\n'
           << "image_size=" << m.image_size << '\n'
           << "widths=" << join(m.widths) << '\n'
           << "head=" << to_string(m.head) << '\n'
           << "seed=" << model.seed() << '\n'
           << "drop=" << to_string(d.method) << '\n'
           << "gamma=" << fmt_double(d.targetdrop.gamma) << '\n'
           << "k=" << d.targetdrop.block_size << '\n'
           << "r=" << d.reduction_ratio << '\n'
           << "drop_rate=" << fmt_double(d.rate) << '\n'
           << "dropblock_seed_rate=" << fmt_double(d.seed_rate) << '\n'
           << "dropblock_block=" << d.block << '\n'
           << "insert_after=" << join(d.insert_after) << '\n';
  const auto tensors = stored_tensors(model);
  for (const auto& t : tensors) manifest << "tensor=" << t.name << ':' << join(t.shape) << '\n';

  binary::Writer w;
  w.bytes(kMagic);
  const std::string text = manifest.str();
  w.u64_le(text.size());
  w.bytes(text);
  for (const auto& t : tensors) w.f64_le(t.data);
  return w.str();
}

TinyCNN deserialize_checkpoint(std::string_view bytes) {
  binary::Reader r(bytes);
  if (r.remaining() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
    throw FormatError("checkpoint: bad magic at offset 0");
  }
  const std::uint64_t len = r.u64_le();
  if (len > r.remaining()) throw FormatError("checkpoint: manifest length exceeds file size");
  const std::string text(r.bytes(static_cast<std::size_t>(len)));

  std::map<std::string, std::string> kv;
  std::vector<std::pair<std::string, Shape>> tensors;
  for (const auto& [k, v] : parse_key_values(text)) {
    if (k == "tensor") {
      const auto colon = v.rfind(':');
      if (colon == std::string::npos) throw FormatError("checkpoint: bad tensor line '" + v + "'");
      tensors.emplace_back(v.substr(0, colon), parse_size_list(k, v.substr(colon + 1)));
    } else {
      kv[k] = v;
    }
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("checkpoint: manifest lacks '" + key + "'");
    return it->second;
  };

  ModelConfig mc;
  mc.in_channels = parse_size("in_channels", field("in_channels"));
  mc.classes = parse_size("classes", field("classes"));
  mc.image_size = parse_size("image_size", field("image_size"));
  const auto widths = parse_size_list("widths", field("widths"));
  if (widths.size() != 3) throw FormatError("checkpoint: widths needs three entries");
  std::copy(widths.begin(), widths.end(), mc.widths.begin());
  mc.head = parse_head(field("head"));

  DropLayerConfig dc;
  dc.method = parse_drop_method(field("drop"));
  dc.targetdrop.gamma = parse_double("gamma", field("gamma"));
  dc.targetdrop.block_size = parse_size("k", field("k"));
  dc.reduction_ratio = parse_size("r", field("r"));
  dc.rate = parse_double("drop_rate", field("drop_rate"));
  dc.seed_rate = parse_double("dropblock_seed_rate", field("dropblock_seed_rate"));
  dc.block = parse_size("dropblock_block", field("dropblock_block"));
  dc.insert_after = parse_size_list("insert_after", field("insert_after"));

  TinyCNN model(mc, dc, parse_u64("seed", field("seed")));

  // Expected layout comes from the rebuilt model; the file must agree.
  const auto expected = stored_tensors(model);
  if (expected.size() != tensors.size()) throw FormatError("checkpoint: tensor count mismatch");
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].first != expected[i].name || tensors[i].second != expected[i].shape) {
      throw FormatError("checkpoint: tensor '" + tensors[i].first + "' does not match the model");
    }
    std::vector<double> v(shape_numel(tensors[i].second));
    for (auto& x : v) x = r.f64_le();
    values.push_back(std::move(v));
  }
  if (r.remaining() != 0) {
    throw FormatError("checkpoint: trailing bytes at offset " + std::to_string(r.offset()));
  }

  std::size_t i = 0;
  for (auto& p : model.parameters()) p.value = Tensor(p.value.shape(), std::move(values[i++]));
  auto gates = model.gates();
  for (auto& g : gates) {
    g.w1 = Matrix(g.w1.rows(), g.w1.cols(), std::move(values[i++]));
    g.w2 = Matrix(g.w2.rows(), g.w2.cols(), std::move(values[i++]));
  }
  model.set_gates(std::move(gates));
  NormStats norm{std::move(values[i]), std::move(values[i + 1])};
  model.set_input_normalization(std::move(norm));
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const TinyCNN& model) {
  binary::write_file(path, serialize_checkpoint(model));
}

TinyCNN load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(binary::read_file(path));
}

}  // namespace targetdrop
