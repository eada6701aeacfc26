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

// targetdrop: gradient checks, mask statistics, training runs with sweeps,
// class activation maps, and replay of a previous run from its manifest.
//
// Every run writes <out>/manifest.txt holding the command, the effective
// configuration, the sweep axes and a SHA-256 checksum per output file.
// Exit codes: 0 success, 1 a check failed (gradient check, replay
// mismatch), 2 usage or configuration error.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "targetdrop/attention.hpp"
#include "targetdrop/baselines.hpp"
#include "targetdrop/binary_io.hpp"
#include "targetdrop/data.hpp"
#include "targetdrop/gradcheck.hpp"
#include "targetdrop/image_io.hpp"
#include "targetdrop/kv_config.hpp"
#include "targetdrop/nn.hpp"
#include "targetdrop/target_drop.hpp"

namespace fs = std::filesystem;
using namespace targetdrop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

const std::map<std::string, std::string>& default_config() {
  static const std::map<std::string, std::string> defaults = {
      // shared
      {"seed", "0"},
      // drop layer
      {"method", "targetdrop"},
      {"gamma", "0.15"},
      {"k", "5"},
      {"r", "16"},
      {"drop_rate", "0.1"},
      {"dropblock_seed_rate", "0.02"},
      {"dropblock_block", "5"},
      {"insert_after", "1,2"},
      // model
      {"head", "gap"},
      {"widths", "16,32,64"},
      // data
      {"data", "toy"},
      {"toy_classes", "10"},
      {"toy_train_per_class", "200"},
      {"toy_test_per_class", "50"},
      {"toy_image_size", "16"},
      {"toy_channels", "3"},
      {"toy_noise", "20"},
      {"toy_seed", "1"},
      {"train_images", ""},
      {"train_labels", ""},
      {"test_images", ""},
      {"test_labels", ""},
      {"cifar_train", ""},
      {"cifar_test", ""},
      // training
      {"epochs", "30"},
      {"batch_size", "128"},
      {"lr", "0.1"},
      {"momentum", "0.9"},
      {"nesterov", "true"},
      {"weight_decay", "0"},
      {"lr_decay", "0.2"},
      {"milestones", "0.4,0.6,0.8"},
      {"augment", "true"},
      {"augment_pad", "4"},
      {"augment_flip", "true"},
      {"cutout", "0"},
      // mask-stats
      {"feature_tensor", ""},
      {"feature_height", "32"},
      {"feature_width", "32"},
      {"feature_channels", "64"},
      {"cutout_size", "16"},
      // gradcheck
      {"eps", "1e-3"},
      {"trials", "50"},
      {"inject_fault", ""},
      // cam
      {"checkpoint", ""},
      {"image", ""},
      {"image_split", "test"},
      {"image_index", "0"},
  };
  return defaults;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Collects every file a run writes so the manifest can list its checksum.
class RunOutput {
 public:
  explicit RunOutput(fs::path root) : root_(std::move(root)) {}
  const fs::path& root() const { return root_; }
  void write(const fs::path& rel, std::string_view bytes) {
    binary::write_file(root_ / rel, bytes);
    checksums_[rel.generic_string()] = sha256_hex(bytes);
  }
  const std::map<std::string, std::string>& checksums() const { return checksums_; }

 private:
  fs::path root_;
  std::map<std::string, std::string> checksums_;
};

struct Sweep {
  std::string key;
  std::vector<std::string> values;
};

struct Invocation {
  std::string command;
  KeyValueConfig config{default_config()};
  std::vector<Sweep> sweeps;
};

std::string manifest_text(const Invocation& inv, const RunOutput& out) {
  std::ostringstream os;
  os << "# targetdrop run manifest\n";
  os << "command=" << inv.command << '\n';
  for (const auto& [k, v] : inv.config.values()) os << "config." << k << '=' << v << '\n';
  for (std::size_t i = 0; i < inv.sweeps.size(); ++i) {
    os << "sweep." << i << '=' << inv.sweeps[i].key << '=';
    for (std::size_t j = 0; j < inv.sweeps[i].values.size(); ++j) {
      os << (j ? "," : "") << inv.sweeps[i].values[j];
    }
    os << '\n';
  }
  for (const auto& [path, sum] : out.checksums()) os << "artifact." << path << '=' << sum << '\n';
  return os.str();
}

struct Manifest {
  Invocation inv;
  std::map<std::string, std::string> artifacts;
};

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "command") {
      m.inv.command = value;
    } else if (key.rfind("config.", 0) == 0) {
      m.inv.config.set(key.substr(7), value);
    } else if (key.rfind("sweep.", 0) == 0) {
      auto [axis, list] = split_assignment(value);
      m.inv.sweeps.push_back({axis, split_list(list)});
    } else if (key.rfind("artifact.", 0) == 0) {
      m.artifacts[key.substr(9)] = value;
    } else {
      throw ConfigError("manifest: unexpected key '" + key + "'");
    }
  }
  if (m.inv.command.empty()) throw ConfigError("manifest: missing command");
  return m;
}

// ---------------------------------------------------------------------------
// Config -> library structures

DropLayerConfig drop_layer_from(const KeyValueConfig& c) {
  DropLayerConfig d;
  d.method = parse_drop_method(c.get("method"));
  d.targetdrop.gamma = c.get_double("gamma");
  d.targetdrop.block_size = c.get_size("k");
  d.targetdrop.validate();
  d.reduction_ratio = c.get_size("r");
  d.rate = c.get_double("drop_rate");
  d.seed_rate = c.get_double("dropblock_seed_rate");
  d.block = c.get_size("dropblock_block");
  d.insert_after = parse_size_list("insert_after", c.get("insert_after"));
  return d;
}

TrainConfig train_config_from(const KeyValueConfig& c) {
  TrainConfig t;
  t.epochs = c.get_size("epochs");
  t.batch_size = c.get_size("batch_size");
  t.initial_lr = c.get_double("lr");
  t.momentum = c.get_double("momentum");
  t.nesterov = c.get_bool("nesterov");
  t.weight_decay = c.get_double("weight_decay");
  t.lr_decay = c.get_double("lr_decay");
  t.milestones = parse_double_list("milestones", c.get("milestones"));
  t.augment = c.get_bool("augment");
  t.augment_options.pad = c.get_size("augment_pad");
  t.augment_options.flip = c.get_bool("augment_flip");
  t.cutout_size = c.get_size("cutout");
  t.seed = c.get_u64("seed");
  t.validate();
  return t;
}

struct Datasets {
  ImageDataset train;
  ImageDataset test;
};

Datasets load_data(const KeyValueConfig& c) {
  const std::string kind = c.get("data");
  if (kind == "toy") {
    ToyDatasetConfig tc;
    tc.classes = c.get_size("toy_classes");
    tc.n_per_class = c.get_size("toy_train_per_class");
    tc.image_size = c.get_size("toy_image_size");
    tc.channels = c.get_size("toy_channels");
    tc.noise = c.get_double("toy_noise");
    tc.seed = c.get_u64("toy_seed");
    tc.validate();
    Datasets d;
    d.train = make_toy_dataset(tc, "train");
    tc.n_per_class = c.get_size("toy_test_per_class");
    d.test = make_toy_dataset(tc, "test");
    return d;
  }
  if (kind == "idx") {
    for (const char* key : {"train_images", "train_labels", "test_images", "test_labels"}) {
      if (c.get(key).empty()) throw ConfigError(std::string("data=idx needs ") + key);
    }
    return {load_idx(c.get("train_images"), c.get("train_labels"), "train"),
            load_idx(c.get("test_images"), c.get("test_labels"), "test")};
  }
  if (kind == "cifar") {
    auto paths = [&](const char* key) {
      std::vector<fs::path> out;
      for (const auto& p : split_list(c.get(key))) out.emplace_back(p);
      if (out.empty()) throw ConfigError(std::string("data=cifar needs ") + key);
      return out;
    };
    return {load_cifar_batches(paths("cifar_train"), "train"), load_cifar_batches(paths("cifar_test"), "test")};
  }
  throw ConfigError("unknown data source '" + kind + "' (expected toy, idx or cifar)");
}

ModelConfig model_config_from(const KeyValueConfig& c, const ImageDataset& data) {
  ModelConfig m;
  m.in_channels = data.channels();
  m.image_size = data.height();
  if (data.height() != data.width()) throw ConfigError("TinyCNN needs square images");
  m.classes = std::max<std::size_t>(2, data.classes);
  const auto widths = parse_size_list("widths", c.get("widths"));
  if (widths.size() != 3) throw ConfigError("widths needs three entries");
  std::copy(widths.begin(), widths.end(), m.widths.begin());
  m.head = parse_head(c.get("head"));
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gradcheck(const KeyValueConfig& c, RunOutput& out) {
  GradCheckOptions opts;
  opts.eps = c.get_double("eps");
  opts.trials = c.get_size("trials");
  opts.seed = c.get_u64("seed");
  opts.inject_fault = c.get("inject_fault");
  if (!opts.inject_fault.empty()) {
    const auto names = gradcheck_names();
    if (std::find(names.begin(), names.end(), opts.inject_fault) == names.end()) {
      throw ConfigError("inject_fault: unknown check '" + opts.inject_fault + "'");
    }
  }
  if (!(opts.eps > 0.0)) throw ConfigError("eps must be positive");
  if (opts.trials == 0) throw ConfigError("trials must be positive");

  std::ostringstream csv;
  csv << "name,trials,max_rel_error,tolerance,passed\n";
  bool all = true;
  std::cout << std::left << std::setw(24) << "check" << std::setw(8) << "trials" << std::setw(14)
            << "max_rel_err" << std::setw(11) << "tolerance" << "result\n";
  for (const auto& r : run_gradcheck_suite(opts)) {
    all = all && r.passed;
    char err[32], tol[32];
    std::snprintf(err, sizeof err, "%.3e", r.max_rel_error);
    std::snprintf(tol, sizeof tol, "%.0e", r.tolerance);
    std::cout << std::setw(24) << r.name << std::setw(8) << r.trials << std::setw(14) << err << std::setw(11) << tol
              << (r.passed ? "ok" : "FAIL") << '\n';
    csv << r.name << ',' << r.trials << ',' << format_double(r.max_rel_error) << ','
        << format_double(r.tolerance) << ',' << (r.passed ? 1 : 0) << '\n';
  }
  out.write("gradcheck.csv", csv.str());
  return all ? kExitOk : kExitCheckFailed;
}

Tensor synthetic_features(const KeyValueConfig& c) {
  const Shape shape{c.get_size("feature_height"), c.get_size("feature_width"), c.get_size("feature_channels")};
  if (shape_numel(shape) == 0) throw ConfigError("feature tensor dimensions must be positive");
  // Rectified Gaussian noise plus a per-channel bump, so that channel
  // statistics and argmax positions differ.
  Rng rng(derive_seed(c.get_u64("seed"), {0xfea7}));
  Tensor u(shape);
  for (std::size_t ch = 0; ch < shape[2]; ++ch) {
    const double ci = rng.uniform(0, static_cast<double>(shape[0]));
    const double cj = rng.uniform(0, static_cast<double>(shape[1]));
    const double amp = rng.uniform(0.5, 3.0);
    for (std::size_t i = 0; i < shape[0]; ++i) {
      for (std::size_t j = 0; j < shape[1]; ++j) {
        const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
        u.at(i, j, ch) = std::max(0.0, rng.normal() * 0.5 + amp * std::exp(-d2 / 18.0));
      }
    }
  }
  return u;
}

void write_mask(RunOutput& out, const fs::path& dir, const DropMask& mask) {
  for (std::size_t ch = 0; ch < mask.channels; ++ch) {
    out.write(dir / ("mask_c" + std::to_string(ch) + ".pgm"), encode_pgm(mask_channel_image(mask, ch)));
  }
  out.write(dir / "regions.txt", mask_regions_text(mask));
  out.write(dir / "montage.pgm", encode_pgm(mask_montage(mask, 8)));
}

int cmd_mask_stats(const KeyValueConfig& c, RunOutput& out) {
  const Tensor u = c.get("feature_tensor").empty() ? synthetic_features(c) : load_tensor(c.get("feature_tensor"));
  if (u.rank() != 3) throw ConfigError("feature tensor must be (H, W, C)");
  const std::uint64_t seed = c.get_u64("seed");
  const std::size_t h = u.dim(0), w = u.dim(1), ch = u.dim(2);

  DropConfig td;
  td.gamma = c.get_double("gamma");
  td.block_size = c.get_size("k");
  td.validate();
  const auto gate = init_attention(ch, c.get_size("r"), derive_seed(seed, {0x6a7e}));
  const double rate = c.get_double("drop_rate");
  const std::size_t block = c.get_size("dropblock_block");

  std::vector<std::pair<std::string, DropMask>> masks;
  masks.emplace_back("targetdrop", build_mask(u, attention_map(u, gate), td));
  masks.emplace_back("dropout", dropout_mask(u.shape(), rate, derive_seed(seed, {1})));
  masks.emplace_back("spatialdropout", spatialdropout_mask(u.shape(), rate, derive_seed(seed, {2})));
  masks.emplace_back("dropblock",
                     dropblock_mask(u.shape(), c.get_double("dropblock_seed_rate"), block, derive_seed(seed, {3})));
  masks.emplace_back("cutout", cutout_mask(h, w, c.get_size("cutout_size"), derive_seed(seed, {4})));

  std::ostringstream csv;
  csv << "method,drop_fraction,mean_block_size,contiguity\n";
  std::cout << "feature tensor " << shape_to_string(u.shape()) << '\n';
  for (const auto& [name, mask] : masks) {
    const auto s = mask_stats(mask);
    csv << name << ',' << format_double(s.drop_fraction) << ',' << format_double(s.mean_block_size) << ','
        << format_double(s.contiguity) << '\n';
    std::size_t holed = 0;
    for (double f : s.per_channel_fractions) holed += f > 0.0;
    std::cout << std::left << std::setw(16) << name << "drop_fraction=" << std::setw(10) << s.drop_fraction
              << " mean_block=" << std::setw(8) << s.mean_block_size << " contiguity=" << std::setw(8)
              << s.contiguity << " channels_with_drops=" << holed << '/' << mask.channels << '\n';
    write_mask(out, fs::path("masks") / name, mask);
  }
  out.write("mask_stats.csv", csv.str());
  return kExitOk;
}

std::string point_name(const std::vector<std::pair<std::string, std::string>>& point) {
  std::string s;
  for (const auto& [k, v] : point) s += (s.empty() ? "" : "_") + k + "=" + v;
  return s;
}

int cmd_train(const Invocation& inv, RunOutput& out) {
  // Expand the cartesian product of the sweep axes and validate every point
  // before any training starts.
  std::vector<std::vector<std::pair<std::string, std::string>>> points(1);
  for (const auto& s : inv.sweeps) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& p : points) {
      for (const auto& v : s.values) {
        auto q = p;
        q.emplace_back(s.key, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  std::vector<KeyValueConfig> configs;
  for (const auto& p : points) {
    KeyValueConfig c = inv.config;
    for (const auto& [k, v] : p) c.set(k, v);
    drop_layer_from(c);
    train_config_from(c);
    configs.push_back(std::move(c));
  }
  const Datasets data = load_data(inv.config);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& c = configs[i];
    const fs::path dir = inv.sweeps.empty() ? fs::path() : fs::path("runs") / point_name(points[i]);
    const auto drop = drop_layer_from(c);
    const auto tc = train_config_from(c);
    TinyCNN model(model_config_from(c, data.train), drop, c.get_u64("seed"));
    if (!inv.sweeps.empty()) std::cout << "== " << point_name(points[i]) << '\n';

    std::ostringstream log;
    log << "epoch,lr,train_loss,train_acc,test_acc\n";
    train(model, data.train, data.test, tc, [&](const EpochLog& e) {
      log << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.train_loss) << ','
          << format_double(e.train_acc) << ',' << format_double(e.test_acc) << '\n';
      std::printf("epoch %3zu  lr %-8.3g  loss %.4f  train %.4f  test %.4f\n", e.epoch, e.lr, e.train_loss,
                  e.train_acc, e.test_acc);
      std::fflush(stdout);
    });
    out.write(dir / "train_log.csv", log.str());
    out.write(dir / "checkpoint.bin", serialize_checkpoint(model));
  }
  return kExitOk;
}

RgbImage image_preview(const Tensor& raw) {
  RgbImage img{raw.dim(1), raw.dim(0), {}};
  const std::size_t c = raw.dim(2);
  for (std::size_t i = 0; i < raw.dim(0); ++i) {
    for (std::size_t j = 0; j < raw.dim(1); ++j) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double v = raw.at(i, j, c == 3 ? k : 0);
        img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))));
      }
    }
  }
  return img;
}

int cmd_cam(const KeyValueConfig& c, RunOutput& out) {
  if (c.get("checkpoint").empty()) throw UsageError("cam needs --set checkpoint=PATH");
  if (!fs::exists(c.get("checkpoint"))) throw UsageError("checkpoint not found: " + c.get("checkpoint"));
  const TinyCNN model = load_checkpoint(c.get("checkpoint"));
  Tensor image;
  if (!c.get("image").empty()) {
    image = load_tensor(c.get("image"));
  } else {
    const Datasets data = load_data(c);
    const auto& split = c.get("image_split") == "train" ? data.train : data.test;
    const std::size_t idx = c.get_size("image_index");
    if (idx >= split.size()) throw ConfigError("image_index out of range");
    image = split.image(idx);
    std::cout << "image " << idx << " of the " << split.split << " split, label " << split.labels[idx] << '\n';
  }
  const auto logits = predict_logits(model, image);
  out.write("input.ppm", encode_ppm(image_preview(image)));
  std::ostringstream csv;
  csv << "class,logit\n";
  for (std::size_t k = 0; k < model.config().classes; ++k) {
    const Tensor cam = compute_cam(model, image, k);
    out.write("cam_class" + std::to_string(k) + ".ppm", encode_ppm(heatmap_image(cam)));
    csv << k << ',' << format_double(logits[k]) << '\n';
  }
  out.write("logits.csv", csv.str());
  std::cout << "wrote " << model.config().classes << " heatmaps\n";
  return kExitOk;
}

int execute(const Invocation& inv, const fs::path& out_dir) {
  RunOutput out(out_dir);
  int code = kExitOk;
  if (inv.command == "gradcheck") code = cmd_gradcheck(inv.config, out);
  else if (inv.command == "mask-stats") code = cmd_mask_stats(inv.config, out);
  else if (inv.command == "train") code = cmd_train(inv, out);
  else if (inv.command == "cam") code = cmd_cam(inv.config, out);
  else throw UsageError("unknown command '" + inv.command + "'");
  if (!inv.sweeps.empty() && inv.command != "train") throw UsageError("--sweep only applies to train");
  binary::write_file(out_dir / "manifest.txt", manifest_text(inv, out));
  std::cout << "manifest: " << (out_dir / "manifest.txt").string() << '\n';
  return code;
}

int replay(const fs::path& manifest_path, const fs::path& out_dir) {
  const Manifest m = parse_manifest(binary::read_file(manifest_path));
  const int code = execute(m.inv, out_dir);
  const Manifest now = parse_manifest(binary::read_file(out_dir / "manifest.txt"));
  std::size_t mismatches = 0;
  for (const auto& [path, sum] : m.artifacts) {
    const auto it = now.artifacts.find(path);
    if (it == now.artifacts.end() || it->second != sum) {
      std::cout << "MISMATCH " << path << '\n';
      ++mismatches;
    }
  }
  for (const auto& [path, sum] : now.artifacts) {
    if (!m.artifacts.count(path)) {
      std::cout << "EXTRA " << path << '\n';
      ++mismatches;
    }
  }
  std::cout << "replay: " << m.artifacts.size() << " artifacts, " << mismatches << " mismatches\n";
  if (mismatches) return kExitCheckFailed;
  return code;
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> sweeps;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;
};

void add_common(CLI::App* sub, CommonOptions& o, bool sweeps) {
  sub->add_option("--config", o.config_path, "key=value configuration file");
  sub->add_option("--set", o.sets, "override one configuration key (KEY=VALUE), repeatable");
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--seed", o.seed, "random seed (overrides the config)");
  if (sweeps) sub->add_option("--sweep", o.sweeps, "KEY=v1,v2,... sweep axis, repeatable");
}

Invocation build_invocation(const std::string& command, const CommonOptions& o) {
  Invocation inv;
  inv.command = command;
  if (!o.config_path.empty()) inv.config.merge_text(binary::read_file(o.config_path));
  for (const auto& s : o.sets) {
    const auto [k, v] = split_assignment(s);
    inv.config.set(k, v);
  }
  if (o.seed) inv.config.set("seed", std::to_string(*o.seed));
  if (o.eps) inv.config.set("eps", format_double(*o.eps));
  for (const auto& s : o.sweeps) {
    auto [k, list] = split_assignment(s);
    if (!inv.config.has(k)) throw ConfigError("unknown sweep key '" + k + "'");
    auto values = split_list(list);
    if (values.empty()) throw ConfigError("sweep '" + k + "' has no values");
    inv.sweeps.push_back({k, std::move(values)});
  }
  return inv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TargetDrop experiments: gradient checks, mask statistics, training, CAM"};
  app.require_subcommand(1);

  CommonOptions grad_opts, mask_opts, train_opts, cam_opts;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
  add_common(grad, grad_opts, false);
  grad->add_option("--eps", grad_opts.eps, "finite-difference step");
  auto* mask = app.add_subcommand("mask-stats", "compare TargetDrop masks with the baseline methods");
  add_common(mask, mask_opts, false);
  auto* tr = app.add_subcommand("train", "train TinyCNN, optionally over a sweep grid");
  add_common(tr, train_opts, true);
  auto* cam = app.add_subcommand("cam", "class activation maps for one image");
  add_common(cam, cam_opts, false);
  std::string manifest_path, replay_out = "replay";
  auto* rep = app.add_subcommand("replay", "rerun from a manifest and verify every checksum");
  rep->add_option("manifest", manifest_path, "manifest.txt of an earlier run")->required();
  rep->add_option("--out", replay_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (rep->parsed()) return replay(manifest_path, replay_out);
    const std::pair<CLI::App*, CommonOptions*> subs[] = {
        {grad, &grad_opts}, {mask, &mask_opts}, {tr, &train_opts}, {cam, &cam_opts}};
    for (const auto& [sub, opts] : subs) {
      if (sub->parsed()) return execute(build_invocation(sub->get_name(), *opts), opts->out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
