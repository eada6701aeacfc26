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

// A small convolutional classifier with insertable drop layers, the SGD
// training loop around it, and class activation maps.
//
// Architecture (every conv is 3x3, padding 1, followed by ReLU):
//
//   stem    conv(in -> w0)
//   group 1 conv(w0 -> w0), conv(w0 -> w0)
//   group 2 conv(w0 -> w1, stride 2), conv(w1 -> w1)
//   group 3 conv(w1 -> w2, stride 2), conv(w2 -> w2)
//   head    global average pool -> dense(w2 -> classes)
//
// Drop layers sit on the output of the groups listed in
// DropLayerConfig::insert_after. Raw images are normalised inside the
// forward pass with the statistics stored in the model.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "targetdrop/attention.hpp"
#include "targetdrop/baselines.hpp"
#include "targetdrop/data.hpp"
#include "targetdrop/target_drop.hpp"

namespace targetdrop {

enum class Head { kGlobalAvgPool, kFlatten };

std::string to_string(Head h);
Head parse_head(const std::string& name);

struct ModelConfig {
  std::size_t in_channels = 3;
  std::size_t classes = 10;
  std::size_t image_size = 16;
  std::array<std::size_t, 3> widths = {16, 32, 64};
  /// kFlatten replaces pooling with a dense layer over all final features;
  /// it exists for comparison and has no class activation map.
  Head head = Head::kGlobalAvgPool;

  void validate() const;
};

struct DropLayerConfig {
  DropMethod method = DropMethod::kNone;
  /// gamma and block size for TargetDrop (phase is ignored; the run mode
  /// decides).
  DropConfig targetdrop;
  std::size_t reduction_ratio = 16;
  double rate = 0.1;         // dropout, spatialdropout
  double seed_rate = 0.02;   // dropblock
  std::size_t block = 5;     // dropblock
  std::vector<std::size_t> insert_after = {1, 2};

  void validate(const ModelConfig& model) const;
};

struct Parameter {
  std::string name;
  Tensor value;
};

class TinyCNN {
 public:
  static constexpr std::size_t kConvLayers = 7;

  TinyCNN(ModelConfig cfg, DropLayerConfig drop, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  const DropLayerConfig& drop_config() const noexcept { return drop_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }

  /// Trainable parameter count (convolutions and the dense head).
  std::size_t parameter_count() const;

  /// Attention gates, one per insertion point, present only when the drop
  /// method is TargetDrop. Never updated by training.
  const std::vector<AttentionParams>& gates() const noexcept { return gates_; }
  std::size_t gate_parameter_count() const;

  const NormStats& input_normalization() const noexcept { return norm_; }
  void set_input_normalization(NormStats stats);

  /// Replaces the drop configuration. Gates are regenerated from the model
  /// seed when the method or channel layout changes.
  void set_drop_config(DropLayerConfig drop);

  Conv2dSpec conv_spec(std::size_t layer) const;
  /// Group whose output follows conv `layer` (1..3), or 0 if none.
  static std::size_t group_ending_at(std::size_t layer) noexcept;
  /// Channel count at the output of group g (1..3).
  std::size_t group_channels(std::size_t group) const;
  /// Spatial side at the output of group g (1..3).
  std::size_t group_extent(std::size_t group) const;

  const Tensor& kernel(std::size_t layer) const { return params_[2 * layer].value; }
  const Tensor& bias(std::size_t layer) const { return params_[2 * layer + 1].value; }
  const Tensor& dense_weight() const { return params_[2 * kConvLayers].value; }
  const Tensor& dense_bias() const { return params_[2 * kConvLayers + 1].value; }

  // Used by the checkpoint loader.
  void set_gates(std::vector<AttentionParams> gates);

 private:
  void rebuild_gates();

  ModelConfig cfg_;
  DropLayerConfig drop_;
  std::uint64_t seed_;
  std::vector<Parameter> params_;
  std::vector<AttentionParams> gates_;
  NormStats norm_;
};

enum class RunMode { kTrain, kInference };

struct ForwardOptions {
  RunMode mode = RunMode::kInference;
  /// Seed for the random baselines' masks.
  std::uint64_t mask_seed = 0;
  /// When set (train mode only), these masks are reused instead of being
  /// generated; one per active insertion point, in order.
  const std::vector<DropMask>* frozen_masks = nullptr;
  /// When set, each ReLU passes its input where the matching reference
  /// pre-activation (one tensor per conv layer) is positive, instead of
  /// testing its own input. This linearises the network around the
  /// reference pass for finite-difference checks.
  const std::vector<Tensor>* relu_gates = nullptr;
};

struct SampleTrace {
  std::vector<Tensor> conv_inputs;
  std::vector<Tensor> pre_activations;
  /// Masks applied, in insertion order, with the group they follow.
  std::vector<DropMask> masks;
  std::vector<std::size_t> mask_groups;
  /// Every activation shape seen, in order (for shape checks).
  std::vector<Shape> activation_shapes;
  Tensor features;
  std::vector<double> head_input;
  std::vector<double> logits;
};

SampleTrace forward_sample(const TinyCNN& model, const Tensor& raw_image, const ForwardOptions& opts);
std::vector<double> predict_logits(const TinyCNN& model, const Tensor& raw_image);

struct Gradients {
  std::vector<Tensor> values;  // parallel to TinyCNN::parameters()
  static Gradients zeros_like(const TinyCNN& model);
};

/// Accumulates d(scale * loss)/d(params) for one sample into `grads`.
void backward_sample(const TinyCNN& model, const SampleTrace& trace, std::size_t label,
                     double scale, Gradients& grads);

struct BatchOptions {
  RunMode mode = RunMode::kTrain;
  std::uint64_t mask_seed = 0;
  /// Per-sample frozen masks (see ForwardOptions::frozen_masks).
  const std::vector<std::vector<DropMask>>* frozen_masks = nullptr;
  /// Per-sample ReLU gates (see ForwardOptions::relu_gates).
  const std::vector<std::vector<Tensor>>* relu_gates = nullptr;
};

struct BatchResult {
  double loss = 0.0;  // mean cross-entropy
  std::size_t correct = 0;
  Gradients grads;    // gradient of the mean loss
  std::vector<std::vector<DropMask>> masks;
};

/// images: (N, H, W, C) raw.
BatchResult forward_backward(const TinyCNN& model, const Tensor& images,
                             std::span<const std::size_t> labels, const BatchOptions& opts);
double batch_loss(const TinyCNN& model, const Tensor& images, std::span<const std::size_t> labels,
                  const BatchOptions& opts);

// ---------------------------------------------------------------------------
// Optimisation.

/// SGD with (Nesterov) momentum and L2 weight decay:
///   g = grad + wd * p;  v = mu * v + g;  p -= lr * (g + mu * v)   (Nesterov)
///                                        p -= lr * v              (classic)
class NesterovSgd {
 public:
  NesterovSgd(double momentum, double weight_decay, bool nesterov = true)
      : momentum_(momentum), weight_decay_(weight_decay), nesterov_(nesterov) {}

  void step(std::vector<Parameter>& params, const Gradients& grads, double lr);

 private:
  double momentum_;
  double weight_decay_;
  bool nesterov_;
  std::vector<std::vector<double>> velocity_;
};

/// gamma to use in a given epoch (0-based) out of `epochs`; empty means
/// constant gamma.
using GammaSchedule = std::function<double(std::size_t epoch, std::size_t epochs, double gamma)>;

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  double initial_lr = 0.1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 0.0;
  double lr_decay = 0.2;
  std::vector<double> milestones = {0.4, 0.6, 0.8};
  bool augment = true;
  AugmentOptions augment_options;
  /// Input-space Cutout hole size; 0 disables it.
  std::size_t cutout_size = 0;
  std::uint64_t seed = 0;
  GammaSchedule gamma_schedule;

  void validate() const;
};

/// Learning rate in epoch `epoch` (0-based): initial_lr * decay^m where m
/// counts milestones with epoch >= floor(ratio * epochs).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;  // inference-mode accuracy on the un-augmented training split
  double test_acc = 0.0;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains in place. Input normalisation statistics are computed from the
/// raw training split and stored in the model. Throws TrainingDiverged when
/// the loss stops being finite.
std::vector<EpochLog> train(TinyCNN& model, const ImageDataset& train_set,
                            const ImageDataset& test_set, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {});

/// Inference-phase accuracy; every drop layer passes its input through.
double evaluate(const TinyCNN& model, const ImageDataset& data);

// ---------------------------------------------------------------------------
// Analysis.

struct ParamOverhead {
  std::size_t added = 0;
  double fraction = 0.0;
};

/// Gate parameters added by inserting one attention gate (2 C^2 / r
/// weights) at each listed channel count, relative to `base_parameters`.
ParamOverhead param_overhead(std::span<const std::size_t> channels, std::size_t r,
                             std::size_t base_parameters);

/// Class-weighted sum of the final feature maps, min-max normalised to
/// [0, 1] (all zeros for a constant map) and upsampled by nearest neighbour
/// to out_h x out_w. Returns an (out_h, out_w) tensor.
Tensor class_activation_map(const Tensor& features, std::span<const double> class_weights,
                            std::size_t out_h, std::size_t out_w);

/// CAM of `raw_image` for `class_index`. Throws Error for a model without
/// a global-average-pool head.
Tensor compute_cam(const TinyCNN& model, const Tensor& raw_image, std::size_t class_index);

// ---------------------------------------------------------------------------
// Checkpoints: "TDCKPT01", u64 manifest length, manifest text (model and
// drop configuration plus one "tensor=name:d0,d1,..." line per stored
// tensor), then every tensor's values as little-endian float64 in manifest
// order.

std::string serialize_checkpoint(const TinyCNN& model);
TinyCNN deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const TinyCNN& model);
TinyCNN load_checkpoint(const std::filesystem::path& path);

}  // namespace targetdrop
