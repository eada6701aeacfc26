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

#include "targetdrop/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "targetdrop/random.hpp"

namespace targetdrop {

namespace {

constexpr std::size_t kKernel = 3;

std::size_t conv_out(std::size_t in, std::size_t stride) { return (in + 2 - kKernel) / stride + 1; }

Matrix as_matrix(const Tensor& t) { return Matrix(t.dim(0), t.dim(1), t.values()); }

std::size_t argmax_index(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void add_into(Tensor& dst, std::span<const double> src) {
  auto d = dst.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
}

}  // namespace

std::string to_string(Head h) { return h == Head::kGlobalAvgPool ? "gap" : "flatten"; }

Head parse_head(const std::string& name) {
  if (name == "gap") return Head::kGlobalAvgPool;
  if (name == "flatten") return Head::kFlatten;
  throw ConfigError("unknown head '" + name + "' (expected gap or flatten)");
}

void ModelConfig::validate() const {
  if (in_channels == 0) throw ConfigError("model needs at least one input channel");
  if (classes < 2) throw ConfigError("model needs at least two classes");
  if (image_size < 4) throw ConfigError("image_size must be at least 4");
  for (auto w : widths) {
    if (w == 0) throw ConfigError("layer widths must be positive");
  }
}

void DropLayerConfig::validate(const ModelConfig& model) const {
  if (method == DropMethod::kCutout) {
    throw ConfigError("cutout is an input augmentation; set cutout_size instead of a drop layer");
  }
  for (std::size_t i = 0; i < insert_after.size(); ++i) {
    if (insert_after[i] < 1 || insert_after[i] > 3) {
      throw ConfigError("insertion points must name groups 1..3");
    }
    if (i && insert_after[i] <= insert_after[i - 1]) {
      throw ConfigError("insertion points must be strictly increasing");
    }
  }
  switch (method) {
    case DropMethod::kTargetDrop: {
      targetdrop.validate();
      if (reduction_ratio == 0) throw ConfigError("invalid reduction ratio: r must be positive");
      const std::array<std::size_t, 3> ch = model.widths;
      for (auto g : insert_after) {
        if (ch[g - 1] % reduction_ratio != 0) {
          throw ConfigError("invalid reduction ratio: r=" + std::to_string(reduction_ratio) +
                            " does not divide C=" + std::to_string(ch[g - 1]));
        }
      }
      break;
    }
    case DropMethod::kDropout:
    case DropMethod::kSpatialDropout:
      if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("drop rate must lie in [0, 1)");
      break;
    case DropMethod::kDropBlock:
      if (!(seed_rate >= 0.0 && seed_rate <= 1.0)) throw ConfigError("seed rate must lie in [0, 1]");
      if (block == 0 || block % 2 == 0) throw ConfigError("dropblock block size must be odd");
      break;
    default:
      break;
  }
}

TinyCNN::TinyCNN(ModelConfig cfg, DropLayerConfig drop, std::uint64_t seed)
    : cfg_(std::move(cfg)), drop_(std::move(drop)), seed_(seed) {
  cfg_.validate();
  drop_.validate(cfg_);
  Rng rng(seed);
  const auto& w = cfg_.widths;
  const std::array<std::size_t, kConvLayers> cin = {cfg_.in_channels, w[0], w[0], w[0], w[1], w[1], w[2]};
  const std::array<std::size_t, kConvLayers> cout = {w[0], w[0], w[0], w[1], w[1], w[2], w[2]};
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    Tensor k({kKernel, kKernel, cin[l], cout[l]});
    // He-normal for ReLU layers.
    const double sd = std::sqrt(2.0 / static_cast<double>(kKernel * kKernel * cin[l]));
    for (auto& x : k.data()) x = sd * rng.normal();
    params_.push_back({"conv" + std::to_string(l) + ".kernel", std::move(k)});
    params_.push_back({"conv" + std::to_string(l) + ".bias", Tensor({cout[l]})});
  }
  const std::size_t e3 = group_extent(3);
  const std::size_t features = cfg_.head == Head::kGlobalAvgPool ? w[2] : e3 * e3 * w[2];
  Tensor dw({cfg_.classes, features});
  const double limit = std::sqrt(6.0 / static_cast<double>(features + cfg_.classes));
  for (auto& x : dw.data()) x = rng.uniform(-limit, limit);
  params_.push_back({"dense.weight", std::move(dw)});
  params_.push_back({"dense.bias", Tensor({cfg_.classes})});

  norm_.mean.assign(cfg_.in_channels, 0.0);
  norm_.stddev.assign(cfg_.in_channels, 1.0);
  rebuild_gates();
}

std::size_t TinyCNN::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t TinyCNN::gate_parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : gates_) n += g.parameter_count();
  return n;
}

void TinyCNN::set_input_normalization(NormStats stats) {
  if (stats.mean.size() != cfg_.in_channels || stats.stddev.size() != cfg_.in_channels) {
    throw ShapeError("normalisation statistics do not match the input channels");
  }
  norm_ = std::move(stats);
}

void TinyCNN::set_drop_config(DropLayerConfig drop) {
  drop.validate(cfg_);
  const bool same_gates = drop.method == drop_.method && drop.insert_after == drop_.insert_after &&
                          drop.reduction_ratio == drop_.reduction_ratio;
  drop_ = std::move(drop);
  if (!same_gates) rebuild_gates();
}

void TinyCNN::set_gates(std::vector<AttentionParams> gates) {
  const std::size_t expected = drop_.method == DropMethod::kTargetDrop ? drop_.insert_after.size() : 0;
  if (gates.size() != expected) throw ShapeError("gate count does not match the insertion points");
  for (std::size_t i = 0; i < gates.size(); ++i) {
    if (gates[i].channels != group_channels(drop_.insert_after[i])) {
      throw ShapeError("gate channel count does not match its insertion point");
    }
  }
  gates_ = std::move(gates);
}

void TinyCNN::rebuild_gates() {
  gates_.clear();
  if (drop_.method != DropMethod::kTargetDrop) return;
  for (auto g : drop_.insert_after) {
    gates_.push_back(init_attention(group_channels(g), drop_.reduction_ratio,
                                    derive_seed(seed_, {0x6a7e, g})));
  }
}

Conv2dSpec TinyCNN::conv_spec(std::size_t layer) const {
  return {(layer == 3 || layer == 5) ? std::size_t{2} : std::size_t{1}, 1};
}

std::size_t TinyCNN::group_ending_at(std::size_t layer) noexcept {
  switch (layer) {
    case 2: return 1;
    case 4: return 2;
    case 6: return 3;
    default: return 0;
  }
}

std::size_t TinyCNN::group_channels(std::size_t group) const {
  if (group < 1 || group > 3) throw ConfigError("groups are numbered 1..3");
  return cfg_.widths[group - 1];
}

std::size_t TinyCNN::group_extent(std::size_t group) const {
  std::size_t e = cfg_.image_size;
  if (group >= 2) e = conv_out(e, 2);
  if (group >= 3) e = conv_out(e, 2);
  return e;
}

SampleTrace forward_sample(const TinyCNN& model, const Tensor& raw_image, const ForwardOptions& opts) {
  const auto& cfg = model.config();
  const Shape expected{cfg.image_size, cfg.image_size, cfg.in_channels};
  if (raw_image.shape() != expected) {
    throw ShapeError("model expects images " + shape_to_string(expected) + ", got " +
                     shape_to_string(raw_image.shape()));
  }
  const auto& drop = model.drop_config();
  const bool dropping = opts.mode == RunMode::kTrain && drop.method != DropMethod::kNone;
  if (dropping && opts.frozen_masks && opts.frozen_masks->size() != drop.insert_after.size()) {
    throw ShapeError("frozen masks do not match the insertion points");
  }
  if (opts.relu_gates && opts.relu_gates->size() != TinyCNN::kConvLayers) {
    throw ShapeError("relu gates need one tensor per conv layer");
  }

  SampleTrace t;
  t.conv_inputs.reserve(TinyCNN::kConvLayers);
  t.pre_activations.reserve(TinyCNN::kConvLayers);
  Tensor x = normalize_image(raw_image, model.input_normalization());
  t.activation_shapes.push_back(x.shape());
  std::size_t point = 0;
  for (std::size_t l = 0; l < TinyCNN::kConvLayers; ++l) {
    t.conv_inputs.push_back(x);
    t.pre_activations.push_back(conv2d(x, model.kernel(l), model.bias(l).data(), model.conv_spec(l)));
    if (opts.relu_gates) {
      const Tensor& gate = (*opts.relu_gates)[l];
      if (gate.shape() != t.pre_activations.back().shape()) throw ShapeError("relu gate shape mismatch");
      x = Tensor(gate.shape(), relu_backward(gate.data(), t.pre_activations.back().data()));
    } else {
      x = relu(t.pre_activations.back());
    }
    t.activation_shapes.push_back(x.shape());

    const std::size_t group = TinyCNN::group_ending_at(l);
    if (!group || point >= drop.insert_after.size() || drop.insert_after[point] != group) continue;
    if (dropping) {
      DropMask mask;
      const std::uint64_t seed = derive_seed(opts.mask_seed, {point});
      if (opts.frozen_masks) {
        mask = (*opts.frozen_masks)[point];
      } else {
        switch (drop.method) {
          case DropMethod::kTargetDrop: {
            DropConfig dc = drop.targetdrop;
            dc.phase = Phase::kTrain;
            mask = build_mask(x, attention_map(x, model.gates()[point]), dc);
            break;
          }
          case DropMethod::kDropout: mask = dropout_mask(x.shape(), drop.rate, seed); break;
          case DropMethod::kSpatialDropout: mask = spatialdropout_mask(x.shape(), drop.rate, seed); break;
          case DropMethod::kDropBlock:
            mask = dropblock_mask(x.shape(), drop.seed_rate, drop.block, seed);
            break;
          default: throw ConfigError("unsupported drop layer method");
        }
      }
      x = drop.method == DropMethod::kTargetDrop ? apply_and_normalize(x, mask) : apply_mask(x, mask);
      t.activation_shapes.push_back(x.shape());
      t.masks.push_back(std::move(mask));
      t.mask_groups.push_back(group);
    }
    ++point;
  }

  const auto& w = model.dense_weight();
  t.head_input = cfg.head == Head::kGlobalAvgPool ? global_avg_pool(x) : x.values();
  t.logits = dense(as_matrix(w), model.dense_bias().data(), t.head_input);
  t.features = std::move(x);
  return t;
}

std::vector<double> predict_logits(const TinyCNN& model, const Tensor& raw_image) {
  return forward_sample(model, raw_image, {}).logits;
}

Gradients Gradients::zeros_like(const TinyCNN& model) {
  Gradients g;
  for (const auto& p : model.parameters()) g.values.emplace_back(p.value.shape());
  return g;
}

void backward_sample(const TinyCNN& model, const SampleTrace& trace, std::size_t label,
                     double scale, Gradients& grads) {
  const auto& cfg = model.config();
  const auto ce = softmax_cross_entropy(trace.logits, label);
  const auto g_logits = softmax_cross_entropy_backward(ce.probs, label, scale);
  const auto dg = dense_backward(as_matrix(model.dense_weight()), trace.head_input, g_logits);
  const std::size_t dense_w = 2 * TinyCNN::kConvLayers;
  add_into(grads.values[dense_w], dg.grad_w.data());
  add_into(grads.values[dense_w + 1], dg.grad_b);

  Tensor g = cfg.head == Head::kGlobalAvgPool
                 ? global_avg_pool_backward(dg.grad_x, trace.features.shape())
                 : Tensor(trace.features.shape(), dg.grad_x);
  const bool targetdrop = model.drop_config().method == DropMethod::kTargetDrop;
  std::size_t remaining = trace.masks.size();
  for (std::size_t l = TinyCNN::kConvLayers; l-- > 0;) {
    const std::size_t group = TinyCNN::group_ending_at(l);
    if (group && remaining && trace.mask_groups[remaining - 1] == group) {
      const DropMask& mask = trace.masks[--remaining];
      g = targetdrop ? targetdrop_backward(g, mask) : apply_mask(g, mask);
    }
    Tensor g_pre(g.shape(), relu_backward(trace.pre_activations[l].data(), g.data()));
    auto cg = conv2d_backward(trace.conv_inputs[l], model.kernel(l), g_pre, model.conv_spec(l));
    add_into(grads.values[2 * l], cg.grad_kernel.data());
    add_into(grads.values[2 * l + 1], cg.grad_bias);
    g = std::move(cg.grad_input);
  }
}

BatchResult forward_backward(const TinyCNN& model, const Tensor& images,
                             std::span<const std::size_t> labels, const BatchOptions& opts) {
  if (images.rank() != 4 || images.dim(0) != labels.size() || labels.empty()) {
    throw ShapeError("forward_backward: need a nonempty (N, H, W, C) batch with N labels");
  }
  if (opts.frozen_masks && opts.frozen_masks->size() != labels.size()) {
    throw ShapeError("forward_backward: one frozen mask set per sample required");
  }
  const std::size_t n = labels.size();
  BatchResult r;
  r.grads = Gradients::zeros_like(model);
  r.masks.resize(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    ForwardOptions fo{opts.mode, derive_seed(opts.mask_seed, {i}),
                      opts.frozen_masks ? &(*opts.frozen_masks)[i] : nullptr};
    auto trace = forward_sample(model, images.sample(i), fo);
    const auto ce = softmax_cross_entropy(trace.logits, labels[i]);
    r.loss += ce.loss * scale;
    if (argmax_index(trace.logits) == labels[i]) ++r.correct;
    backward_sample(model, trace, labels[i], scale, r.grads);
    r.masks[i] = std::move(trace.masks);
  }
  return r;
}

double batch_loss(const TinyCNN& model, const Tensor& images, std::span<const std::size_t> labels,
                  const BatchOptions& opts) {
  if (images.rank() != 4 || images.dim(0) != labels.size() || labels.empty()) {
    throw ShapeError("batch_loss: need a nonempty (N, H, W, C) batch with N labels");
  }
  const std::size_t n = labels.size();
  const double scale = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ForwardOptions fo{opts.mode, derive_seed(opts.mask_seed, {i}),
                      opts.frozen_masks ? &(*opts.frozen_masks)[i] : nullptr,
                      opts.relu_gates ? &(*opts.relu_gates)[i] : nullptr};
    const auto trace = forward_sample(model, images.sample(i), fo);
    loss += softmax_cross_entropy(trace.logits, labels[i]).loss * scale;
  }
  return loss;
}

void NesterovSgd::step(std::vector<Parameter>& params, const Gradients& grads, double lr) {
  if (grads.values.size() != params.size()) throw ShapeError("optimizer: gradient count mismatch");
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value.size(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].value.data();
    auto g = grads.values[i].data();
    auto& v = velocity_[i];
    if (g.size() != p.size() || v.size() != p.size()) throw ShapeError("optimizer: shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = g[j] + weight_decay_ * p[j];
      v[j] = momentum_ * v[j] + d;
      p[j] -= lr * (nesterov_ ? d + momentum_ * v[j] : v[j]);
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(initial_lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(lr_decay > 0.0)) throw ConfigError("lr decay factor must be positive");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (!(milestones[i] > 0.0 && milestones[i] < 1.0)) {
      throw ConfigError("lr milestones must lie in (0, 1)");
    }
    if (i && milestones[i] <= milestones[i - 1]) {
      throw ConfigError("lr milestones must be strictly increasing");
    }
  }
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.initial_lr;
  for (double m : cfg.milestones) {
    const auto at = static_cast<std::size_t>(std::floor(m * static_cast<double>(cfg.epochs) + 1e-9));
    if (epoch >= at) lr *= cfg.lr_decay;
  }
  return lr;
}

double evaluate(const TinyCNN& model, const ImageDataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax_index(predict_logits(model, data.image(i))) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<EpochLog> train(TinyCNN& model, const ImageDataset& train_set,
                            const ImageDataset& test_set, const TrainConfig& cfg,
                            const EpochCallback& on_epoch) {
  cfg.validate();
  train_set.validate();
  if (train_set.size() == 0) throw Error("training set is empty");
  if (train_set.classes > model.config().classes) {
    throw ConfigError("dataset has more classes than the model outputs");
  }
  if (!train_set.normalized) model.set_input_normalization(compute_norm_stats(train_set));

  const std::size_t n = train_set.size();
  const std::size_t h = train_set.height(), w = train_set.width(), c = train_set.channels();
  const double base_gamma = model.drop_config().targetdrop.gamma;
  NesterovSgd opt(cfg.momentum, cfg.weight_decay, cfg.nesterov);
  std::vector<EpochLog> logs;
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    if (cfg.gamma_schedule) {
      auto drop = model.drop_config();
      drop.targetdrop.gamma = cfg.gamma_schedule(epoch, cfg.epochs, base_gamma);
      model.set_drop_config(std::move(drop));
    }
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(derive_seed(cfg.seed, {1, epoch}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      Tensor images({b, h, w, c});
      std::vector<std::size_t> labels(b);
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t idx = order[start + k];
        Tensor img = train_set.image(idx);
        if (cfg.augment) {
          Rng ar(derive_seed(cfg.seed, {2, epoch, start + k}));
          img = augment(img, draw_augment_params(ar, cfg.augment_options), cfg.augment_options.pad);
        }
        if (cfg.cutout_size > 0) {
          img = apply_mask(img, cutout_mask(h, w, cfg.cutout_size, derive_seed(cfg.seed, {3, epoch, start + k})));
        }
        images.set_sample(k, img);
        labels[k] = train_set.labels[idx];
      }
      auto result = forward_backward(model, images, labels,
                                     {RunMode::kTrain, derive_seed(cfg.seed, {4, epoch, batch}), nullptr});
      if (!std::isfinite(result.loss)) {
        std::ostringstream os;
        os << "training diverged: loss " << result.loss << " at epoch " << epoch << ", batch "
           << batch << " (lr " << lr << ")";
        throw TrainingDiverged(os.str());
      }
      opt.step(model.parameters(), result.grads, lr);
      loss_sum += result.loss * static_cast<double>(b);
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = loss_sum / static_cast<double>(n);
    log.train_acc = evaluate(model, train_set);
    log.test_acc = evaluate(model, test_set);
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

ParamOverhead param_overhead(std::span<const std::size_t> channels, std::size_t r,
                             std::size_t base_parameters) {
  if (r == 0) throw ConfigError("invalid reduction ratio: r must be positive");
  if (base_parameters == 0) throw ConfigError("base parameter count must be positive");
  ParamOverhead o;
  for (auto c : channels) {
    if (c == 0 || c % r != 0) {
      throw ConfigError("invalid reduction ratio: r=" + std::to_string(r) +
                        " does not divide C=" + std::to_string(c));
    }
    o.added += 2 * c * c / r;
  }
  o.fraction = static_cast<double>(o.added) / static_cast<double>(base_parameters);
  return o;
}

Tensor class_activation_map(const Tensor& features, std::span<const double> class_weights,
                            std::size_t out_h, std::size_t out_w) {
  if (features.rank() != 3) throw ShapeError("class_activation_map: expected (H, W, C) features");
  const std::size_t fh = features.dim(0), fw = features.dim(1), c = features.dim(2);
  if (class_weights.size() != c) throw ShapeError("class_activation_map: one weight per channel");
  if (fh == 0 || fw == 0 || out_h == 0 || out_w == 0) throw ShapeError("class_activation_map: empty map");

  std::vector<double> cam(fh * fw, 0.0);
  auto f = features.data();
  for (std::size_t p = 0; p < fh * fw; ++p) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) acc += class_weights[ch] * f[p * c + ch];
    cam[p] = acc;
  }
  const auto [lo_it, hi_it] = std::minmax_element(cam.begin(), cam.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  for (auto& v : cam) v = range > 0.0 ? (v - lo) / range : 0.0;

  Tensor out({out_h, out_w});
  for (std::size_t i = 0; i < out_h; ++i) {
    const std::size_t si = i * fh / out_h;
    for (std::size_t j = 0; j < out_w; ++j) out[i * out_w + j] = cam[si * fw + j * fw / out_w];
  }
  return out;
}

Tensor compute_cam(const TinyCNN& model, const Tensor& raw_image, std::size_t class_index) {
  if (model.config().head != Head::kGlobalAvgPool) {
    throw Error("class activation maps need a global-average-pool head");
  }
  if (class_index >= model.config().classes) throw Error("class index out of range");
  const auto trace = forward_sample(model, raw_image, {});
  const auto& w = model.dense_weight();
  const std::size_t c = w.dim(1);
  std::span<const double> row(w.data().data() + class_index * c, c);
  return class_activation_map(trace.features, row, raw_image.dim(0), raw_image.dim(1));
}

}  // namespace targetdrop
