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

#include "targetdrop/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "targetdrop/attention.hpp"
#include "targetdrop/nn.hpp"
#include "targetdrop/random.hpp"
#include "targetdrop/target_drop.hpp"
#include "targetdrop/tensor.hpp"

namespace targetdrop {

namespace {

using Vec = std::vector<double>;
using LossFn = std::function<double(const Vec&)>;

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double rel_error(std::span<const double> analytic, std::span<const double> numeric) {
  Vec diff(analytic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
  const double scale = std::max(norm(analytic), norm(numeric));
  if (scale < 1e-12) return norm(diff);
  return norm(diff) / scale;
}

Vec numeric_gradient(const LossFn& loss, Vec x, double eps) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = loss(x);
    x[i] = orig - eps;
    const double down = loss(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

Vec uniform_vec(Rng& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Values in [-1, 1] kept clear of the ReLU kink.
Vec kink_free_vec(Rng& rng, std::size_t n, double margin) {
  Vec v(n);
  for (auto& x : v) {
    do {
      x = rng.uniform(-1.0, 1.0);
    } while (std::abs(x) < margin);
  }
  return v;
}

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

Vec concat(std::initializer_list<std::span<const double>> parts) {
  Vec out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// One trial: returns (analytic, numeric).
using Trial = std::function<std::pair<Vec, Vec>(Rng&, double eps)>;

std::pair<Vec, Vec> trial_pool(Rng& rng, double eps) {
  const Shape shape{between(rng, 1, 5), between(rng, 1, 5), between(rng, 1, 4)};
  const Vec u = uniform_vec(rng, shape_numel(shape));
  const Vec r = uniform_vec(rng, shape[2]);
  auto loss = [&](const Vec& x) { return dot(r, global_avg_pool(Tensor(shape, x))); };
  return {global_avg_pool_backward(r, shape).values(), numeric_gradient(loss, u, eps)};
}

std::pair<Vec, Vec> trial_matvec(Rng& rng, double eps) {
  const std::size_t rows = between(rng, 1, 5), cols = between(rng, 1, 5);
  const Vec w = uniform_vec(rng, rows * cols), x = uniform_vec(rng, cols), r = uniform_vec(rng, rows);
  auto loss = [&](const Vec& v) {
    Matrix m(rows, cols, Vec(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rows * cols)));
    return dot(r, matvec(m, std::span<const double>(v).subspan(rows * cols)));
  };
  auto g = matvec_backward(Matrix(rows, cols, w), x, r);
  return {concat({g.grad_w.data(), g.grad_x}), numeric_gradient(loss, concat({w, x}), eps)};
}

std::pair<Vec, Vec> trial_relu(Rng& rng, double eps) {
  const std::size_t n = between(rng, 1, 16);
  const Vec x = kink_free_vec(rng, n, 4 * eps), r = uniform_vec(rng, n);
  auto loss = [&](const Vec& v) { return dot(r, relu(std::span<const double>(v))); };
  return {relu_backward(x, r), numeric_gradient(loss, x, eps)};
}

std::pair<Vec, Vec> trial_sigmoid(Rng& rng, double eps) {
  const std::size_t n = between(rng, 1, 16);
  const Vec x = uniform_vec(rng, n), r = uniform_vec(rng, n);
  auto loss = [&](const Vec& v) { return dot(r, sigmoid(std::span<const double>(v))); };
  return {sigmoid_backward(x, r), numeric_gradient(loss, x, eps)};
}

std::pair<Vec, Vec> trial_pointwise_mul(Rng& rng, double eps) {
  const std::size_t n = between(rng, 1, 16);
  const Vec a = uniform_vec(rng, n), b = uniform_vec(rng, n), r = uniform_vec(rng, n);
  auto loss = [&](const Vec& v) {
    std::span<const double> s(v);
    return dot(r, pointwise_mul(s.first(n), s.subspan(n)));
  };
  auto g = pointwise_mul_backward(a, b, r);
  return {concat({g.grad_a, g.grad_b}), numeric_gradient(loss, concat({a, b}), eps)};
}

std::pair<Vec, Vec> trial_conv2d(Rng& rng, double eps, bool first) {
  Conv2dSpec spec{between(rng, 1, 2), between(rng, 0, 1)};
  std::size_t h = between(rng, 3, 6), w = between(rng, 3, 6);
  std::size_t kh = between(rng, 1, 3), kw = between(rng, 1, 3);
  std::size_t cin = between(rng, 1, 3), cout = between(rng, 1, 3);
  if (first) {
    // 3x3 single-channel input with a 2x2 kernel.
    spec = {1, 0};
    h = w = 3;
    kh = kw = 2;
    cin = cout = 1;
  }
  const Shape in_shape{h, w, cin}, k_shape{kh, kw, cin, cout};
  const Vec in = uniform_vec(rng, shape_numel(in_shape));
  const Vec k = uniform_vec(rng, shape_numel(k_shape));
  const Vec b = uniform_vec(rng, cout);
  const Tensor probe = conv2d(Tensor(in_shape, in), Tensor(k_shape, k), b, spec);
  const Vec r = uniform_vec(rng, probe.size());
  const std::size_t ni = in.size(), nk = k.size();
  auto loss = [&](const Vec& v) {
    std::span<const double> s(v);
    Tensor x(in_shape, Vec(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(ni)));
    Tensor kk(k_shape, Vec(s.begin() + static_cast<std::ptrdiff_t>(ni),
                           s.begin() + static_cast<std::ptrdiff_t>(ni + nk)));
    return dot(r, conv2d(x, kk, s.subspan(ni + nk), spec).data());
  };
  auto g = conv2d_backward(Tensor(in_shape, in), Tensor(k_shape, k), Tensor(probe.shape(), r), spec);
  return {concat({g.grad_input.data(), g.grad_kernel.data(), g.grad_bias}),
          numeric_gradient(loss, concat({in, k, b}), eps)};
}

std::pair<Vec, Vec> trial_dense(Rng& rng, double eps) {
  const std::size_t out = between(rng, 1, 5), in = between(rng, 1, 5);
  const Vec w = uniform_vec(rng, out * in), b = uniform_vec(rng, out), x = uniform_vec(rng, in);
  const Vec r = uniform_vec(rng, out);
  auto loss = [&](const Vec& v) {
    std::span<const double> s(v);
    Matrix m(out, in, Vec(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(out * in)));
    return dot(r, dense(m, s.subspan(out * in, out), s.subspan(out * in + out)));
  };
  auto g = dense_backward(Matrix(out, in, w), x, r);
  return {concat({g.grad_w.data(), g.grad_b, g.grad_x}), numeric_gradient(loss, concat({w, b, x}), eps)};
}

std::pair<Vec, Vec> trial_softmax_ce(Rng& rng, double eps) {
  const std::size_t n = between(rng, 2, 8);
  const std::size_t label = rng.below(n);
  const Vec logits = uniform_vec(rng, n);
  auto loss = [&](const Vec& v) { return softmax_cross_entropy(v, label).loss; };
  const auto fwd = softmax_cross_entropy(logits, label);
  return {softmax_cross_entropy_backward(fwd.probs, label), numeric_gradient(loss, logits, eps)};
}

std::pair<Vec, Vec> trial_targetdrop(Rng& rng, double eps) {
  const Shape shape{between(rng, 2, 6), between(rng, 2, 6), between(rng, 1, 8)};
  const Vec u = uniform_vec(rng, shape_numel(shape));
  const Vec scores = uniform_vec(rng, shape[2]);
  DropConfig cfg;
  cfg.gamma = rng.uniform();
  cfg.block_size = 2 * between(rng, 0, 2) + 1;
  const DropMask mask = build_mask(Tensor(shape, u), scores, cfg);
  const Vec r = uniform_vec(rng, u.size());
  auto loss = [&](const Vec& v) { return dot(r, apply_and_normalize(Tensor(shape, v), mask).data()); };
  return {targetdrop_backward(Tensor(shape, r), mask).values(), numeric_gradient(loss, u, eps)};
}

std::pair<Vec, Vec> trial_attention(Rng& rng, double eps) {
  const std::size_t r_ratio = between(rng, 1, 2);
  const std::size_t c = r_ratio * between(rng, 1, 4);
  const Shape shape{between(rng, 1, 4), between(rng, 1, 4), c};
  AttentionParams p = init_attention(c, r_ratio, rng.next_u64(), true);
  const Vec u = uniform_vec(rng, shape_numel(shape));
  const Vec cot = uniform_vec(rng, c);
  const std::size_t n1 = p.w1.data().size(), n2 = p.w2.data().size();
  auto loss = [&](const Vec& v) {
    std::span<const double> s(v);
    AttentionParams q = p;
    std::copy(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n1), q.w1.data().begin());
    std::copy(s.begin() + static_cast<std::ptrdiff_t>(n1), s.begin() + static_cast<std::ptrdiff_t>(n1 + n2),
              q.w2.data().begin());
    Tensor x(shape, Vec(s.begin() + static_cast<std::ptrdiff_t>(n1 + n2), s.end()));
    return dot(cot, attention_map(x, q));
  };
  const auto trace = attention_forward(Tensor(shape, u), p);
  const auto g = attention_backward(trace, p, cot);
  return {concat({g.grad_w1.data(), g.grad_w2.data(), g.grad_input.data()}),
          numeric_gradient(loss, concat({p.w1.data(), p.w2.data(), u}), eps)};
}

// Whole classifier with TargetDrop after groups 1 and 2. Drop masks and
// ReLU gates are frozen from the unperturbed forward pass; without the
// gates, a step of 1e-3 crosses some ReLU kink in most instances. Each
// parameter tensor gets its own random unit direction, so the result holds
// one directional derivative per tensor and the norm-wise error covers
// every layer.
std::pair<Vec, Vec> trial_network(Rng& rng, double eps) {
  ModelConfig mc;
  mc.image_size = 8;
  DropLayerConfig dc;
  dc.method = DropMethod::kTargetDrop;
  dc.targetdrop.gamma = 0.15;
  dc.targetdrop.block_size = 3;
  TinyCNN model(mc, dc, rng.next_u64());

  constexpr std::size_t kBatch = 4;
  Tensor images({kBatch, mc.image_size, mc.image_size, mc.in_channels});
  for (auto& x : images.data()) x = rng.uniform(-1.0, 1.0);
  std::vector<std::size_t> labels(kBatch);
  for (auto& l : labels) l = rng.below(mc.classes);

  const auto base = forward_backward(model, images, labels, {RunMode::kTrain, 0, nullptr});
  const auto frozen = base.masks;
  std::vector<std::vector<Tensor>> gates;
  for (std::size_t i = 0; i < kBatch; ++i) {
    gates.push_back(forward_sample(model, images.sample(i), {RunMode::kTrain, 0, &frozen[i]}).pre_activations);
  }
  const BatchOptions opts{RunMode::kTrain, 0, &frozen, &gates};

  Vec analytic, numeric;
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto& param = model.parameters()[i];
    Vec dir(param.value.size());
    double sq = 0.0;
    for (auto& x : dir) {
      x = rng.normal();
      sq += x * x;
    }
    for (auto& x : dir) x /= std::sqrt(sq);
    analytic.push_back(dot(base.grads.values[i].data(), dir));
    auto shifted_loss = [&](double t) {
      TinyCNN m = model;
      auto p = m.parameters()[i].value.data();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] += t * dir[j];
      return batch_loss(m, images, labels, opts);
    };
    numeric.push_back((shifted_loss(eps) - shifted_loss(-eps)) / (2.0 * eps));
  }
  return {analytic, numeric};
}

struct CheckDef {
  const char* name;
  bool network;
  std::function<std::pair<Vec, Vec>(Rng&, double, std::size_t)> trial;
};

const std::vector<CheckDef>& checks() {
  static const std::vector<CheckDef> defs = {
      {"global_avg_pool", false, [](Rng& r, double e, std::size_t) { return trial_pool(r, e); }},
      {"matvec", false, [](Rng& r, double e, std::size_t) { return trial_matvec(r, e); }},
      {"relu", false, [](Rng& r, double e, std::size_t) { return trial_relu(r, e); }},
      {"sigmoid", false, [](Rng& r, double e, std::size_t) { return trial_sigmoid(r, e); }},
      {"pointwise_mul", false, [](Rng& r, double e, std::size_t) { return trial_pointwise_mul(r, e); }},
      {"conv2d", false, [](Rng& r, double e, std::size_t t) { return trial_conv2d(r, e, t == 0); }},
      {"dense", false, [](Rng& r, double e, std::size_t) { return trial_dense(r, e); }},
      {"softmax_cross_entropy", false, [](Rng& r, double e, std::size_t) { return trial_softmax_ce(r, e); }},
      {"attention_gate", false, [](Rng& r, double e, std::size_t) { return trial_attention(r, e); }},
      {"targetdrop_backward", false, [](Rng& r, double e, std::size_t) { return trial_targetdrop(r, e); }},
      {"tinycnn_network", true, [](Rng& r, double e, std::size_t) { return trial_network(r, e); }},
  };
  return defs;
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names;
  for (const auto& c : checks()) names.emplace_back(c.name);
  return names;
}

GradCheckResult run_gradcheck(const std::string& name, const GradCheckOptions& opts) {
  const auto& defs = checks();
  auto it = std::find_if(defs.begin(), defs.end(), [&](const CheckDef& d) { return name == d.name; });
  if (it == defs.end()) throw ConfigError("unknown gradient check '" + name + "'");
  const auto index = static_cast<std::uint64_t>(it - defs.begin());

  GradCheckResult res;
  res.name = name;
  res.trials = opts.trials;
  res.tolerance = it->network ? opts.network_tolerance : opts.op_tolerance;
  Rng rng(derive_seed(opts.seed, {index}));
  for (std::size_t t = 0; t < opts.trials; ++t) {
    auto [analytic, numeric] = it->trial(rng, opts.eps, t);
    if (opts.inject_fault == name) {
      for (auto& x : analytic) x *= 1.01;
    }
    res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic, numeric));
  }
  res.passed = res.max_rel_error <= res.tolerance;
  return res;
}

std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opts) {
  std::vector<GradCheckResult> out;
  for (const auto& name : gradcheck_names()) out.push_back(run_gradcheck(name, opts));
  return out;
}

}  // namespace targetdrop
