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

#include "targetdrop/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace targetdrop {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": size mismatch (" << a << " vs " << b << ")";
    throw ShapeError(os.str());
  }
}

void require_rank3(const Tensor& t, const char* what) {
  if (t.rank() != 3) {
    throw ShapeError(std::string(what) + ": expected (H, W, C) tensor, got " +
                     shape_to_string(t.shape()));
  }
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor " + shape_to_string(shape_) + " cannot hold " +
                     std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range");
  return shape_[axis];
}

Tensor Tensor::sample(std::size_t n) const {
  if (rank() != 4 || n >= shape_[0]) throw ShapeError("sample index out of range");
  const std::size_t block = shape_[1] * shape_[2] * shape_[3];
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(n * block);
  return Tensor({shape_[1], shape_[2], shape_[3]},
                std::vector<double>(first, first + static_cast<std::ptrdiff_t>(block)));
}

void Tensor::set_sample(std::size_t n, const Tensor& value) {
  if (rank() != 4 || n >= shape_[0]) throw ShapeError("sample index out of range");
  const Shape expected{shape_[1], shape_[2], shape_[3]};
  if (value.shape() != expected) {
    throw ShapeError("set_sample: expected " + shape_to_string(expected) + ", got " +
                     shape_to_string(value.shape()));
  }
  std::copy(value.data_.begin(), value.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(n * value.size()));
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ShapeError("matrix data size mismatch");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ChannelVector global_avg_pool(const Tensor& u) {
  require_rank3(u, "global_avg_pool");
  const std::size_t h = u.dim(0), w = u.dim(1), c = u.dim(2);
  if (h == 0 || w == 0) throw ShapeError("global_avg_pool: degenerate shape");
  ChannelVector v(c, 0.0);
  const auto d = u.data();
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) v[ch] += d[p * c + ch];
  }
  const double inv = 1.0 / static_cast<double>(h * w);
  for (auto& x : v) x *= inv;
  return v;
}

ChannelVector matvec(const Matrix& w, std::span<const double> x) {
  require_same_size(w.cols(), x.size(), "matvec");
  ChannelVector y(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += w(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> relu(std::span<const double> x) {
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
  return y;
}

std::vector<double> sigmoid(std::span<const double> x) {
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return sigmoid(v); });
  return y;
}

std::vector<double> pointwise_mul(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "pointwise_mul");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

std::vector<double> scalar_mul(std::span<const double> a, double s) {
  std::vector<double> y(a.size());
  std::transform(a.begin(), a.end(), y.begin(), [s](double v) { return v * s; });
  return y;
}

Tensor relu(const Tensor& x) { return Tensor(x.shape(), relu(x.data())); }
Tensor sigmoid(const Tensor& x) { return Tensor(x.shape(), sigmoid(x.data())); }
Tensor scalar_mul(const Tensor& a, double s) { return Tensor(a.shape(), scalar_mul(a.data(), s)); }

Tensor pointwise_mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("pointwise_mul: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  return Tensor(a.shape(), pointwise_mul(a.data(), b.data()));
}

SpatialIndex argmax_spatial(const Tensor& u, std::size_t c) {
  require_rank3(u, "argmax_spatial");
  const std::size_t h = u.dim(0), w = u.dim(1), channels = u.dim(2);
  if (h == 0 || w == 0) throw ShapeError("argmax_spatial: empty map");
  if (c >= channels) throw ShapeError("argmax_spatial: channel out of range");
  SpatialIndex best;
  double best_value = u.at(0, 0, c);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      // Strict comparison keeps the first occurrence in row-major order.
      if (u.at(i, j, c) > best_value) {
        best_value = u.at(i, j, c);
        best = {i, j};
      }
    }
  }
  return best;
}

SpatialIndex argmax_spatial(const Tensor& map2d) {
  if (map2d.rank() != 2) throw ShapeError("argmax_spatial: expected (H, W) map");
  return argmax_spatial(Tensor({map2d.dim(0), map2d.dim(1), 1}, map2d.values()), 0);
}

namespace {

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < k) throw ShapeError("conv2d: kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

void check_conv_operands(const Tensor& input, const Tensor& kernel, const Conv2dSpec& spec) {
  require_rank3(input, "conv2d");
  if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be (KH, KW, Cin, Cout)");
  if (kernel.dim(2) != input.dim(2)) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(2)) +
                     " input channels, input has " + std::to_string(input.dim(2)));
  }
  if (spec.stride == 0) throw ShapeError("conv2d: stride must be positive");
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const Conv2dSpec& spec) {
  check_conv_operands(input, kernel, spec);
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
  require_same_size(bias.size(), cout, "conv2d bias");
  const std::size_t ho = conv_out_extent(h, kh, spec.stride, spec.pad);
  const std::size_t wo = conv_out_extent(w, kw, spec.stride, spec.pad);

  Tensor out({ho, wo, cout});
  const double* in = input.data().data();
  const double* k = kernel.data().data();
  double* o = out.data().data();
  const auto pad = static_cast<std::ptrdiff_t>(spec.pad);

  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      double* op = o + (oy * wo + ox) * cout;
      std::copy(bias.begin(), bias.end(), op);
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * spec.stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * spec.stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* ip = in + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          const double* kp = k + (ky * kw + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double v = ip[ci];
            const double* kr = kp + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) op[co] += v * kr[co];
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> dense(const Matrix& w, std::span<const double> b, std::span<const double> x) {
  require_same_size(b.size(), w.rows(), "dense bias");
  auto y = matvec(w, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

SoftmaxCrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (logits.empty()) throw ShapeError("softmax_cross_entropy: empty logits");
  if (label >= logits.size()) throw ShapeError("softmax_cross_entropy: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  SoftmaxCrossEntropy r;
  r.probs.resize(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.probs[i] = std::exp(logits[i] - mx);
    z += r.probs[i];
  }
  for (auto& p : r.probs) p /= z;
  r.loss = -(logits[label] - mx - std::log(z));
  return r;
}

Tensor global_avg_pool_backward(std::span<const double> grad_v, const Shape& input_shape) {
  if (input_shape.size() != 3) throw ShapeError("global_avg_pool_backward: expected (H, W, C)");
  const std::size_t h = input_shape[0], w = input_shape[1], c = input_shape[2];
  require_same_size(grad_v.size(), c, "global_avg_pool_backward upstream");
  if (h == 0 || w == 0) throw ShapeError("global_avg_pool_backward: degenerate shape");
  Tensor g(input_shape);
  const double inv = 1.0 / static_cast<double>(h * w);
  auto d = g.data();
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) d[p * c + ch] = grad_v[ch] * inv;
  }
  return g;
}

MatvecGrad matvec_backward(const Matrix& w, std::span<const double> x,
                           std::span<const double> grad_y) {
  require_same_size(w.cols(), x.size(), "matvec_backward input");
  require_same_size(w.rows(), grad_y.size(), "matvec_backward upstream");
  MatvecGrad g{Matrix(w.rows(), w.cols()), std::vector<double>(w.cols(), 0.0)};
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      g.grad_w(r, c) = grad_y[r] * x[c];
      g.grad_x[c] += w(r, c) * grad_y[r];
    }
  }
  return g;
}

std::vector<double> relu_backward(std::span<const double> x, std::span<const double> grad_y) {
  require_same_size(x.size(), grad_y.size(), "relu_backward upstream");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? grad_y[i] : 0.0;
  return g;
}

std::vector<double> sigmoid_backward(std::span<const double> x, std::span<const double> grad_y) {
  require_same_size(x.size(), grad_y.size(), "sigmoid_backward upstream");
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = sigmoid(x[i]);
    g[i] = grad_y[i] * s * (1.0 - s);
  }
  return g;
}

PointwiseMulGrad pointwise_mul_backward(std::span<const double> a, std::span<const double> b,
                                        std::span<const double> grad_y) {
  require_same_size(a.size(), b.size(), "pointwise_mul_backward operands");
  require_same_size(a.size(), grad_y.size(), "pointwise_mul_backward upstream");
  return {pointwise_mul(grad_y, b), pointwise_mul(grad_y, a)};
}

Conv2dGrad conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                           const Conv2dSpec& spec) {
  check_conv_operands(input, kernel, spec);
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
  const std::size_t ho = conv_out_extent(h, kh, spec.stride, spec.pad);
  const std::size_t wo = conv_out_extent(w, kw, spec.stride, spec.pad);
  const Shape expected{ho, wo, cout};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d_backward: upstream gradient " + shape_to_string(grad_out.shape()) +
                     ", expected " + shape_to_string(expected));
  }

  Conv2dGrad g{Tensor(input.shape()), Tensor(kernel.shape()), std::vector<double>(cout, 0.0)};
  const double* in = input.data().data();
  const double* k = kernel.data().data();
  const double* go = grad_out.data().data();
  double* gi = g.grad_input.data().data();
  double* gk = g.grad_kernel.data().data();
  const auto pad = static_cast<std::ptrdiff_t>(spec.pad);

  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const double* gp = go + (oy * wo + ox) * cout;
      for (std::size_t co = 0; co < cout; ++co) g.grad_bias[co] += gp[co];
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * spec.stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * spec.stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::size_t in_off =
              (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          const std::size_t k_off = (ky * kw + kx) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double v = in[in_off + ci];
            const double* kr = k + k_off + ci * cout;
            double* gkr = gk + k_off + ci * cout;
            double acc = 0.0;
            for (std::size_t co = 0; co < cout; ++co) {
              acc += kr[co] * gp[co];
              gkr[co] += v * gp[co];
            }
            gi[in_off + ci] += acc;
          }
        }
      }
    }
  }
  return g;
}

DenseGrad dense_backward(const Matrix& w, std::span<const double> x,
                         std::span<const double> grad_y) {
  auto mv = matvec_backward(w, x, grad_y);
  return {std::move(mv.grad_w), std::vector<double>(grad_y.begin(), grad_y.end()),
          std::move(mv.grad_x)};
}

std::vector<double> softmax_cross_entropy_backward(std::span<const double> probs,
                                                   std::size_t label, double grad_loss) {
  if (label >= probs.size()) throw ShapeError("softmax_cross_entropy_backward: label out of range");
  std::vector<double> g(probs.begin(), probs.end());
  g[label] -= 1.0;
  for (auto& x : g) x *= grad_loss;
  return g;
}

}  // namespace targetdrop
