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

// Dense real arrays and the handful of operations the drop layers and the
// harness network need.
//
// Layout: every feature tensor is row-major with the channel axis
// contiguous. A rank-3 tensor is (H, W, C) and element (i, j, c) lives at
// (i * W + j) * C + c. A rank-4 tensor is (N, H, W, C) with each sample a
// contiguous rank-3 block. All arithmetic is done in double precision.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "targetdrop/error.hpp"

namespace targetdrop {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // (H, W, C) accessors; valid on rank-3 tensors only.
  double at(std::size_t i, std::size_t j, std::size_t c) const {
    return data_[(i * shape_[1] + j) * shape_[2] + c];
  }
  double& at(std::size_t i, std::size_t j, std::size_t c) {
    return data_[(i * shape_[1] + j) * shape_[2] + c];
  }

  // Rank-4 helpers: copy out / write back sample n as an (H, W, C) tensor.
  Tensor sample(std::size_t n) const;
  void set_sample(std::size_t n, const Tensor& value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Per-channel vector (pooled statistics, attention scores).
using ChannelVector = std::vector<double>;

struct SpatialIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const SpatialIndex&, const SpatialIndex&) = default;
};

// ---------------------------------------------------------------------------
// Forward operations.

/// Spatial mean of each channel of an (H, W, C) tensor.
ChannelVector global_avg_pool(const Tensor& u);

ChannelVector matvec(const Matrix& w, std::span<const double> x);

std::vector<double> relu(std::span<const double> x);
std::vector<double> sigmoid(std::span<const double> x);
std::vector<double> pointwise_mul(std::span<const double> a, std::span<const double> b);
std::vector<double> scalar_mul(std::span<const double> a, double s);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor pointwise_mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);

double sigmoid(double x);

/// Position of the largest value of channel `c` in an (H, W, C) tensor.
/// Ties go to the smallest row, then the smallest column.
SpatialIndex argmax_spatial(const Tensor& u, std::size_t c);
/// Same rule on a single (H, W) map.
SpatialIndex argmax_spatial(const Tensor& map2d);

struct Conv2dSpec {
  std::size_t stride = 1;
  std::size_t pad = 1;
};

/// 2-D cross-correlation. input (H, W, Cin), kernel (KH, KW, Cin, Cout),
/// bias (Cout). Output is (Ho, Wo, Cout) with Ho = (H + 2 pad - KH) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const Conv2dSpec& spec);

/// y = W x + b with W of shape (out, in).
std::vector<double> dense(const Matrix& w, std::span<const double> b, std::span<const double> x);

struct SoftmaxCrossEntropy {
  double loss = 0.0;
  std::vector<double> probs;
};

SoftmaxCrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label);

// ---------------------------------------------------------------------------
// Backward operations. Each takes the forward operands and the upstream
// gradient and returns gradients for the inputs. A mismatched upstream
// gradient raises ShapeError.

Tensor global_avg_pool_backward(std::span<const double> grad_v, const Shape& input_shape);

struct MatvecGrad {
  Matrix grad_w;
  std::vector<double> grad_x;
};
MatvecGrad matvec_backward(const Matrix& w, std::span<const double> x,
                           std::span<const double> grad_y);

std::vector<double> relu_backward(std::span<const double> x, std::span<const double> grad_y);
std::vector<double> sigmoid_backward(std::span<const double> x, std::span<const double> grad_y);

struct PointwiseMulGrad {
  std::vector<double> grad_a;
  std::vector<double> grad_b;
};
PointwiseMulGrad pointwise_mul_backward(std::span<const double> a, std::span<const double> b,
                                        std::span<const double> grad_y);

struct Conv2dGrad {
  Tensor grad_input;
  Tensor grad_kernel;
  std::vector<double> grad_bias;
};
Conv2dGrad conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                           const Conv2dSpec& spec);

struct DenseGrad {
  Matrix grad_w;
  std::vector<double> grad_b;
  std::vector<double> grad_x;
};
DenseGrad dense_backward(const Matrix& w, std::span<const double> x,
                         std::span<const double> grad_y);

/// Gradient of the loss w.r.t. the logits, scaled by `grad_loss`.
std::vector<double> softmax_cross_entropy_backward(std::span<const double> probs,
                                                   std::size_t label, double grad_loss = 1.0);

}  // namespace targetdrop
