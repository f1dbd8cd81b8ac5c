// Copyright 2026 The neoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neoc {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_count(const Shape& shape);

/// Dense row-major tensor. Instantiated for float (training) and double
/// (gradient checking).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  /// Throws ShapeError if the value count does not match the shape.
  Tensor(Shape shape, std::vector<T> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Element of a rank-4 [N,C,H,W] tensor.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(T value);
  /// Same data under a new shape with an equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;
  /// Throws NumericError naming `what` if any element is NaN or Inf.
  void require_finite(std::string_view what) const;

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

/// Trainable weight with its gradient and momentum buffer.
template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string param_name, Tensor<T> initial);

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> velocity;
};

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> kernels;
  Tensor<T> bias;
};

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  Tensor<T> grad;
};

/// Cross-correlation of [N,C,H,W] input with [K,C,kh,kw] kernels, zero
/// padding. Output is [N,K,H',W'] with H' = (H + 2*pad - kh) / stride + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 int stride, int pad, int threads = 1);

/// Gradients of conv2d. Per-sample kernel gradients are summed in sample
/// order, so the result is identical for every thread count. The input
/// gradient is skipped (left empty) when `want_input_grad` is false.
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                               const Tensor<T>& grad_output, int stride, int pad,
                               bool want_input_grad = true, int threads = 1);

/// 2x2 stride-2 max pooling; H and W must be even.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input);

/// Routes each output gradient to the first maximal element of its window
/// in row-major order.
template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& input, const Tensor<T>& grad_output);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Passes the gradient where input > 0; zero elsewhere, including at 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output);

/// input[N,D] * weights[D,M] + bias[M].
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& grad_output);

/// Row-wise softmax of [N,K] logits, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Mean negative log-likelihood and its gradient (softmax - onehot) / N.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits,
                                     std::span<const std::size_t> targets);

/// v <- momentum*v - lr*g; w <- w + v; g <- 0. Throws NumericError naming
/// the first parameter whose gradient is not finite, before touching any
/// weights.
template <typename T>
void sgd_momentum_step(std::span<Parameter<T>* const> params, double lr, double momentum);

/// Fan-in of a weight shape: C*kh*kw for [K,C,kh,kw], D for [D,M], n for [n].
std::size_t fan_in(const Shape& shape);

/// Zero-mean Gaussian with std sqrt(2 / fan_in), deterministic in `seed`.
template <typename T>
Tensor<T> he_init(const Shape& shape, std::uint64_t seed);

}  // namespace neoc
