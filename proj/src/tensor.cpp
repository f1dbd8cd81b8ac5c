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

#include "neoc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "neoc/error.hpp"
#include "neoc/parallel.hpp"
#include "neoc/rng.hpp"

namespace neoc {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill)
    : shape_(std::move(shape)), values_(shape_count(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_count(shape_) != values_.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " needs " +
                     std::to_string(shape_count(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(values_.begin(), values_.end(), value);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_count(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

template <typename T>
bool Tensor<T>::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void Tensor<T>::require_finite(std::string_view what) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NumericError(std::string(what) + ": non-finite value at flat index " +
                         std::to_string(i));
    }
  }
}

template <typename T>
Parameter<T>::Parameter(std::string param_name, Tensor<T> initial)
    : name(std::move(param_name)),
      value(std::move(initial)),
      grad(value.shape()),
      velocity(value.shape()) {}

namespace {

// C[M,N] += A[M,K] * B[K,N], all row-major and contiguous.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N].
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[p * m + i];
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w;
  std::size_t k, kh, kw;
  std::size_t oh, ow;
  std::size_t stride, pad;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t out_pixels() const { return oh * ow; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& kernels, int stride, int pad) {
  if (input.rank() != 4) {
    throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_string(input.shape()));
  }
  if (kernels.rank() != 4) {
    throw ShapeError("conv2d: kernels must be [K,C,kh,kw], got " + shape_string(kernels.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  if (pad < 0) throw ShapeError("conv2d: pad must be non-negative");
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.k = kernels.dim(0);
  g.kh = kernels.dim(2);
  g.kw = kernels.dim(3);
  g.stride = static_cast<std::size_t>(stride);
  g.pad = static_cast<std::size_t>(pad);
  if (kernels.dim(1) != g.c) {
    throw ShapeError("conv2d: input has " + std::to_string(g.c) + " channels but kernels expect " +
                     std::to_string(kernels.dim(1)));
  }
  if (g.kh > g.h + 2 * g.pad || g.kw > g.w + 2 * g.pad) {
    throw ShapeError("conv2d: kernel " + shape_string(kernels.shape()) +
                     " larger than padded input " + shape_string(input.shape()));
  }
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

// Unfolds one sample into col[C*kh*kw, OH*OW].
template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* col) {
  const auto pixels = g.out_pixels();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((ch * g.kh + ky) * g.kw + kx) * pixels;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          T* out = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(out, out + g.ow, T{0});
            continue;
          }
          const T* src = image + (ch * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                          ? T{0}
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* image) {
  const auto pixels = g.out_pixels();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((ch * g.kh + ky) * g.kw + kx) * pixels;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = image + (ch * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[static_cast<std::size_t>(ix)] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " does not match " +
                     shape_string(b.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 int stride, int pad, int threads) {
  const auto g = conv_geometry(input, kernels, stride, pad);
  if (bias.rank() != 1 || bias.dim(0) != g.k) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(g.k) + "], got " +
                     shape_string(bias.shape()));
  }
  input.require_finite("conv2d input");

  Tensor<T> output({g.n, g.k, g.oh, g.ow});
  const auto pixels = g.out_pixels();
  const auto in_stride = g.c * g.h * g.w;
  const auto out_stride = g.k * pixels;
  parallel_for(g.n, threads, [&](std::size_t n) {
    std::vector<T> col(g.patch() * pixels);
    im2col(g, input.data() + n * in_stride, col.data());
    T* out = output.data() + n * out_stride;
    for (std::size_t k = 0; k < g.k; ++k) std::fill(out + k * pixels, out + (k + 1) * pixels, bias[k]);
    gemm_nn(g.k, pixels, g.patch(), kernels.data(), col.data(), out);
  });
  return output;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                               const Tensor<T>& grad_output, int stride, int pad,
                               bool want_input_grad, int threads) {
  const auto g = conv_geometry(input, kernels, stride, pad);
  const Shape expected{g.n, g.k, g.oh, g.ow};
  if (grad_output.shape() != expected) {
    throw ShapeError("conv2d_backward: grad_output " + shape_string(grad_output.shape()) +
                     ", expected " + shape_string(expected));
  }
  const auto pixels = g.out_pixels();
  const auto patch = g.patch();
  const auto in_stride = g.c * g.h * g.w;
  const auto out_stride = g.k * pixels;

  Conv2dGrads<T> grads;
  if (want_input_grad) grads.input = Tensor<T>(input.shape());
  grads.kernels = Tensor<T>(kernels.shape());
  grads.bias = Tensor<T>({g.k});

  std::vector<T> partial_kernels(g.n * g.k * patch, T{0});
  std::vector<T> partial_bias(g.n * g.k, T{0});

  parallel_for(g.n, threads, [&](std::size_t n) {
    const T* dout = grad_output.data() + n * out_stride;
    std::vector<T> col(patch * pixels);
    im2col(g, input.data() + n * in_stride, col.data());

    std::vector<T> col_t(pixels * patch);
    for (std::size_t r = 0; r < patch; ++r) {
      for (std::size_t p = 0; p < pixels; ++p) col_t[p * patch + r] = col[r * pixels + p];
    }
    gemm_nn(g.k, patch, pixels, dout, col_t.data(), partial_kernels.data() + n * g.k * patch);

    for (std::size_t k = 0; k < g.k; ++k) {
      T sum{0};
      for (std::size_t p = 0; p < pixels; ++p) sum += dout[k * pixels + p];
      partial_bias[n * g.k + k] = sum;
    }

    if (want_input_grad) {
      std::vector<T> dcol(patch * pixels, T{0});
      gemm_tn(patch, pixels, g.k, kernels.data(), dout, dcol.data());
      col2im(g, dcol.data(), grads.input.data() + n * in_stride);
    }
  });

  for (std::size_t n = 0; n < g.n; ++n) {
    const T* pk = partial_kernels.data() + n * g.k * patch;
    for (std::size_t i = 0; i < g.k * patch; ++i) grads.kernels[i] += pk[i];
    for (std::size_t k = 0; k < g.k; ++k) grads.bias[k] += partial_bias[n * g.k + k];
  }
  return grads;
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input) {
  if (input.rank() != 4) {
    throw ShapeError("maxpool2: input must be [N,C,H,W], got " + shape_string(input.shape()));
  }
  const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: H and W must be even, got " + shape_string(input.shape()));
  }
  Tensor<T> output({n, c, h / 2, w / 2});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h / 2; ++y) {
        for (std::size_t x = 0; x < w / 2; ++x) {
          T best = input.at(b, ch, 2 * y, 2 * x);
          best = std::max(best, input.at(b, ch, 2 * y, 2 * x + 1));
          best = std::max(best, input.at(b, ch, 2 * y + 1, 2 * x));
          best = std::max(best, input.at(b, ch, 2 * y + 1, 2 * x + 1));
          output.at(b, ch, y, x) = best;
        }
      }
    }
  }
  return output;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& input, const Tensor<T>& grad_output) {
  if (input.rank() != 4 || input.dim(2) % 2 != 0 || input.dim(3) % 2 != 0) {
    throw ShapeError("maxpool2_backward: bad input shape " + shape_string(input.shape()));
  }
  const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Shape expected{n, c, h / 2, w / 2};
  if (grad_output.shape() != expected) {
    throw ShapeError("maxpool2_backward: grad_output " + shape_string(grad_output.shape()) +
                     ", expected " + shape_string(expected));
  }
  Tensor<T> grad(input.shape());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h / 2; ++y) {
        for (std::size_t x = 0; x < w / 2; ++x) {
          std::size_t by = 2 * y, bx = 2 * x;
          T best = input.at(b, ch, by, bx);
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const T v = input.at(b, ch, 2 * y + dy, 2 * x + dx);
              if (v > best) {
                best = v;
                by = 2 * y + dy;
                bx = 2 * x + dx;
              }
            }
          }
          grad.at(b, ch, by, bx) += grad_output.at(b, ch, y, x);
        }
      }
    }
  }
  return grad;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_output) {
  require_same_shape(input, grad_output, "relu_backward");
  Tensor<T> grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad[i] = input[i] > T{0} ? grad_output[i] : T{0};
  }
  return grad;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (input.rank() != 2 || weights.rank() != 2 || bias.rank() != 1) {
    throw ShapeError("dense: expected input [N,D], weights [D,M], bias [M]; got " +
                     shape_string(input.shape()) + ", " + shape_string(weights.shape()) + ", " +
                     shape_string(bias.shape()));
  }
  const auto n = input.dim(0), d = input.dim(1), m = weights.dim(1);
  if (weights.dim(0) != d) {
    throw ShapeError("dense: input width " + std::to_string(d) + " does not match weights " +
                     shape_string(weights.shape()));
  }
  if (bias.dim(0) != m) {
    throw ShapeError("dense: bias " + shape_string(bias.shape()) + " does not match weights " +
                     shape_string(weights.shape()));
  }
  input.require_finite("dense input");
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < n; ++i) std::copy(bias.data(), bias.data() + m, out.data() + i * m);
  gemm_nn(n, m, d, input.data(), weights.data(), out.data());
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& grad_output) {
  const auto n = input.dim(0), d = input.dim(1), m = weights.dim(1);
  if (grad_output.shape() != Shape{n, m}) {
    throw ShapeError("dense_backward: grad_output " + shape_string(grad_output.shape()) +
                     ", expected " + shape_string({n, m}));
  }
  DenseGrads<T> grads{Tensor<T>({n, d}), Tensor<T>({d, m}), Tensor<T>({m})};
  // dX = dY * W^T
  for (std::size_t i = 0; i < n; ++i) {
    const T* dy = grad_output.data() + i * m;
    T* dx = grads.input.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      const T* wrow = weights.data() + j * m;
      T sum{0};
      for (std::size_t q = 0; q < m; ++q) sum += dy[q] * wrow[q];
      dx[j] = sum;
    }
  }
  gemm_tn(d, m, n, input.data(), grad_output.data(), grads.weights.data());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < m; ++q) grads.bias[q] += grad_output[i * m + q];
  }
  return grads;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax: logits must be [N,K], got " + shape_string(logits.shape()));
  }
  const auto n = logits.dim(0), k = logits.dim(1);
  Tensor<T> probs(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    T* out = probs.data() + i * k;
    const T top = *std::max_element(row, row + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = std::exp(static_cast<double>(row[j] - top));
      out[j] = static_cast<T>(e);
      sum += e;
    }
    for (std::size_t j = 0; j < k; ++j) out[j] = static_cast<T>(static_cast<double>(out[j]) / sum);
  }
  return probs;
}

template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits,
                                     std::span<const std::size_t> targets) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be [N,K], got " +
                     shape_string(logits.shape()));
  }
  const auto n = logits.dim(0), k = logits.dim(1);
  if (targets.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for batch of " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= k) {
      throw ShapeError("softmax_cross_entropy: target " + std::to_string(targets[i]) +
                       " out of range [0," + std::to_string(k) + ")");
    }
  }
  logits.require_finite("softmax_cross_entropy logits");

  LossAndGrad<T> result{0.0, Tensor<T>(logits.shape())};
  std::vector<double> e(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    const double top = static_cast<double>(*std::max_element(row, row + k));
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - top);
      sum += e[j];
    }
    total += std::log(sum) - (static_cast<double>(row[targets[i]]) - top);
    T* grad = result.grad.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      const double onehot = j == targets[i] ? 1.0 : 0.0;
      grad[j] = static_cast<T>((e[j] / sum - onehot) / static_cast<double>(n));
    }
  }
  result.loss = total / static_cast<double>(n);
  return result;
}

template <typename T>
void sgd_momentum_step(std::span<Parameter<T>* const> params, double lr, double momentum) {
  for (const auto* p : params) {
    if (p->grad.shape() != p->value.shape() || p->velocity.shape() != p->value.shape()) {
      throw ShapeError("sgd_momentum_step: parameter '" + p->name + "' has inconsistent buffers");
    }
    if (!p->grad.all_finite()) {
      throw NumericError("sgd_momentum_step: non-finite gradient in parameter '" + p->name + "'");
    }
  }
  const T rate = static_cast<T>(lr);
  const T mu = static_cast<T>(momentum);
  for (auto* p : params) {
    auto w = p->value.values();
    auto g = p->grad.values();
    auto v = p->velocity.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = mu * v[i] - rate * g[i];
      w[i] += v[i];
      g[i] = T{0};
    }
  }
}

std::size_t fan_in(const Shape& shape) {
  if (shape.empty()) throw ShapeError("fan_in: empty shape");
  if (shape.size() == 1 || shape.size() == 2) return shape[0];
  return shape_count(shape) / shape[0];
}

template <typename T>
Tensor<T> he_init(const Shape& shape, std::uint64_t seed) {
  Tensor<T> out(shape);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in(shape)));
  Rng rng(seed);
  for (auto& v : out.values()) v = static_cast<T>(std_dev * rng.normal());
  return out;
}

#define NEOC_INSTANTIATE(T)                                                                       \
  template class Tensor<T>;                                                                       \
  template struct Parameter<T>;                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int, int); \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                          int, int, bool, int);                                   \
  template Tensor<T> maxpool2(const Tensor<T>&);                                                  \
  template Tensor<T> maxpool2_backward(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> softmax(const Tensor<T>&);                                                   \
  template LossAndGrad<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::size_t>);  \
  template void sgd_momentum_step(std::span<Parameter<T>* const>, double, double);                \
  template Tensor<T> he_init(const Shape&, std::uint64_t);

NEOC_INSTANTIATE(float)
NEOC_INSTANTIATE(double)

#undef NEOC_INSTANTIATE

}  // namespace neoc
