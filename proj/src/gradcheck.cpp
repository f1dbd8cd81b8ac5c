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

#include "neoc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "neoc/error.hpp"
#include "neoc/rng.hpp"

namespace neoc {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double grad_check(const ScalarFn& f, const Tensor<double>& point, const Tensor<double>& analytic,
                  double eps) {
  if (analytic.shape() != point.shape()) {
    throw ShapeError("grad_check: analytic gradient " + shape_string(analytic.shape()) +
                     " does not match point " + shape_string(point.shape()));
  }
  Tensor<double> probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(probe);
    probe[i] = saved - eps;
    const double down = f(probe);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

namespace {

Tensor<double> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Values at least `gap` away from zero so relu's kink is never straddled.
Tensor<double> away_from_zero(const Shape& shape, Rng& rng, double gap) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) {
    const double mag = rng.uniform(gap, 1.0);
    v = rng.bernoulli(0.5) ? mag : -mag;
  }
  return t;
}

// Distinct values spaced 0.01 apart in random order so no pooling window
// has a near-tie that a perturbation of eps could flip.
Tensor<double> distinct_values(const Shape& shape, Rng& rng) {
  Tensor<double> t(shape);
  std::vector<double> levels(t.size());
  for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = -1.0 + 0.01 * static_cast<double>(i);
  rng.shuffle(std::span<double>(levels));
  std::copy(levels.begin(), levels.end(), t.data());
  return t;
}

double project(const Tensor<double>& out, const Tensor<double>& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

void check_dense(std::uint64_t seed, double eps, std::vector<GradCheckResult>& results) {
  Rng rng(seed);
  const auto x = random_tensor({3, 4}, rng);
  const auto w = random_tensor({4, 5}, rng);
  const auto b = random_tensor({5}, rng);
  const auto r = random_tensor({3, 5}, rng);
  const auto grads = dense_backward(x, w, r);
  results.push_back({"dense", "input", seed,
                     grad_check([&](const Tensor<double>& p) { return project(dense(p, w, b), r); },
                                x, grads.input, eps)});
  results.push_back({"dense", "weights", seed,
                     grad_check([&](const Tensor<double>& p) { return project(dense(x, p, b), r); },
                                w, grads.weights, eps)});
  results.push_back({"dense", "bias", seed,
                     grad_check([&](const Tensor<double>& p) { return project(dense(x, w, p), r); },
                                b, grads.bias, eps)});
}

void check_conv(std::uint64_t seed, double eps, int stride, int pad,
                std::vector<GradCheckResult>& results) {
  Rng rng(seed);
  const auto x = random_tensor({1, 2, 5, 5}, rng);
  const auto k = random_tensor({3, 2, 3, 3}, rng);
  const auto b = random_tensor({3}, rng);
  const auto probe_out = conv2d(x, k, b, stride, pad);
  const auto r = random_tensor(probe_out.shape(), rng);
  const auto grads = conv2d_backward(x, k, r, stride, pad);
  const std::string name = "conv2d(stride=" + std::to_string(stride) +
                           ",pad=" + std::to_string(pad) + ")";
  results.push_back(
      {name, "input", seed,
       grad_check([&](const Tensor<double>& p) { return project(conv2d(p, k, b, stride, pad), r); },
                  x, grads.input, eps)});
  results.push_back(
      {name, "kernels", seed,
       grad_check([&](const Tensor<double>& p) { return project(conv2d(x, p, b, stride, pad), r); },
                  k, grads.kernels, eps)});
  results.push_back(
      {name, "bias", seed,
       grad_check([&](const Tensor<double>& p) { return project(conv2d(x, k, p, stride, pad), r); },
                  b, grads.bias, eps)});
}

void check_maxpool(std::uint64_t seed, double eps, std::vector<GradCheckResult>& results) {
  Rng rng(seed);
  const auto x = distinct_values({2, 2, 4, 4}, rng);
  const auto r = random_tensor({2, 2, 2, 2}, rng);
  const auto grad = maxpool2_backward(x, r);
  results.push_back(
      {"maxpool2", "input", seed,
       grad_check([&](const Tensor<double>& p) { return project(maxpool2(p), r); }, x, grad, eps)});
}

void check_relu(std::uint64_t seed, double eps, std::vector<GradCheckResult>& results) {
  Rng rng(seed);
  const auto x = away_from_zero({3, 7}, rng, 0.05);
  const auto r = random_tensor({3, 7}, rng);
  const auto grad = relu_backward(x, r);
  results.push_back(
      {"relu", "input", seed,
       grad_check([&](const Tensor<double>& p) { return project(relu(p), r); }, x, grad, eps)});
}

void check_softmax_xent(std::uint64_t seed, double eps, std::vector<GradCheckResult>& results) {
  Rng rng(seed);
  auto z = random_tensor({3, 5}, rng);
  for (auto& v : z.values()) v *= 3.0;
  std::vector<std::size_t> targets(3);
  for (auto& t : targets) t = static_cast<std::size_t>(rng.below(5));
  const auto analytic = softmax_cross_entropy(z, targets).grad;
  results.push_back({"softmax_cross_entropy", "logits", seed,
                     grad_check(
                         [&](const Tensor<double>& p) {
                           return softmax_cross_entropy(p, targets).loss;
                         },
                         z, analytic, eps)});
}

}  // namespace

std::vector<GradCheckResult> run_layer_grad_checks(int seeds, double eps,
                                                   std::uint64_t base_seed) {
  std::vector<GradCheckResult> results;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(s));
    check_conv(seed, eps, 1, 1, results);
    check_conv(seed, eps, 2, 1, results);
    check_conv(seed, eps, 1, 0, results);
    check_maxpool(seed, eps, results);
    check_relu(seed, eps, results);
    check_dense(seed, eps, results);
    check_softmax_xent(seed, eps, results);
  }
  return results;
}

}  // namespace neoc
