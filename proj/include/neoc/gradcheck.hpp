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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "neoc/tensor.hpp"

namespace neoc {

using ScalarFn = std::function<double(const Tensor<double>&)>;

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares `analytic` (the gradient of f at `point`) against central
/// differences (f(x+eps) - f(x-eps)) / 2eps, coordinate by coordinate, and
/// returns the worst relative error.
double grad_check(const ScalarFn& f, const Tensor<double>& point, const Tensor<double>& analytic,
                  double eps = 1e-5);

struct GradCheckResult {
  std::string layer;
  std::string wrt;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
};

/// Finite-difference check of every layer's backward pass (conv2d, maxpool2,
/// relu, dense, softmax_cross_entropy) on randomized small tensors, one
/// result per (layer, argument, seed). Vector-valued layers are reduced to
/// a scalar by a random projection sum(out * R), whose gradient is the
/// backward pass fed with R.
std::vector<GradCheckResult> run_layer_grad_checks(int seeds, double eps = 1e-5,
                                                   std::uint64_t base_seed = 0);

}  // namespace neoc
