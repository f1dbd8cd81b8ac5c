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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neoc/json.hpp"
#include "neoc/tensor.hpp"

namespace neoc {

/// `conv_count` conv3x3(pad 1)+relu layers followed by one 2x2 max pool.
struct BlockSpec {
  std::size_t conv_count = 1;
  std::size_t out_channels = 8;

  bool operator==(const BlockSpec&) const = default;
};

/// VGG-style stack: blocks, flatten, dense+relu head layers, output layer.
struct ArchitectureConfig {
  std::size_t channels = 3;
  std::size_t height = 64;
  std::size_t width = 64;
  std::vector<BlockSpec> blocks{{1, 8}, {1, 16}, {2, 32}};
  std::vector<std::size_t> head{64};
  std::size_t num_classes = 5;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
  bool operator==(const ArchitectureConfig&) const = default;
};

void to_json(Json& j, const ArchitectureConfig& arch);
void from_json(const Json& j, ArchitectureConfig& arch);

/// Per-channel statistics of pixel/255 over a training split.
struct NormalizationStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  bool operator==(const NormalizationStats&) const = default;
};

void to_json(Json& j, const NormalizationStats& stats);
void from_json(const Json& j, NormalizationStats& stats);

template <typename T>
class BasicModel {
 public:
  /// Activations cached by forward_train for the backward pass.
  struct Trace {
    std::vector<Tensor<T>> conv_inputs;
    std::vector<Tensor<T>> conv_outputs;  // pre-activation
    std::vector<Tensor<T>> pool_inputs;
    std::vector<Tensor<T>> dense_inputs;
    std::vector<Tensor<T>> dense_outputs;  // pre-activation
  };

  /// Builds the network and He-initializes every weight from `seed`;
  /// biases start at zero.
  BasicModel(ArchitectureConfig arch, std::uint64_t seed);

  const ArchitectureConfig& arch() const noexcept { return arch_; }

  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  /// Either empty or exactly num_classes names.
  void set_class_names(std::vector<std::string> names);

  const NormalizationStats& normalization() const noexcept { return normalization_; }
  void set_normalization(const NormalizationStats& stats) { normalization_ = stats; }

  /// Hash of the checkpoint this model was fine-tuned from, empty otherwise.
  const std::string& lineage() const noexcept { return lineage_; }
  void set_lineage(std::string lineage) { lineage_ = std::move(lineage); }

  Tensor<T> logits(const Tensor<T>& batch, int threads = 1) const;
  /// Row-wise class probabilities.
  Tensor<T> forward(const Tensor<T>& batch, int threads = 1) const;
  /// Argmax per row; ties go to the lowest class index.
  std::vector<std::size_t> predict(const Tensor<T>& batch, int threads = 1) const;

  Tensor<T> forward_train(const Tensor<T>& batch, Trace& trace, int threads = 1) const;
  /// Accumulates parameter gradients. With `body_frozen` the pass stops at
  /// the flatten boundary and conv gradients are left untouched.
  void backward(const Trace& trace, const Tensor<T>& grad_logits, bool body_frozen = false,
                int threads = 1);

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::vector<Parameter<T>*> body_parameters();
  std::vector<Parameter<T>*> head_parameters();
  std::size_t parameter_count() const;

  /// Replaces the output layer with a freshly initialized one of width
  /// `num_classes`. Every other parameter is left untouched; class names are
  /// cleared.
  void reinit_head(std::size_t num_classes, std::uint64_t seed);

  /// Copy of this model at another precision.
  template <typename U>
  BasicModel<U> cast() const;

 private:
  template <typename U>
  friend class BasicModel;

  struct Layer {
    Parameter<T> weight;
    Parameter<T> bias;
  };

  void check_batch(const Tensor<T>& batch) const;
  Shape flatten_source_shape(std::size_t batch) const;

  ArchitectureConfig arch_;
  std::vector<std::string> class_names_;
  NormalizationStats normalization_;
  std::string lineage_;
  std::vector<Layer> convs_;
  std::vector<Layer> dense_;
};

using Model = BasicModel<float>;

/// Index of the largest value; the first one wins ties.
template <typename T>
std::size_t argmax(std::span<const T> row);

/// Serialized checkpoint: "NEOC1", a one-line JSON header terminated by
/// '\n', then the weights as little-endian 32-bit floats in parameter order.
template <typename T>
std::string serialize_checkpoint(const BasicModel<T>& model);

/// Throws FormatError with kBadMagic, kTruncated, kShapeMismatch or
/// kMalformed.
Model parse_checkpoint(const std::string& bytes);

template <typename T>
void save_checkpoint(const BasicModel<T>& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace neoc
