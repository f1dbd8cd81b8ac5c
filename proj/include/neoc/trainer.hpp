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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "neoc/corpus.hpp"
#include "neoc/json.hpp"
#include "neoc/model.hpp"

namespace neoc {

enum class Precision { kFloat32, kFloat64 };

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 42;
  /// Epochs at the start during which only the dense layers are updated.
  std::size_t freeze_blocks_epochs = 0;
  /// Multiplicative per-epoch factor.
  double lr_decay = 0.95;
  Precision precision = Precision::kFloat32;
  /// Stop after this many epochs without improvement; 0 disables.
  std::size_t patience = 0;
  int threads = 1;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;
};

void to_json(Json& j, const TrainConfig& config);
/// Unknown keys raise ConfigError.
void from_json(const Json& j, TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_mean_class_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// epoch,train_loss,train_acc,test_mean_class_acc
  std::string to_csv() const;
};

/// Images fitted to the model input with labels indexed into `class_names`.
struct Dataset {
  std::vector<ImageRecord> images;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
};

/// Throws LookupError for a sample whose class is not in `class_names`.
Dataset load_dataset(const CorpusManifest& manifest, const std::vector<std::string>& class_names,
                     const ArchitectureConfig& arch, int threads = 1);

/// Sorted class paths of a manifest.
std::vector<std::string> class_names_of(const CorpusManifest& manifest);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Epoch loop on already-normalized data: seeded shuffle, batches (last
/// partial batch kept), forward, softmax cross-entropy, backward, SGD with
/// momentum, lr decay. Throws NumericError on a non-finite loss.
template <typename T>
TrainHistory train_loop(BasicModel<T>& model, const Dataset& train, const TrainConfig& config,
                        const Dataset* test = nullptr, const EpochCallback& on_epoch = {});

struct TrainResult {
  Model model;
  TrainHistory history;
};

/// Sets class names from the manifest and normalization from its images,
/// then trains at the configured precision. Throws ConfigError when the
/// model's class count differs from the manifest's.
TrainResult train(Model model, const CorpusManifest& train_set, const TrainConfig& config,
                  const CorpusManifest* test_set = nullptr, const EpochCallback& on_epoch = {});

/// FNV-1a hash (hex) of the serialized checkpoint.
std::string checkpoint_hash(const Model& model);

/// Replaces the head for the target classes, trains with the body frozen
/// for config.freeze_blocks_epochs, and records the pretrained hash as
/// lineage.
TrainResult finetune(const Model& pretrained, const CorpusManifest& target, const TrainConfig& config,
                     const CorpusManifest* test_set = nullptr, const EpochCallback& on_epoch = {});

}  // namespace neoc
