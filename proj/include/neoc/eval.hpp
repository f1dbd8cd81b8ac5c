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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neoc/corpus.hpp"
#include "neoc/json.hpp"
#include "neoc/model.hpp"
#include "neoc/taxonomy.hpp"

namespace neoc {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<ClassId> classes);

  const std::vector<ClassId>& classes() const noexcept { return classes_; }
  std::size_t size() const noexcept { return classes_.size(); }
  /// Throws LookupError for a class outside the list.
  std::size_t index(const ClassId& cls) const;

  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * size() + predicted];
  }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1) {
    counts_[truth * size() + predicted] += n;
  }

  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  /// Row sum.
  std::uint64_t support(std::size_t c) const noexcept;
  /// Column sum.
  std::uint64_t predicted(std::size_t c) const noexcept;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::vector<ClassId> classes_;
  std::vector<std::uint64_t> counts_;
};

/// Throws ConfigError for unequal lengths, LookupError for unknown labels.
ConfusionMatrix confusion_matrix(std::span<const ClassId> truths, std::span<const ClassId> predictions,
                                 std::vector<ClassId> classes);

/// Class reason codes; e.g. the non-computable list of a split.
using Exclusions = std::map<ClassId, std::string>;

/// Classes that count towards the means: not excluded and support > 0.
/// Throws Error("no computable classes") when none is left.
std::vector<std::size_t> eligible_classes(const ConfusionMatrix& cm, const Exclusions& excluded);

/// Unweighted mean of per-class recall over eligible classes.
double mean_class_accuracy(const ConfusionMatrix& cm, const Exclusions& excluded = {});
/// Unweighted mean of one-vs-rest F1 = 2TP/(2TP+FP+FN) over eligible classes.
double macro_f1(const ConfusionMatrix& cm, const Exclusions& excluded = {});
/// Support-weighted mean of per-class F1 over eligible classes.
double weighted_f1(const ConfusionMatrix& cm, const Exclusions& excluded = {});
/// trace / total over all samples; 0 for an empty matrix.
double overall_accuracy(const ConfusionMatrix& cm);

struct ClassMetrics {
  ClassId cls;
  std::uint64_t support = 0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when the class was never predicted
  bool eligible = false;
};

struct MetricSummary {
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> per_class;
  double mean_class_accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double overall_accuracy = 0.0;
};

MetricSummary summarize(const ConfusionMatrix& cm, const Exclusions& excluded);

struct MetricsReport {
  MetricSummary leaf;
  std::optional<std::size_t> rollup_depth;
  std::optional<MetricSummary> rolled;
  /// Every excluded class with its reason, including zero-support ones.
  Exclusions excluded;
  std::optional<SplitParams> split;
  std::size_t samples = 0;
};

Json to_json(const MetricsReport& report);
MetricsReport report_from_json(const Json& j);
/// Human-readable table: per-class rows, means, and the excluded classes.
std::string render_table(const MetricsReport& report);

struct Prediction {
  std::string path;
  ClassId truth;
  ClassId predicted;
  double probability = 0.0;
};

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

/// Class probabilities [N, K] for images resized to the model input and
/// normalized with the model's stored statistics.
template <typename T>
Tensor<T> infer(const BasicModel<T>& model, std::span<const ImageRecord> images,
                std::size_t batch_size = 64, int threads = 1);

/// Resize to the model input size when needed.
ImageRecord fit_to_model(const ImageRecord& image, const ArchitectureConfig& arch);

struct EvalOptions {
  std::optional<std::size_t> rollup_depth;
  Exclusions excluded;
  std::optional<SplitParams> split;
  std::size_t batch_size = 64;
  int threads = 1;
};

struct Evaluation {
  MetricsReport report;
  std::vector<Prediction> predictions;  // manifest order
};

/// Throws LookupError listing the manifest classes the model does not know
/// (after rollup when requested).
Evaluation evaluate(const Model& model, const CorpusManifest& test, const Taxonomy& taxonomy,
                    const EvalOptions& options = {});

}  // namespace neoc
