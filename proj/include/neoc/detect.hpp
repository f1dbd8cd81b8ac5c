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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neoc/corpus.hpp"
#include "neoc/image.hpp"
#include "neoc/json.hpp"
#include "neoc/model.hpp"
#include "neoc/taxonomy.hpp"

namespace neoc {

/// Corners clockwise from the top-left.
std::array<std::pair<int, int>, 4> polygon(const Rect& r);

struct Detection {
  Rect region;
  ClassId cls;
  double score = 0.0;  // max softmax probability of the region crop
  std::size_t proposal = 0;

  bool operator==(const Detection&) const = default;
};

/// Square sliding windows per scale with stride max(1, round(fraction *
/// scale)); a final window flush with the right/bottom edge is added when
/// the stride does not land there. Ordered by (scale, row, col). Throws
/// ConfigError for an empty scale list, a scale larger than the image or a
/// fraction outside (0, 1].
std::vector<Rect> propose_regions(int width, int height, std::span<const int> scales,
                                  double stride_fraction);

/// Each region is clipped to the image, cropped, fitted to the model input,
/// normalized with the model statistics and classified. Regions that are
/// empty after clipping are skipped and reported in `warnings`.
std::vector<Detection> classify_regions(const Model& model, const ImageRecord& image,
                                        std::span<const Rect> regions, int threads = 1,
                                        std::vector<std::string>* warnings = nullptr);

/// Drops scores below `score_threshold`, then keeps detections greedily by
/// descending score (stable, so earlier proposals win ties) unless their IoU
/// with a kept detection exceeds `iou_threshold`. With `per_class`, only
/// same-class detections suppress each other.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold,
                           double score_threshold, bool per_class = false);

struct DetectConfig {
  std::vector<int> scales{32};
  double stride_fraction = 0.25;
  double iou_threshold = 0.5;
  double score_threshold = 0.3;
  bool per_class_nms = false;
};

void to_json(Json& j, const DetectConfig& config);
/// Unknown keys raise ConfigError.
void from_json(const Json& j, DetectConfig& config);

/// propose_regions, classify_regions, nms.
std::vector<Detection> detect(const Model& model, const ImageRecord& image, const DetectConfig& config,
                              int threads = 1, std::vector<std::string>* warnings = nullptr);

struct ClassDetectionMetrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t ground_truth = 0;
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = true;  // false without any detection
};

struct DetectionMetrics {
  std::map<ClassId, ClassDetectionMetrics> per_class;
  ClassDetectionMetrics overall;
};

/// Per image, detections are matched in descending score order (stable) to
/// the unmatched same-class ground-truth box of highest IoU; a match needs
/// IoU >= `iou_threshold`.
DetectionMetrics evaluate_detections(std::span<const std::vector<Detection>> detections,
                                     std::span<const std::vector<Box>> ground_truth, double iou_threshold);

Json detection_metrics_to_json(const DetectionMetrics& metrics);

/// {"image", "regions": [{x, y, w, h, class, score, polygon}]}
Json detections_to_json(const std::string& image, std::span<const Detection> detections);
/// {"image", "regions": [{x, y, w, h, class}]} from a manifest's boxes.
Json annotations_to_json(const Sample& sample);
std::vector<Box> annotations_from_json(const Json& row);

}  // namespace neoc
