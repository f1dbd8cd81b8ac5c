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

#include "neoc/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neoc/error.hpp"
#include "neoc/eval.hpp"
#include "neoc/parallel.hpp"

namespace neoc {

std::array<std::pair<int, int>, 4> polygon(const Rect& r) {
  return {{{r.x, r.y}, {r.x + r.w, r.y}, {r.x + r.w, r.y + r.h}, {r.x, r.y + r.h}}};
}

namespace {

std::vector<int> window_starts(int extent, int size, int stride) {
  std::vector<int> out;
  for (int p = 0; p <= extent - size; p += stride) out.push_back(p);
  if (out.back() != extent - size) out.push_back(extent - size);
  return out;
}

}  // namespace

std::vector<Rect> propose_regions(int width, int height, std::span<const int> scales,
                                  double stride_fraction) {
  if (scales.empty()) throw ConfigError("propose_regions: empty scale list");
  if (!(stride_fraction > 0.0 && stride_fraction <= 1.0)) {
    throw ConfigError("propose_regions: stride_fraction must lie in (0, 1]");
  }
  std::vector<Rect> out;
  for (int s : scales) {
    if (s <= 0 || s > width || s > height) {
      throw ConfigError("propose_regions: scale " + std::to_string(s) + " does not fit a " +
                        std::to_string(width) + "x" + std::to_string(height) + " image");
    }
    const int stride = std::max(1, static_cast<int>(std::lround(stride_fraction * s)));
    const auto rows = window_starts(height, s, stride);
    const auto cols = window_starts(width, s, stride);
    for (int y : rows) {
      for (int x : cols) out.push_back({x, y, s, s});
    }
  }
  return out;
}

std::vector<Detection> classify_regions(const Model& model, const ImageRecord& image,
                                        std::span<const Rect> regions, int threads,
                                        std::vector<std::string>* warnings) {
  if (model.class_names().empty()) throw ConfigError("classify_regions: checkpoint has no class names");
  std::vector<std::size_t> kept;
  std::vector<Rect> clipped;
  const Rect bounds{0, 0, image.width, image.height};
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto c = intersect(regions[i], bounds);
    if (!c) {
      if (warnings) {
        warnings->push_back("region " + std::to_string(i) + " is empty after clipping; skipped");
      }
      continue;
    }
    kept.push_back(i);
    clipped.push_back(*c);
  }
  if (clipped.empty()) return {};
  std::vector<ImageRecord> crops(clipped.size());
  parallel_for(clipped.size(), threads, [&](std::size_t i) {
    crops[i] = fit_to_model(crop(image, clipped[i]), model.arch());
  });
  const auto probs = infer(model, crops, 64, threads);
  const std::size_t k = model.arch().num_classes;
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const std::span<const float> row(probs.data() + i * k, k);
    const auto best = argmax(row);
    out.push_back({clipped[i], ClassId(model.class_names()[best]), row[best], kept[i]});
  }
  return out;
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold,
                           double score_threshold, bool per_class) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].score >= score_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  std::vector<Detection> kept;
  for (auto i : order) {
    const auto& d = detections[i];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return (!per_class || k.cls == d.cls) && iou(k.region, d.region) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

void to_json(Json& j, const DetectConfig& c) {
  j = Json{{"scales", c.scales},
           {"stride_fraction", c.stride_fraction},
           {"iou_threshold", c.iou_threshold},
           {"score_threshold", c.score_threshold},
           {"per_class_nms", c.per_class_nms}};
}

void from_json(const Json& j, DetectConfig& c) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "scales") {
        c.scales = value.get<std::vector<int>>();
      } else if (key == "stride_fraction") {
        c.stride_fraction = value.get<double>();
      } else if (key == "iou_threshold") {
        c.iou_threshold = value.get<double>();
      } else if (key == "score_threshold") {
        c.score_threshold = value.get<double>();
      } else if (key == "per_class_nms") {
        c.per_class_nms = value.get<bool>();
      } else {
        throw ConfigError("detect: unknown key " + key);
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("detect: ") + e.what());
  }
  for (double t : {c.iou_threshold, c.score_threshold}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("detect: thresholds must lie in [0, 1]");
  }
}

std::vector<Detection> detect(const Model& model, const ImageRecord& image, const DetectConfig& config,
                              int threads, std::vector<std::string>* warnings) {
  const auto regions = propose_regions(image.width, image.height, config.scales, config.stride_fraction);
  const auto scored = classify_regions(model, image, regions, threads, warnings);
  return nms(scored, config.iou_threshold, config.score_threshold, config.per_class_nms);
}

namespace {

void finish(ClassDetectionMetrics& m) {
  const std::size_t predicted = m.true_positives + m.false_positives;
  m.precision_defined = predicted > 0;
  m.precision = predicted == 0 ? 0.0 : static_cast<double>(m.true_positives) / static_cast<double>(predicted);
  m.recall = m.ground_truth == 0 ? 0.0
                                 : static_cast<double>(m.true_positives) / static_cast<double>(m.ground_truth);
}

}  // namespace

DetectionMetrics evaluate_detections(std::span<const std::vector<Detection>> detections,
                                     std::span<const std::vector<Box>> ground_truth, double iou_threshold) {
  if (detections.size() != ground_truth.size()) {
    throw ConfigError("evaluate_detections: " + std::to_string(detections.size()) + " detection lists vs " +
                      std::to_string(ground_truth.size()) + " ground-truth lists");
  }
  DetectionMetrics out;
  for (std::size_t img = 0; img < detections.size(); ++img) {
    const auto& gts = ground_truth[img];
    for (const auto& g : gts) ++out.per_class[g.cls].ground_truth;
    std::vector<bool> matched(gts.size(), false);
    std::vector<std::size_t> order(detections[img].size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return detections[img][a].score > detections[img][b].score;
    });
    for (auto i : order) {
      const auto& d = detections[img][i];
      double best = -1.0;
      std::size_t best_gt = gts.size();
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (matched[g] || gts[g].cls != d.cls) continue;
        const double overlap = iou(d.region, gts[g].rect);
        if (overlap >= iou_threshold && overlap > best) {
          best = overlap;
          best_gt = g;
        }
      }
      auto& m = out.per_class[d.cls];
      if (best_gt < gts.size()) {
        matched[best_gt] = true;
        ++m.true_positives;
      } else {
        ++m.false_positives;
      }
    }
  }
  for (auto& [cls, m] : out.per_class) {
    finish(m);
    out.overall.true_positives += m.true_positives;
    out.overall.false_positives += m.false_positives;
    out.overall.ground_truth += m.ground_truth;
  }
  finish(out.overall);
  return out;
}

namespace {

Json metrics_json(const ClassDetectionMetrics& m) {
  return {{"true_positives", m.true_positives}, {"false_positives", m.false_positives},
          {"ground_truth", m.ground_truth},     {"precision", m.precision},
          {"precision_defined", m.precision_defined}, {"recall", m.recall}};
}

}  // namespace

Json detection_metrics_to_json(const DetectionMetrics& metrics) {
  Json per_class = Json::object();
  for (const auto& [cls, m] : metrics.per_class) per_class[cls.path()] = metrics_json(m);
  return {{"overall", metrics_json(metrics.overall)}, {"per_class", per_class}};
}

Json detections_to_json(const std::string& image, std::span<const Detection> detections) {
  Json regions = Json::array();
  for (const auto& d : detections) {
    Json corners = Json::array();
    for (const auto& [x, y] : polygon(d.region)) corners.push_back({x, y});
    regions.push_back({{"x", d.region.x},
                       {"y", d.region.y},
                       {"w", d.region.w},
                       {"h", d.region.h},
                       {"class", d.cls.path()},
                       {"score", d.score},
                       {"polygon", corners}});
  }
  return {{"image", image}, {"regions", regions}};
}

Json annotations_to_json(const Sample& sample) {
  Json regions = Json::array();
  for (const auto& b : sample.boxes) {
    regions.push_back({{"x", b.rect.x}, {"y", b.rect.y}, {"w", b.rect.w}, {"h", b.rect.h}, {"class", b.cls.path()}});
  }
  return {{"image", sample.path}, {"regions", regions}};
}

std::vector<Box> annotations_from_json(const Json& row) {
  try {
    std::vector<Box> out;
    for (const auto& r : row.at("regions")) {
      out.push_back({Rect{r.at("x").get<int>(), r.at("y").get<int>(), r.at("w").get<int>(), r.at("h").get<int>()},
                     ClassId(r.at("class").get<std::string>())});
    }
    return out;
  } catch (const Json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, std::string("region annotations: ") + e.what());
  }
}

}  // namespace neoc
