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
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neoc/image.hpp"
#include "neoc/json.hpp"
#include "neoc/model.hpp"
#include "neoc/taxonomy.hpp"
#include "neoc/tensor.hpp"

namespace neoc {

enum class Depiction { kWhole, kPartial, kCloseup, kInterior };

std::string_view to_string(Depiction d) noexcept;
/// Throws ConfigError for anything but whole/partial/closeup/interior.
Depiction parse_depiction(std::string_view text);

struct Box {
  Rect rect;
  ClassId cls;

  bool operator==(const Box&) const = default;
};

struct Sample {
  std::string path;  // relative to the corpus root
  ClassId cls;
  std::string artifact_id;
  Depiction depiction = Depiction::kWhole;
  std::vector<Box> boxes;
  /// Pixels of a derived sample that has not been written to disk yet.
  std::shared_ptr<const ImageRecord> image;

  /// Equality ignores the in-memory image.
  bool operator==(const Sample& o) const {
    return path == o.path && cls == o.cls && artifact_id == o.artifact_id &&
           depiction == o.depiction && boxes == o.boxes;
  }
};

Json sample_to_json(const Sample& s);
Sample sample_from_json(const Json& j);

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<Sample> samples;
  std::string provenance;

  /// Distinct classes in path order.
  std::vector<ClassId> classes() const;
  /// Throws LookupError for a sample or box class missing from `taxonomy`,
  /// ConfigError for an empty artifact_id or a box outside its image.
  void validate(const Taxonomy& taxonomy, bool check_boxes_on_disk = false) const;
};

/// JSON Lines, one sample per line. Paths stay relative to `manifest.root`.
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::filesystem::path& path, const std::filesystem::path& root);

/// Taxonomy holding every class path of `classes` (intermediate levels are
/// created as needed).
Taxonomy taxonomy_from_classes(std::span<const ClassId> classes);

/// One whole-depiction sample per image file of `taxonomy` (a folder
/// taxonomy); artifact_id is the relative path without extension.
CorpusManifest ingest_folders(const Taxonomy& taxonomy);

/// In-memory pixels when present, otherwise the file under `root`.
ImageRecord load_image(const std::filesystem::path& root, const Sample& sample);

/// One whole-depiction sample per box: the crop of the box with the part of
/// every other overlapping box masked by `fill`. Crops are named
/// "<box class>/<flattened source path>_b<i>.ppm" and carry their pixels in
/// memory. Throws ConfigError for a sample without boxes (pass it through
/// unchanged instead) or a box outside the image.
std::vector<Sample> split_by_boxes(const Sample& sample, const ImageRecord& image,
                                   Rgb fill = kDefaultFill);

struct CurationRules {
  Rgb fill = kDefaultFill;
  std::set<Depiction> keep{Depiction::kWhole};
  bool split_multi_object = true;
};

struct Exclusion {
  Sample sample;
  std::string reason;
};

struct CurationResult {
  CorpusManifest kept;
  std::vector<Exclusion> excluded;
};

/// Keeps whole depictions, expands samples with boxes, excludes the rest with
/// the depiction as reason code. Duplicates are retained. Output is sorted by
/// path (stable), so curate(curate(m)) == curate(m).
CurationResult curate(const CorpusManifest& manifest, const CurationRules& rules = {},
                      int threads = 1);

/// Writes every kept sample under `new_root` (in-memory crops encoded, file
/// samples copied from `source_root`) and returns the manifest rooted there
/// with no in-memory images.
CorpusManifest materialize(const CorpusManifest& kept, const std::filesystem::path& source_root,
                           const std::filesystem::path& new_root);

struct SplitParams {
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
  bool group_by_artifact = true;
};

struct NonComputable {
  ClassId cls;
  std::string reason;  // single_sample, single_artifact or empty_side
  std::size_t train = 0;
  std::size_t test = 0;
};

struct SplitResult {
  CorpusManifest train;
  CorpusManifest test;
  std::vector<NonComputable> non_computable;
  SplitParams params;

  std::vector<ClassId> non_computable_classes() const;
};

/// Per class: deterministic shuffle, test count max(1, round(ratio * n)) for
/// n >= 2, singletons to train. With grouping, an artifact's samples share a
/// side and are stratified by the class of the artifact's first sample.
/// Samples keep manifest order on each side. Throws ConfigError for an empty
/// manifest or a ratio outside (0, 1).
SplitResult stratified_split(const CorpusManifest& manifest, const SplitParams& params);

void write_exclusions(const std::filesystem::path& path, std::span<const Exclusion> excluded);
void write_non_computable(const std::filesystem::path& path, const SplitResult& split);

/// Per-channel mean and population std of pixel/255 over all images.
NormalizationStats compute_normalization(std::span<const ImageRecord> images);

/// (pixel/255 - mean) / max(std, 1e-6) as [N,3,H,W]. Throws ShapeError when
/// sizes differ.
template <typename T>
Tensor<T> normalize_batch(std::span<const ImageRecord> images, const NormalizationStats& stats);

/// Single image as a [1,3,H,W] batch.
template <typename T>
Tensor<T> normalize_image(const ImageRecord& image, const NormalizationStats& stats);

}  // namespace neoc
