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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neoc/corpus.hpp"
#include "neoc/image.hpp"
#include "neoc/json.hpp"
#include "neoc/rng.hpp"

namespace neoc {

struct ClutterSpec {
  /// 0 renders one glyph per image; otherwise every sample is a scene with
  /// this many boxed glyphs.
  std::size_t objects_per_scene = 0;
  int canvas = 64;
  /// Upper bound on the IoU between two objects of one scene.
  double max_overlap = 0.1;
};

struct SynthSpec {
  std::vector<std::string> classes{"chair", "table", "cabinet", "chest_of_drawers", "sofa"};
  std::size_t images_per_class = 200;
  /// Side of a single-glyph image and of each object box in a scene.
  int size = 32;
  std::size_t views_per_artifact = 1;
  int distractor_strokes = 1;
  double noise_std = 8.0;
  ClutterSpec clutter;
};

void to_json(Json& j, const SynthSpec& spec);
/// Unknown keys raise ConfigError.
void from_json(const Json& j, SynthSpec& spec);

/// Names accepted in SynthSpec::classes.
const std::vector<std::string>& glyph_classes();

/// Draws a line-art glyph of `cls` inside `box`. Shape proportions come from
/// `shape`, placement within the box from `view`.
void draw_glyph(ImageRecord& canvas, std::string_view cls, const Rect& box, Rng& shape, Rng& view,
                Rgb ink);

/// Background, glyphs at `boxes`, distractor strokes and pixel noise. Views
/// of one artifact share `shape_seed` and differ in `view_seed`.
ImageRecord render_scene(int width, int height, std::span<const Box> boxes, const SynthSpec& spec,
                         std::uint64_t shape_seed, std::uint64_t view_seed);

/// Writes root/<class>/<name>.ppm files and returns the manifest rooted at
/// `root`. Byte-identical output for equal (spec, seed).
CorpusManifest generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed,
                                         const std::filesystem::path& root);

}  // namespace neoc
