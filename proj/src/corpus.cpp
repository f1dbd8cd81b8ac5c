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

#include "neoc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "neoc/error.hpp"
#include "neoc/parallel.hpp"
#include "neoc/rng.hpp"

namespace neoc {

namespace fs = std::filesystem;

std::string_view to_string(Depiction d) noexcept {
  switch (d) {
    case Depiction::kWhole:
      return "whole";
    case Depiction::kPartial:
      return "partial";
    case Depiction::kCloseup:
      return "closeup";
    case Depiction::kInterior:
      return "interior";
  }
  return "whole";
}

Depiction parse_depiction(std::string_view text) {
  for (auto d : {Depiction::kWhole, Depiction::kPartial, Depiction::kCloseup, Depiction::kInterior}) {
    if (to_string(d) == text) return d;
  }
  throw ConfigError("unknown depiction '" + std::string(text) +
                    "' (expected whole, partial, closeup or interior)");
}

Json sample_to_json(const Sample& s) {
  Json boxes = Json::array();
  for (const auto& b : s.boxes) {
    boxes.push_back({{"x", b.rect.x}, {"y", b.rect.y}, {"w", b.rect.w}, {"h", b.rect.h},
                     {"class", b.cls.path()}});
  }
  return {{"path", s.path},
          {"class", s.cls.path()},
          {"artifact_id", s.artifact_id},
          {"depiction", std::string(to_string(s.depiction))},
          {"boxes", boxes}};
}

Sample sample_from_json(const Json& j) {
  try {
    Sample s;
    s.path = j.at("path").get<std::string>();
    s.cls = ClassId(j.at("class").get<std::string>());
    s.artifact_id = j.value("artifact_id", s.path);
    s.depiction = parse_depiction(j.value("depiction", std::string("whole")));
    if (j.contains("boxes")) {
      for (const auto& b : j.at("boxes")) {
        s.boxes.push_back({Rect{b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(),
                                b.at("h").get<int>()},
                           ClassId(b.at("class").get<std::string>())});
      }
    }
    return s;
  } catch (const Json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, std::string("manifest row: ") + e.what());
  }
}

std::vector<ClassId> CorpusManifest::classes() const {
  std::set<ClassId> seen;
  for (const auto& s : samples) seen.insert(s.cls);
  return {seen.begin(), seen.end()};
}

void CorpusManifest::validate(const Taxonomy& taxonomy, bool check_boxes_on_disk) const {
  for (const auto& s : samples) {
    if (!taxonomy.contains(s.cls)) {
      throw LookupError("sample " + s.path + ": class '" + s.cls.path() + "' not in taxonomy");
    }
    if (s.artifact_id.empty()) throw ConfigError("sample " + s.path + ": empty artifact_id");
    for (const auto& b : s.boxes) {
      if (!taxonomy.contains(b.cls)) {
        throw LookupError("sample " + s.path + ": box class '" + b.cls.path() + "' not in taxonomy");
      }
      if (b.rect.x < 0 || b.rect.y < 0 || b.rect.w <= 0 || b.rect.h <= 0) {
        throw ConfigError("sample " + s.path + ": degenerate box");
      }
    }
    if (check_boxes_on_disk && !s.boxes.empty()) {
      const auto image = load_image(root, s);
      for (const auto& b : s.boxes) {
        if (!image.contains(b.rect)) throw ConfigError("sample " + s.path + ": box outside image");
      }
    }
  }
}

void write_manifest(const fs::path& path, const CorpusManifest& manifest) {
  std::vector<Json> rows;
  rows.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) rows.push_back(sample_to_json(s));
  write_jsonl(path, rows);
}

CorpusManifest read_manifest(const fs::path& path, const fs::path& root) {
  CorpusManifest m;
  m.root = root;
  m.provenance = path.string();
  for (const auto& row : read_jsonl(path)) m.samples.push_back(sample_from_json(row));
  return m;
}

Taxonomy taxonomy_from_classes(std::span<const ClassId> classes) {
  Taxonomy tax;
  for (const auto& cls : classes) {
    std::optional<ClassId> parent;
    std::string prefix;
    std::string_view rest = cls.path();
    while (!rest.empty()) {
      const auto slash = rest.find('/');
      const auto part = rest.substr(0, slash);
      prefix += prefix.empty() ? std::string(part) : "/" + std::string(part);
      ClassId id(prefix);
      if (!tax.contains(id)) id = tax.add(part, parent);
      parent = id;
      rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
    }
  }
  return tax;
}

CorpusManifest ingest_folders(const Taxonomy& taxonomy) {
  CorpusManifest m;
  m.root = taxonomy.root_path();
  m.provenance = "folders:" + taxonomy.root_path().string();
  for (const auto& cls : taxonomy.classes()) {
    for (const auto& file : taxonomy.files(cls)) {
      Sample s;
      s.path = file;
      s.cls = cls;
      s.artifact_id = fs::path(file).replace_extension().generic_string();
      m.samples.push_back(std::move(s));
    }
  }
  std::stable_sort(m.samples.begin(), m.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.path < b.path; });
  return m;
}

ImageRecord load_image(const fs::path& root, const Sample& sample) {
  if (sample.image) return *sample.image;
  return read_ppm(root / sample.path);
}

std::vector<Sample> split_by_boxes(const Sample& sample, const ImageRecord& image, Rgb fill) {
  if (sample.boxes.empty()) {
    throw ConfigError("split_by_boxes: " + sample.path +
                      " has no boxes; pass it through unchanged instead");
  }
  std::string flat = fs::path(sample.path).replace_extension().generic_string();
  for (std::size_t pos = 0; (pos = flat.find('/', pos)) != std::string::npos; pos += 2) {
    flat.replace(pos, 1, "__");
  }
  std::vector<Sample> out;
  out.reserve(sample.boxes.size());
  for (std::size_t i = 0; i < sample.boxes.size(); ++i) {
    const auto& box = sample.boxes[i];
    auto pixels = crop(image, box.rect);
    for (std::size_t j = 0; j < sample.boxes.size(); ++j) {
      if (j == i) continue;
      const auto overlap = intersect(box.rect, sample.boxes[j].rect);
      if (!overlap) continue;
      pixels = mask_region(pixels,
                           Rect{overlap->x - box.rect.x, overlap->y - box.rect.y, overlap->w, overlap->h},
                           fill);
    }
    Sample s;
    s.path = box.cls.path() + "/" + flat + "_b" + std::to_string(i) + ".ppm";
    s.cls = box.cls;
    s.artifact_id = sample.artifact_id + "/b" + std::to_string(i);
    s.depiction = Depiction::kWhole;
    s.image = std::make_shared<const ImageRecord>(std::move(pixels));
    out.push_back(std::move(s));
  }
  return out;
}

CurationResult curate(const CorpusManifest& manifest, const CurationRules& rules, int threads) {
  struct Outcome {
    std::vector<Sample> kept;
    std::optional<Exclusion> excluded;
  };
  std::vector<Outcome> outcomes(manifest.samples.size());
  parallel_for(manifest.samples.size(), threads, [&](std::size_t i) {
    const auto& s = manifest.samples[i];
    if (!s.boxes.empty() && rules.split_multi_object) {
      outcomes[i].kept = split_by_boxes(s, load_image(manifest.root, s), rules.fill);
    } else if (rules.keep.contains(s.depiction)) {
      outcomes[i].kept.push_back(s);
    } else {
      outcomes[i].excluded = Exclusion{s, std::string(to_string(s.depiction))};
    }
  });
  CurationResult result;
  result.kept.root = manifest.root;
  result.kept.provenance = "curated:" + manifest.provenance;
  for (auto& o : outcomes) {
    for (auto& s : o.kept) result.kept.samples.push_back(std::move(s));
    if (o.excluded) result.excluded.push_back(std::move(*o.excluded));
  }
  std::stable_sort(result.kept.samples.begin(), result.kept.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.path < b.path; });
  return result;
}

CorpusManifest materialize(const CorpusManifest& kept, const fs::path& source_root,
                           const fs::path& new_root) {
  CorpusManifest out;
  out.root = new_root;
  out.provenance = kept.provenance;
  std::set<std::string> written;
  for (const auto& s : kept.samples) {
    Sample copy = s;
    copy.image.reset();
    if (written.insert(s.path).second) {
      if (s.image) {
        write_ppm(new_root / s.path, *s.image);
      } else {
        write_file(new_root / s.path, read_file(source_root / s.path));
      }
    }
    out.samples.push_back(std::move(copy));
  }
  return out;
}

std::vector<ClassId> SplitResult::non_computable_classes() const {
  std::vector<ClassId> out;
  for (const auto& nc : non_computable) out.push_back(nc.cls);
  return out;
}

SplitResult stratified_split(const CorpusManifest& manifest, const SplitParams& params) {
  if (manifest.samples.empty()) throw ConfigError("stratified_split: empty manifest");
  if (!(params.test_ratio > 0.0 && params.test_ratio < 1.0)) {
    throw ConfigError("stratified_split: test_ratio must lie in (0, 1)");
  }
  const auto& samples = manifest.samples;

  // Groups of sample indices; each group is stratified under its home class.
  std::map<ClassId, std::vector<std::vector<std::size_t>>> groups_by_class;
  if (params.group_by_artifact) {
    std::map<std::string, std::vector<std::size_t>> by_artifact;
    for (std::size_t i = 0; i < samples.size(); ++i) by_artifact[samples[i].artifact_id].push_back(i);
    for (auto& [id, members] : by_artifact) {
      groups_by_class[samples[members.front()].cls].push_back(std::move(members));
    }
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) groups_by_class[samples[i].cls].push_back({i});
  }

  std::vector<bool> in_test(samples.size(), false);
  for (auto& [cls, groups] : groups_by_class) {
    if (groups.size() < 2) continue;
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    Rng rng(derive_seed(params.seed, fnv1a64(cls.path())));
    rng.shuffle(std::span<std::vector<std::size_t>>(groups));
    const auto target = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(params.test_ratio * static_cast<double>(n))));
    std::size_t taken = 0;
    for (const auto& g : groups) {
      if (taken >= target) break;
      for (auto i : g) in_test[i] = true;
      taken += g.size();
    }
  }

  SplitResult result;
  result.params = params;
  result.train.root = result.test.root = manifest.root;
  result.train.provenance = result.test.provenance = manifest.provenance;
  struct Counts {
    std::size_t train = 0, test = 0;
    std::set<std::string> artifacts;
  };
  std::map<ClassId, Counts> counts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& c = counts[samples[i].cls];
    c.artifacts.insert(samples[i].artifact_id);
    if (in_test[i]) {
      result.test.samples.push_back(samples[i]);
      ++c.test;
    } else {
      result.train.samples.push_back(samples[i]);
      ++c.train;
    }
  }
  for (const auto& [cls, c] : counts) {
    if (c.train > 0 && c.test > 0) continue;
    std::string reason = "empty_side";
    if (c.train + c.test == 1) {
      reason = "single_sample";
    } else if (params.group_by_artifact && c.artifacts.size() == 1) {
      reason = "single_artifact";
    }
    result.non_computable.push_back({cls, reason, c.train, c.test});
  }
  return result;
}

void write_exclusions(const fs::path& path, std::span<const Exclusion> excluded) {
  std::vector<Json> rows;
  for (const auto& e : excluded) {
    auto row = sample_to_json(e.sample);
    row["reason"] = e.reason;
    rows.push_back(std::move(row));
  }
  write_jsonl(path, rows);
}

void write_non_computable(const fs::path& path, const SplitResult& split) {
  std::vector<Json> rows;
  for (const auto& nc : split.non_computable) {
    rows.push_back({{"class", nc.cls.path()}, {"reason", nc.reason}, {"train", nc.train}, {"test", nc.test}});
  }
  write_jsonl(path, rows);
}

NormalizationStats compute_normalization(std::span<const ImageRecord> images) {
  NormalizationStats stats;
  std::array<double, 3> sum{};
  std::size_t count = 0;
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      for (int c = 0; c < 3; ++c) sum[c] += img.pixels[i + c] / 255.0;
    }
    count += img.pixels.size() / 3;
  }
  if (count == 0) throw ConfigError("compute_normalization: no pixels");
  for (int c = 0; c < 3; ++c) stats.mean[c] = sum[c] / static_cast<double>(count);
  std::array<double, 3> sq{};
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        const double d = img.pixels[i + c] / 255.0 - stats.mean[c];
        sq[c] += d * d;
      }
    }
  }
  for (int c = 0; c < 3; ++c) stats.std[c] = std::sqrt(sq[c] / static_cast<double>(count));
  return stats;
}

template <typename T>
Tensor<T> normalize_batch(std::span<const ImageRecord> images, const NormalizationStats& stats) {
  if (images.empty()) throw ShapeError("normalize_batch: no images");
  const int w = images[0].width;
  const int h = images[0].height;
  const auto plane = static_cast<std::size_t>(w) * h;
  Tensor<T> out({images.size(), 3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  std::array<double, 3> sd{};
  for (int c = 0; c < 3; ++c) sd[c] = std::max(stats.std[c], 1e-6);
  T* dst = out.data();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.width != w || img.height != h) {
      throw ShapeError("normalize_batch: image " + std::to_string(n) + " is " +
                       std::to_string(img.width) + "x" + std::to_string(img.height) + ", expected " +
                       std::to_string(w) + "x" + std::to_string(h));
    }
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < 3; ++c) {
        dst[(n * 3 + c) * plane + p] =
            static_cast<T>((img.pixels[p * 3 + c] / 255.0 - stats.mean[c]) / sd[c]);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> normalize_image(const ImageRecord& image, const NormalizationStats& stats) {
  return normalize_batch<T>(std::span<const ImageRecord>(&image, 1), stats);
}

template Tensor<float> normalize_batch<float>(std::span<const ImageRecord>, const NormalizationStats&);
template Tensor<double> normalize_batch<double>(std::span<const ImageRecord>, const NormalizationStats&);
template Tensor<float> normalize_image<float>(const ImageRecord&, const NormalizationStats&);
template Tensor<double> normalize_image<double>(const ImageRecord&, const NormalizationStats&);

}  // namespace neoc
