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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "neoc/corpus.hpp"
#include "neoc/error.hpp"
#include "neoc/image.hpp"
#include "neoc/rng.hpp"
#include "neoc/synth.hpp"

using namespace neoc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "neoc_corpus_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Gray image from a row-major list of values.
ImageRecord gray(int w, int h, const std::vector<int>& values) {
  ImageRecord img(w, h);
  for (int i = 0; i < w * h; ++i) {
    const auto v = static_cast<std::uint8_t>(values[i]);
    img.set_pixel(i % w, i / w, {v, v, v});
  }
  return img;
}

std::vector<int> red_channel(const ImageRecord& img) {
  std::vector<int> out;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) out.push_back(img.pixel(x, y).r);
  }
  return out;
}

ImageRecord random_image(Rng& rng) {
  ImageRecord img(rng.between(1, 17), rng.between(1, 17));
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

Sample make_sample(std::string path, std::string cls, std::string artifact,
                   Depiction d = Depiction::kWhole) {
  Sample s;
  s.path = std::move(path);
  s.cls = ClassId(std::move(cls));
  s.artifact_id = std::move(artifact);
  s.depiction = d;
  return s;
}

}  // namespace

TEST_CASE("PPM decoding") {
  const std::string p6 = std::string("P6\n2 1\n255\n") + std::string("\xff\x00\x00\x00\x00\xff", 6);
  const auto img = decode_ppm(p6);
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.pixel(0, 0) == Rgb{255, 0, 0});
  CHECK(img.pixel(1, 0) == Rgb{0, 0, 255});
  CHECK(encode_ppm(img) == p6);

  const auto g = decode_ppm("P5 1 1 255\n\x64");
  CHECK(g.pixel(0, 0) == Rgb{100, 100, 100});

  const auto commented = decode_ppm("P6\n# made by hand\n1 # width\n1\n255\n\x01\x02\x03");
  CHECK(commented.pixel(0, 0) == Rgb{1, 2, 3});

  auto kind_of = [](std::string_view bytes) {
    try {
      decode_ppm(bytes);
    } catch (const FormatError& e) {
      return e.kind();
    }
    FAIL("no error");
    return FormatError::Kind::kMalformed;
  };
  CHECK(kind_of("P3\n1 1\n255\n1 2 3\n") == FormatError::Kind::kUnsupported);
  CHECK(kind_of("GIF89a") == FormatError::Kind::kBadMagic);
  CHECK(kind_of("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06") == FormatError::Kind::kBadMaxval);
  CHECK(kind_of("P6\n2 2\n255\n\x01\x02\x03") == FormatError::Kind::kTruncated);
  CHECK(kind_of("P6\n2") == FormatError::Kind::kTruncated);
  CHECK(kind_of("P6\nx 2 255\n") == FormatError::Kind::kMalformed);
}

TEST_CASE("PPM round trip is bit-exact on random images") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto img = random_image(rng);
    const auto bytes = encode_ppm(img);
    CHECK(decode_ppm(bytes) == img);
    CHECK(encode_ppm(decode_ppm(bytes)) == bytes);
  }
}

TEST_CASE("bilinear resize") {
  Rng rng(3);
  const auto img = random_image(rng);
  CHECK(resize_bilinear(img, img.width, img.height) == img);

  const ImageRecord flat(5, 3, {12, 200, 77});
  for (auto [w, h] : {std::pair{1, 1}, {7, 2}, {16, 16}, {3, 9}}) {
    const auto out = resize_bilinear(flat, w, h);
    CHECK(out == ImageRecord(w, h, {12, 200, 77}));
  }

  // Every output pixel samples the centre of the 2x2 block: (0+255+255+0)/4.
  CHECK(red_channel(resize_bilinear(gray(2, 2, {0, 255, 255, 0}), 1, 1)) == std::vector<int>{128});
  // Sample positions -0.25 (clamped), 0.25, 0.75, 1.25 (clamped).
  CHECK(red_channel(resize_bilinear(gray(2, 1, {0, 255}), 4, 1)) == std::vector<int>{0, 64, 191, 255});
  CHECK_THROWS_AS(resize_bilinear(flat, 0, 3), ConfigError);
}

TEST_CASE("mask_region") {
  const auto img = gray(4, 4, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
  const auto masked = mask_region(img, {1, 1, 2, 2}, {128, 128, 128});
  CHECK(red_channel(masked) ==
        std::vector<int>{0, 1, 2, 3, 4, 128, 128, 7, 8, 128, 128, 11, 12, 13, 14, 15});
  std::size_t changed = 0;
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) changed += img.pixels[i] != masked.pixels[i];
  CHECK(changed == 4);

  CHECK(mask_region(img, {0, 0, 4, 4}, {9, 8, 7}) == ImageRecord(4, 4, {9, 8, 7}));
  CHECK(mask_region(img, {2, 2, 0, 0}) == img);
  CHECK_THROWS_AS(mask_region(img, {3, 3, 2, 1}), ConfigError);
  CHECK_THROWS_AS(mask_region(img, {-1, 0, 1, 1}), ConfigError);
}

TEST_CASE("split_by_boxes on hand-built images") {
  SUBCASE("disjoint boxes on 4x4") {
    auto s = make_sample("scenes/a.ppm", "chair", "a", Depiction::kInterior);
    s.boxes = {{{0, 0, 2, 2}, ClassId("chair")}, {{2, 2, 2, 2}, ClassId("table")}};
    const auto img = gray(4, 4, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
    const auto out = split_by_boxes(s, img);
    REQUIRE(out.size() == 2);
    CHECK(red_channel(*out[0].image) == std::vector<int>{0, 1, 4, 5});
    CHECK(red_channel(*out[1].image) == std::vector<int>{10, 11, 14, 15});
    CHECK(out[0].cls.path() == "chair");
    CHECK(out[1].cls.path() == "table");
    CHECK(out[1].depiction == Depiction::kWhole);
    CHECK(out[1].artifact_id == "a/b1");
    CHECK(out[1].path == "table/scenes__a_b1.ppm");
    CHECK(out[0].boxes.empty());
  }
  SUBCASE("overlapping boxes on 8x8") {
    std::vector<int> values(64);
    for (int i = 0; i < 64; ++i) values[i] = i;
    const auto img = gray(8, 8, values);
    auto s = make_sample("b.ppm", "sofa", "b", Depiction::kInterior);
    s.boxes = {{{0, 0, 5, 5}, ClassId("sofa")}, {{3, 2, 5, 6}, ClassId("lamp")}};
    const auto out = split_by_boxes(s, img, {200, 200, 200});
    REQUIRE(out.size() == 2);
    // Overlap is (3,2,2,3): local (3,2,2,3) in box 0, local (0,0,2,3) in box 1.
    CHECK(red_channel(*out[0].image) == std::vector<int>{
                                            0,  1,  2,  3,   4,    //
                                            8,  9,  10, 11,  12,   //
                                            16, 17, 18, 200, 200,  //
                                            24, 25, 26, 200, 200,  //
                                            32, 33, 34, 200, 200});
    CHECK(red_channel(*out[1].image) == std::vector<int>{
                                            200, 200, 21, 22, 23,  //
                                            200, 200, 29, 30, 31,  //
                                            200, 200, 37, 38, 39,  //
                                            43,  44,  45, 46, 47,  //
                                            51,  52,  53, 54, 55,  //
                                            59,  60,  61, 62, 63});
  }
  SUBCASE("a box covering the image reproduces it") {
    Rng rng(11);
    ImageRecord img(6, 5);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    auto s = make_sample("c.ppm", "bed", "c");
    s.boxes = {{{0, 0, 6, 5}, ClassId("mirror")}};
    const auto out = split_by_boxes(s, img);
    REQUIRE(out.size() == 1);
    CHECK(*out[0].image == img);
    CHECK(out[0].cls.path() == "mirror");
  }
  CHECK_THROWS_WITH_AS(split_by_boxes(make_sample("d.ppm", "bed", "d"), ImageRecord(2, 2)),
                       doctest::Contains("unchanged"), ConfigError);
}

TEST_CASE("split_by_boxes changes exactly the masked intersection pixels") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ImageRecord img(16, 16);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    auto s = make_sample("x.ppm", "chair", "x");
    const int nboxes = rng.between(1, 4);
    for (int k = 0; k < nboxes; ++k) {
      const int w = rng.between(1, 16), h = rng.between(1, 16);
      s.boxes.push_back({{rng.between(0, 16 - w), rng.between(0, 16 - h), w, h}, ClassId("chair")});
    }
    const Rgb fill{1, 2, 3};
    const auto out = split_by_boxes(s, img, fill);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& r = s.boxes[i].rect;
      const auto src = crop(img, r);
      for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
          bool covered = false;
          for (std::size_t j = 0; j < s.boxes.size(); ++j) {
            const auto& o = s.boxes[j].rect;
            covered |= j != i && r.x + x >= o.x && r.x + x < o.x + o.w && r.y + y >= o.y &&
                       r.y + y < o.y + o.h;
          }
          CHECK(out[i].image->pixel(x, y) == (covered ? fill : src.pixel(x, y)));
        }
      }
    }
  }
}

TEST_CASE("curate") {
  const auto root = fresh_dir("curate");
  CorpusManifest m;
  m.root = root;
  for (int i = 0; i < 3; ++i) {
    m.samples.push_back(make_sample("chair/w" + std::to_string(i) + ".ppm", "chair", "w" + std::to_string(i)));
  }
  m.samples.push_back(make_sample("chair/room.ppm", "chair", "room", Depiction::kInterior));

  SUBCASE("whole kept, interior excluded") {
    const auto r = curate(m);
    CHECK(r.kept.samples.size() == 3);
    REQUIRE(r.excluded.size() == 1);
    CHECK(r.excluded[0].reason == "interior");
    CHECK(r.excluded[0].sample.path == "chair/room.ppm");
  }
  SUBCASE("a two-box image becomes two samples") {
    write_ppm(root / "chair/room.ppm", ImageRecord(8, 8, {50, 60, 70}));
    m.samples.back().boxes = {{{0, 0, 4, 4}, ClassId("chair")}, {{4, 4, 4, 4}, ClassId("table")}};
    const auto r = curate(m);
    CHECK(r.kept.samples.size() == 5);
    CHECK(r.excluded.empty());
    CHECK(curate(r.kept).kept.samples == r.kept.samples);
    CHECK(curate(r.kept, {}, 4).kept.samples == r.kept.samples);

    const auto out_root = fresh_dir("curate_out");
    for (int i = 0; i < 3; ++i) write_ppm(root / m.samples[i].path, ImageRecord(4, 4));
    const auto disk = materialize(r.kept, root, out_root);
    CHECK(disk.samples == r.kept.samples);
    for (const auto& s : disk.samples) {
      CHECK_FALSE(s.image);
      CHECK(fs::exists(out_root / s.path));
    }
    CHECK(read_ppm(out_root / "table/chair__room_b1.ppm") == ImageRecord(4, 4, {50, 60, 70}));
    CHECK(curate(disk).kept.samples == disk.samples);
  }
  SUBCASE("the same file under two artifacts is kept twice") {
    m.samples.push_back(make_sample("chair/w0.ppm", "chair", "other"));
    const auto r = curate(m);
    CHECK(r.kept.samples.size() == 4);
  }
  SUBCASE("partial and closeup are excluded by depiction") {
    m.samples.push_back(make_sample("chair/p.ppm", "chair", "p", Depiction::kPartial));
    m.samples.push_back(make_sample("chair/c.ppm", "chair", "c", Depiction::kCloseup));
    std::set<std::string> reasons;
    for (const auto& e : curate(m).excluded) reasons.insert(e.reason);
    CHECK(reasons == std::set<std::string>{"closeup", "interior", "partial"});
  }
}

TEST_CASE("stratified split examples") {
  CorpusManifest m;
  for (int i = 0; i < 10; ++i) {
    m.samples.push_back(make_sample("a/" + std::to_string(i), "a", "a" + std::to_string(i)));
  }
  m.samples.push_back(make_sample("b/0", "b", "b0"));

  const SplitParams p{0.2, 42, true};
  const auto r = stratified_split(m, p);
  CHECK(r.train.samples.size() == 9);
  CHECK(r.test.samples.size() == 2);
  REQUIRE(r.non_computable.size() == 1);
  CHECK(r.non_computable[0].cls.path() == "b");
  CHECK(r.non_computable[0].reason == "single_sample");
  CHECK(std::count(r.train.samples.begin(), r.train.samples.end(), m.samples.back()) == 1);

  const auto again = stratified_split(m, p);
  CHECK(again.train.samples == r.train.samples);
  CHECK(again.test.samples == r.test.samples);
  const auto other = stratified_split(m, {0.2, 43, true});
  CHECK(other.train.samples.size() == 9);

  CHECK_THROWS_AS(stratified_split(CorpusManifest{}, p), ConfigError);
  CHECK_THROWS_AS(stratified_split(m, {0.0, 1, true}), ConfigError);
  CHECK_THROWS_AS(stratified_split(m, {1.0, 1, true}), ConfigError);

  SUBCASE("one artifact with many views is non-computable when grouped") {
    CorpusManifest g;
    for (int i = 0; i < 4; ++i) g.samples.push_back(make_sample("c/" + std::to_string(i), "c", "same"));
    const auto grouped = stratified_split(g, {0.25, 1, true});
    REQUIRE(grouped.non_computable.size() == 1);
    CHECK(grouped.non_computable[0].reason == "single_artifact");
    CHECK(grouped.train.samples.size() == 4);
    const auto ungrouped = stratified_split(g, {0.25, 1, false});
    CHECK(ungrouped.non_computable.empty());
    CHECK(ungrouped.test.samples.size() == 1);
  }
}

TEST_CASE("stratified split partition properties") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    CorpusManifest m;
    const int classes = rng.between(1, 5);
    for (int c = 0; c < classes; ++c) {
      const int n = rng.between(1, 15);
      const int artifacts = rng.between(1, n);
      for (int i = 0; i < n; ++i) {
        m.samples.push_back(make_sample("c" + std::to_string(c) + "/" + std::to_string(i),
                                        "c" + std::to_string(c),
                                        "c" + std::to_string(c) + "-" + std::to_string(rng.below(artifacts))));
      }
    }
    const bool grouped = rng.bernoulli(0.5);
    const auto r = stratified_split(m, {rng.uniform(0.05, 0.6), rng.next_u64(), grouped});

    // Disjoint and covering, in manifest order.
    std::vector<Sample> merged;
    std::size_t a = 0, b = 0;
    for (const auto& s : m.samples) {
      if (a < r.train.samples.size() && r.train.samples[a] == s) {
        ++a;
      } else {
        REQUIRE(b < r.test.samples.size());
        CHECK(r.test.samples[b] == s);
        ++b;
      }
    }
    CHECK(a == r.train.samples.size());
    CHECK(b == r.test.samples.size());

    if (grouped) {
      std::set<std::string> train_ids;
      for (const auto& s : r.train.samples) train_ids.insert(s.artifact_id);
      for (const auto& s : r.test.samples) CHECK_FALSE(train_ids.contains(s.artifact_id));
    }
    std::map<ClassId, std::pair<int, int>> sides;
    for (const auto& s : r.train.samples) ++sides[s.cls].first;
    for (const auto& s : r.test.samples) ++sides[s.cls].second;
    const auto nc = r.non_computable_classes();
    for (const auto& [cls, counts] : sides) {
      const bool empty_side = counts.first == 0 || counts.second == 0;
      CHECK(empty_side == (std::find(nc.begin(), nc.end(), cls) != nc.end()));
    }
  }
}

TEST_CASE("normalization") {
  const NormalizationStats mid{{0.2, 0.4, 0.6}, {0.1, 0.1, 0.1}};
  const ImageRecord at_mean(3, 2, {51, 102, 153});
  const auto zero = normalize_batch<double>(std::span<const ImageRecord>(&at_mean, 1), mid);
  CHECK(zero.shape() == Shape{1, 3, 2, 3});
  for (double v : zero.values()) CHECK(std::abs(v) < 1e-12);

  // Two images: channel 0 values {0, 255} -> mean 0.5, std 0.5; others constant.
  const std::vector<ImageRecord> two{ImageRecord(2, 2, {0, 10, 7}), ImageRecord(2, 2, {255, 10, 7})};
  const auto stats = compute_normalization(two);
  CHECK(stats.mean[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(stats.std[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(stats.mean[1] == doctest::Approx(10.0 / 255).epsilon(1e-12));
  CHECK(stats.std[1] == 0.0);
  const auto batch = normalize_batch<double>(two, stats);
  for (double v : batch.values()) CHECK(std::isfinite(v));
  CHECK(batch.at(0, 0, 0, 0) == doctest::Approx(-1.0));
  CHECK(batch.at(1, 0, 1, 1) == doctest::Approx(1.0));
  CHECK(batch.at(1, 1, 0, 0) == doctest::Approx(0.0));

  const std::vector<ImageRecord> mixed{ImageRecord(2, 2), ImageRecord(3, 2)};
  CHECK_THROWS_AS(normalize_batch<float>(mixed, stats), ShapeError);
}

TEST_CASE("manifest JSONL round trip") {
  const auto dir = fresh_dir("manifest");
  CorpusManifest m;
  m.root = dir;
  auto s = make_sample("x/y.ppm", "chest_of_drawers/semainier", "art-1", Depiction::kCloseup);
  s.boxes = {{{1, 2, 3, 4}, ClassId("chairs")}};
  m.samples = {s, make_sample("z.ppm", "chairs", "art-2")};
  write_manifest(dir / "m.jsonl", m);
  const auto back = read_manifest(dir / "m.jsonl", dir);
  CHECK(back.samples == m.samples);
  const auto tax = taxonomy_from_classes(std::vector<ClassId>{ClassId("chest_of_drawers/semainier"),
                                                              ClassId("chairs")});
  CHECK(tax.size() == 3);
  CHECK_NOTHROW(back.validate(tax));
  CHECK_THROWS_AS(back.validate(Taxonomy::flat({"chairs"})), LookupError);
}

TEST_CASE("synthetic corpus") {
  SynthSpec spec;
  spec.images_per_class = 12;
  const auto root = fresh_dir("synth");
  const auto m = generate_synthetic_corpus(spec, 42, root);
  CHECK(m.samples.size() == 60);
  std::map<ClassId, int> histogram;
  for (const auto& s : m.samples) ++histogram[s.cls];
  CHECK(histogram.size() == 5);
  for (const auto& [cls, n] : histogram) CHECK(n == 12);
  const auto first = read_ppm(root / m.samples[0].path);
  CHECK(first.width == 32);

  const auto again_root = fresh_dir("synth_again");
  const auto again = generate_synthetic_corpus(spec, 42, again_root);
  CHECK(again.samples == m.samples);
  for (const auto& s : m.samples) CHECK(read_file(root / s.path) == read_file(again_root / s.path));

  const auto other = generate_synthetic_corpus(spec, 43, fresh_dir("synth_other"));
  CHECK(read_file(fs::temp_directory_path() / "neoc_corpus_tests/synth_other" / other.samples[0].path) !=
        read_file(root / m.samples[0].path));

  SynthSpec cluttered = spec;
  cluttered.images_per_class = 4;
  cluttered.clutter.objects_per_scene = 2;
  const auto scene_root = fresh_dir("synth_scene");
  const auto scenes = generate_synthetic_corpus(cluttered, 1, scene_root);
  CHECK(scenes.samples.size() == 20);
  for (const auto& s : scenes.samples) {
    CHECK(s.boxes.size() == 2);
    CHECK(s.boxes[0].cls == s.cls);
    CHECK(iou(s.boxes[0].rect, s.boxes[1].rect) <= 0.1 + 1e-12);
  }
  CHECK_NOTHROW(scenes.validate(taxonomy_from_classes(scenes.classes()), true));
  CHECK(curate(scenes).kept.samples.size() == 40);

  SynthSpec bad = spec;
  bad.classes = {"spaceship"};
  CHECK_THROWS_AS(generate_synthetic_corpus(bad, 1, fresh_dir("bad")), ConfigError);
  Json j = spec;
  SynthSpec parsed;
  from_json(j, parsed);
  CHECK(Json(parsed) == j);
  CHECK_THROWS_AS(from_json(Json{{"colour", 1}}, parsed), ConfigError);
}
