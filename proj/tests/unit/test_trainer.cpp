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

#include <cmath>

#include "neoc/error.hpp"
#include "neoc/eval.hpp"
#include "neoc/rng.hpp"
#include "neoc/trainer.hpp"

using namespace neoc;

namespace {

ArchitectureConfig tiny_arch(std::size_t classes) {
  ArchitectureConfig arch;
  arch.height = arch.width = 8;
  arch.blocks = {{1, 4}};
  arch.head = {8};
  arch.num_classes = classes;
  return arch;
}

// Class c images are bright in the left half (c == 0) or right half (c == 1).
CorpusManifest separable(std::size_t per_class, std::uint64_t seed, int side = 8) {
  Rng rng(seed);
  CorpusManifest m;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      auto img = std::make_shared<ImageRecord>(side, side);
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const bool lit = (x < side / 2) == (c == 0);
          const auto v = static_cast<std::uint8_t>((lit ? 180 : 40) + rng.between(0, 40));
          img->set_pixel(x, y, {v, v, v});
        }
      }
      Sample s;
      s.path = "c" + std::to_string(c) + "/" + std::to_string(i);
      s.cls = ClassId(c == 0 ? "left" : "right");
      s.artifact_id = s.path;
      s.image = img;
      m.samples.push_back(std::move(s));
    }
  }
  return m;
}

std::vector<std::vector<float>> snapshot(const Model& m) {
  std::vector<std::vector<float>> out;
  for (const auto* p : m.parameters()) out.emplace_back(p->value.values().begin(), p->value.values().end());
  return out;
}

}  // namespace

TEST_CASE("separable data is learned perfectly") {
  TrainConfig config;
  config.epochs = 10;
  config.batch_size = 8;
  config.lr = 0.05;
  const auto data = separable(20, 1);
  const auto result = train(Model(tiny_arch(2), 3), data, config);
  REQUIRE(result.history.epochs.size() == 10);
  CHECK(result.history.epochs.back().train_accuracy == 1.0);
  CHECK(result.model.class_names() == std::vector<std::string>{"left", "right"});
  const auto eval = evaluate(result.model, separable(10, 99), Taxonomy::flat({"left", "right"}));
  CHECK(eval.report.leaf.mean_class_accuracy == 1.0);
}

TEST_CASE("lr = 0 is a fixed point with loss near ln K") {
  TrainConfig config;
  config.epochs = 1;
  config.lr = 0.0;
  const Model start(tiny_arch(2), 5);
  const auto result = train(start, separable(10, 2), config);
  CHECK(snapshot(result.model) == snapshot(start));
  CHECK(result.history.epochs[0].train_loss == doctest::Approx(std::log(2.0)).epsilon(0.05));
}

TEST_CASE("training is deterministic") {
  TrainConfig config;
  config.epochs = 3;
  config.batch_size = 7;
  const auto data = separable(12, 4);
  const auto test = separable(4, 5);
  const auto a = train(Model(tiny_arch(2), 9), data, config, &test);
  const auto b = train(Model(tiny_arch(2), 9), data, config, &test);
  CHECK(a.history.to_csv() == b.history.to_csv());
  CHECK(serialize_checkpoint(a.model) == serialize_checkpoint(b.model));
  REQUIRE(a.history.epochs[0].test_mean_class_accuracy);

  config.threads = 3;
  const auto c = train(Model(tiny_arch(2), 9), data, config, &test);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(c.history.epochs[e].train_loss == doctest::Approx(a.history.epochs[e].train_loss).epsilon(1e-5));
  }
}

TEST_CASE("loss on one repeated batch does not increase at lr 1e-3") {
  const ArchitectureConfig arch;  // default desk configuration
  CorpusManifest m;
  Rng rng(8);
  for (std::size_t i = 0; i < 10; ++i) {
    auto img = std::make_shared<ImageRecord>(64, 64);
    for (auto& p : img->pixels) p = static_cast<std::uint8_t>(rng.below(256));
    Sample s;
    s.path = std::to_string(i);
    s.cls = ClassId("k" + std::to_string(i % 5));
    s.artifact_id = s.path;
    s.image = img;
    m.samples.push_back(std::move(s));
  }
  TrainConfig config;
  config.epochs = 5;
  config.batch_size = 10;
  config.lr = 1e-3;
  const auto h = train(Model(arch, 1), m, config).history;
  for (std::size_t e = 1; e < 5; ++e) CHECK(h.epochs[e].train_loss <= h.epochs[e - 1].train_loss);
}

TEST_CASE("fine-tuning") {
  TrainConfig config;
  config.epochs = 2;
  config.batch_size = 8;
  const auto pretrained = train(Model(tiny_arch(2), 1), separable(8, 1), config).model;

  SUBCASE("frozen body stays bit-identical") {
    config.freeze_blocks_epochs = config.epochs;
    const auto tuned = finetune(pretrained, separable(8, 2), config).model;
    auto before = const_cast<Model&>(pretrained).body_parameters();
    auto after = const_cast<Model&>(tuned).body_parameters();
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i]->value == after[i]->value);
    CHECK(tuned.lineage() == checkpoint_hash(pretrained));
    CHECK(tuned.lineage().size() == 16);
  }
  SUBCASE("lr = 0 reproduces the head-reinit model") {
    config.lr = 0.0;
    const auto data = separable(8, 3);
    const auto tuned = finetune(pretrained, data, config).model;
    Model reinit = pretrained;
    reinit.reinit_head(2, config.seed);
    reinit.set_normalization(tuned.normalization());
    std::vector<ImageRecord> images;
    for (const auto& s : data.samples) images.push_back(*s.image);
    const auto x = normalize_batch<float>(images, tuned.normalization());
    CHECK(tuned.predict(x) == reinit.predict(x));
    CHECK(tuned.logits(x) == reinit.logits(x));
  }
}

TEST_CASE("float64 training path") {
  TrainConfig config;
  config.epochs = 2;
  config.precision = Precision::kFloat64;
  const auto r = train(Model(tiny_arch(2), 1), separable(6, 1), config);
  CHECK(r.model.class_names().size() == 2);
  CHECK(r.history.epochs.size() == 2);
}

TEST_CASE("training errors") {
  TrainConfig config;
  config.lr = 1e30;
  config.epochs = 3;
  CHECK_THROWS_AS(train(Model(tiny_arch(2), 1), separable(6, 1), config), NumericError);
  config.lr = 0.01;
  CHECK_THROWS_AS(train(Model(tiny_arch(3), 1), separable(6, 1), config), ConfigError);
  config.epochs = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.epochs = 1;
  config.lr_decay = 0.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("train config and history formats") {
  TrainConfig config;
  config.precision = Precision::kFloat64;
  config.seed = 77;
  const Json j = config;
  TrainConfig back;
  from_json(j, back);
  CHECK(Json(back) == j);
  CHECK_THROWS_AS(from_json(Json{{"epoch", 3}}, back), ConfigError);

  TrainHistory h;
  h.epochs.push_back({1, 0.01, 0.5, 0.75, 0.8});
  h.epochs.push_back({2, 0.0095, 0.25, 1.0, std::nullopt});
  CHECK(h.to_csv() ==
        "epoch,train_loss,train_acc,test_mean_class_acc\n1,0.500000,0.750000,0.800000\n2,0.250000,1.000000,\n");
}
