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
#include <filesystem>

#include "neoc/error.hpp"
#include "neoc/gradcheck.hpp"
#include "neoc/json.hpp"
#include "neoc/model.hpp"
#include "neoc/rng.hpp"

using namespace neoc;

namespace {

template <typename T>
Tensor<T> random_batch(std::size_t n, const ArchitectureConfig& arch, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<T> t({n, arch.channels, arch.height, arch.width});
  for (auto& v : t.values()) v = static_cast<T>(rng.normal());
  return t;
}

ArchitectureConfig small_arch() {
  ArchitectureConfig arch;
  arch.channels = 3;
  arch.height = 8;
  arch.width = 8;
  arch.blocks = {{1, 4}, {2, 6}};
  arch.head = {7};
  arch.num_classes = 3;
  return arch;
}

std::uint64_t checksum(const std::vector<Parameter<float>*>& params) {
  std::string bytes;
  for (const auto* p : params) {
    bytes.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(float));
  }
  return fnv1a64(bytes);
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "neoc_model_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("default desk architecture has the hand-counted parameter total") {
  const ArchitectureConfig arch;  // 3x64x64, blocks (1,8),(1,16),(2,32), head [64], 5 classes
  const Model model(arch, 1);
  const std::size_t conv1 = 8 * 3 * 9 + 8;
  const std::size_t conv2 = 16 * 8 * 9 + 16;
  const std::size_t conv3 = 32 * 16 * 9 + 32;
  const std::size_t conv4 = 32 * 32 * 9 + 32;
  const std::size_t flat = 32 * 8 * 8;
  const std::size_t fc1 = flat * 64 + 64;
  const std::size_t fc2 = 64 * 5 + 5;
  CHECK(model.parameter_count() == conv1 + conv2 + conv3 + conv4 + fc1 + fc2);
  CHECK(model.parameter_count() == 146741);
}

TEST_CASE("architecture invariants are enforced") {
  ArchitectureConfig arch;
  arch.height = 65;
  CHECK_THROWS_WITH_AS(Model(arch, 1), doctest::Contains("divisible"), ConfigError);
  arch = ArchitectureConfig{};
  arch.num_classes = 1;
  CHECK_THROWS_WITH_AS(Model(arch, 1), doctest::Contains("num_classes"), ConfigError);
}

TEST_CASE("same seed builds identical weights") {
  const Model a(small_arch(), 9), b(small_arch(), 9), c(small_arch(), 10);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool all_same = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    all_same = all_same && pa[i]->value == pb[i]->value;
    any_diff = any_diff || !(pa[i]->value == pc[i]->value);
  }
  CHECK(all_same);
  CHECK(any_diff);
}

TEST_CASE("forward rows are distributions and near-uniform at init") {
  const ArchitectureConfig arch;
  const Model model(arch, 3);
  const auto batch = random_batch<float>(6, arch, 4);
  const auto probs = model.forward(batch);
  REQUIRE(probs.shape() == Shape{6, 5});
  for (std::size_t i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      const double p = probs[i * 5 + j];
      CHECK(p >= 0.0);
      CHECK(std::abs(p - 0.2) < 0.2);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-5);
  }
  CHECK_THROWS_AS(model.forward(Tensor<float>({1, 3, 32, 32})), ShapeError);
}

TEST_CASE("argmax ties go to the lowest index and survive positive rescaling") {
  const std::vector<float> tie{0.1f, 0.4f, 0.4f, 0.1f};
  CHECK(argmax(std::span<const float>(tie)) == 1);
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> row(6);
    for (auto& v : row) v = std::round(rng.uniform(-3, 3));  // coarse values force ties
    const auto before = argmax(std::span<const double>(row));
    const double scale = rng.uniform(0.1, 10.0);
    for (auto& v : row) v *= scale;
    CHECK(argmax(std::span<const double>(row)) == before);
  }
}

TEST_CASE("model backward matches finite differences at 64-bit") {
  BasicModel<double> model(small_arch(), 17);
  const auto batch = random_batch<double>(2, model.arch(), 18);
  const std::vector<std::size_t> targets{2, 0};

  typename BasicModel<double>::Trace trace;
  const auto logits = model.forward_train(batch, trace);
  const auto loss = softmax_cross_entropy(logits, targets);
  model.backward(trace, loss.grad);

  auto params = model.parameters();
  for (auto* p : params) {
    const Tensor<double> saved = p->value;
    auto f = [&](const Tensor<double>& point) {
      p->value = point;
      const double l = softmax_cross_entropy(model.logits(batch), targets).loss;
      p->value = saved;
      return l;
    };
    INFO(p->name);
    CHECK(grad_check(f, saved, p->grad, 1e-6) < 1e-4);
  }
}

TEST_CASE("frozen backward leaves conv gradients untouched") {
  Model model(small_arch(), 1);
  const auto batch = random_batch<float>(3, model.arch(), 2);
  typename Model::Trace trace;
  const auto logits = model.forward_train(batch, trace);
  const std::vector<std::size_t> targets{0, 1, 2};
  model.backward(trace, softmax_cross_entropy(logits, targets).grad, true);
  for (auto* p : model.body_parameters()) {
    for (float g : p->grad.values()) CHECK(g == 0.0f);
  }
  bool head_touched = false;
  for (auto* p : model.head_parameters()) {
    for (float g : p->grad.values()) head_touched = head_touched || g != 0.0f;
  }
  CHECK(head_touched);
}

TEST_CASE("reinit_head preserves the body bit-exactly") {
  Model model(small_arch(), 21);
  model.set_class_names({"a", "b", "c"});
  const auto body_before = checksum(model.body_parameters());
  const auto head_before = model.head_parameters().back()->value;
  const auto out_before = model.head_parameters()[model.head_parameters().size() - 2]->value;

  SUBCASE("same class count") {
    model.reinit_head(3, 99);
    CHECK(checksum(model.body_parameters()) == body_before);
    const auto out_after = model.head_parameters()[model.head_parameters().size() - 2]->value;
    CHECK_FALSE(out_after == out_before);
    CHECK(model.class_names().empty());
  }
  SUBCASE("new class count") {
    Model wide(small_arch(), 21);
    ArchitectureConfig ten = small_arch();
    ten.num_classes = 10;
    Model model10(ten, 21);
    const auto body10 = checksum(model10.body_parameters());
    model10.reinit_head(5, 3);
    CHECK(checksum(model10.body_parameters()) == body10);
    CHECK(model10.arch().num_classes == 5);
    CHECK(model10.forward(random_batch<float>(2, ten, 1)).shape() == Shape{2, 5});
  }
  SUBCASE("hidden head layers are not touched") {
    const auto hidden_before = model.head_parameters()[0]->value;
    model.reinit_head(4, 1);
    CHECK(model.head_parameters()[0]->value == hidden_before);
  }
  CHECK_THROWS_AS(model.reinit_head(1, 0), ConfigError);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Model model(small_arch(), 33);
  model.set_class_names({"chair", "table", "cabinet"});
  model.set_normalization({{0.1, 0.2, 0.3}, {0.25, 0.5, 0.7071067811865476}});
  const auto path = temp_path("roundtrip.neoc");
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  const auto path2 = temp_path("roundtrip2.neoc");
  save_checkpoint(loaded, path2);
  CHECK(read_file(path) == read_file(path2));
  CHECK(loaded.class_names() == model.class_names());
  CHECK(loaded.normalization() == model.normalization());
  CHECK(loaded.arch() == model.arch());

  const auto batch = random_batch<float>(4, model.arch(), 34);
  CHECK(loaded.forward(batch) == model.forward(batch));
  CHECK(read_file(path).substr(0, 5) == "NEOC1");
}

TEST_CASE("checkpoint errors are distinguishable") {
  Model model(small_arch(), 35);
  const auto bytes = serialize_checkpoint(model);
  auto kind_of = [](const std::string& b) {
    try {
      parse_checkpoint(b);
    } catch (const FormatError& e) {
      return e.kind();
    }
    FAIL("expected a FormatError");
    return FormatError::Kind::kMalformed;
  };
  CHECK(kind_of("XXXX" + bytes.substr(4)) == FormatError::Kind::kBadMagic);
  CHECK(kind_of(bytes.substr(0, bytes.size() - 10)) == FormatError::Kind::kTruncated);
  CHECK(kind_of(bytes.substr(0, 20)) == FormatError::Kind::kTruncated);

  // A header describing a different architecture than the blob.
  const auto newline = bytes.find('\n');
  auto header = Json::parse(bytes.substr(5, newline - 5));
  header["weights_bytes"] = header["weights_bytes"].get<std::size_t>() + 4;
  CHECK(kind_of("NEOC1" + header.dump() + bytes.substr(newline)) ==
        FormatError::Kind::kShapeMismatch);
}
