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
#include <map>

#include "neoc/error.hpp"
#include "neoc/eval.hpp"
#include "neoc/rng.hpp"

using namespace neoc;

namespace {

const ClassId kA("a"), kB("b"), kC("c");

// Independent recomputation from the raw label pairs, no matrix involved.
struct BruteForce {
  double mean_class_accuracy = 0, macro_f1 = 0, overall = 0;
};

BruteForce brute_force(const std::vector<std::pair<int, int>>& pairs, int k, const std::vector<bool>& skip) {
  BruteForce out;
  int counted = 0;
  long correct = 0;
  for (const auto& [t, p] : pairs) correct += t == p;
  out.overall = pairs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pairs.size());
  for (int c = 0; c < k; ++c) {
    long tp = 0, fp = 0, fn = 0, support = 0;
    for (const auto& [t, p] : pairs) {
      support += t == c;
      tp += t == c && p == c;
      fp += t != c && p == c;
      fn += t == c && p != c;
    }
    if (skip[c] || support == 0) continue;
    ++counted;
    out.mean_class_accuracy += static_cast<double>(tp) / static_cast<double>(support);
    out.macro_f1 += 2.0 * tp / (2.0 * tp + fp + fn);
  }
  out.mean_class_accuracy /= counted;
  out.macro_f1 /= counted;
  return out;
}

Model constant_model(const std::vector<std::string>& classes, std::size_t winner) {
  ArchitectureConfig arch;
  arch.height = arch.width = 8;
  arch.blocks = {{1, 2}};
  arch.head = {4};
  arch.num_classes = classes.size();
  Model m(arch, 1);
  for (auto* p : m.parameters()) p->value.fill(0.0f);
  auto params = m.parameters();
  params.back()->value[winner] = 1.0f;  // output bias
  m.set_class_names(classes);
  return m;
}

Sample in_memory(std::string path, const ClassId& cls) {
  Sample s;
  s.path = std::move(path);
  s.cls = cls;
  s.artifact_id = s.path;
  s.image = std::make_shared<const ImageRecord>(8, 8, Rgb{10, 20, 30});
  return s;
}

}  // namespace

TEST_CASE("confusion matrix tallies") {
  const std::vector<ClassId> classes{kA, kB};
  auto cm = confusion_matrix(std::vector{kA, kB, kA}, std::vector{kA, kB, kA}, classes);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(0, 1) + cm.at(1, 0) == 0);

  cm = confusion_matrix(std::vector<ClassId>{}, std::vector<ClassId>{}, classes);
  CHECK(cm.total() == 0);

  cm = confusion_matrix(std::vector{kA, kA, kB}, std::vector{kA, kB, kB}, classes);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(macro_f1(cm) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(confusion_matrix(std::vector{kC}, std::vector{kA}, classes), LookupError);
  CHECK_THROWS_AS(confusion_matrix(std::vector{kA}, std::vector<ClassId>{}, classes), ConfigError);
}

TEST_CASE("mean class accuracy and F1 examples") {
  const std::vector<ClassId> classes{kA, kB, kC};
  auto cm = confusion_matrix(std::vector{kA, kB, kC}, std::vector{kA, kB, kC}, classes);
  CHECK(mean_class_accuracy(cm) == 1.0);
  CHECK(macro_f1(cm) == 1.0);

  // c has no test support and is ignored.
  cm = confusion_matrix(std::vector{kA, kA, kB}, std::vector{kA, kA, kA}, classes);
  CHECK(mean_class_accuracy(cm) == 0.5);

  cm = confusion_matrix(std::vector{kA, kB}, std::vector{kB, kA}, classes);
  CHECK(macro_f1(cm) == 0.0);
  CHECK(mean_class_accuracy(cm) == 0.0);

  CHECK(mean_class_accuracy(cm, {{kA, "single_sample"}}) == 0.0);
  CHECK_THROWS_WITH(mean_class_accuracy(cm, {{kA, "x"}, {kB, "y"}}), "no computable classes");
  CHECK_THROWS_WITH(macro_f1(ConfusionMatrix(classes)), "no computable classes");
}

TEST_CASE("excluding a class leaves other per-class values alone") {
  const std::vector<ClassId> classes{kA, kB, kC};
  const auto cm = confusion_matrix(std::vector{kA, kB, kC, kC}, std::vector{kA, kC, kC, kB}, classes);
  const auto all = summarize(cm, {});
  const auto without_b = summarize(cm, {{kB, "single_sample"}});
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(all.per_class[c].recall == without_b.per_class[c].recall);
    CHECK(all.per_class[c].f1 == without_b.per_class[c].f1);
    CHECK(all.per_class[c].precision == without_b.per_class[c].precision);
  }
  CHECK_FALSE(without_b.per_class[1].eligible);
  CHECK(without_b.overall_accuracy == 0.5);
}

TEST_CASE("metrics match brute force on 1000 random matrices") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = rng.between(1, 8);
    std::vector<ClassId> classes;
    for (int c = 0; c < k; ++c) classes.emplace_back("c" + std::to_string(c));
    std::vector<std::pair<int, int>> pairs;
    std::vector<ClassId> truths, preds;
    const int n = rng.between(1, 200);
    for (int i = 0; i < n; ++i) {
      const int t = static_cast<int>(rng.below(k));
      const int p = rng.bernoulli(0.5) ? t : static_cast<int>(rng.below(k));
      pairs.emplace_back(t, p);
      truths.push_back(classes[t]);
      preds.push_back(classes[p]);
    }
    std::vector<bool> skip(k, false);
    Exclusions excluded;
    for (int c = 0; c < k; ++c) {
      if (rng.bernoulli(0.2)) {
        skip[c] = true;
        excluded[classes[c]] = "empty_side";
      }
    }
    const auto cm = confusion_matrix(truths, preds, classes);
    CHECK(cm.total() == static_cast<std::uint64_t>(n));
    bool any = false;
    for (int c = 0; c < k; ++c) any |= !skip[c] && cm.support(c) > 0;
    if (!any) {
      CHECK_THROWS_AS(mean_class_accuracy(cm, excluded), Error);
      continue;
    }
    const auto oracle = brute_force(pairs, k, skip);
    CHECK(std::abs(mean_class_accuracy(cm, excluded) - oracle.mean_class_accuracy) <= 1e-12);
    CHECK(std::abs(macro_f1(cm, excluded) - oracle.macro_f1) <= 1e-12);
    CHECK(std::abs(overall_accuracy(cm) - oracle.overall) <= 1e-12);
  }
}

TEST_CASE("evaluate end to end with rollup") {
  const auto model = constant_model({"chest/semainier", "chest/wellington_chest", "chair"}, 0);
  CorpusManifest test;
  test.samples = {in_memory("s1", ClassId("chest/semainier")), in_memory("w1", ClassId("chest/wellington_chest")),
                  in_memory("s2", ClassId("chest/semainier")), in_memory("w2", ClassId("chest/wellington_chest"))};
  const auto tax = taxonomy_from_classes(std::vector<ClassId>{
      ClassId("chest/semainier"), ClassId("chest/wellington_chest"), ClassId("chair")});

  EvalOptions options;
  options.rollup_depth = 0;
  const auto result = evaluate(model, test, tax, options);
  CHECK(result.report.leaf.mean_class_accuracy == 0.5);
  REQUIRE(result.report.rolled);
  CHECK(result.report.rolled->mean_class_accuracy == 1.0);
  CHECK(result.report.excluded.at(ClassId("chair")) == "no_test_support");
  REQUIRE(result.predictions.size() == 4);
  CHECK(result.predictions[1].predicted.path() == "chest/semainier");
  CHECK(result.predictions[1].probability > 1.0 / 3.0);

  auto permuted = test;
  std::swap(permuted.samples[0], permuted.samples[3]);
  std::swap(permuted.samples[1], permuted.samples[2]);
  CHECK(to_json(evaluate(model, permuted, tax, options).report) == to_json(result.report));

  const auto json = to_json(result.report);
  CHECK(to_json(report_from_json(json)) == json);
  const auto table = render_table(result.report);
  CHECK(table.find("mean_class_accuracy") != std::string::npos);
  CHECK(table.find("no_test_support") != std::string::npos);

  auto orphan = test;
  orphan.samples.push_back(in_memory("x", ClassId("sofa")));
  CHECK_THROWS_WITH_AS(evaluate(model, orphan, tax), doctest::Contains("sofa"), LookupError);
}

TEST_CASE("report lists excluded classes") {
  const auto model = constant_model({"a", "b", "c"}, 1);
  CorpusManifest test;
  test.samples = {in_memory("1", kA), in_memory("2", kB), in_memory("3", kB)};
  EvalOptions options;
  options.excluded = {{kC, "single_sample"}};
  options.split = SplitParams{0.2, 7, true};
  const auto r = evaluate(model, test, Taxonomy::flat({"a", "b", "c"}), options).report;
  CHECK(r.leaf.mean_class_accuracy == 0.5);
  CHECK(r.excluded.at(kC) == "single_sample");
  const auto table = render_table(r);
  CHECK(table.find("c  single_sample") != std::string::npos);
  CHECK(table.find("per-artifact") != std::string::npos);
}
