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

#include "neoc/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "neoc/error.hpp"
#include "neoc/parallel.hpp"

namespace neoc {

ConfusionMatrix::ConfusionMatrix(std::vector<ClassId> classes)
    : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0) {
  std::set<ClassId> seen(classes_.begin(), classes_.end());
  if (seen.size() != classes_.size()) throw ConfigError("confusion matrix: duplicate class");
}

std::size_t ConfusionMatrix::index(const ClassId& cls) const {
  const auto it = std::find(classes_.begin(), classes_.end(), cls);
  if (it == classes_.end()) throw LookupError("unknown label '" + cls.path() + "'");
  return static_cast<std::size_t>(it - classes_.begin());
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t t = 0;
  for (std::size_t c = 0; c < size(); ++c) t += at(c, c);
  return t;
}

std::uint64_t ConfusionMatrix::support(std::size_t c) const noexcept {
  std::uint64_t t = 0;
  for (std::size_t p = 0; p < size(); ++p) t += at(c, p);
  return t;
}

std::uint64_t ConfusionMatrix::predicted(std::size_t c) const noexcept {
  std::uint64_t t = 0;
  for (std::size_t r = 0; r < size(); ++r) t += at(r, c);
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const ClassId> truths, std::span<const ClassId> predictions,
                                 std::vector<ClassId> classes) {
  if (truths.size() != predictions.size()) {
    throw ConfigError("confusion_matrix: " + std::to_string(truths.size()) + " truths vs " +
                      std::to_string(predictions.size()) + " predictions");
  }
  ConfusionMatrix cm(std::move(classes));
  for (std::size_t i = 0; i < truths.size(); ++i) cm.add(cm.index(truths[i]), cm.index(predictions[i]));
  return cm;
}

std::vector<std::size_t> eligible_classes(const ConfusionMatrix& cm, const Exclusions& excluded) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < cm.size(); ++c) {
    if (!excluded.contains(cm.classes()[c]) && cm.support(c) > 0) out.push_back(c);
  }
  if (out.empty()) throw Error("no computable classes");
  return out;
}

namespace {

double recall_of(const ConfusionMatrix& cm, std::size_t c) {
  const auto s = cm.support(c);
  return s == 0 ? 0.0 : static_cast<double>(cm.at(c, c)) / static_cast<double>(s);
}

double f1_of(const ConfusionMatrix& cm, std::size_t c) {
  const double tp = static_cast<double>(cm.at(c, c));
  const double fp = static_cast<double>(cm.predicted(c)) - tp;
  const double fn = static_cast<double>(cm.support(c)) - tp;
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

}  // namespace

double mean_class_accuracy(const ConfusionMatrix& cm, const Exclusions& excluded) {
  const auto classes = eligible_classes(cm, excluded);
  double sum = 0.0;
  for (auto c : classes) sum += recall_of(cm, c);
  return sum / static_cast<double>(classes.size());
}

double macro_f1(const ConfusionMatrix& cm, const Exclusions& excluded) {
  const auto classes = eligible_classes(cm, excluded);
  double sum = 0.0;
  for (auto c : classes) sum += f1_of(cm, c);
  return sum / static_cast<double>(classes.size());
}

double weighted_f1(const ConfusionMatrix& cm, const Exclusions& excluded) {
  const auto classes = eligible_classes(cm, excluded);
  double sum = 0.0;
  double weight = 0.0;
  for (auto c : classes) {
    const auto s = static_cast<double>(cm.support(c));
    sum += s * f1_of(cm, c);
    weight += s;
  }
  return sum / weight;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  return total == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(total);
}

MetricSummary summarize(const ConfusionMatrix& cm, const Exclusions& excluded) {
  MetricSummary s;
  s.confusion = cm;
  const auto eligible = eligible_classes(cm, excluded);
  for (std::size_t c = 0; c < cm.size(); ++c) {
    ClassMetrics m;
    m.cls = cm.classes()[c];
    m.support = cm.support(c);
    m.recall = recall_of(cm, c);
    const auto predicted = cm.predicted(c);
    m.precision_defined = predicted > 0;
    m.precision = predicted == 0 ? 0.0 : static_cast<double>(cm.at(c, c)) / static_cast<double>(predicted);
    m.f1 = f1_of(cm, c);
    m.eligible = std::find(eligible.begin(), eligible.end(), c) != eligible.end();
    s.per_class.push_back(std::move(m));
  }
  s.mean_class_accuracy = mean_class_accuracy(cm, excluded);
  s.macro_f1 = macro_f1(cm, excluded);
  s.weighted_f1 = weighted_f1(cm, excluded);
  s.overall_accuracy = overall_accuracy(cm);
  return s;
}

namespace {

Json summary_to_json(const MetricSummary& s) {
  Json classes = Json::array();
  for (const auto& c : s.confusion.classes()) classes.push_back(c.path());
  Json rows = Json::array();
  for (std::size_t r = 0; r < s.confusion.size(); ++r) {
    Json row = Json::array();
    for (std::size_t p = 0; p < s.confusion.size(); ++p) row.push_back(s.confusion.at(r, p));
    rows.push_back(std::move(row));
  }
  Json per_class = Json::array();
  for (const auto& m : s.per_class) {
    per_class.push_back({{"class", m.cls.path()},
                         {"support", m.support},
                         {"recall", m.recall},
                         {"precision", m.precision},
                         {"precision_defined", m.precision_defined},
                         {"f1", m.f1},
                         {"eligible", m.eligible}});
  }
  return {{"classes", classes},
          {"confusion", rows},
          {"per_class", per_class},
          {"mean_class_accuracy", s.mean_class_accuracy},
          {"macro_f1", s.macro_f1},
          {"weighted_f1", s.weighted_f1},
          {"overall_accuracy", s.overall_accuracy}};
}

MetricSummary summary_from_json(const Json& j) {
  MetricSummary s;
  std::vector<ClassId> classes;
  for (const auto& c : j.at("classes")) classes.emplace_back(c.get<std::string>());
  s.confusion = ConfusionMatrix(classes);
  const auto& rows = j.at("confusion");
  for (std::size_t r = 0; r < classes.size(); ++r) {
    for (std::size_t p = 0; p < classes.size(); ++p) s.confusion.add(r, p, rows.at(r).at(p).get<std::uint64_t>());
  }
  for (const auto& m : j.at("per_class")) {
    s.per_class.push_back({ClassId(m.at("class").get<std::string>()), m.at("support").get<std::uint64_t>(),
                           m.at("recall").get<double>(), m.at("precision").get<double>(),
                           m.at("f1").get<double>(), m.at("precision_defined").get<bool>(),
                           m.at("eligible").get<bool>()});
  }
  s.mean_class_accuracy = j.at("mean_class_accuracy").get<double>();
  s.macro_f1 = j.at("macro_f1").get<double>();
  s.weighted_f1 = j.at("weighted_f1").get<double>();
  s.overall_accuracy = j.at("overall_accuracy").get<double>();
  return s;
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

void render_summary(std::string& out, const MetricSummary& s, const Exclusions& excluded) {
  std::size_t width = 5;
  for (const auto& m : s.per_class) width = std::max(width, m.cls.path().size());
  out += pad("class", width) + "  support  recall  precision      f1\n";
  for (const auto& m : s.per_class) {
    out += pad(m.cls.path(), width) + "  " + lpad(std::to_string(m.support), 7) + "  " +
           fmt("%6.4f", m.recall) + "  " +
           lpad(m.precision_defined ? fmt("%.4f", m.precision) : std::string("n/a"), 9) + "  " +
           fmt("%6.4f", m.f1);
    if (!m.eligible) {
      const auto it = excluded.find(m.cls);
      out += "  (excluded: " + (it != excluded.end() ? it->second : std::string("no_test_support")) + ")";
    }
    out += "\n";
  }
  std::size_t eligible = 0;
  for (const auto& m : s.per_class) eligible += m.eligible;
  const std::string over = " (over " + std::to_string(eligible) + " classes)\n";
  out += "mean_class_accuracy  " + fmt("%.4f", s.mean_class_accuracy) + over;
  out += "macro_f1             " + fmt("%.4f", s.macro_f1) + over;
  out += "weighted_f1          " + fmt("%.4f", s.weighted_f1) + over;
  out += "overall_accuracy     " + fmt("%.4f", s.overall_accuracy) + " (all samples)\n";
}

}  // namespace

Json to_json(const MetricsReport& report) {
  Json excluded = Json::array();
  for (const auto& [cls, reason] : report.excluded) excluded.push_back({{"class", cls.path()}, {"reason", reason}});
  Json split = nullptr;
  if (report.split) {
    split = {{"test_ratio", report.split->test_ratio},
             {"seed", report.split->seed},
             {"group_by_artifact", report.split->group_by_artifact}};
  }
  return {{"samples", report.samples},
          {"split", split},
          {"excluded", excluded},
          {"leaf", summary_to_json(report.leaf)},
          {"rollup_depth", report.rollup_depth ? Json(*report.rollup_depth) : Json(nullptr)},
          {"rolled", report.rolled ? summary_to_json(*report.rolled) : Json(nullptr)}};
}

MetricsReport report_from_json(const Json& j) {
  try {
    MetricsReport r;
    r.samples = j.at("samples").get<std::size_t>();
    if (!j.at("split").is_null()) {
      const auto& s = j.at("split");
      r.split = SplitParams{s.at("test_ratio").get<double>(), s.at("seed").get<std::uint64_t>(),
                            s.at("group_by_artifact").get<bool>()};
    }
    for (const auto& e : j.at("excluded")) {
      r.excluded[ClassId(e.at("class").get<std::string>())] = e.at("reason").get<std::string>();
    }
    r.leaf = summary_from_json(j.at("leaf"));
    if (!j.at("rollup_depth").is_null()) r.rollup_depth = j.at("rollup_depth").get<std::size_t>();
    if (!j.at("rolled").is_null()) r.rolled = summary_from_json(j.at("rolled"));
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, std::string("metrics report: ") + e.what());
  }
}

std::string render_table(const MetricsReport& report) {
  std::string out = "evaluated samples: " + std::to_string(report.samples) + "\n";
  if (report.split) {
    out += "split: test_ratio " + fmt("%.3g", report.split->test_ratio) + ", seed " +
           std::to_string(report.split->seed) + ", " +
           (report.split->group_by_artifact ? "per-artifact" : "per-image") + " grouping\n";
  }
  out += "\n";
  render_summary(out, report.leaf, report.excluded);
  if (report.rolled) {
    out += "\nrolled up to depth " + std::to_string(*report.rollup_depth) + ":\n";
    render_summary(out, *report.rolled, {});
  }
  out += "\nexcluded classes (non-computable, removed from the means):";
  if (report.excluded.empty()) {
    out += " none\n";
  } else {
    out += "\n";
    for (const auto& [cls, reason] : report.excluded) out += "  " + cls.path() + "  " + reason + "\n";
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
  std::vector<Json> rows;
  rows.reserve(predictions.size());
  for (const auto& p : predictions) {
    rows.push_back({{"path", p.path},
                    {"truth", p.truth.path()},
                    {"predicted", p.predicted.path()},
                    {"probability", p.probability}});
  }
  write_jsonl(path, rows);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  for (const auto& row : read_jsonl(path)) {
    out.push_back({row.at("path").get<std::string>(), ClassId(row.at("truth").get<std::string>()),
                   ClassId(row.at("predicted").get<std::string>()), row.at("probability").get<double>()});
  }
  return out;
}

ImageRecord fit_to_model(const ImageRecord& image, const ArchitectureConfig& arch) {
  const auto w = static_cast<int>(arch.width);
  const auto h = static_cast<int>(arch.height);
  if (image.width == w && image.height == h) return image;
  return resize_bilinear(image, w, h);
}

template <typename T>
Tensor<T> infer(const BasicModel<T>& model, std::span<const ImageRecord> images, std::size_t batch_size,
                int threads) {
  const std::size_t k = model.arch().num_classes;
  Tensor<T> out({images.size(), k});
  if (batch_size == 0) batch_size = 1;
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t end = std::min(images.size(), start + batch_size);
    std::vector<ImageRecord> fitted;
    fitted.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) fitted.push_back(fit_to_model(images[i], model.arch()));
    const auto probs = model.forward(normalize_batch<T>(fitted, model.normalization()), threads);
    std::copy(probs.data(), probs.data() + probs.size(), out.data() + start * k);
  }
  return out;
}

template Tensor<float> infer<float>(const BasicModel<float>&, std::span<const ImageRecord>, std::size_t, int);
template Tensor<double> infer<double>(const BasicModel<double>&, std::span<const ImageRecord>, std::size_t,
                                      int);

Evaluation evaluate(const Model& model, const CorpusManifest& test, const Taxonomy& taxonomy,
                    const EvalOptions& options) {
  if (model.class_names().empty()) throw ConfigError("evaluate: checkpoint has no class names");
  std::vector<ClassId> model_classes;
  for (const auto& name : model.class_names()) model_classes.emplace_back(name);

  auto roll = [&](const ClassId& c) {
    return options.rollup_depth ? rollup(c, *options.rollup_depth, taxonomy) : c;
  };
  std::set<ClassId> known;
  for (const auto& c : model_classes) known.insert(roll(c));
  std::set<ClassId> orphans;
  for (const auto& s : test.samples) {
    if (!known.contains(roll(s.cls))) orphans.insert(s.cls);
  }
  if (!orphans.empty()) {
    std::string list;
    for (const auto& o : orphans) list += (list.empty() ? "" : ", ") + o.path();
    throw LookupError("evaluate: classes missing from the checkpoint: " + list);
  }

  std::vector<ImageRecord> images(test.samples.size());
  parallel_for(test.samples.size(), options.threads, [&](std::size_t i) {
    images[i] = fit_to_model(load_image(test.root, test.samples[i]), model.arch());
  });
  const auto probs = infer(model, images, options.batch_size, options.threads);
  const std::size_t k = model_classes.size();

  Evaluation result;
  std::vector<ClassId> truths, preds;
  for (std::size_t i = 0; i < test.samples.size(); ++i) {
    const std::span<const float> row(probs.data() + i * k, k);
    const auto best = argmax(row);
    result.predictions.push_back({test.samples[i].path, test.samples[i].cls, model_classes[best], row[best]});
    truths.push_back(test.samples[i].cls);
    preds.push_back(model_classes[best]);
  }

  auto leaf_classes = model_classes;
  for (const auto& t : truths) {
    if (std::find(leaf_classes.begin(), leaf_classes.end(), t) == leaf_classes.end()) leaf_classes.push_back(t);
  }
  const auto leaf_cm = confusion_matrix(truths, preds, leaf_classes);

  auto& report = result.report;
  report.samples = test.samples.size();
  report.split = options.split;
  report.excluded = options.excluded;
  for (std::size_t c = 0; c < leaf_cm.size(); ++c) {
    if (leaf_cm.support(c) == 0) report.excluded.try_emplace(leaf_cm.classes()[c], "no_test_support");
  }
  report.leaf = summarize(leaf_cm, options.excluded);

  if (options.rollup_depth) {
    report.rollup_depth = options.rollup_depth;
    std::vector<ClassId> rolled_truths, rolled_preds;
    std::set<ClassId> rolled_set;
    for (const auto& c : leaf_classes) rolled_set.insert(roll(c));
    for (std::size_t i = 0; i < truths.size(); ++i) {
      rolled_truths.push_back(roll(truths[i]));
      rolled_preds.push_back(roll(preds[i]));
    }
    // A rolled class is excluded when every leaf mapping onto it is.
    Exclusions rolled_excluded;
    for (const auto& r : rolled_set) {
      bool all = true;
      std::string reason;
      for (const auto& c : leaf_classes) {
        if (roll(c) != r) continue;
        const auto it = options.excluded.find(c);
        if (it == options.excluded.end()) {
          all = false;
        } else {
          reason = it->second;
        }
      }
      if (all) rolled_excluded[r] = reason;
    }
    report.rolled = summarize(
        confusion_matrix(rolled_truths, rolled_preds, {rolled_set.begin(), rolled_set.end()}), rolled_excluded);
  }
  return result;
}

}  // namespace neoc
