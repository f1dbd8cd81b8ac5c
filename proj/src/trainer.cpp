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

#include "neoc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "neoc/error.hpp"
#include "neoc/eval.hpp"
#include "neoc/parallel.hpp"
#include "neoc/rng.hpp"

namespace neoc {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must lie in (0, 1]");
  if (threads < 1) throw ConfigError("train: threads must be >= 1");
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"seed", c.seed},
           {"freeze_blocks_epochs", c.freeze_blocks_epochs},
           {"lr_decay", c.lr_decay},
           {"precision", c.precision == Precision::kFloat64 ? "float64" : "float32"},
           {"patience", c.patience},
           {"threads", c.threads}};
}

void from_json(const Json& j, TrainConfig& c) {
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") {
        c.epochs = value.get<std::size_t>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "lr") {
        c.lr = value.get<double>();
      } else if (key == "momentum") {
        c.momentum = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "freeze_blocks_epochs") {
        c.freeze_blocks_epochs = value.get<std::size_t>();
      } else if (key == "lr_decay") {
        c.lr_decay = value.get<double>();
      } else if (key == "precision") {
        const auto p = value.get<std::string>();
        if (p == "float32") {
          c.precision = Precision::kFloat32;
        } else if (p == "float64") {
          c.precision = Precision::kFloat64;
        } else {
          throw ConfigError("train: precision must be float32 or float64");
        }
      } else if (key == "patience") {
        c.patience = value.get<std::size_t>();
      } else if (key == "threads") {
        c.threads = value.get<int>();
      } else {
        throw ConfigError("train: unknown key " + key);
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,train_acc,test_mean_class_acc\n";
  char buf[128];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,", e.epoch, e.train_loss, e.train_accuracy);
    out += buf;
    if (e.test_mean_class_accuracy) {
      std::snprintf(buf, sizeof buf, "%.6f", *e.test_mean_class_accuracy);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::vector<std::string> class_names_of(const CorpusManifest& manifest) {
  std::vector<std::string> out;
  for (const auto& c : manifest.classes()) out.push_back(c.path());
  return out;
}

Dataset load_dataset(const CorpusManifest& manifest, const std::vector<std::string>& class_names,
                     const ArchitectureConfig& arch, int threads) {
  Dataset d;
  d.class_names = class_names;
  d.labels.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) {
    const auto it = std::find(class_names.begin(), class_names.end(), s.cls.path());
    if (it == class_names.end()) {
      throw LookupError("sample " + s.path + ": class '" + s.cls.path() + "' unknown to the model");
    }
    d.labels.push_back(static_cast<std::size_t>(it - class_names.begin()));
  }
  d.images.resize(manifest.samples.size());
  parallel_for(manifest.samples.size(), threads, [&](std::size_t i) {
    d.images[i] = fit_to_model(load_image(manifest.root, manifest.samples[i]), arch);
  });
  return d;
}

namespace {

template <typename T>
double test_mean_class_accuracy(const BasicModel<T>& model, const Dataset& test, int threads) {
  const auto probs = infer(model, test.images, 64, threads);
  const std::size_t k = model.arch().num_classes;
  std::vector<ClassId> classes;
  for (const auto& n : test.class_names) classes.emplace_back(n);
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < test.images.size(); ++i) {
    cm.add(test.labels[i], argmax(std::span<const T>(probs.data() + i * k, k)));
  }
  return mean_class_accuracy(cm);
}

}  // namespace

template <typename T>
TrainHistory train_loop(BasicModel<T>& model, const Dataset& train, const TrainConfig& config,
                        const Dataset* test, const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n = train.images.size();
  if (n == 0) throw ConfigError("train: empty training set");
  const std::size_t k = model.arch().num_classes;
  if (train.class_names.size() != k) {
    throw ConfigError("train: model has " + std::to_string(k) + " classes, data has " +
                      std::to_string(train.class_names.size()));
  }
  const auto data = normalize_batch<T>(train.images, model.normalization());
  const std::size_t stride = data.size() / n;
  const Shape& shape = data.shape();

  // Optimizer state starts empty, as it does for a model loaded from disk.
  for (auto* p : model.parameters()) {
    p->velocity.fill(T{0});
    p->grad.fill(T{0});
  }

  TrainHistory history;
  double best = -1.0;
  std::size_t stale = 0;
  typename BasicModel<T>::Trace trace;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr * std::pow(config.lr_decay, static_cast<double>(epoch));
    const bool frozen = epoch < config.freeze_blocks_epochs;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(derive_seed(config.seed, epoch)).shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, batch = 0; start < n; start += config.batch_size, ++batch) {
      const std::size_t bs = std::min(config.batch_size, n - start);
      Tensor<T> x({bs, shape[1], shape[2], shape[3]});
      std::vector<std::size_t> labels(bs);
      for (std::size_t b = 0; b < bs; ++b) {
        const std::size_t idx = order[start + b];
        std::copy(data.data() + idx * stride, data.data() + (idx + 1) * stride, x.data() + b * stride);
        labels[b] = train.labels[idx];
      }
      const auto logits = model.forward_train(x, trace, config.threads);
      auto lg = softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
      if (!std::isfinite(lg.loss)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "non-finite loss at epoch %zu, batch %zu, lr %g", epoch + 1, batch, lr);
        throw NumericError(buf);
      }
      for (std::size_t b = 0; b < bs; ++b) {
        correct += argmax(std::span<const T>(logits.data() + b * k, k)) == labels[b];
      }
      loss_sum += lg.loss * static_cast<double>(bs);
      model.backward(trace, lg.grad, frozen, config.threads);
      auto params = frozen ? model.head_parameters() : model.parameters();
      sgd_momentum_step(std::span<Parameter<T>* const>(params), lr, config.momentum);
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.lr = lr;
    record.train_loss = loss_sum / static_cast<double>(n);
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (test && !test->images.empty()) {
      record.test_mean_class_accuracy = test_mean_class_accuracy(model, *test, config.threads);
    }
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (config.patience > 0) {
      const double score =
          record.test_mean_class_accuracy ? *record.test_mean_class_accuracy : -record.train_loss;
      if (score > best) {
        best = score;
        stale = 0;
      } else if (++stale >= config.patience) {
        break;
      }
    }
  }
  return history;
}

template TrainHistory train_loop<float>(BasicModel<float>&, const Dataset&, const TrainConfig&,
                                        const Dataset*, const EpochCallback&);
template TrainHistory train_loop<double>(BasicModel<double>&, const Dataset&, const TrainConfig&,
                                         const Dataset*, const EpochCallback&);

TrainResult train(Model model, const CorpusManifest& train_set, const TrainConfig& config,
                  const CorpusManifest* test_set, const EpochCallback& on_epoch) {
  config.validate();
  const auto names = class_names_of(train_set);
  if (names.size() != model.arch().num_classes) {
    throw ConfigError("train: model has " + std::to_string(model.arch().num_classes) +
                      " classes but the training manifest has " + std::to_string(names.size()));
  }
  model.set_class_names(names);
  const auto data = load_dataset(train_set, names, model.arch(), config.threads);
  model.set_normalization(compute_normalization(data.images));
  std::optional<Dataset> test;
  if (test_set) test = load_dataset(*test_set, names, model.arch(), config.threads);
  const Dataset* test_ptr = test ? &*test : nullptr;

  if (config.precision == Precision::kFloat64) {
    auto wide = model.cast<double>();
    auto history = train_loop(wide, data, config, test_ptr, on_epoch);
    return {wide.cast<float>(), std::move(history)};
  }
  auto history = train_loop(model, data, config, test_ptr, on_epoch);
  return {std::move(model), std::move(history)};
}

std::string checkpoint_hash(const Model& model) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize_checkpoint(model))));
  return buf;
}

TrainResult finetune(const Model& pretrained, const CorpusManifest& target, const TrainConfig& config,
                     const CorpusManifest* test_set, const EpochCallback& on_epoch) {
  Model model = pretrained;
  model.reinit_head(class_names_of(target).size(), config.seed);
  model.set_lineage(checkpoint_hash(pretrained));
  return train(std::move(model), target, config, test_set, on_epoch);
}

}  // namespace neoc
