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

#include "neoc/model.hpp"

#include <bit>
#include <cstring>

#include "neoc/error.hpp"
#include "neoc/rng.hpp"

namespace neoc {

namespace {

constexpr std::string_view kMagic = "NEOC1";
constexpr std::uint64_t kDenseStream = 1000;
constexpr std::uint64_t kHeadStream = 0x4845414455ULL;
// Plain He init on the output layer yields logits spread wide enough to put
// >0.7 probability on one class before any training.
constexpr double kOutputInitScale = 0.1;

template <typename T>
Tensor<T> output_layer_init(const Shape& shape, std::uint64_t seed) {
  auto w = he_init<T>(shape, seed);
  for (auto& v : w.values()) v = static_cast<T>(v * kOutputInitScale);
  return w;
}

}  // namespace

void ArchitectureConfig::validate() const {
  if (channels == 0 || height == 0 || width == 0) {
    throw ConfigError("architecture: input size must be positive");
  }
  if (num_classes < 2) {
    throw ConfigError("architecture: num_classes must be >= 2, got " + std::to_string(num_classes));
  }
  const std::size_t factor = std::size_t{1} << blocks.size();
  if (height % factor != 0 || width % factor != 0) {
    throw ConfigError("architecture: input " + std::to_string(height) + "x" +
                      std::to_string(width) + " not divisible by 2^" +
                      std::to_string(blocks.size()) + " (one halving per block)");
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].conv_count == 0 || blocks[b].out_channels == 0) {
      throw ConfigError("architecture: block " + std::to_string(b) +
                        " needs positive conv_count and out_channels");
    }
  }
  for (auto width_i : head) {
    if (width_i == 0) throw ConfigError("architecture: head widths must be positive");
  }
}

void to_json(Json& j, const ArchitectureConfig& arch) {
  Json blocks = Json::array();
  for (const auto& b : arch.blocks) blocks.push_back({b.conv_count, b.out_channels});
  j = Json{{"input", {arch.channels, arch.height, arch.width}},
           {"blocks", blocks},
           {"head", arch.head},
           {"num_classes", arch.num_classes}};
}

void from_json(const Json& j, ArchitectureConfig& arch) {
  const auto& input = j.at("input");
  if (!input.is_array() || input.size() != 3) {
    throw ConfigError("architecture: 'input' must be [channels, height, width]");
  }
  arch.channels = input[0].get<std::size_t>();
  arch.height = input[1].get<std::size_t>();
  arch.width = input[2].get<std::size_t>();
  arch.blocks.clear();
  for (const auto& b : j.at("blocks")) {
    if (!b.is_array() || b.size() != 2) {
      throw ConfigError("architecture: each block must be [conv_count, out_channels]");
    }
    arch.blocks.push_back({b[0].get<std::size_t>(), b[1].get<std::size_t>()});
  }
  arch.head = j.at("head").get<std::vector<std::size_t>>();
  arch.num_classes = j.at("num_classes").get<std::size_t>();
}

void to_json(Json& j, const NormalizationStats& stats) {
  j = Json{{"mean", stats.mean}, {"std", stats.std}};
}

void from_json(const Json& j, NormalizationStats& stats) {
  stats.mean = j.at("mean").get<std::array<double, 3>>();
  stats.std = j.at("std").get<std::array<double, 3>>();
}

template <typename T>
BasicModel<T>::BasicModel(ArchitectureConfig arch, std::uint64_t seed) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t in_channels = arch_.channels;
  std::size_t conv_index = 0;
  for (const auto& block : arch_.blocks) {
    for (std::size_t i = 0; i < block.conv_count; ++i, ++conv_index) {
      const Shape shape{block.out_channels, in_channels, 3, 3};
      const auto tag = "conv" + std::to_string(conv_index);
      convs_.push_back({Parameter<T>(tag + ".weight", he_init<T>(shape, derive_seed(seed, conv_index))),
                        Parameter<T>(tag + ".bias", Tensor<T>({block.out_channels}))});
      in_channels = block.out_channels;
    }
  }
  const std::size_t factor = std::size_t{1} << arch_.blocks.size();
  std::size_t width = in_channels * (arch_.height / factor) * (arch_.width / factor);
  std::vector<std::size_t> widths = arch_.head;
  widths.push_back(arch_.num_classes);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Shape shape{width, widths[i]};
    const auto tag = "dense" + std::to_string(i);
    const auto layer_seed = derive_seed(seed, kDenseStream + i);
    auto weights = i + 1 == widths.size() ? output_layer_init<T>(shape, layer_seed)
                                          : he_init<T>(shape, layer_seed);
    dense_.push_back({Parameter<T>(tag + ".weight", std::move(weights)),
                      Parameter<T>(tag + ".bias", Tensor<T>({widths[i]}))});
    width = widths[i];
  }
}

template <typename T>
void BasicModel<T>::set_class_names(std::vector<std::string> names) {
  if (!names.empty() && names.size() != arch_.num_classes) {
    throw ConfigError("model has " + std::to_string(arch_.num_classes) + " outputs but " +
                      std::to_string(names.size()) + " class names were given");
  }
  class_names_ = std::move(names);
}

template <typename T>
void BasicModel<T>::check_batch(const Tensor<T>& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != arch_.channels || batch.dim(2) != arch_.height ||
      batch.dim(3) != arch_.width) {
    throw ShapeError("model expects [N," + std::to_string(arch_.channels) + "," +
                     std::to_string(arch_.height) + "," + std::to_string(arch_.width) +
                     "] input, got " + shape_string(batch.shape()));
  }
}

template <typename T>
Shape BasicModel<T>::flatten_source_shape(std::size_t batch) const {
  const std::size_t factor = std::size_t{1} << arch_.blocks.size();
  const std::size_t channels = arch_.blocks.empty() ? arch_.channels : arch_.blocks.back().out_channels;
  return {batch, channels, arch_.height / factor, arch_.width / factor};
}

template <typename T>
Tensor<T> BasicModel<T>::forward_train(const Tensor<T>& batch, Trace& trace, int threads) const {
  check_batch(batch);
  trace = Trace{};
  Tensor<T> x = batch;
  std::size_t conv_index = 0;
  for (const auto& block : arch_.blocks) {
    for (std::size_t i = 0; i < block.conv_count; ++i, ++conv_index) {
      const auto& layer = convs_[conv_index];
      auto z = conv2d(x, layer.weight.value, layer.bias.value, 1, 1, threads);
      trace.conv_inputs.push_back(std::move(x));
      x = relu(z);
      trace.conv_outputs.push_back(std::move(z));
    }
    auto pooled = maxpool2(x);
    trace.pool_inputs.push_back(std::move(x));
    x = std::move(pooled);
  }
  const std::size_t n = batch.dim(0);
  x = x.reshaped({n, x.size() / n});
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    auto z = dense(x, dense_[i].weight.value, dense_[i].bias.value);
    trace.dense_inputs.push_back(std::move(x));
    if (i + 1 == dense_.size()) {
      trace.dense_outputs.push_back(z);
      return z;
    }
    x = relu(z);
    trace.dense_outputs.push_back(std::move(z));
  }
  return x;  // unreachable: there is always an output layer
}

template <typename T>
void BasicModel<T>::backward(const Trace& trace, const Tensor<T>& grad_logits, bool body_frozen,
                             int threads) {
  Tensor<T> g = grad_logits;
  for (std::size_t i = dense_.size(); i-- > 0;) {
    if (i + 1 != dense_.size()) g = relu_backward(trace.dense_outputs[i], g);
    auto grads = dense_backward(trace.dense_inputs[i], dense_[i].weight.value, g);
    auto& w = dense_[i].weight.grad;
    auto& b = dense_[i].bias.grad;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += grads.weights[k];
    for (std::size_t k = 0; k < b.size(); ++k) b[k] += grads.bias[k];
    g = std::move(grads.input);
  }
  if (body_frozen) return;

  g = g.reshaped(flatten_source_shape(grad_logits.dim(0)));
  std::size_t conv_index = convs_.size();
  for (std::size_t b = arch_.blocks.size(); b-- > 0;) {
    g = maxpool2_backward(trace.pool_inputs[b], g);
    for (std::size_t i = 0; i < arch_.blocks[b].conv_count; ++i) {
      --conv_index;
      auto& layer = convs_[conv_index];
      g = relu_backward(trace.conv_outputs[conv_index], g);
      auto grads = conv2d_backward(trace.conv_inputs[conv_index], layer.weight.value, g, 1, 1,
                                   conv_index > 0, threads);
      for (std::size_t k = 0; k < layer.weight.grad.size(); ++k) layer.weight.grad[k] += grads.kernels[k];
      for (std::size_t k = 0; k < layer.bias.grad.size(); ++k) layer.bias.grad[k] += grads.bias[k];
      g = std::move(grads.input);
    }
  }
}

template <typename T>
Tensor<T> BasicModel<T>::logits(const Tensor<T>& batch, int threads) const {
  Trace trace;
  return forward_train(batch, trace, threads);
}

template <typename T>
Tensor<T> BasicModel<T>::forward(const Tensor<T>& batch, int threads) const {
  return softmax(logits(batch, threads));
}

template <typename T>
std::size_t argmax(std::span<const T> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

template <typename T>
std::vector<std::size_t> BasicModel<T>::predict(const Tensor<T>& batch, int threads) const {
  const auto probs = forward(batch, threads);
  const auto k = probs.dim(1);
  std::vector<std::size_t> out(probs.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = argmax(std::span<const T>(probs.data() + i * k, k));
  }
  return out;
}

template <typename T>
std::vector<Parameter<T>*> BasicModel<T>::parameters() {
  std::vector<Parameter<T>*> out = body_parameters();
  for (auto* p : head_parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> BasicModel<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& l : convs_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (const auto& l : dense_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

template <typename T>
std::vector<Parameter<T>*> BasicModel<T>::body_parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : convs_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

template <typename T>
std::vector<Parameter<T>*> BasicModel<T>::head_parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : dense_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto* p : parameters()) total += p->value.size();
  return total;
}

template <typename T>
void BasicModel<T>::reinit_head(std::size_t num_classes, std::uint64_t seed) {
  if (num_classes < 2) {
    throw ConfigError("reinit_head: num_classes must be >= 2, got " + std::to_string(num_classes));
  }
  auto& out = dense_.back();
  const std::size_t width = out.weight.value.dim(0);
  const auto tag = "dense" + std::to_string(dense_.size() - 1);
  out.weight = Parameter<T>(tag + ".weight",
                            output_layer_init<T>({width, num_classes}, derive_seed(seed, kHeadStream)));
  out.bias = Parameter<T>(tag + ".bias", Tensor<T>({num_classes}));
  arch_.num_classes = num_classes;
  class_names_.clear();
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
  BasicModel<U> out(arch_, 0);
  out.class_names_ = class_names_;
  out.normalization_ = normalization_;
  out.lineage_ = lineage_;
  auto convert = [](const Parameter<T>& p) {
    Parameter<U> q(p.name, p.value.template cast<U>());
    q.grad = p.grad.template cast<U>();
    q.velocity = p.velocity.template cast<U>();
    return q;
  };
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    out.convs_[i].weight = convert(convs_[i].weight);
    out.convs_[i].bias = convert(convs_[i].bias);
  }
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    out.dense_[i].weight = convert(dense_[i].weight);
    out.dense_[i].bias = convert(dense_[i].bias);
  }
  return out;
}

namespace {

void append_le_float(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>(bits & 0xFFu));
    bits >>= 8;
  }
}

float read_le_float(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<float>(bits);
}

}  // namespace

template <typename T>
std::string serialize_checkpoint(const BasicModel<T>& model) {
  const auto params = model.parameters();
  Json tensors = Json::array();
  std::size_t count = 0;
  for (const auto* p : params) {
    tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}});
    count += p->value.size();
  }
  Json header{{"arch", model.arch()},
              {"class_names", model.class_names()},
              {"normalization", model.normalization()},
              {"tensors", tensors},
              {"weights_bytes", count * 4}};
  if (!model.lineage().empty()) header["lineage"] = model.lineage();

  std::string out(kMagic);
  out += header.dump();
  out += '\n';
  out.reserve(out.size() + count * 4);
  for (const auto* p : params) {
    for (T v : p->value.values()) append_le_float(out, static_cast<float>(v));
  }
  return out;
}

Model parse_checkpoint(const std::string& bytes) {
  using Kind = FormatError::Kind;
  const auto prefix = std::string_view(bytes).substr(0, kMagic.size());
  if (prefix != kMagic.substr(0, prefix.size())) {
    throw FormatError(Kind::kBadMagic, "checkpoint: bad magic, expected \"NEOC1\"");
  }
  if (bytes.size() < kMagic.size()) throw FormatError(Kind::kTruncated, "checkpoint: truncated magic");
  const auto newline = bytes.find('\n', kMagic.size());
  if (newline == std::string::npos) throw FormatError(Kind::kTruncated, "checkpoint: truncated header");

  Json header;
  try {
    header = Json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(kMagic.size()),
                         bytes.begin() + static_cast<std::ptrdiff_t>(newline));
  } catch (const Json::parse_error& e) {
    throw FormatError(Kind::kMalformed, std::string("checkpoint: header is not JSON: ") + e.what());
  }

  try {
    Model model(header.at("arch").get<ArchitectureConfig>(), 0);
    model.set_normalization(header.at("normalization").get<NormalizationStats>());
    const auto names = header.at("class_names").get<std::vector<std::string>>();
    if (!names.empty() && names.size() != model.arch().num_classes) {
      throw FormatError(Kind::kShapeMismatch, "checkpoint: " + std::to_string(names.size()) +
                                                  " class names for " +
                                                  std::to_string(model.arch().num_classes) +
                                                  " outputs");
    }
    model.set_class_names(names);
    if (header.contains("lineage")) model.set_lineage(header.at("lineage").get<std::string>());

    auto params = model.parameters();
    const auto& tensors = header.at("tensors");
    const auto weights_bytes = header.at("weights_bytes").get<std::size_t>();
    const auto expected = model.parameter_count() * 4;
    if (weights_bytes != expected || tensors.size() != params.size()) {
      throw FormatError(Kind::kShapeMismatch, "checkpoint: header declares " +
                                                  std::to_string(weights_bytes) +
                                                  " weight bytes, architecture implies " +
                                                  std::to_string(expected));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (tensors[i].at("shape").get<Shape>() != params[i]->value.shape()) {
        throw FormatError(Kind::kShapeMismatch, "checkpoint: tensor '" + params[i]->name +
                                                    "' shape does not match architecture");
      }
    }
    const std::size_t blob = newline + 1;
    if (bytes.size() - blob < weights_bytes) {
      throw FormatError(Kind::kTruncated, "checkpoint: weight blob truncated (" +
                                              std::to_string(bytes.size() - blob) + " of " +
                                              std::to_string(weights_bytes) + " bytes)");
    }
    if (bytes.size() - blob > weights_bytes) {
      throw FormatError(Kind::kMalformed, "checkpoint: trailing bytes after weight blob");
    }
    const char* p = bytes.data() + blob;
    for (auto* param : params) {
      for (auto& v : param->value.values()) {
        v = read_le_float(p);
        p += 4;
      }
    }
    return model;
  } catch (const Json::exception& e) {
    throw FormatError(Kind::kMalformed, std::string("checkpoint: bad header field: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(Kind::kMalformed, std::string("checkpoint: ") + e.what());
  }
}

template <typename T>
void save_checkpoint(const BasicModel<T>& model, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

template class BasicModel<float>;
template class BasicModel<double>;
template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;
template BasicModel<float> BasicModel<float>::cast<float>() const;
template std::size_t argmax(std::span<const float>);
template std::size_t argmax(std::span<const double>);
template std::string serialize_checkpoint(const BasicModel<float>&);
template std::string serialize_checkpoint(const BasicModel<double>&);
template void save_checkpoint(const BasicModel<float>&, const std::filesystem::path&);
template void save_checkpoint(const BasicModel<double>&, const std::filesystem::path&);

}  // namespace neoc
