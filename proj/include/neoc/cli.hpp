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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neoc/corpus.hpp"
#include "neoc/detect.hpp"
#include "neoc/error.hpp"
#include "neoc/json.hpp"
#include "neoc/model.hpp"
#include "neoc/synth.hpp"
#include "neoc/trainer.hpp"

namespace neoc::cli {

/// Exit codes of run().
inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kUsageError = 2;

/// Raised for an unknown subcommand, flag or config key.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct EvalSettings {
  std::optional<std::size_t> rollup_depth;
  std::size_t batch_size = 64;
  /// IoU a detection needs to match a ground-truth box.
  double match_iou = 0.5;
};

struct GradcheckSettings {
  int seeds = 20;
  double tolerance = 1e-5;
};

/// Everything a subcommand reads. Manifest paths are resolved against
/// `corpus_root`; outputs go to `output_dir`.
struct PipelineConfig {
  std::filesystem::path corpus_root;
  std::filesystem::path manifest;
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path checkpoint;
  /// Taxonomy JSON for evaluation; derived from the class paths when empty.
  std::filesystem::path taxonomy;
  /// non_computable.jsonl of a split; its classes are excluded from means.
  std::filesystem::path non_computable;
  /// metrics.json rendered by `report`.
  std::filesystem::path report;
  std::filesystem::path output_dir = "out";
  int threads = 1;
  std::uint64_t synth_seed = 42;
  SynthSpec synth;
  CurationRules curation;
  SplitParams split;
  ArchitectureConfig arch;
  TrainConfig train;
  EvalSettings eval;
  DetectConfig detect;
  GradcheckSettings gradcheck;
};

Json to_json(const PipelineConfig& config);
/// Expects every key of to_json(PipelineConfig{}); use resolve_config for
/// partial input.
PipelineConfig config_from_json(const Json& j);

/// Layers `file` and then each "dotted.key=value" override over the
/// defaults. Override values are parsed as JSON, falling back to a string.
/// Throws UsageError naming the valid keys when a key is unknown.
Json resolve_config(const Json& file, const std::vector<std::string>& overrides);

const std::vector<std::string>& subcommands();

/// Entry point of the `neoc` tool; `args` excludes the program name.
/// Returns kOk, kDomainError or kUsageError.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neoc::cli
