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

#include "neoc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <utility>

#include "neoc/error.hpp"
#include "neoc/eval.hpp"
#include "neoc/gradcheck.hpp"
#include "neoc/taxonomy.hpp"

namespace fs = std::filesystem;

namespace neoc::cli {

namespace {

Json curation_to_json(const CurationRules& rules) {
  Json keep = Json::array();
  for (auto d : rules.keep) keep.push_back(std::string(to_string(d)));
  return {{"fill", {rules.fill.r, rules.fill.g, rules.fill.b}},
          {"keep", keep},
          {"split_multi_object", rules.split_multi_object}};
}

CurationRules curation_from_json(const Json& j) {
  CurationRules rules;
  const auto fill = j.at("fill").get<std::vector<int>>();
  if (fill.size() != 3 || std::any_of(fill.begin(), fill.end(), [](int v) { return v < 0 || v > 255; })) {
    throw ConfigError("curation.fill must be [r, g, b] with channels in [0, 255]");
  }
  rules.fill = {static_cast<std::uint8_t>(fill[0]), static_cast<std::uint8_t>(fill[1]),
                static_cast<std::uint8_t>(fill[2])};
  rules.keep.clear();
  for (const auto& d : j.at("keep")) rules.keep.insert(parse_depiction(d.get<std::string>()));
  rules.split_multi_object = j.at("split_multi_object").get<bool>();
  return rules;
}

Json split_to_json(const SplitParams& p) {
  return {{"test_ratio", p.test_ratio}, {"seed", p.seed}, {"group_by_artifact", p.group_by_artifact}};
}

SplitParams split_from_json(const Json& j) {
  SplitParams p;
  p.test_ratio = j.at("test_ratio").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.group_by_artifact = j.at("group_by_artifact").get<bool>();
  return p;
}

std::string path_string(const fs::path& p) { return p.generic_string(); }

void collect_keys(const Json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const auto name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      collect_keys(value, name, out);
    } else {
      out.push_back(name);
    }
  }
}

std::string valid_keys(const Json& defaults) {
  std::vector<std::string> keys;
  collect_keys(defaults, "", keys);
  std::string out;
  for (const auto& k : keys) out += (out.empty() ? "" : ", ") + k;
  return out;
}

void merge(Json& base, const Json& patch, const std::string& prefix, const Json& defaults) {
  for (const auto& [key, value] : patch.items()) {
    const auto name = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) {
      throw UsageError("unknown config key '" + name + "'; valid keys: " + valid_keys(defaults));
    }
    if (base[key].is_object() && value.is_object()) {
      merge(base[key], value, name, defaults);
    } else {
      base[key] = value;
    }
  }
}

Json parse_value(const std::string& text) {
  auto v = Json::parse(text, nullptr, false);
  return v.is_discarded() ? Json(text) : v;
}

std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + arg + "'");
    auto body = arg.substr(2);
    if (body.find('=') == std::string::npos) {
      if (i + 1 >= extras.size() || extras[i + 1].rfind("--", 0) == 0) {
        throw UsageError("override '" + arg + "' needs a value (--key=value)");
      }
      body += "=" + extras[++i];
    }
    out.push_back(body);
  }
  return out;
}

class Logger {
 public:
  Logger(const fs::path& path, std::ostream& err, bool quiet) : file_(path), err_(err), quiet_(quiet) {
    if (!file_) throw Error("cannot open log " + path.string());
  }

  void operator()(const std::string& line) {
    file_ << line << '\n';
    file_.flush();
    if (!quiet_) err_ << line << '\n';
  }

 private:
  std::ofstream file_;
  std::ostream& err_;
  bool quiet_;
};

struct Context {
  const PipelineConfig& config;
  Logger& log;
  std::ostream& out;
  bool quiet;

  fs::path output(const std::string& name) const { return config.output_dir / name; }
};

void require_file(const fs::path& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string("config key '") + key + "' is required");
  if (!fs::is_regular_file(path)) {
    throw ConfigError(std::string(key) + ": no such file " + path.string());
  }
}

void require_dir(const fs::path& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string("config key '") + key + "' is required");
  if (!fs::is_directory(path)) throw ConfigError(std::string(key) + ": no such directory " + path.string());
}

// Manifests without a declared corpus root resolve against their own directory.
fs::path root_for(const PipelineConfig& config, const fs::path& manifest) {
  return config.corpus_root.empty() ? manifest.parent_path() : config.corpus_root;
}

CorpusManifest load_manifest(const PipelineConfig& config, const fs::path& path, const char* key) {
  require_file(path, key);
  const auto root = root_for(config, path);
  require_dir(root.empty() ? fs::path(".") : root, "corpus_root");
  return read_manifest(path, root);
}

// Outputs never land in a directory that holds inputs.
void guard_output(const std::string& name, const PipelineConfig& config) {
  std::vector<fs::path> roots{config.corpus_root};
  if (name == "curate" || name == "ingest") roots.push_back(root_for(config, config.manifest));
  for (const auto& root : roots) {
    std::error_code ec;
    if (!root.empty() && fs::exists(root) && fs::exists(config.output_dir) &&
        fs::equivalent(root, config.output_dir, ec)) {
      throw ConfigError("output_dir must differ from the corpus root " + root.string());
    }
  }
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

EpochCallback epoch_logger(Logger& log) {
  return [&log](const EpochRecord& e) {
    std::string line = "epoch " + std::to_string(e.epoch) + " lr " + fixed(e.lr) + " loss " + fixed(e.train_loss) +
                       " train_acc " + fixed(e.train_accuracy);
    if (e.test_mean_class_accuracy) line += " test_mean_class_acc " + fixed(*e.test_mean_class_accuracy);
    log(line);
  };
}

Json history_summary(const TrainHistory& h) {
  const auto& last = h.epochs.back();
  Json j{{"epochs_run", h.epochs.size()},
         {"final_train_loss", last.train_loss},
         {"final_train_accuracy", last.train_accuracy},
         {"final_test_mean_class_accuracy", nullptr}};
  if (last.test_mean_class_accuracy) j["final_test_mean_class_accuracy"] = *last.test_mean_class_accuracy;
  return j;
}

Json cmd_ingest(const Context& ctx) {
  const auto& root = ctx.config.corpus_root;
  require_dir(root, "corpus_root");
  const auto taxonomy = load_taxonomy_from_folders(root);
  const auto manifest = ingest_folders(taxonomy);
  manifest.validate(taxonomy);
  write_manifest(ctx.output("manifest.jsonl"), manifest);
  write_json(ctx.output("taxonomy.json"), taxonomy.to_json());
  ctx.log("ingested " + std::to_string(manifest.samples.size()) + " samples in " +
          std::to_string(manifest.classes().size()) + " classes");
  return {{"manifest", path_string(ctx.output("manifest.jsonl"))},
          {"taxonomy", path_string(ctx.output("taxonomy.json"))},
          {"corpus_root", path_string(root)},
          {"samples", manifest.samples.size()},
          {"classes", manifest.classes().size()}};
}

Json cmd_synth(const Context& ctx) {
  const auto manifest = generate_synthetic_corpus(ctx.config.synth, ctx.config.synth_seed, ctx.config.output_dir);
  write_manifest(ctx.output("manifest.jsonl"), manifest);
  ctx.log("rendered " + std::to_string(manifest.samples.size()) + " images");
  return {{"manifest", path_string(ctx.output("manifest.jsonl"))},
          {"corpus_root", path_string(ctx.config.output_dir)},
          {"samples", manifest.samples.size()}};
}

Json cmd_curate(const Context& ctx) {
  const auto manifest = load_manifest(ctx.config, ctx.config.manifest, "manifest");
  const auto result = curate(manifest, ctx.config.curation, ctx.config.threads);
  const auto kept = materialize(result.kept, manifest.root, ctx.config.output_dir);
  write_manifest(ctx.output("manifest.jsonl"), kept);
  write_exclusions(ctx.output("exclusions.jsonl"), result.excluded);
  std::map<std::string, std::size_t> reasons;
  for (const auto& e : result.excluded) ++reasons[e.reason];
  ctx.log("kept " + std::to_string(kept.samples.size()) + " samples, excluded " +
          std::to_string(result.excluded.size()));
  return {{"manifest", path_string(ctx.output("manifest.jsonl"))},
          {"exclusions", path_string(ctx.output("exclusions.jsonl"))},
          {"corpus_root", path_string(ctx.config.output_dir)},
          {"kept", kept.samples.size()},
          {"excluded", result.excluded.size()},
          {"excluded_by_reason", reasons}};
}

Json cmd_split(const Context& ctx) {
  const auto manifest = load_manifest(ctx.config, ctx.config.manifest, "manifest");
  const auto result = stratified_split(manifest, ctx.config.split);
  write_manifest(ctx.output("train.jsonl"), result.train);
  write_manifest(ctx.output("test.jsonl"), result.test);
  write_non_computable(ctx.output("non_computable.jsonl"), result);
  write_json(ctx.output("split.json"), split_to_json(ctx.config.split));
  Json nc = Json::array();
  for (const auto& c : result.non_computable) {
    nc.push_back({{"class", c.cls.path()}, {"reason", c.reason}});
    ctx.log("non-computable class " + c.cls.path() + " (" + c.reason + ")");
  }
  ctx.log("train " + std::to_string(result.train.samples.size()) + ", test " +
          std::to_string(result.test.samples.size()));
  return {{"train_manifest", path_string(ctx.output("train.jsonl"))},
          {"test_manifest", path_string(ctx.output("test.jsonl"))},
          {"non_computable", path_string(ctx.output("non_computable.jsonl"))},
          {"corpus_root", path_string(manifest.root)},
          {"train", result.train.samples.size()},
          {"test", result.test.samples.size()},
          {"non_computable_classes", nc},
          {"group_by_artifact", ctx.config.split.group_by_artifact}};
}

std::optional<CorpusManifest> optional_test(const PipelineConfig& config) {
  if (config.test_manifest.empty()) return std::nullopt;
  return load_manifest(config, config.test_manifest, "test_manifest");
}

Json finish_training(const Context& ctx, const TrainResult& result) {
  save_checkpoint(result.model, ctx.output("model.ckpt"));
  write_file(ctx.output("history.csv"), result.history.to_csv());
  Json j = history_summary(result.history);
  j["checkpoint"] = path_string(ctx.output("model.ckpt"));
  j["checkpoint_hash"] = checkpoint_hash(result.model);
  j["history"] = path_string(ctx.output("history.csv"));
  j["classes"] = result.model.class_names();
  ctx.log("wrote checkpoint " + j["checkpoint_hash"].get<std::string>());
  return j;
}

Json cmd_pretrain(const Context& ctx) {
  const auto train_set = load_manifest(ctx.config, ctx.config.train_manifest, "train_manifest");
  const auto test_set = optional_test(ctx.config);
  auto arch = ctx.config.arch;
  arch.num_classes = train_set.classes().size();
  ctx.log("training " + std::to_string(arch.num_classes) + " classes on " +
          std::to_string(train_set.samples.size()) + " samples");
  const auto result = train(Model(arch, ctx.config.train.seed), train_set, ctx.config.train,
                            test_set ? &*test_set : nullptr, epoch_logger(ctx.log));
  return finish_training(ctx, result);
}

Json cmd_finetune(const Context& ctx) {
  require_file(ctx.config.checkpoint, "checkpoint");
  const auto pretrained = load_checkpoint(ctx.config.checkpoint);
  const auto train_set = load_manifest(ctx.config, ctx.config.train_manifest, "train_manifest");
  const auto test_set = optional_test(ctx.config);
  ctx.log("fine-tuning " + checkpoint_hash(pretrained) + " on " + std::to_string(train_set.samples.size()) +
          " samples");
  const auto result = finetune(pretrained, train_set, ctx.config.train, test_set ? &*test_set : nullptr,
                               epoch_logger(ctx.log));
  auto j = finish_training(ctx, result);
  j["lineage"] = result.model.lineage();
  return j;
}

Exclusions read_exclusions(const fs::path& path) {
  Exclusions out;
  for (const auto& row : read_jsonl(path)) {
    try {
      out[ClassId(row.at("class").get<std::string>())] = row.at("reason").get<std::string>();
    } catch (const Json::exception& e) {
      throw FormatError(FormatError::Kind::kMalformed, path.string() + ": " + e.what());
    }
  }
  return out;
}

Json cmd_eval(const Context& ctx) {
  require_file(ctx.config.checkpoint, "checkpoint");
  const auto model = load_checkpoint(ctx.config.checkpoint);
  const bool has_test = !ctx.config.test_manifest.empty();
  const auto test = load_manifest(ctx.config, has_test ? ctx.config.test_manifest : ctx.config.manifest,
                                  has_test ? "test_manifest" : "manifest");
  Taxonomy taxonomy;
  if (!ctx.config.taxonomy.empty()) {
    require_file(ctx.config.taxonomy, "taxonomy");
    taxonomy = Taxonomy::from_json(read_json(ctx.config.taxonomy));
  } else {
    std::set<ClassId> classes;
    for (const auto& c : test.classes()) classes.insert(c);
    for (const auto& n : model.class_names()) classes.insert(ClassId(n));
    const std::vector<ClassId> all(classes.begin(), classes.end());
    taxonomy = taxonomy_from_classes(all);
  }
  EvalOptions options;
  options.rollup_depth = ctx.config.eval.rollup_depth;
  options.batch_size = ctx.config.eval.batch_size;
  options.threads = ctx.config.threads;
  if (!ctx.config.non_computable.empty()) {
    require_file(ctx.config.non_computable, "non_computable");
    options.excluded = read_exclusions(ctx.config.non_computable);
    const auto params = ctx.config.non_computable.parent_path() / "split.json";
    options.split = fs::is_regular_file(params) ? split_from_json(read_json(params)) : ctx.config.split;
  }
  const auto evaluation = evaluate(model, test, taxonomy, options);
  write_json(ctx.output("metrics.json"), to_json(evaluation.report));
  write_predictions(ctx.output("predictions.jsonl"), evaluation.predictions);
  const auto table = render_table(evaluation.report);
  write_file(ctx.output("report.txt"), table);
  const auto& leaf = evaluation.report.leaf;
  ctx.log("mean_class_accuracy " + fixed(leaf.mean_class_accuracy) + " macro_f1 " + fixed(leaf.macro_f1) +
          " overall_accuracy " + fixed(leaf.overall_accuracy));
  return {{"metrics", path_string(ctx.output("metrics.json"))},
          {"predictions", path_string(ctx.output("predictions.jsonl"))},
          {"report", path_string(ctx.output("report.txt"))},
          {"mean_class_accuracy", leaf.mean_class_accuracy},
          {"macro_f1", leaf.macro_f1},
          {"overall_accuracy", leaf.overall_accuracy},
          {"samples", evaluation.report.samples}};
}

Json cmd_detect(const Context& ctx) {
  require_file(ctx.config.checkpoint, "checkpoint");
  const auto model = load_checkpoint(ctx.config.checkpoint);
  const auto manifest = load_manifest(ctx.config, ctx.config.manifest, "manifest");
  std::vector<Json> rows;
  std::vector<std::vector<Detection>> found;
  std::vector<std::vector<Box>> truth;
  std::size_t total = 0;
  for (const auto& s : manifest.samples) {
    const auto image = load_image(manifest.root, s);
    std::vector<std::string> warnings;
    auto dets = detect(model, image, ctx.config.detect, ctx.config.threads, &warnings);
    for (const auto& w : warnings) ctx.log("warning: " + s.path + ": " + w);
    total += dets.size();
    rows.push_back(detections_to_json(s.path, dets));
    found.push_back(std::move(dets));
    truth.push_back(s.boxes);
  }
  write_jsonl(ctx.output("detections.jsonl"), rows);
  ctx.log("detected " + std::to_string(total) + " regions in " + std::to_string(rows.size()) + " images");
  Json result{{"detections", path_string(ctx.output("detections.jsonl"))},
              {"images", rows.size()},
              {"regions", total},
              {"metrics", nullptr}};
  const bool annotated =
      std::any_of(truth.begin(), truth.end(), [](const std::vector<Box>& b) { return !b.empty(); });
  if (annotated) {
    const auto metrics = evaluate_detections(found, truth, ctx.config.eval.match_iou);
    write_json(ctx.output("detection_metrics.json"), detection_metrics_to_json(metrics));
    ctx.log("recall " + fixed(metrics.overall.recall) + " precision " + fixed(metrics.overall.precision));
    result["metrics"] = path_string(ctx.output("detection_metrics.json"));
    result["recall"] = metrics.overall.recall;
    result["precision"] = metrics.overall.precision;
  }
  return result;
}

Json cmd_gradcheck(const Context& ctx) {
  const auto& settings = ctx.config.gradcheck;
  if (settings.seeds < 1) throw ConfigError("gradcheck.seeds must be >= 1");
  const auto results = run_layer_grad_checks(settings.seeds);
  Json rows = Json::array();
  double worst = 0.0;
  for (const auto& r : results) {
    rows.push_back({{"layer", r.layer}, {"wrt", r.wrt}, {"seed", r.seed}, {"max_rel_error", r.max_rel_error}});
    worst = std::max(worst, r.max_rel_error);
  }
  write_json(ctx.output("gradcheck.json"), {{"checks", rows}, {"max_rel_error", worst}});
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu checks, max relative error %.3e", results.size(), worst);
  ctx.log(buf);
  if (!(worst < settings.tolerance)) {
    std::snprintf(buf, sizeof buf, "gradcheck: max relative error %.3e exceeds tolerance %.1e", worst,
                  settings.tolerance);
    throw NumericError(buf);
  }
  return {{"checks", results.size()}, {"max_rel_error", worst}, {"gradcheck", path_string(ctx.output("gradcheck.json"))}};
}

Json cmd_report(const Context& ctx) {
  require_file(ctx.config.report, "report");
  const auto report = report_from_json(read_json(ctx.config.report));
  const auto table = render_table(report);
  write_file(ctx.output("report.txt"), table);
  if (!ctx.quiet) ctx.out << table;
  return {{"report", path_string(ctx.output("report.txt"))}, {"excluded_classes", report.excluded.size()}};
}

using Command = Json (*)(const Context&);

const std::vector<std::pair<std::string, std::pair<Command, const char*>>>& command_table() {
  static const std::vector<std::pair<std::string, std::pair<Command, const char*>>> table{
      {"ingest", {cmd_ingest, "Build a manifest and taxonomy from a class-folder corpus"}},
      {"synth", {cmd_synth, "Render the synthetic glyph corpus"}},
      {"curate", {cmd_curate, "Exclude depictions, split multi-object images and mask neighbours"}},
      {"split", {cmd_split, "Stratified train/test split with non-computable classes"}},
      {"pretrain", {cmd_pretrain, "Train a classifier from scratch"}},
      {"finetune", {cmd_finetune, "Re-head a checkpoint and train it on a target corpus"}},
      {"eval", {cmd_eval, "Evaluate a checkpoint on a manifest"}},
      {"detect", {cmd_detect, "Sliding-window detection with NMS"}},
      {"gradcheck", {cmd_gradcheck, "Finite-difference check of every layer"}},
      {"report", {cmd_report, "Render a metrics file as a table"}},
  };
  return table;
}

std::optional<int> env_threads() {
  const char* v = std::getenv("NEOC_THREADS");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used == std::string(v).size() && n >= 1) return n;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string("NEOC_THREADS must be a positive integer, got '") + v + "'");
}

}  // namespace

Json to_json(const PipelineConfig& c) {
  Json eval{{"rollup_depth", c.eval.rollup_depth ? Json(*c.eval.rollup_depth) : Json(nullptr)},
            {"batch_size", c.eval.batch_size},
            {"match_iou", c.eval.match_iou}};
  return {{"corpus_root", path_string(c.corpus_root)},
          {"manifest", path_string(c.manifest)},
          {"train_manifest", path_string(c.train_manifest)},
          {"test_manifest", path_string(c.test_manifest)},
          {"checkpoint", path_string(c.checkpoint)},
          {"taxonomy", path_string(c.taxonomy)},
          {"non_computable", path_string(c.non_computable)},
          {"report", path_string(c.report)},
          {"output_dir", path_string(c.output_dir)},
          {"threads", c.threads},
          {"synth_seed", c.synth_seed},
          {"synth", Json(c.synth)},
          {"curation", curation_to_json(c.curation)},
          {"split", split_to_json(c.split)},
          {"arch", Json(c.arch)},
          {"train", Json(c.train)},
          {"eval", eval},
          {"detect", Json(c.detect)},
          {"gradcheck", {{"seeds", c.gradcheck.seeds}, {"tolerance", c.gradcheck.tolerance}}}};
}

PipelineConfig config_from_json(const Json& j) {
  PipelineConfig c;
  try {
    c.corpus_root = j.at("corpus_root").get<std::string>();
    c.manifest = j.at("manifest").get<std::string>();
    c.train_manifest = j.at("train_manifest").get<std::string>();
    c.test_manifest = j.at("test_manifest").get<std::string>();
    c.checkpoint = j.at("checkpoint").get<std::string>();
    c.taxonomy = j.at("taxonomy").get<std::string>();
    c.non_computable = j.at("non_computable").get<std::string>();
    c.report = j.at("report").get<std::string>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.threads = j.at("threads").get<int>();
    c.synth_seed = j.at("synth_seed").get<std::uint64_t>();
    c.synth = j.at("synth").get<SynthSpec>();
    c.curation = curation_from_json(j.at("curation"));
    c.split = split_from_json(j.at("split"));
    c.arch = j.at("arch").get<ArchitectureConfig>();
    c.train = j.at("train").get<TrainConfig>();
    const auto& eval = j.at("eval");
    if (!eval.at("rollup_depth").is_null()) c.eval.rollup_depth = eval.at("rollup_depth").get<std::size_t>();
    c.eval.batch_size = eval.at("batch_size").get<std::size_t>();
    c.eval.match_iou = eval.at("match_iou").get<double>();
    c.detect = j.at("detect").get<DetectConfig>();
    c.gradcheck.seeds = j.at("gradcheck").at("seeds").get<int>();
    c.gradcheck.tolerance = j.at("gradcheck").at("tolerance").get<double>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
  if (c.threads < 1) throw ConfigError("config: threads must be >= 1");
  if (c.eval.batch_size < 1) throw ConfigError("config: eval.batch_size must be >= 1");
  c.train.validate();
  return c;
}

Json resolve_config(const Json& file, const std::vector<std::string>& overrides) {
  const Json defaults = to_json(PipelineConfig{});
  Json out = defaults;
  if (!file.is_null()) {
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    merge(out, file, "", defaults);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw UsageError("override '" + o + "' is not key=value");
    const auto key = o.substr(0, eq);
    Json* node = &out;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(part)) {
        throw UsageError("unknown config key '" + key + "'; valid keys: " + valid_keys(defaults));
      }
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = parse_value(o.substr(eq + 1));
  }
  return out;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, entry] : command_table()) out.push_back(name);
    return out;
  }();
  return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Whole-image and region classification pipeline", "neoc"};
  app.require_subcommand(1, 1);
  std::string config_path;
  int threads_flag = 0;
  bool quiet = false;
  for (const auto& [name, entry] : command_table()) {
    auto* sc = app.add_subcommand(name, entry.second);
    sc->allow_extras();
    sc->add_option("--config", config_path, "JSON config file");
    sc->add_option("--threads", threads_flag, "Worker threads (default NEOC_THREADS, then config)")
        ->check(CLI::PositiveNumber);
    sc->add_flag("--quiet", quiet, "Log to run.log only");
    sc->footer("Config keys can be overridden as --dotted.key=value.");
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kOk;
    std::string names;
    for (const auto& n : subcommands()) names += (names.empty() ? "" : " | ") + n;
    err << "valid subcommands: " << names << '\n';
    return kUsageError;
  }
  auto* sc = app.get_subcommands().front();
  const auto name = sc->get_name();

  PipelineConfig config;
  Json effective;
  try {
    Json file;
    if (!config_path.empty()) {
      if (!fs::is_regular_file(config_path)) throw UsageError("--config: no such file " + config_path);
      file = read_json(config_path);
    }
    effective = resolve_config(file, collect_overrides(sc->remaining()));
    if (threads_flag > 0) {
      effective["threads"] = threads_flag;
    } else if (const auto env = env_threads()) {
      effective["threads"] = *env;
    }
    effective["train"]["threads"] = effective["threads"];
    config = config_from_json(effective);
  } catch (const Error& e) {
    err << "neoc " << name << ": " << e.what() << '\n';
    return kUsageError;
  } catch (const Json::exception& e) {
    err << "neoc " << name << ": config: " << e.what() << '\n';
    return kUsageError;
  }

  const auto command = std::find_if(command_table().begin(), command_table().end(),
                                    [&](const auto& entry) { return entry.first == name; })
                           ->second.first;
  Json result{{"subcommand", name}};
  bool reported = false;
  try {
    guard_output(name, config);
    fs::create_directories(config.output_dir);
    write_json(config.output_dir / "config.json", effective);
    Logger log(config.output_dir / "run.log", err, quiet);
    log("neoc " + name + " -> " + path_string(config.output_dir));
    try {
      result["outputs"] = command(Context{config, log, out, quiet});
      result["status"] = "ok";
      write_json(config.output_dir / "result.json", result);
      log("done");
      return kOk;
    } catch (const std::exception& e) {
      log(std::string("error: ") + e.what());
      reported = !quiet;
      throw;
    }
  } catch (const std::exception& e) {
    result["status"] = "error";
    result["message"] = e.what();
    std::error_code ec;
    if (fs::is_directory(config.output_dir, ec)) {
      try {
        write_json(config.output_dir / "result.json", result);
      } catch (const std::exception&) {
      }
    }
    if (!reported) err << "neoc " << name << ": " << e.what() << '\n';
    return kDomainError;
  }
}

}  // namespace neoc::cli
