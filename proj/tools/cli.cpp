// Copyright 2026 The ftnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ftnet/checkpoint.hpp"
#include "ftnet/error.hpp"
#include "ftnet/metrics.hpp"

namespace ftnet::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void check_keys(const Json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError("config: '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw UsageError("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

std::string get_string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw UsageError("config: '" + where + "' must be a string");
  return j.get<std::string>();
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--ratios: '" + part + "' is not a number");
    }
  }
  if (v.size() != 3) throw UsageError("--ratios needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

const std::vector<std::size_t>& split_part(const SplitIndices& s, const std::string& part) {
  if (part == "train") return s.train;
  if (part == "val" || part == "validation") return s.validation;
  if (part == "test") return s.test;
  throw UsageError("--part must be train, val or test");
}

Dataset load_dataset(const fs::path& root, ChannelOrder order) {
  Dataset d = ingest_directory(root);
  d.source_order = order;
  return d;
}

// Writes metrics.json, confusion.csv and predictions.csv for one evaluation.
MetricsReport write_evaluation(const Evaluation& e, const std::vector<std::string>& class_names, const fs::path& dir,
                               bool timing) {
  auto report = make_report(e.predicted, e.actual, class_names.size(), class_names);
  if (timing) report.prediction_seconds = e.seconds;
  write_report(report, dir / "metrics.json");
  write_confusion_csv(report.confusion, dir / "confusion.csv");
  write_text(dir / "predictions.csv", predictions_csv(e.predicted, e.actual));
  return report;
}

std::vector<fs::path> expand_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::recursive_directory_iterator(p)) {
        if (entry.is_regular_file() && is_supported_image(entry.path()) &&
            entry.path().filename().string().front() != '.') {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw DataError("no such image: " + in);
    }
  }
  if (out.empty()) throw DataError("predict: no images found");
  return out;
}

Json resolved_config_json(const RunConfig& c) {
  Json data{{"root", c.root.string()}};
  if (!c.source_root.empty()) data["source_root"] = c.source_root.string();
  data["source_channel_order"] = to_string(c.source_channel_order);
  data["image_size"] = c.backbone.input_side;
  data["ratios"] = {c.ratios.train, c.ratios.validation, c.ratios.test};
  Json augment = c.train.augment ? to_json(*c.train.augment) : to_json(AugmentConfig{});
  augment["enabled"] = c.train.augment.has_value();
  return Json{{"data", data},
              {"backbone", to_json(c.backbone)},
              {"head", to_json(c.head)},
              {"train", to_json(c.train)},
              {"augment", augment},
              {"output", c.output.string()}};
}

struct Options {
  // shared
  std::string config, data, out, checkpoint, split, part = "test", channel_order = "rgb";
  std::optional<std::uint64_t> seed;
  std::size_t batch_size = 32, workers = 0;
  bool timing = false;
  // split
  std::string ratios = "0.8,0.1,0.1";
  // synth
  std::size_t classes = 4, count = 50, side = 64;
  double noise = 0.05;
  bool style = false;
  // predict / report
  std::vector<std::string> images;
  std::string predictions, class_list, confusion;
  std::size_t num_classes = 0;
};

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
  const auto d = ingest_directory(o.data);
  if (o.out.empty()) {
    out << manifest_csv(d);
  } else {
    write_manifest(d, o.out);
  }
  err << d.size() << " samples in " << d.num_classes() << " classes\n";
  return kExitOk;
}

int cmd_split(const Options& o, std::ostream&, std::ostream& err) {
  const auto d = ingest_directory(o.data);
  const auto s = stratified_split(d, parse_ratios(o.ratios), resolve_seed(o.seed, std::nullopt));
  write_split(s, o.out);
  err << "train " << s.train.size() << ", validation " << s.validation.size() << ", test " << s.test.size() << "\n";
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream&, std::ostream& err) {
  SynthOptions so;
  so.num_classes = o.classes;
  so.per_class = o.count;
  so.side = o.side;
  so.noise = o.noise;
  so.seed = resolve_seed(o.seed, std::nullopt);
  so.style = o.style;
  const auto d = synth_dataset(so);
  ensure_dir(o.out);
  write_dataset_dir(d, o.out);
  err << "wrote " << d.size() << " images to " << o.out << "\n";
  return kExitOk;
}

RunConfig config_for_run(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  RunConfig c = load_run_config(o.config);
  c.train.seed = resolve_seed(o.seed, c.config_seed);
  if (!o.out.empty()) c.output = o.out;
  if (c.output.empty()) throw UsageError("config: 'output' is required (or pass --out)");
  if (c.root.empty()) throw UsageError("config: 'data.root' is required");
  return c;
}

TransferConfig transfer_config(const RunConfig& c, const Dataset& target) {
  if (c.head_classes_set && c.head.num_classes != target.num_classes()) {
    throw UsageError("config: head.num_classes is " + std::to_string(c.head.num_classes) + " but the data has " +
                     std::to_string(target.num_classes()) + " classes");
  }
  TransferConfig t;
  t.backbone = c.backbone;
  t.head = c.head;
  t.pretrain = c.train;
  t.pretrain.policy = TrainablePolicy::all;
  t.finetune = c.train;
  t.ratios = c.ratios;
  return t;
}

// Saves, reloads and evaluates the test part, so the reported numbers come
// from the checkpoint on disk.
void finish_run(const Model& model, const Dataset& target, const SplitIndices& split, const RunConfig& c,
                bool timing, std::ostream& out) {
  save_checkpoint(model, c.output / "model.ckpt");
  write_split(split, c.output / "split.csv");
  const Model reloaded = load_checkpoint(c.output / "model.ckpt");
  const auto e = evaluate(reloaded, target, split.test, c.train.batch_size, c.train.workers);
  const auto r = write_evaluation(e, target.class_names, c.output, timing);
  char line[128];
  std::snprintf(line, sizeof line, "test accuracy %.2f%% on %lld samples\n", round2(r.accuracy_pct),
                static_cast<long long>(r.n));
  out << line;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream&) {
  const RunConfig c = config_for_run(o);
  const Dataset target = load_dataset(c.root, c.source_channel_order);
  const auto r = train_from_scratch(target, transfer_config(c, target));
  ensure_dir(c.output);
  write_text(c.output / "run_config.json", resolved_config_json(c).dump(2) + "\n");
  write_text(c.output / "train_log.csv", r.log.csv());
  finish_run(r.model, target, r.split, c, o.timing, out);
  return kExitOk;
}

int cmd_finetune(const Options& o, std::ostream& out, std::ostream&) {
  const RunConfig c = config_for_run(o);
  if (c.source_root.empty()) throw UsageError("config: 'data.source_root' is required for finetune");
  const Dataset source = load_dataset(c.source_root, c.source_channel_order);
  const Dataset target = load_dataset(c.root, c.source_channel_order);
  const auto r = pretrain_then_finetune(source, target, transfer_config(c, target));
  ensure_dir(c.output);
  write_text(c.output / "run_config.json", resolved_config_json(c).dump(2) + "\n");
  save_checkpoint(r.pretrained, c.output / "pretrained.ckpt");
  write_split(r.source_split, c.output / "source_split.csv");
  write_text(c.output / "pretrain_log.csv", r.pretrain_log.csv());
  write_text(c.output / "train_log.csv", r.finetune_log.csv());
  finish_run(r.model, target, r.target_split, c, o.timing, out);
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream&) {
  const Model m = load_checkpoint(o.checkpoint);
  if (!m.has_head) throw UsageError("evaluate: checkpoint has no classifier head");
  const Dataset d = load_dataset(o.data, parse_channel_order(o.channel_order));
  if (d.class_names != m.class_names) throw DataError("evaluate: dataset classes differ from the checkpoint's");
  const SplitIndices s = read_split(o.split);
  try {
    validate_split(s, d.size());
  } catch (const UsageError& e) {
    throw DataError(std::string("evaluate: split does not fit the dataset: ") + e.what());
  }
  const auto& idx = split_part(s, o.part);
  if (idx.empty()) throw DataError("evaluate: split part '" + o.part + "' is empty");
  const auto e = evaluate(m, d, idx, o.batch_size, o.workers);
  if (o.out.empty()) {
    auto r = make_report(e.predicted, e.actual, d.num_classes(), d.class_names);
    if (o.timing) r.prediction_seconds = e.seconds;
    out << report_text(r);
  } else {
    ensure_dir(o.out);
    write_evaluation(e, d.class_names, o.out, o.timing);
  }
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream&) {
  const Model m = load_checkpoint(o.checkpoint);
  if (!m.has_head) throw UsageError("predict: checkpoint has no classifier head");
  const auto paths = expand_images(o.images);
  const ChannelOrder order = parse_channel_order(o.channel_order);
  std::vector<ImageU8> images;
  for (const auto& p : paths) images.push_back(read_image(p, order));
  const auto pred = predict(m, images, PreprocessConfig{m.input_side(), order}, o.batch_size);

  std::string tsv = "path\tlabel\tclass\tconfidence\n";
  char buf[64];
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const int l = pred.labels[i];
    std::snprintf(buf, sizeof buf, "%.6f", pred.probabilities[i][static_cast<std::size_t>(l)]);
    tsv += paths[i].string() + "\t" + std::to_string(l) + "\t" + m.class_names.at(static_cast<std::size_t>(l)) +
           "\t" + buf + "\n";
  }
  if (o.out.empty()) {
    out << tsv;
  } else {
    write_text(o.out, tsv);
  }
  std::snprintf(buf, sizeof buf, "elapsed_seconds\t%.6f\n", pred.elapsed_seconds);
  out << buf;
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  const auto [predicted, actual] = parse_predictions_csv(read_text(o.predictions));
  std::vector<std::string> names;
  if (!o.class_list.empty()) {
    std::stringstream ss(o.class_list);
    std::string n;
    while (std::getline(ss, n, ',')) names.push_back(n);
  }
  int max_label = 0;
  for (auto v : predicted) max_label = std::max(max_label, v);
  for (auto v : actual) max_label = std::max(max_label, v);
  std::size_t k = !names.empty() ? names.size() : o.num_classes;
  if (k == 0) k = static_cast<std::size_t>(max_label) + 1;
  if (o.num_classes != 0 && !names.empty() && names.size() != o.num_classes) {
    throw UsageError("report: --classes and --num-classes disagree");
  }
  MetricsReport r;
  try {
    r = make_report(predicted, actual, k, names);
  } catch (const UsageError& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  if (o.out.empty()) {
    out << report_text(r);
  } else {
    write_report(r, o.out);
  }
  if (!o.confusion.empty()) write_confusion_csv(r.confusion, o.confusion);
  return kExitOk;
}

}  // namespace

RunConfig parse_run_config(const Json& j, const fs::path& base_dir) {
  check_keys(j, "", {"data", "backbone", "head", "train", "augment", "output"});
  RunConfig c;
  std::optional<std::size_t> image_size;
  if (j.contains("data")) {
    const Json& d = j["data"];
    check_keys(d, "data", {"root", "source_root", "source_channel_order", "image_size", "ratios"});
    if (d.contains("root")) c.root = resolve(base_dir, get_string(d["root"], "data.root"));
    if (d.contains("source_root")) c.source_root = resolve(base_dir, get_string(d["source_root"], "data.source_root"));
    if (d.contains("source_channel_order")) {
      c.source_channel_order = parse_channel_order(get_string(d["source_channel_order"], "data.source_channel_order"));
    }
    if (d.contains("image_size")) {
      const Json& v = d["image_size"];
      if (!v.is_number_integer() || v.get<long long>() <= 0) {
        throw UsageError("config: 'data.image_size' must be a positive integer");
      }
      image_size = v.get<std::size_t>();
    }
    if (d.contains("ratios")) {
      const Json& v = d["ratios"];
      if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); })) {
        throw UsageError("config: 'data.ratios' must be three numbers");
      }
      c.ratios = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    }
  }
  if (j.contains("backbone")) {
    const Json& b = j["backbone"];
    c.backbone = backbone_from_json(b);
    if (image_size && b.is_object() && b.contains("input_side") && b["input_side"] != *image_size) {
      throw UsageError("config: 'backbone.input_side' and 'data.image_size' disagree");
    }
  }
  if (image_size) {
    c.backbone.input_side = *image_size;
    c.backbone.validate();
  }
  if (j.contains("head")) {
    c.head = head_from_json(j["head"]);
    c.head_classes_set = j["head"].contains("num_classes");
  }
  if (j.contains("train")) {
    c.train = train_from_json(j["train"]);
    if (j["train"].contains("seed")) c.config_seed = c.train.seed;
  }
  if (j.contains("augment")) {
    bool enabled = true;
    const auto a = augment_from_json(j["augment"], &enabled);
    c.train.augment = enabled ? std::optional(a) : std::nullopt;
  }
  if (j.contains("output")) c.output = resolve(base_dir, get_string(j["output"], "output"));
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FF_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const std::string s(env);
      if (s.front() == '-') throw std::invalid_argument(s);
      const auto v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("FF_SEED='") + env + "' is not an unsigned integer");
    }
  }
  return config.value_or(1000);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ftnet: image classification with transfer learning", "ftnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Options o;
  std::function<int(const Options&, std::ostream&, std::ostream&)> action;

  auto add = [&](const char* name, const char* help, auto fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&action, fn] { action = fn; });
    return sub;
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Seed (overrides FF_SEED and the config)"); };
  auto add_runtime = [&](CLI::App* sub) {
    sub->add_option("--batch-size", o.batch_size, "Inference batch size")->check(CLI::PositiveNumber);
    sub->add_option("--workers", o.workers, "Preprocessing threads (0: hardware count)");
  };

  auto* ingest = add("ingest", "Scan a class-per-directory tree and write a manifest CSV", cmd_ingest);
  ingest->add_option("--data", o.data, "Dataset root")->required();
  ingest->add_option("--out", o.out, "Manifest CSV (default: standard output)");

  auto* split = add("split", "Write a stratified train/validation/test split CSV", cmd_split);
  split->add_option("--data", o.data, "Dataset root")->required();
  split->add_option("--ratios", o.ratios, "train,validation,test fractions")->capture_default_str();
  split->add_option("--out", o.out, "Split CSV")->required();
  add_seed(split);

  auto* synth = add("synth", "Generate a procedural texture dataset", cmd_synth);
  synth->add_option("--classes", o.classes, "2 or 4")->capture_default_str();
  synth->add_option("--count", o.count, "Images per class")->capture_default_str();
  synth->add_option("--side", o.side, "Image side in pixels")->capture_default_str();
  synth->add_option("--noise", o.noise, "Noise amplitude in [0,1)")->capture_default_str();
  synth->add_flag("--style", o.style, "Shifted stripe phase and frequency");
  synth->add_option("--out", o.out, "Output dataset directory")->required();
  add_seed(synth);

  for (auto [name, help, fn] : {std::tuple{"train", "Train a model from scratch on data.root", &cmd_train},
                                std::tuple{"finetune", "Pretrain on data.source_root, fine-tune on data.root",
                                           &cmd_finetune}}) {
    auto* sub = add(name, help, fn);
    sub->add_option("--config", o.config, "Run config JSON")->required();
    sub->add_option("--out", o.out, "Output directory (overrides the config)");
    sub->add_flag("--timing", o.timing, "Record prediction_seconds in metrics.json");
    add_seed(sub);
  }

  auto* evaluate_cmd = add("evaluate", "Evaluate a checkpoint on one part of a split", cmd_evaluate);
  evaluate_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  evaluate_cmd->add_option("--data", o.data, "Dataset root")->required();
  evaluate_cmd->add_option("--split", o.split, "Split CSV")->required();
  evaluate_cmd->add_option("--part", o.part, "train, val or test")->capture_default_str();
  evaluate_cmd->add_option("--channel-order", o.channel_order, "Colour order of the files (rgb or bgr)");
  evaluate_cmd->add_option("--out", o.out, "Output directory (default: metrics JSON on standard output)");
  evaluate_cmd->add_flag("--timing", o.timing, "Record prediction_seconds");
  add_runtime(evaluate_cmd);

  auto* predict_cmd = add("predict", "Label images with a checkpoint", cmd_predict);
  predict_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("images", o.images, "Image files or directories")->required();
  predict_cmd->add_option("--channel-order", o.channel_order, "Colour order of the files (rgb or bgr)");
  predict_cmd->add_option("--out", o.out, "Labels TSV (default: standard output)");
  add_runtime(predict_cmd);

  auto* report = add("report", "Compute metrics from a predicted,actual CSV", cmd_report);
  report->add_option("--predictions", o.predictions, "Predictions CSV")->required();
  report->add_option("--classes", o.class_list, "Comma-separated class names");
  report->add_option("--num-classes", o.num_classes, "Class count (default: largest label + 1)");
  report->add_option("--out", o.out, "Metrics JSON (default: standard output)");
  report->add_option("--confusion", o.confusion, "Confusion matrix CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ftnet::cli
