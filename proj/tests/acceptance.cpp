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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes. Criterion 5 trains 21 small networks and takes a
// few minutes on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ftnet/dataset.hpp"
#include "ftnet/layers.hpp"
#include "ftnet/metrics.hpp"
#include "ftnet/runtime.hpp"
#include "ftnet/train.hpp"
#include "ftnet/vision.hpp"
#include "oracles.hpp"

using namespace ftnet;
using namespace ftnet::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli_run(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "ftnet");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

bool within(double got, double want) { return std::abs(got - want) <= 0.01 + 1e-9; }

// ---------------------------------------------------------------------------
// 1 and 2: published tables from their confusion matrices.

struct TableRow {
  const char* model;
  std::vector<std::vector<int>> counts;  // rows = actual
  double acc, p, r, f1, mae, mse, rmse;
};

// Compares every cell, or only accuracy and the index errors.
std::string compare_row(const TableRow& row, const MetricsReport& rep, bool macro_columns = true) {
  const std::pair<const char*, std::pair<double, double>> cells[] = {
      {"accuracy", {rep.accuracy_pct, row.acc}}, {"precision", {rep.precision_pct, row.p}},
      {"recall", {rep.recall_pct, row.r}},       {"f1", {rep.f1_pct, row.f1}},
      {"mae", {rep.mae_pct, row.mae}},           {"mse", {rep.mse_pct, row.mse}},
      {"rmse", {rep.rmse_pct, row.rmse}}};
  std::string bad;
  for (const auto& [name, gv] : cells) {
    const double got = round2(gv.first);
    if (!macro_columns && std::isnan(gv.second)) continue;
    if (!within(got, gv.second)) {
      bad += std::string(bad.empty() ? "" : ", ") + row.model + " " + name + " " + fmt("%.2f", got) + " vs " +
             fmt("%.2f", gv.second);
    }
  }
  return bad;
}

Outcome criterion1() {
  const TableRow rows[] = {
      {"InceptionResNetV2", {{112, 5}, {1, 106}}, 97.32, 97.40, 97.31, 97.32, 2.68, 2.68, 16.37},
      {"ResNet50", {{113, 0}, {2, 109}}, 99.11, 99.13, 99.10, 99.11, 0.89, 0.89, 9.45},
      {"ResNet50V2", {{113, 0}, {1, 110}}, 99.55, 99.56, 99.55, 99.55, 0.45, 0.45, 6.68},
      {"EfficientNetB0", {{113, 0}, {2, 109}}, 99.11, 99.13, 99.10, 99.11, 0.89, 0.89, 9.45},
      {"EfficientNetB4", {{113, 0}, {0, 111}}, 100, 100, 100, 100, 0, 0, 0},
  };
  Outcome o;
  int ok = 0;
  for (const auto& row : rows) {
    const auto [p, a] = expand_counts(row.counts);
    const auto bad = compare_row(row, make_report(p, a, 2));
    o.require(bad.empty(), bad);
    ok += bad.empty();
  }
  if (o.pass) o.detail = "5/5 rows, 35 cells within 0.01";
  else o.detail = std::to_string(ok) + "/5 rows match; " + o.detail;
  return o;
}

Outcome criterion2() {
  // Per-class counts of the best four-class model; the off-diagonal cells sit
  // at label distances 2, 2, 1, 1.
  const std::vector<std::vector<int>> counts{{125, 0, 2, 0}, {0, 128, 0, 0}, {0, 0, 113, 1}, {0, 0, 1, 110}};
  const auto [p, a] = expand_counts(counts);
  const auto rep = make_report(p, a, 4);
  const auto cm = rep.confusion;
  Outcome o;
  const std::int64_t tp[] = {125, 128, 113, 110}, fp[] = {0, 0, 3, 1}, fn[] = {2, 0, 1, 1};
  for (std::size_t c = 0; c < 4; ++c) {
    o.require(cm.tp(c) == tp[c] && cm.fp(c) == fp[c] && cm.fn(c) == fn[c],
              "class " + std::to_string(c) + " counts differ from the fixture");
  }
  std::multiset<int> dist;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != a[i]) dist.insert(std::abs(p[i] - a[i]));
  }
  o.require(dist == std::multiset<int>{1, 1, 2, 2}, "index-error multiset is not {1,1,2,2}");
  const double none = std::nan("");
  const TableRow row{"four-class", counts, 99.17, none, none, none, 1.25, 2.08, 14.43};
  const auto bad = compare_row(row, rep, false);
  o.require(bad.empty(), bad);
  if (o.pass) {
    o.detail = "accuracy " + fmt("%.2f", round2(rep.accuracy_pct)) + ", mae " + fmt("%.2f", round2(rep.mae_pct)) +
               ", mse " + fmt("%.2f", round2(rep.mse_pct)) + ", rmse " + fmt("%.2f", round2(rep.rmse_pct));
  }
  return o;
}

// ---------------------------------------------------------------------------
// 3: matrix-derived metrics against the per-sample oracle.

Outcome criterion3() {
  TestRng rng(2026);
  Outcome o;
  double worst_identity = 0;
  for (int trial = 0; trial < 1000 && o.pass; ++trial) {
    const int k = 2 + rng.below(3);
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(500));
    const double hit = rng.uniform();
    std::vector<int> p(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.below(k);
      p[i] = rng.uniform() < hit ? a[i] : rng.below(k);
    }
    const auto r = make_report(p, a, static_cast<std::size_t>(k));
    const auto b = brute_metrics(p, a, k);
    const bool same = r.accuracy_pct == b.accuracy && r.precision_pct == b.precision && r.recall_pct == b.recall &&
                      r.f1_pct == b.f1 && r.mae_pct == b.mae && r.mse_pct == b.mse && r.rmse_pct == b.rmse;
    o.require(same, "trial " + std::to_string(trial) + " differs from the per-sample oracle");
    worst_identity = std::max(worst_identity, std::abs(r.rmse_pct * r.rmse_pct - 100.0 * r.mse_pct));
  }
  o.require(worst_identity <= 1e-9, "rmse^2 - 100*mse off by " + fmt("%.3g", worst_identity));
  if (o.pass) o.detail = "1000 trials exact, max |rmse^2 - 100*mse| = " + fmt("%.3g", worst_identity);
  return o;
}

// ---------------------------------------------------------------------------
// 4: central finite differences on every differentiable layer.

// Builds a scalar from tensors created out of `values`; analytic gradients
// via backward() are compared with central differences of the same function.
double gradient_error(const std::vector<Shape>& shapes, const std::vector<std::vector<double>>& values,
                      const std::function<Tensor(std::vector<Tensor>&)>& f) {
  std::vector<Tensor> ts;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    ts.emplace_back(shapes[i], values[i]);
    ts.back().set_requires_grad(true);
  }
  backward(f(ts));
  double worst = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::vector<double> analytic(ts[i].grad().data(), ts[i].grad().data() + ts[i].grad().size());
    const auto numeric = fd_gradient(
        [&](const std::vector<double>& v) {
          NoGradGuard ng;
          std::vector<Tensor> xs;
          for (std::size_t j = 0; j < shapes.size(); ++j) xs.emplace_back(shapes[j], j == i ? v : values[j]);
          return f(xs).item();
        },
        values[i]);
    worst = std::max(worst, max_rel_error(analytic, numeric));
  }
  return worst;
}

Tensor weighted_sum(const Tensor& y, TestRng& rng) { return sum(y * Tensor(y.shape(), rng.vec(y.size()))); }

// Values spread at least `gap` apart, so max and relu have no ties or kinks
// inside the difference step.
std::vector<double> spread(TestRng& rng, std::size_t n, double gap) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 0.0);
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng.below(int(i)))]);
  for (auto& x : v) x = (x - n / 2.0 + 0.5) * gap;
  return v;
}

Outcome criterion4() {
  TestRng rng(4);
  std::vector<std::pair<std::string, double>> errs;
  auto probe_seed = [&] { return static_cast<std::uint64_t>(rng.below(1 << 30)) + 1; };

  for (const Padding pad : {Padding::same, Padding::valid}) {
    for (const std::size_t stride : {std::size_t{1}, std::size_t{2}}) {
      const Shape xs{2, 3, 6, 5}, ks{4, 3, 3, 3}, bs{4};
      const auto seed = probe_seed();
      errs.emplace_back("conv2d", gradient_error({xs, ks, bs}, {rng.vec(180), rng.vec(108), rng.vec(4)},
                                                 [&](std::vector<Tensor>& t) {
                                                   TestRng w(seed);
                                                   ConvParams<double> p{t[1], t[2], stride, pad};
                                                   return weighted_sum(conv2d(t[0], p), w);
                                                 }));
    }
  }
  {
    const auto seed = probe_seed();
    errs.emplace_back("relu", gradient_error({{3, 8}}, {spread(rng, 24, 0.1)}, [&](std::vector<Tensor>& t) {
      TestRng w(seed);
      return weighted_sum(relu(t[0]), w);
    }));
  }
  for (const PoolKind kind : {PoolKind::avg, PoolKind::max}) {
    const auto seed = probe_seed();
    errs.emplace_back(kind == PoolKind::avg ? "global_pool(avg)" : "global_pool(max)",
                      gradient_error({{2, 3, 4, 4}}, {spread(rng, 96, 0.05)}, [&](std::vector<Tensor>& t) {
                        TestRng w(seed);
                        return weighted_sum(global_pool(t[0], kind), w);
                      }));
  }
  for (const Shape& shape : {Shape{6, 4}, Shape{3, 2, 3, 3}}) {
    const auto seed = probe_seed();
    const std::size_t c = shape[1];
    errs.emplace_back("batch_norm(train)",
                      gradient_error({shape, {c}, {c}},
                                     {rng.vec(shape_size(shape), -2, 2), rng.vec(c, 0.5, 1.5), rng.vec(c)},
                                     [&](std::vector<Tensor>& t) {
                                       TestRng w(seed);
                                       auto s = BatchNormState<double>::fresh(c);
                                       s.gamma = t[1];
                                       s.beta = t[2];
                                       return weighted_sum(batch_norm(t[0], s, Mode::train), w);
                                     }));
  }
  {
    const auto seed = probe_seed();
    errs.emplace_back("dense", gradient_error({{4, 5}, {5, 3}, {3}}, {rng.vec(20), rng.vec(15), rng.vec(3)},
                                              [&](std::vector<Tensor>& t) {
                                                TestRng w(seed);
                                                return weighted_sum(dense(t[0], t[1], t[2]), w);
                                              }));
  }
  {
    const std::vector<int> labels{0, 3, 1, 1, 2, 3};
    errs.emplace_back("softmax+sparse_ce", gradient_error({{6, 4}}, {rng.vec(24, -3, 3)}, [&](std::vector<Tensor>& t) {
                        return sparse_ce_loss(softmax(t[0]), labels);
                      }));
  }

  Outcome o;
  double worst = 0;
  for (const auto& [name, e] : errs) {
    o.require(e < 1e-4, name + " max rel error " + fmt("%.3g", e));
    worst = std::max(worst, e);
  }
  if (o.pass) o.detail = std::to_string(errs.size()) + " checks, worst max rel error " + fmt("%.3g", worst);
  return o;
}

// ---------------------------------------------------------------------------
// 5, 6, 9: the synthetic transfer task through the CLI.

struct TransferRuns {
  TempDir tmp{"acceptance"};
  fs::path dir = tmp.path;
  std::vector<TrainLog> finetune_logs;  // seeds 1000..1009
  std::vector<double> finetune_val, scratch_val;
  std::vector<double> finetune_mean_val, scratch_mean_val;  // averaged over epochs, informational
  double cli_test_accuracy = -1;
  std::size_t epochs = TrainConfig{}.epochs;
  std::string error;
};

double mean_val_acc(const TrainLog& log) {
  double s = 0;
  for (const auto& r : log.rows) s += r.val_acc;
  return s / static_cast<double>(log.rows.size());
}

constexpr std::uint64_t kFirstSeed = 1000;
constexpr int kSeeds = 10;

void write_run_config(const fs::path& path) {
  std::ofstream(path) << R"({
  "data": {"root": "target", "source_root": "source", "image_size": 64},
  "train": {"workers": 4},
  "output": "run_a"
}
)";
}

Outcome criterion5(TransferRuns& t) {
  Outcome o;
  std::string err;
  const auto synth = [&](const char* classes, const char* count, bool style, const char* out) {
    std::vector<std::string> args{"synth", "--classes", classes, "--count", count, "--side", "64", "--seed", "1000",
                                  "--out", (t.dir / out).string()};
    if (style) args.push_back("--style");
    return cli_run(args, &err);
  };
  if (synth("4", "200", false, "source") != 0 || synth("2", "100", true, "target") != 0) {
    o.require(false, "synth failed: " + err);
    return o;
  }
  write_run_config(t.dir / "run.json");
  if (cli_run({"finetune", "--config", (t.dir / "run.json").string(), "--seed", std::to_string(kFirstSeed)},
              &err) != 0) {
    o.require(false, "finetune failed: " + err);
    return o;
  }
  const fs::path run_a = t.dir / "run_a";
  const Json metrics = Json::parse(slurp(run_a / "metrics.json"));
  t.cli_test_accuracy = metrics["accuracy_pct"].get<double>();
  t.finetune_logs.push_back(parse_train_log(slurp(run_a / "train_log.csv")));
  t.finetune_val.push_back(t.finetune_logs.back().rows.back().val_acc);
  t.finetune_mean_val.push_back(mean_val_acc(t.finetune_logs.back()));

  const Dataset source = ingest_directory(t.dir / "source");
  const Dataset target = ingest_directory(t.dir / "target");
  TransferConfig cfg;
  cfg.backbone.input_side = 64;
  cfg.pretrain.workers = cfg.finetune.workers = 4;
  for (int i = 0; i < kSeeds; ++i) {
    cfg.pretrain.seed = cfg.finetune.seed = kFirstSeed + static_cast<std::uint64_t>(i);
    if (i > 0) {
      const auto r = pretrain_then_finetune(source, target, cfg);
      // Round trip through the CSV form, as the CLI writes it.
      t.finetune_logs.push_back(parse_train_log(r.finetune_log.csv()));
      t.finetune_val.push_back(r.finetune_log.rows.back().val_acc);
      t.finetune_mean_val.push_back(mean_val_acc(r.finetune_log));
    }
    const auto scratch = train_from_scratch(target, cfg);
    t.scratch_val.push_back(scratch.log.rows.back().val_acc);
    t.scratch_mean_val.push_back(mean_val_acc(scratch.log));
    std::fprintf(stderr, "  seed %llu: final val %.2f%% vs scratch %.2f%%; mean over epochs %.2f%% vs %.2f%%\n",
                 static_cast<unsigned long long>(cfg.finetune.seed), t.finetune_val.back(), t.scratch_val.back(),
                 t.finetune_mean_val.back(), t.scratch_mean_val.back());
  }

  int at_least = 0, strict = 0, curve = 0;
  for (int i = 0; i < kSeeds; ++i) {
    at_least += t.finetune_val[i] >= t.scratch_val[i];
    strict += t.finetune_val[i] > t.scratch_val[i];
    curve += t.finetune_mean_val[i] > t.scratch_mean_val[i];
  }
  o.require(t.cli_test_accuracy >= 95.0, "test accuracy " + fmt("%.2f", t.cli_test_accuracy) + "% < 95%");
  o.require(at_least >= 8, "fine-tuned >= scratch in only " + std::to_string(at_least) + "/10 seeds");
  if (o.pass) {
    o.detail = "seed 1000 test accuracy " + fmt("%.2f", t.cli_test_accuracy) + "%; fine-tuned val >= scratch in " +
               std::to_string(at_least) + "/10 seeds (" + std::to_string(strict) +
               " strictly; higher mean val over epochs in " + std::to_string(curve) + "/10)";
  }
  return o;
}

Outcome criterion6(TransferRuns& t) {
  Outcome o;
  if (t.cli_test_accuracy < 0) {
    o.require(false, "no first run to compare against");
    return o;
  }
  std::string err;
  const fs::path run_b = t.dir / "run_b";
  if (cli_run({"finetune", "--config", (t.dir / "run.json").string(), "--seed", std::to_string(kFirstSeed),
               "--out", run_b.string()},
              &err) != 0) {
    o.require(false, "second finetune failed: " + err);
    return o;
  }
  for (const char* f : {"train_log.csv", "pretrain_log.csv", "model.ckpt", "pretrained.ckpt", "metrics.json",
                        "confusion.csv", "predictions.csv", "split.csv"}) {
    const auto a = slurp(t.dir / "run_a" / f);
    o.require(!a.empty() && a == slurp(run_b / f), std::string(f) + " differs");
  }
  if (o.pass) o.detail = "8 artifacts byte-identical across two runs with 4 loader workers";
  return o;
}

Outcome criterion9(const TransferRuns& t) {
  Outcome o;
  if (static_cast<int>(t.finetune_logs.size()) != kSeeds) {
    o.require(false, "criterion 5 produced " + std::to_string(t.finetune_logs.size()) + " logs");
    return o;
  }
  int decreasing = 0;
  for (const auto& log : t.finetune_logs) {
    o.require(log.rows.size() == t.epochs, "log has " + std::to_string(log.rows.size()) + " rows");
    if (log.rows.size() >= 3 && log.rows[1].train_loss < log.rows[0].train_loss &&
        log.rows[2].train_loss < log.rows[1].train_loss) {
      ++decreasing;
    }
  }
  o.require(decreasing >= 9, "loss strictly decreasing over 3 epochs in only " + std::to_string(decreasing) + "/10");
  if (o.pass) {
    o.detail = "10 logs with " + std::to_string(t.epochs) + " rows; first 3 epochs strictly decreasing in " +
               std::to_string(decreasing) + "/10";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 7: preprocessing and augmentation properties.

ImageU8 random_image(TestRng& rng, std::size_t h, std::size_t w, std::size_t c) {
  ImageU8 img(h, w, c, c == 1 ? ChannelOrder::gray : ChannelOrder::rgb);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

Outcome criterion7() {
  TestRng rng(7);
  Outcome o;
  int checks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 1 + rng.below(24), w = 1 + rng.below(24), c = rng.below(2) ? 3 : 1;
    const auto value = static_cast<std::uint8_t>(rng.below(256));
    const ImageU8 flat(h, w, c, c == 1 ? ChannelOrder::gray : ChannelOrder::rgb,
                       std::vector<std::uint8_t>(h * w * c, value));
    const auto oh = 1 + static_cast<std::size_t>(rng.below(40)), ow = 1 + static_cast<std::size_t>(rng.below(40));
    const auto resized = resize_bilinear(flat, oh, ow);
    o.require(resized.pixels == std::vector<std::uint8_t>(oh * ow * c, value), "resize moved a constant image");
    o.require(sharpen(flat) == flat, "sharpen moved a constant image");

    const auto img = random_image(rng, h, w, c);
    if (c == 3) {
      auto bgr = img;
      bgr.order = ChannelOrder::bgr;
      auto once = bgr_to_rgb(bgr);
      once.order = ChannelOrder::bgr;
      o.require(bgr_to_rgb(once).pixels == img.pixels, "BGR/RGB swap is not an involution");
    }
    AffineSpec flip;
    flip.flip_h = true;
    o.require(affine_transform(affine_transform(img, flip), flip) == img, "flip is not an involution");
    o.require(affine_transform(img, AffineSpec::identity()) == img, "identity affine changed the image");
    o.require(affine_transform(img, make_affine(0, 1, 0, false, h, w, FillMode::edge)) == img,
              "make_affine identity changed the image");
    const auto drawn = sample_augmentation(AugmentConfig::identity(), derive(Stream::augment, 7, 0, trial), h, w);
    o.require(affine_transform(img, drawn.first) == img, "identity augmentation changed the image");

    const auto big = resize_bilinear(img, oh, ow);
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::uint8_t lo = 255, hi = 0;
      for (std::size_t i = ch; i < img.pixels.size(); i += c) {
        lo = std::min(lo, img.pixels[i]);
        hi = std::max(hi, img.pixels[i]);
      }
      for (std::size_t i = ch; i < big.pixels.size(); i += c) {
        o.require(big.pixels[i] >= lo && big.pixels[i] <= hi, "bilinear output outside the source range");
      }
    }
    checks += c == 3 ? 7 : 6;
    if (!o.pass) break;
  }
  if (o.pass) o.detail = std::to_string(checks) + " property checks on 200 random images";
  return o;
}

// ---------------------------------------------------------------------------
// 8: split protocol.

Outcome criterion8() {
  Dataset d;
  d.class_names = {"a", "b"};
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 1000; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s/%04d.png", d.class_names[c].c_str(), i);
      d.samples.push_back({id, std::nullopt, c});
    }
  }
  Outcome o;
  const auto s = stratified_split(d, {0.8, 0.1, 0.1}, 1000);
  o.require(s.train.size() == 1600 && s.validation.size() == 200 && s.test.size() == 200,
            "sizes " + std::to_string(s.train.size()) + "/" + std::to_string(s.validation.size()) + "/" +
                std::to_string(s.test.size()));
  const auto per_class = [&](const std::vector<std::size_t>& part, int c) {
    return std::count_if(part.begin(), part.end(), [&](std::size_t i) { return d.samples[i].label == c; });
  };
  for (int c = 0; c < 2; ++c) {
    o.require(per_class(s.train, c) == 800 && per_class(s.validation, c) == 100 && per_class(s.test, c) == 100,
              "class " + std::to_string(c) + " is not 800/100/100");
  }
  std::vector<int> seen(d.size(), 0);
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (auto i : *part) ++seen[i];
  }
  o.require(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }), "parts not disjoint and covering");

  const auto folds = kfold_split(d, 5, 1000);
  o.require(folds.size() == 5, "expected 5 folds");
  std::vector<int> in_val(d.size(), 0);
  for (const auto& f : folds) {
    o.require(f.validation.size() == 400 && f.train.size() == 1600, "fold sizes are not 1600/400");
    o.require(per_class(f.validation, 0) == 200 && per_class(f.validation, 1) == 200, "fold not stratified");
    std::vector<int> mark(d.size(), 0);
    for (auto i : f.train) ++mark[i];
    for (auto i : f.validation) {
      ++mark[i];
      ++in_val[i];
    }
    o.require(std::all_of(mark.begin(), mark.end(), [](int v) { return v == 1; }),
              "fold train/validation not a partition");
  }
  o.require(std::all_of(in_val.begin(), in_val.end(), [](int v) { return v == 1; }),
            "fold validation parts do not partition the data");
  if (o.pass) o.detail = "1600/200/200, 800/100/100 per class; 5 folds of 1600/400 validated";
  return o;
}

}  // namespace

int main() {
  tune_allocator();
  using Clock = std::chrono::steady_clock;
  int failures = 0;
  TransferRuns transfer;
  const auto report = [&](int n, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (limit_s > 0) o.require(secs < limit_s, "took " + fmt("%.1f", secs) + " s, limit " + fmt("%.0f", limit_s));
    failures += !o.pass;
    std::printf("criterion %d: %s (%s; %.2f s)\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, 1, criterion1);
  report(2, 1, criterion2);
  report(3, 10, criterion3);
  report(4, 60, criterion4);
  report(5, 600, [&] { return criterion5(transfer); });
  report(6, 600, [&] { return criterion6(transfer); });
  report(7, 10, criterion7);
  report(8, 1, criterion8);
  report(9, 0, [&] { return criterion9(transfer); });
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
