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

#include "ftnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "ftnet/adam.hpp"
#include "ftnet/error.hpp"

namespace ftnet {

namespace {

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// handled exactly once and results land in caller-owned slots, so the output
// does not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Prepared (resized, sharpened, colour-converted) images for a set of
// dataset indices.
class ImageCache {
 public:
  ImageCache(const Dataset& data, const std::vector<std::size_t>& indices, const PreprocessConfig& cfg,
             std::size_t workers)
      : slot_(data.size(), kMissing) {
    std::vector<std::size_t> unique;
    for (auto i : indices) {
      if (slot_.at(i) == kMissing) {
        slot_[i] = unique.size();
        unique.push_back(i);
      }
    }
    images_.resize(unique.size());
    parallel_for(unique.size(), workers, [&](std::size_t k) { images_[k] = prepare_image(data.load(unique[k]), cfg); });
  }

  const ImageU8& operator[](std::size_t index) const { return images_[slot_[index]]; }

 private:
  static constexpr std::size_t kMissing = static_cast<std::size_t>(-1);
  std::vector<std::size_t> slot_;
  std::vector<ImageU8> images_;
};

std::vector<int> labels_of(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data.samples.at(i).label);
  return out;
}

struct PassStats {
  double loss_sum = 0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

void accumulate(PassStats& s, const Tensor& probs, double batch_loss, const std::vector<int>& labels) {
  const auto pred = argmax_rows(probs);
  for (std::size_t i = 0; i < labels.size(); ++i) s.correct += pred[i] == labels[i];
  s.loss_sum += batch_loss * static_cast<double>(labels.size());
  s.count += labels.size();
}

// Batch boundaries over n items; a trailing batch of one joins its
// predecessor so batch_norm always sees at least two samples.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size) out.emplace_back(b, std::min(n, b + batch_size));
  if (out.size() > 1 && out.back().second - out.back().first < 2) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("train: epochs must be at least 1");
  if (batch_size < 2) throw UsageError("train: batch_size must be at least 2");
  if (!(lr > 0) || !std::isfinite(lr)) throw UsageError("train: lr must be positive");
  if (augment) augment->validate();
}

std::string TrainLog::csv() const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_acc, r.val_loss,
                  r.val_acc);
    out += line;
  }
  return out;
}

TrainLog parse_train_log(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,train_acc,val_loss,val_acc") {
    throw DataError("train log: missing header");
  }
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochRecord r;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf%c", &r.epoch, &r.train_loss, &r.train_acc, &r.val_loss,
                    &r.val_acc, &tail) != 5) {
      throw DataError("train log: malformed row '" + line + "'");
    }
    log.rows.push_back(r);
  }
  return log;
}

TrainLog train(Model& m, const Dataset& data, const SplitIndices& split, const TrainConfig& cfg) {
  cfg.validate();
  validate_split(split, data.size());
  if (!m.has_head) throw UsageError("train: model has no classification head");
  if (m.num_classes() != data.num_classes()) {
    throw UsageError("train: model has " + std::to_string(m.num_classes()) + " classes, dataset has " +
                     std::to_string(data.num_classes()));
  }
  if (split.train.size() < 2) throw UsageError("train: the training split needs at least 2 samples");
  if (split.validation.empty()) throw UsageError("train: the validation split is empty");

  const auto start = std::chrono::steady_clock::now();
  const std::size_t workers = worker_count(cfg.workers);
  set_trainable(m, cfg.policy, cfg.freeze_first_n);
  snap_to_float(m);

  const PreprocessConfig pre{m.input_side(), data.source_order};
  std::vector<std::size_t> needed = split.train;
  needed.insert(needed.end(), split.validation.begin(), split.validation.end());
  const ImageCache cache(data, needed, pre, workers);

  std::vector<Tensor> params = m.parameters(true);
  AdamState<double> adam;
  TrainLog log;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = split.train;
    Rng shuffle(derive(Stream::shuffle, cfg.seed, epoch, 0));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    PassStats stats;
    const auto ranges = batch_ranges(order.size(), cfg.batch_size);
    for (std::size_t b = 0; b < ranges.size(); ++b) {
      const auto [lo, hi] = ranges[b];
      const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      std::vector<ImageU8> augmented;
      std::vector<const ImageU8*> ptrs(idx.size());
      if (cfg.augment) {
        augmented.resize(idx.size());
        parallel_for(idx.size(), workers, [&](std::size_t k) {
          const ImageU8& img = cache[idx[k]];
          const auto spec =
              sample_augmentation(*cfg.augment, derive(Stream::augment, cfg.seed, epoch, idx[k]), img.height,
                                  img.width)
                  .first;
          augmented[k] = affine_transform(img, spec);
        });
        for (std::size_t k = 0; k < idx.size(); ++k) ptrs[k] = &augmented[k];
      } else {
        for (std::size_t k = 0; k < idx.size(); ++k) ptrs[k] = &cache[idx[k]];
      }
      const auto labels = labels_of(data, idx);

      for (auto& p : params) p.zero_grad();
      const Tensor probs = forward(m, stack_images(ptrs), Mode::train, derive(Stream::dropout, cfg.seed, epoch, b));
      const Tensor loss = sparse_ce_loss(probs, std::span<const int>(labels));
      if (!std::isfinite(loss.item())) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1));
      }
      backward(loss);
      adam_step(std::span<Tensor>(params), adam, cfg.lr);
      snap_to_float(m);
      accumulate(stats, probs, loss.item(), labels);
    }
    for (auto& p : params) p.zero_grad();

    EpochRecord row;
    row.epoch = epoch;
    row.train_loss = stats.loss_sum / static_cast<double>(stats.count);
    row.train_acc = 100.0 * static_cast<double>(stats.correct) / static_cast<double>(stats.count);

    PassStats val;
    {
      NoGradGuard guard;
      for (const auto& [lo, hi] : batch_ranges(split.validation.size(), cfg.batch_size)) {
        const std::span<const std::size_t> idx(split.validation.data() + lo, hi - lo);
        std::vector<const ImageU8*> ptrs;
        for (auto i : idx) ptrs.push_back(&cache[i]);
        const auto labels = labels_of(data, idx);
        const Tensor probs = infer(m, stack_images(ptrs));
        accumulate(val, probs, sparse_ce_loss(probs, std::span<const int>(labels)).item(), labels);
      }
    }
    row.val_loss = val.loss_sum / static_cast<double>(val.count);
    row.val_acc = 100.0 * static_cast<double>(val.correct) / static_cast<double>(val.count);
    if (!std::isfinite(row.val_loss)) {
      throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    log.rows.push_back(row);
  }
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return log;
}

Evaluation evaluate(const Model& m, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size, std::size_t workers) {
  if (indices.empty()) throw UsageError("evaluate: no samples selected");
  if (batch_size == 0) throw UsageError("evaluate: batch size must be positive");
  if (!m.has_head) throw UsageError("evaluate: model has no classification head");
  if (m.num_classes() != data.num_classes()) {
    throw UsageError("evaluate: model has " + std::to_string(m.num_classes()) + " classes, dataset has " +
                     std::to_string(data.num_classes()));
  }
  for (auto i : indices) {
    if (i >= data.size()) throw UsageError("evaluate: index " + std::to_string(i) + " out of range");
  }
  const PreprocessConfig pre{m.input_side(), data.source_order};
  const std::vector<std::size_t> all(indices.begin(), indices.end());
  const ImageCache cache(data, all, pre, worker_count(workers));

  const auto start = std::chrono::steady_clock::now();
  Evaluation out;
  out.actual = labels_of(data, indices);
  for (std::size_t lo = 0; lo < indices.size(); lo += batch_size) {
    const std::size_t hi = std::min(indices.size(), lo + batch_size);
    std::vector<const ImageU8*> ptrs;
    for (std::size_t k = lo; k < hi; ++k) ptrs.push_back(&cache[indices[k]]);
    const Tensor probs = infer(m, stack_images(ptrs));
    const auto pred = argmax_rows(probs);
    const std::size_t K = probs.dim(1);
    for (std::size_t r = 0; r < pred.size(); ++r) {
      out.predicted.push_back(pred[r]);
      out.probabilities.emplace_back(probs.values().data() + r * K, probs.values().data() + (r + 1) * K);
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

double accuracy_pct(const Evaluation& e) {
  if (e.actual.empty()) throw UsageError("accuracy: empty evaluation");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < e.actual.size(); ++i) correct += e.predicted[i] == e.actual[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(e.actual.size());
}

TransferResult pretrain_then_finetune(const Dataset& source, const Dataset& target, const TransferConfig& cfg) {
  TransferResult r;
  r.source_split = stratified_split(source, cfg.ratios, cfg.pretrain.seed);
  r.target_split = stratified_split(target, cfg.ratios, cfg.finetune.seed);

  HeadConfig source_head = cfg.head;
  source_head.num_classes = source.num_classes();
  r.pretrained = build_model(cfg.backbone, source_head, cfg.pretrain.seed, source.class_names);
  r.pretrain_log = train(r.pretrained, source, r.source_split, cfg.pretrain);

  HeadConfig target_head = cfg.head;
  target_head.num_classes = target.num_classes();
  r.model = truncate_and_attach_head(r.pretrained, target_head, derive(Stream::init, cfg.finetune.seed, 1, 0),
                                     target.class_names);
  r.finetune_log = train(r.model, target, r.target_split, cfg.finetune);
  return r;
}

ScratchResult train_from_scratch(const Dataset& target, const TransferConfig& cfg) {
  ScratchResult r;
  r.split = stratified_split(target, cfg.ratios, cfg.finetune.seed);
  HeadConfig head = cfg.head;
  head.num_classes = target.num_classes();
  r.model = build_model(cfg.backbone, head, cfg.finetune.seed, target.class_names);
  r.log = train(r.model, target, r.split, cfg.finetune);
  return r;
}

}  // namespace ftnet
