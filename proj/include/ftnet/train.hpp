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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftnet/dataset.hpp"
#include "ftnet/model.hpp"
#include "ftnet/vision.hpp"

namespace ftnet {

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  std::uint64_t seed = 1000;
  std::optional<AugmentConfig> augment = AugmentConfig{};
  TrainablePolicy policy = TrainablePolicy::all;
  std::size_t freeze_first_n = 0;  // used by TrainablePolicy::freeze_first_n
  std::size_t workers = 0;         // preprocessing threads; 0 picks the hardware count

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_acc = 0;  // percent
  double val_loss = 0;
  double val_acc = 0;  // percent
};

struct TrainLog {
  std::vector<EpochRecord> rows;
  double wall_seconds = 0;

  /// `epoch,train_loss,train_acc,val_loss,val_acc`, six decimals, LF.
  std::string csv() const;
};

TrainLog parse_train_log(const std::string& csv);

/// Trains `m` in place.
///
/// Every epoch shuffles the training indices with stream (seed, epoch),
/// splits them into batches of batch_size (a trailing batch of one sample
/// joins the previous batch), augments sample i with stream
/// (seed, epoch, i), and takes one Adam step per batch on the trainable
/// parameters. Train metrics are sample-weighted means over the epoch's
/// batches in train mode; validation metrics come from an infer-mode pass.
/// Parameters are kept float-representable throughout (see snap_to_float).
///
/// Throws NumericError naming the epoch and batch when a loss is not finite.
TrainLog train(Model& m, const Dataset& data, const SplitIndices& split, const TrainConfig& cfg);

struct Evaluation {
  std::vector<int> predicted;
  std::vector<int> actual;
  std::vector<std::vector<double>> probabilities;
  double seconds = 0;
};

/// Infer-mode predictions over data[indices] with the non-augmented
/// preprocessing path.
Evaluation evaluate(const Model& m, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size = 32, std::size_t workers = 0);

/// Accuracy in percent of an evaluation.
double accuracy_pct(const Evaluation& e);

struct TransferConfig {
  BackboneConfig backbone;
  HeadConfig head;  // num_classes is taken from each dataset
  TrainConfig pretrain;
  TrainConfig finetune;
  SplitRatios ratios;
};

struct TransferResult {
  Model pretrained;  // source model after pretraining
  Model model;       // fine-tuned target model
  TrainLog pretrain_log;
  TrainLog finetune_log;
  SplitIndices source_split;
  SplitIndices target_split;
};

/// Pretrains backbone + head on `source`, moves the backbone to a fresh
/// head for `target`, then fine-tunes with cfg.finetune. Both datasets are
/// split with cfg.ratios (source with the pretrain seed, target with the
/// finetune seed).
TransferResult pretrain_then_finetune(const Dataset& source, const Dataset& target, const TransferConfig& cfg);

/// The matching baseline: a freshly initialised model of the same
/// architecture trained on `target` with cfg.finetune and the same target
/// split as pretrain_then_finetune.
struct ScratchResult {
  Model model;
  TrainLog log;
  SplitIndices split;
};
ScratchResult train_from_scratch(const Dataset& target, const TransferConfig& cfg);

}  // namespace ftnet
