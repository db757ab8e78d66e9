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

// Backbone family, classification head, and the surgery that moves a trained
// backbone onto a new task.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ftnet/image.hpp"
#include "ftnet/layers.hpp"
#include "ftnet/rng.hpp"
#include "ftnet/tensor.hpp"
#include "ftnet/vision.hpp"

namespace ftnet {

/// Compound-scaled stack of conv3x3 -> batch_norm -> relu blocks.
///
///     depth      = round(base_blocks    * 1.2^phi)
///     width      = round(base_channels  * 1.1^phi)
///     resolution = round(input_side     * 1.15^phi), snapped down to a
///                  multiple of 2^downsamples when phi > 0
///
/// Block b has stride 2 when b is even, so there are ceil(depth / 2)
/// downsamples, and width * 2^(b / 2) output channels capped at 4 * width.
struct BackboneConfig {
  static constexpr double kDepthBase = 1.2;
  static constexpr double kWidthBase = 1.1;
  static constexpr double kResolutionBase = 1.15;

  std::size_t base_blocks = 4;
  std::size_t base_channels = 8;
  double phi = 0.0;
  std::size_t input_side = 256;
  bool skip_connections = false;

  std::size_t depth() const;
  std::size_t width() const;
  std::size_t downsamples() const { return (depth() + 1) / 2; }
  std::size_t resolution() const;
  std::size_t block_channels(std::size_t block) const;
  void validate() const;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

/// Named stand-ins for the architectures the framework was modelled on. They
/// differ only in depth, width, scaling and skips; none loads real weights.
BackboneConfig backbone_preset(std::string_view name, std::size_t input_side);
std::vector<std::string> backbone_preset_names();

struct HeadConfig {
  PoolKind pooling = PoolKind::avg;
  std::size_t dense_units = 128;
  double dropout_rate = 0.2;
  std::size_t num_classes = 2;

  void validate() const;
  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

// Layer variants. Parameters are tensors, so copying a layer shares storage;
// Model's copy operations deep-copy instead.
struct ConvLayer {
  ConvParams<double> params;
};
struct BatchNormLayer {
  BatchNormState<double> state;
};
struct ReluLayer {};
/// Adds the output of layer `from` (an earlier layer) to its input.
struct AddLayer {
  std::size_t from = 0;
};
struct PoolLayer {
  PoolKind kind = PoolKind::avg;
};
struct DenseLayer {
  Tensor weight;  // [F, U]
  Tensor bias;    // [U]
};
struct DropoutLayer {
  double rate = 0.0;
};
struct SoftmaxLayer {};

using LayerOp = std::variant<ConvLayer, BatchNormLayer, ReluLayer, AddLayer, PoolLayer, DenseLayer, DropoutLayer,
                             SoftmaxLayer>;

struct Layer {
  std::string name;
  LayerOp op;
  bool trainable = true;

  std::string_view type() const;
  /// Trainable tensors in a fixed order (conv: kernels, bias; bn: gamma,
  /// beta; dense: weight, bias).
  std::vector<Tensor> parameters() const;
  /// parameters() plus batch-norm running mean and variance: everything a
  /// checkpoint stores.
  std::vector<Tensor> state_tensors() const;
};

enum class TrainablePolicy { all, head_only, freeze_first_n };

struct Model {
  BackboneConfig backbone;
  HeadConfig head;
  bool has_head = false;
  std::vector<std::string> class_names;
  std::vector<Layer> layers;
  std::size_t head_begin = 0;  // index of the first head layer, == layers.size() without a head

  Model() = default;
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  std::size_t input_side() const { return backbone.resolution(); }
  std::size_t num_classes() const { return has_head ? head.num_classes : 0; }
  std::vector<bool> trainable_flags() const;

  /// Parameters of layers whose trainable flag matches, in layer order.
  std::vector<Tensor> parameters(bool trainable_only = false) const;
  std::size_t parameter_count() const;
};

/// He-normal conv weights (std sqrt(2 / fan_in)) drawn in layer order from
/// `rng`; zero biases; batch-norm gamma 1, beta 0. The last layer is a ReLU.
Model build_backbone(const BackboneConfig& cfg, RngState rng);

/// Index of the cut point: the last ReLU before the first global pooling
/// layer, or the last ReLU when there is no pooling layer. Throws UsageError
/// when the model has no ReLU.
std::size_t last_activation(const Model& m);

/// Drops every layer after last_activation() and appends
///     pool -> batch_norm -> dense(units) -> dropout -> relu -> dense(K) -> softmax
/// with weights drawn from `rng`. Kept layers are copied bit-exactly.
Model truncate_and_attach_head(const Model& m, const HeadConfig& head, RngState rng,
                               std::vector<std::string> class_names = {});

/// build_backbone followed by truncate_and_attach_head.
Model build_model(const BackboneConfig& backbone, const HeadConfig& head, std::uint64_t seed,
                  std::vector<std::string> class_names = {});

/// all: every layer. head_only: layers from head_begin on. freeze_first_n:
/// the first n layers frozen, the rest trainable. Frozen parameters stop
/// requiring grad; frozen batch-norm layers run in infer mode while training.
void set_trainable(Model& m, TrainablePolicy policy, std::size_t n = 0);

/// Rounds every stored tensor to the nearest float so a checkpoint (32-bit
/// blobs) reproduces the model exactly.
void snap_to_float(Model& m);

/// Train mode uses batch statistics (updating running statistics of
/// trainable batch-norm layers) and dropout masks drawn from `rng`; infer
/// mode is deterministic and ignores `rng`.
Tensor forward(Model& m, const Tensor& batch, Mode mode, RngState rng = RngState{0});

/// Infer-mode forward pass. Does not modify the model.
Tensor infer(const Model& m, const Tensor& batch);

/// Row-wise argmax; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& probs);

struct Prediction {
  std::vector<int> labels;
  std::vector<std::vector<double>> probabilities;
  double elapsed_seconds = 0;
};

/// Preprocesses each image (resize to the model side, sharpen, colour
/// convert, scale) and runs infer-mode forward in batches. cfg.image_size
/// must equal the model input side.
Prediction predict(const Model& m, const std::vector<ImageU8>& images, const PreprocessConfig& cfg,
                   std::size_t batch_size = 32);

/// [N, 3, S, S] tensor from images already prepared at side S.
Tensor stack_images(const std::vector<const ImageU8*>& images);

}  // namespace ftnet
