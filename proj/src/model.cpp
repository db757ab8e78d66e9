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

#include "ftnet/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "ftnet/error.hpp"

namespace ftnet {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t round_pos(double v) { return static_cast<std::size_t>(std::llround(v)); }

Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  Tensor::Array v(static_cast<Eigen::Index>(shape_size(shape)));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(sd * rng.normal());
  return Tensor(std::move(shape), std::move(v));
}

Layer make_layer(std::string name, LayerOp op) { return Layer{std::move(name), std::move(op), true}; }

void name_parameters(Layer& layer) {
  std::visit(overloaded{
                 [&](ConvLayer& c) {
                   c.params.kernels.set_name(layer.name + ".kernels");
                   c.params.bias.set_name(layer.name + ".bias");
                 },
                 [&](BatchNormLayer& b) {
                   b.state.gamma.set_name(layer.name + ".gamma");
                   b.state.beta.set_name(layer.name + ".beta");
                   b.state.running_mean.set_name(layer.name + ".running_mean");
                   b.state.running_var.set_name(layer.name + ".running_var");
                 },
                 [&](DenseLayer& d) {
                   d.weight.set_name(layer.name + ".weight");
                   d.bias.set_name(layer.name + ".bias");
                 },
                 [](auto&) {},
             },
             layer.op);
}

Layer deep_copy(const Layer& src) {
  Layer out = src;
  std::visit(overloaded{
                 [](ConvLayer& c) {
                   c.params.kernels = c.params.kernels.clone();
                   c.params.bias = c.params.bias.clone();
                 },
                 [](BatchNormLayer& b) {
                   b.state.gamma = b.state.gamma.clone();
                   b.state.beta = b.state.beta.clone();
                   b.state.running_mean = b.state.running_mean.clone();
                   b.state.running_var = b.state.running_var.clone();
                 },
                 [](DenseLayer& d) {
                   d.weight = d.weight.clone();
                   d.bias = d.bias.clone();
                 },
                 [](auto&) {},
             },
             out.op);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configs

std::size_t BackboneConfig::depth() const {
  return std::max<std::size_t>(1, round_pos(static_cast<double>(base_blocks) * std::pow(kDepthBase, phi)));
}

std::size_t BackboneConfig::width() const {
  return std::max<std::size_t>(1, round_pos(static_cast<double>(base_channels) * std::pow(kWidthBase, phi)));
}

std::size_t BackboneConfig::resolution() const {
  if (phi == 0) return input_side;
  const std::size_t unit = std::size_t{1} << downsamples();
  const std::size_t scaled = round_pos(static_cast<double>(input_side) * std::pow(kResolutionBase, phi));
  return scaled / unit * unit;
}

std::size_t BackboneConfig::block_channels(std::size_t block) const {
  return std::min(width() << (block / 2), 4 * width());
}

void BackboneConfig::validate() const {
  if (base_blocks < 1) throw UsageError("backbone: base_blocks must be at least 1");
  if (base_channels < 4) throw UsageError("backbone: base_channels must be at least 4");
  if (!(phi >= 0) || phi > 8) throw UsageError("backbone: phi must lie in [0, 8]");
  if (depth() > 30) throw UsageError("backbone: scaled depth exceeds 30 blocks");
  const std::size_t unit = std::size_t{1} << downsamples();
  if (input_side == 0 || resolution() == 0) {
    throw UsageError("backbone: resolution must be at least " + std::to_string(unit));
  }
  if (resolution() % unit != 0) {
    throw UsageError("backbone: resolution " + std::to_string(resolution()) + " is not divisible by 2^" +
                     std::to_string(downsamples()));
  }
}

BackboneConfig backbone_preset(std::string_view name, std::size_t input_side) {
  struct Preset {
    std::size_t blocks, channels;
    double phi;
    bool skips;
  };
  static const std::map<std::string, Preset, std::less<>> presets{
      {"xception", {4, 8, 0.0, false}},        {"inception_resnet_v2", {6, 8, 0.0, true}},
      {"resnet50", {5, 8, 0.0, true}},         {"resnet50v2", {5, 12, 0.0, true}},
      {"efficientnet_b0", {4, 8, 0.0, true}}, {"efficientnet_b4", {4, 8, 2.0, true}},
  };
  const auto it = presets.find(name);
  if (it == presets.end()) throw UsageError("unknown backbone preset '" + std::string(name) + "'");
  BackboneConfig c;
  c.base_blocks = it->second.blocks;
  c.base_channels = it->second.channels;
  c.phi = it->second.phi;
  c.skip_connections = it->second.skips;
  c.input_side = input_side;
  return c;
}

std::vector<std::string> backbone_preset_names() {
  return {"efficientnet_b0", "efficientnet_b4", "inception_resnet_v2", "resnet50", "resnet50v2", "xception"};
}

void HeadConfig::validate() const {
  if (dense_units < 1) throw UsageError("head: dense_units must be positive");
  if (!(dropout_rate >= 0) || dropout_rate >= 1) throw UsageError("head: dropout_rate must lie in [0, 1)");
  if (num_classes < 2) throw UsageError("head: num_classes must be at least 2");
}

// ---------------------------------------------------------------------------
// Layers and model

std::string_view Layer::type() const {
  return std::visit(overloaded{
                        [](const ConvLayer&) { return std::string_view("conv2d"); },
                        [](const BatchNormLayer&) { return std::string_view("batch_norm"); },
                        [](const ReluLayer&) { return std::string_view("relu"); },
                        [](const AddLayer&) { return std::string_view("add"); },
                        [](const PoolLayer&) { return std::string_view("global_pool"); },
                        [](const DenseLayer&) { return std::string_view("dense"); },
                        [](const DropoutLayer&) { return std::string_view("dropout"); },
                        [](const SoftmaxLayer&) { return std::string_view("softmax"); },
                    },
                    op);
}

std::vector<Tensor> Layer::parameters() const {
  return std::visit(overloaded{
                        [](const ConvLayer& c) { return std::vector<Tensor>{c.params.kernels, c.params.bias}; },
                        [](const BatchNormLayer& b) { return std::vector<Tensor>{b.state.gamma, b.state.beta}; },
                        [](const DenseLayer& d) { return std::vector<Tensor>{d.weight, d.bias}; },
                        [](const auto&) { return std::vector<Tensor>{}; },
                    },
                    op);
}

std::vector<Tensor> Layer::state_tensors() const {
  auto out = parameters();
  if (const auto* b = std::get_if<BatchNormLayer>(&op)) {
    out.push_back(b->state.running_mean);
    out.push_back(b->state.running_var);
  }
  return out;
}

Model::Model(const Model& other)
    : backbone(other.backbone),
      head(other.head),
      has_head(other.has_head),
      class_names(other.class_names),
      head_begin(other.head_begin) {
  layers.reserve(other.layers.size());
  for (const auto& l : other.layers) layers.push_back(deep_copy(l));
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

std::vector<bool> Model::trainable_flags() const {
  std::vector<bool> out;
  for (const auto& l : layers) out.push_back(l.trainable);
  return out;
}

std::vector<Tensor> Model::parameters(bool trainable_only) const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    if (trainable_only && !l.trainable) continue;
    for (auto& p : l.parameters()) out.push_back(p);
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

Model build_backbone(const BackboneConfig& cfg, RngState rng_state) {
  cfg.validate();
  Rng rng(rng_state);
  Model m;
  m.backbone = cfg;
  std::size_t in_ch = 3;
  std::size_t prev_relu = 0;
  for (std::size_t b = 0; b < cfg.depth(); ++b) {
    const std::string prefix = "block" + std::to_string(b);
    const std::size_t out_ch = cfg.block_channels(b);
    const std::size_t stride = b % 2 == 0 ? 2 : 1;

    ConvLayer conv;
    conv.params.kernels = he_normal({out_ch, in_ch, 3, 3}, in_ch * 9, rng).set_requires_grad(true);
    conv.params.bias = Tensor({out_ch}, 0.0).set_requires_grad(true);
    conv.params.stride = stride;
    conv.params.padding = Padding::same;
    m.layers.push_back(make_layer(prefix + ".conv", std::move(conv)));

    BatchNormLayer bn{BatchNormState<double>::fresh(out_ch)};
    bn.state.gamma.set_requires_grad(true);
    bn.state.beta.set_requires_grad(true);
    m.layers.push_back(make_layer(prefix + ".bn", std::move(bn)));

    if (cfg.skip_connections && stride == 1 && in_ch == out_ch && b > 0) {
      m.layers.push_back(make_layer(prefix + ".add", AddLayer{prev_relu}));
    }
    m.layers.push_back(make_layer(prefix + ".relu", ReluLayer{}));
    prev_relu = m.layers.size() - 1;
    in_ch = out_ch;
  }
  for (auto& l : m.layers) name_parameters(l);
  m.head_begin = m.layers.size();
  return m;
}

std::size_t last_activation(const Model& m) {
  std::size_t limit = m.layers.size();
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (std::holds_alternative<PoolLayer>(m.layers[i].op)) {
      limit = i;
      break;
    }
  }
  for (std::size_t i = limit; i-- > 0;) {
    if (std::holds_alternative<ReluLayer>(m.layers[i].op)) return i;
  }
  throw UsageError("truncate: model has no activation layer before pooling");
}

namespace {

std::size_t output_channels(const Model& m, std::size_t upto) {
  for (std::size_t i = upto + 1; i-- > 0;) {
    if (const auto* c = std::get_if<ConvLayer>(&m.layers[i].op)) return c->params.out_channels();
  }
  throw UsageError("truncate: no convolution before the cut point");
}

}  // namespace

Model truncate_and_attach_head(const Model& src, const HeadConfig& head, RngState rng_state,
                               std::vector<std::string> class_names) {
  head.validate();
  if (!class_names.empty() && class_names.size() != head.num_classes) {
    throw UsageError("head: " + std::to_string(class_names.size()) + " class names for " +
                     std::to_string(head.num_classes) + " classes");
  }
  const std::size_t cut = last_activation(src);
  const std::size_t features = output_channels(src, cut);

  Model m;
  m.backbone = src.backbone;
  m.head = head;
  m.has_head = true;
  m.class_names = std::move(class_names);
  for (std::size_t i = 0; i <= cut; ++i) m.layers.push_back(deep_copy(src.layers[i]));
  m.head_begin = m.layers.size();

  Rng rng(rng_state);
  m.layers.push_back(make_layer("head.pool", PoolLayer{head.pooling}));
  BatchNormLayer bn{BatchNormState<double>::fresh(features)};
  bn.state.gamma.set_requires_grad(true);
  bn.state.beta.set_requires_grad(true);
  m.layers.push_back(make_layer("head.bn", std::move(bn)));
  DenseLayer hidden{he_normal({features, head.dense_units}, features, rng).set_requires_grad(true),
                    Tensor({head.dense_units}, 0.0).set_requires_grad(true)};
  m.layers.push_back(make_layer("head.dense", std::move(hidden)));
  m.layers.push_back(make_layer("head.dropout", DropoutLayer{head.dropout_rate}));
  m.layers.push_back(make_layer("head.relu", ReluLayer{}));
  DenseLayer classifier{he_normal({head.dense_units, head.num_classes}, head.dense_units, rng).set_requires_grad(true),
                        Tensor({head.num_classes}, 0.0).set_requires_grad(true)};
  m.layers.push_back(make_layer("head.classifier", std::move(classifier)));
  m.layers.push_back(make_layer("head.softmax", SoftmaxLayer{}));
  for (std::size_t i = m.head_begin; i < m.layers.size(); ++i) name_parameters(m.layers[i]);
  return m;
}

Model build_model(const BackboneConfig& backbone, const HeadConfig& head, std::uint64_t seed,
                  std::vector<std::string> class_names) {
  const Model base = build_backbone(backbone, derive(Stream::init, seed, 0, 0));
  return truncate_and_attach_head(base, head, derive(Stream::init, seed, 0, 1), std::move(class_names));
}

void set_trainable(Model& m, TrainablePolicy policy, std::size_t n) {
  if (policy == TrainablePolicy::freeze_first_n && n > m.layers.size()) {
    throw UsageError("set_trainable: cannot freeze " + std::to_string(n) + " of " +
                     std::to_string(m.layers.size()) + " layers");
  }
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    bool on = true;
    if (policy == TrainablePolicy::head_only) on = i >= m.head_begin;
    if (policy == TrainablePolicy::freeze_first_n) on = i >= n;
    m.layers[i].trainable = on;
    for (auto& p : m.layers[i].parameters()) {
      p.set_requires_grad(on);
      if (!on) p.zero_grad();
    }
  }
}

void snap_to_float(Model& m) {
  for (const auto& l : m.layers) {
    for (auto t : l.state_tensors()) {
      auto& v = t.mutable_values();
      v = v.cast<float>().cast<double>();
    }
  }
}

namespace {

Tensor run_layers(Model& m, const Tensor& batch, Mode mode, RngState rng) {
  const std::size_t side = m.input_side();
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != side || batch.dim(3) != side) {
    throw ShapeError("forward: expected [N,3," + std::to_string(side) + "," + std::to_string(side) + "], got " +
                     shape_str(batch.shape()));
  }
  std::vector<Tensor> outputs;
  outputs.reserve(m.layers.size());
  Tensor x = batch;
  for (auto& layer : m.layers) {
    const Mode layer_mode = layer.trainable ? mode : Mode::infer;
    x = std::visit(overloaded{
                       [&](ConvLayer& c) { return conv2d(x, c.params); },
                       [&](BatchNormLayer& b) { return batch_norm(x, b.state, layer_mode); },
                       [&](ReluLayer&) { return relu(x); },
                       [&](AddLayer& a) { return x + outputs.at(a.from); },
                       [&](PoolLayer& p) { return global_pool(x, p.kind); },
                       [&](DenseLayer& d) { return dense(x, d.weight, d.bias); },
                       [&](DropoutLayer& d) {
                         auto [y, next] = ftnet::dropout(x, d.rate, mode, rng);
                         rng = next;
                         return y;
                       },
                       [&](SoftmaxLayer&) { return softmax(x); },
                   },
                   layer.op);
    outputs.push_back(x);
  }
  return x;
}

}  // namespace

Tensor forward(Model& m, const Tensor& batch, Mode mode, RngState rng) { return run_layers(m, batch, mode, rng); }

Tensor infer(const Model& m, const Tensor& batch) {
  NoGradGuard guard;
  // Infer mode never writes batch-norm state, so the const_cast is safe.
  return run_layers(const_cast<Model&>(m), batch, Mode::infer, RngState{0});
}

std::vector<int> argmax_rows(const Tensor& probs) {
  if (probs.rank() != 2) throw ShapeError("argmax_rows: expected [N,K], got " + shape_str(probs.shape()));
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  std::vector<int> out(N);
  for (std::size_t r = 0; r < N; ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (probs[r * K + k] > probs[r * K + best]) best = k;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

Tensor stack_images(const std::vector<const ImageU8*>& images) {
  if (images.empty()) throw UsageError("stack_images: empty batch");
  const std::size_t H = images[0]->height, W = images[0]->width;
  const std::size_t plane = H * W;
  Tensor::Array v(static_cast<Eigen::Index>(images.size() * 3 * plane));
  for (std::size_t n = 0; n < images.size(); ++n) {
    const ImageU8& img = *images[n];
    if (img.height != H || img.width != W) throw ShapeError("stack_images: images differ in size");
    const Tensor t = scale_to_unit(img, 3);
    v.segment(static_cast<Eigen::Index>(n * 3 * plane), static_cast<Eigen::Index>(3 * plane)) = t.values();
  }
  return Tensor({images.size(), 3, H, W}, std::move(v));
}

Prediction predict(const Model& m, const std::vector<ImageU8>& images, const PreprocessConfig& cfg,
                   std::size_t batch_size) {
  if (cfg.image_size != m.input_side()) {
    throw UsageError("predict: pipeline side " + std::to_string(cfg.image_size) + " differs from model side " +
                     std::to_string(m.input_side()));
  }
  if (!m.has_head) throw UsageError("predict: model has no classification head");
  if (batch_size == 0) throw UsageError("predict: batch size must be positive");
  const auto start = std::chrono::steady_clock::now();
  Prediction out;
  for (std::size_t begin = 0; begin < images.size(); begin += batch_size) {
    const std::size_t end = std::min(images.size(), begin + batch_size);
    std::vector<ImageU8> prepared;
    prepared.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) prepared.push_back(prepare_image(images[i], cfg));
    std::vector<const ImageU8*> ptrs;
    for (const auto& p : prepared) ptrs.push_back(&p);
    const Tensor probs = infer(m, stack_images(ptrs));
    const auto labels = argmax_rows(probs);
    const std::size_t K = probs.dim(1);
    for (std::size_t r = 0; r < labels.size(); ++r) {
      out.labels.push_back(labels[r]);
      out.probabilities.emplace_back(probs.values().data() + r * K, probs.values().data() + (r + 1) * K);
    }
  }
  out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace ftnet
