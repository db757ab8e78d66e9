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

#include "ftnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ftnet/config.hpp"
#include "ftnet/error.hpp"

namespace ftnet {

namespace {

constexpr char kMagic[4] = {'F', 'T', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

std::vector<std::string> tensor_names(const Layer& l) {
  if (std::holds_alternative<ConvLayer>(l.op)) return {"kernels", "bias"};
  if (std::holds_alternative<BatchNormLayer>(l.op)) return {"gamma", "beta", "running_mean", "running_var"};
  if (std::holds_alternative<DenseLayer>(l.op)) return {"weight", "bias"};
  return {};
}

Json layer_manifest(const Layer& l) {
  Json j{{"name", l.name}, {"type", std::string(l.type())}, {"trainable", l.trainable}};
  if (const auto* c = std::get_if<ConvLayer>(&l.op)) {
    j["stride"] = c->params.stride;
    j["padding"] = c->params.padding == Padding::same ? "same" : "valid";
  } else if (const auto* b = std::get_if<BatchNormLayer>(&l.op)) {
    j["momentum"] = b->state.momentum;
    j["eps"] = b->state.eps;
  } else if (const auto* a = std::get_if<AddLayer>(&l.op)) {
    j["from"] = a->from;
  } else if (const auto* p = std::get_if<PoolLayer>(&l.op)) {
    j["kind"] = to_string(p->kind);
  } else if (const auto* d = std::get_if<DropoutLayer>(&l.op)) {
    j["rate"] = d->rate;
  }
  Json tensors = Json::array();
  const auto names = tensor_names(l);
  const auto values = l.state_tensors();
  for (std::size_t i = 0; i < names.size(); ++i) tensors.push_back({{"name", names[i]}, {"shape", values[i].shape()}});
  j["tensors"] = tensors;
  return j;
}

[[noreturn]] void bad(const std::string& what) { throw DataError("checkpoint: " + what); }

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const Model& m) {
  Json layers = Json::array();
  for (const auto& l : m.layers) layers.push_back(layer_manifest(l));
  Json header{{"format", "ftnet-checkpoint"},
              {"format_version", kCheckpointVersion},
              {"backbone", to_json(m.backbone)},
              {"has_head", m.has_head},
              {"head", to_json(m.head)},
              {"class_names", m.class_names},
              {"head_begin", m.head_begin},
              {"layers", layers}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& l : m.layers) {
    for (const auto& t : l.state_tensors()) {
      for (Eigen::Index i = 0; i < t.values().size(); ++i) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(t.values()[i])));
      }
    }
  }
  return out;
}

Model parse_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) bad("truncated before the header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) bad("bad magic (not an ftnet checkpoint)");
  const std::uint32_t header_len = get_u32(bytes.data() + 4);
  if (bytes.size() - 8 < header_len) bad("truncated inside the header");

  Json h;
  try {
    h = Json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const std::exception& e) {
    bad(std::string("malformed header: ") + e.what());
  }
  try {
    if (h.value("format", std::string()) != "ftnet-checkpoint") bad("header is not an ftnet checkpoint");
    const int version = h.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      bad("unsupported format_version " + std::to_string(version) + " (this build reads version " +
          std::to_string(kCheckpointVersion) + ")");
    }

    Model m;
    m.backbone = backbone_from_json(h.at("backbone"), "checkpoint.backbone");
    m.has_head = h.at("has_head").get<bool>();
    m.head = head_from_json(h.at("head"), "checkpoint.head");
    m.class_names = h.at("class_names").get<std::vector<std::string>>();
    m.head_begin = h.at("head_begin").get<std::size_t>();

    std::size_t offset = 8 + header_len;
    auto read_tensor = [&](const Json& spec) {
      const auto shape = spec.at("shape").get<Shape>();
      const std::size_t n = shape_size(shape);
      if ((bytes.size() - offset) / 4 < n) bad("truncated parameter blob");
      Tensor::Array v(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        v[static_cast<Eigen::Index>(i)] = std::bit_cast<float>(get_u32(bytes.data() + offset + 4 * i));
      }
      offset += 4 * n;
      return Tensor(shape, std::move(v));
    };

    for (const auto& lj : h.at("layers")) {
      Layer l;
      l.name = lj.at("name").get<std::string>();
      l.trainable = lj.at("trainable").get<bool>();
      const auto type = lj.at("type").get<std::string>();
      const auto& specs = lj.at("tensors");
      std::vector<Tensor> ts;
      for (const auto& s : specs) ts.push_back(read_tensor(s));
      auto expect = [&](std::size_t n) {
        if (ts.size() != n) bad("layer " + l.name + " lists " + std::to_string(ts.size()) + " tensors");
      };
      if (type == "conv2d") {
        expect(2);
        ConvLayer c;
        c.params.kernels = ts[0];
        c.params.bias = ts[1];
        c.params.stride = lj.at("stride").get<std::size_t>();
        c.params.padding = lj.at("padding").get<std::string>() == "valid" ? Padding::valid : Padding::same;
        l.op = std::move(c);
      } else if (type == "batch_norm") {
        expect(4);
        BatchNormLayer b{{ts[0], ts[1], ts[2], ts[3], lj.at("momentum").get<double>(), lj.at("eps").get<double>()}};
        l.op = std::move(b);
      } else if (type == "dense") {
        expect(2);
        l.op = DenseLayer{ts[0], ts[1]};
      } else {
        expect(0);
        if (type == "relu") {
          l.op = ReluLayer{};
        } else if (type == "add") {
          const auto from = lj.at("from").get<std::size_t>();
          if (from >= m.layers.size()) bad("layer " + l.name + " adds a later layer");
          l.op = AddLayer{from};
        } else if (type == "global_pool") {
          l.op = PoolLayer{parse_pool_kind(lj.at("kind").get<std::string>())};
        } else if (type == "dropout") {
          l.op = DropoutLayer{lj.at("rate").get<double>()};
        } else if (type == "softmax") {
          l.op = SoftmaxLayer{};
        } else {
          bad("unknown layer type '" + type + "'");
        }
      }
      const auto names = tensor_names(l);
      const auto params = l.parameters();
      for (std::size_t i = 0; i < ts.size(); ++i) ts[i].set_name(l.name + "." + names[i]);
      for (auto p : params) p.set_requires_grad(l.trainable);
      m.layers.push_back(std::move(l));
    }
    if (offset != bytes.size()) {
      bad(std::to_string(bytes.size() - offset) + " trailing bytes after the last parameter blob");
    }
    if (m.head_begin > m.layers.size()) bad("head_begin beyond the layer list");
    return m;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    bad(std::string("malformed header: ") + e.what());
  }
}

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  const auto bytes = checkpoint_bytes(m);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace ftnet
