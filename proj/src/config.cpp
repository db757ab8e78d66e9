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

#include "ftnet/config.hpp"

#include <functional>
#include <map>

#include "ftnet/error.hpp"

namespace ftnet {

namespace {

// Walks the keys of an object section, dispatching each to its handler.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j.is_object()) throw UsageError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  Section& get(const char* key, T& out) {
    handlers_[key] = [this, key, &out](const Json& v) {
      try {
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw UsageError("");
        } else if constexpr (std::is_integral_v<T>) {
          if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) throw UsageError("");
        } else if constexpr (std::is_floating_point_v<T>) {
          if (!v.is_number()) throw UsageError("");
        } else {
          if (!v.is_string()) throw UsageError("");
        }
        out = v.get<T>();
      } catch (const std::exception&) {
        throw UsageError("config: '" + name_ + "." + key + "' has the wrong type");
      }
    };
    return *this;
  }

  Section& custom(const char* key, std::function<void(const Json&)> fn) {
    handlers_[key] = [this, key, fn](const Json& v) {
      try {
        fn(v);
      } catch (const UsageError&) {
        throw;
      } catch (const std::exception&) {
        throw UsageError("config: '" + name_ + "." + key + "' has the wrong type");
      }
    };
    return *this;
  }

  void run() {
    for (const auto& [key, value] : j_.items()) {
      const auto it = handlers_.find(key);
      if (it == handlers_.end()) throw UsageError("config: unknown key '" + name_ + "." + key + "'");
      it->second(value);
    }
  }

 private:
  const Json& j_;
  std::string name_;
  std::map<std::string, std::function<void(const Json&)>> handlers_;
};

template <typename E>
E lookup(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  std::string names;
  for (const auto& [name, value] : table) {
    if (s == name) return value;
    names += names.empty() ? name : std::string("|") + name;
  }
  throw UsageError("unknown " + std::string(what) + " '" + s + "' (expected " + names + ")");
}

}  // namespace

std::string to_string(PoolKind k) { return k == PoolKind::avg ? "avg" : "max"; }
std::string to_string(ChannelOrder o) {
  return o == ChannelOrder::rgb ? "rgb" : o == ChannelOrder::bgr ? "bgr" : "gray";
}
std::string to_string(TrainablePolicy p) {
  return p == TrainablePolicy::all ? "all" : p == TrainablePolicy::head_only ? "head_only" : "freeze_first_n";
}

PoolKind parse_pool_kind(const std::string& s) {
  return lookup<PoolKind>(s, {{"avg", PoolKind::avg}, {"max", PoolKind::max}}, "pooling");
}
ChannelOrder parse_channel_order(const std::string& s) {
  return lookup<ChannelOrder>(s, {{"rgb", ChannelOrder::rgb}, {"bgr", ChannelOrder::bgr}}, "channel order");
}
TrainablePolicy parse_policy(const std::string& s) {
  return lookup<TrainablePolicy>(s,
                                 {{"all", TrainablePolicy::all},
                                  {"head_only", TrainablePolicy::head_only},
                                  {"freeze_first_n", TrainablePolicy::freeze_first_n}},
                                 "trainable policy");
}
FillMode parse_fill(const std::string& s) {
  return lookup<FillMode>(s, {{"zero", FillMode::zero}, {"edge", FillMode::edge}}, "fill mode");
}
AugmentMode parse_augment_mode(const std::string& s) {
  return lookup<AugmentMode>(s, {{"compose", AugmentMode::compose}, {"pick_one", AugmentMode::pick_one}},
                             "augment mode");
}

Json to_json(const BackboneConfig& c) {
  return Json{{"base_blocks", c.base_blocks},
              {"base_channels", c.base_channels},
              {"phi", c.phi},
              {"input_side", c.input_side},
              {"skip_connections", c.skip_connections}};
}

Json to_json(const HeadConfig& c) {
  return Json{{"pooling", to_string(c.pooling)},
              {"dense_units", c.dense_units},
              {"dropout_rate", c.dropout_rate},
              {"num_classes", c.num_classes}};
}

Json to_json(const AugmentConfig& c) {
  return Json{{"rotation_deg", c.rotation_deg},
              {"zoom_min", c.zoom_min},
              {"zoom_max", c.zoom_max},
              {"shear_deg", c.shear_deg},
              {"flip_prob", c.flip_prob},
              {"op_weights", c.op_weights},
              {"mode", c.mode == AugmentMode::compose ? "compose" : "pick_one"},
              {"fill", c.fill == FillMode::zero ? "zero" : "edge"}};
}

Json to_json(const TrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"seed", c.seed},
              {"trainable", to_string(c.policy)},
              {"freeze_first_n", c.freeze_first_n},
              {"workers", c.workers}};
}

BackboneConfig backbone_from_json(const Json& j, const std::string& section) {
  BackboneConfig c;
  if (j.is_string()) return backbone_preset(j.get<std::string>(), c.input_side);
  std::string preset;
  bool has_input_side = false;
  Section s(j, section);
  s.custom("preset", [&](const Json& v) { preset = v.get<std::string>(); });
  s.get("base_blocks", c.base_blocks).get("base_channels", c.base_channels).get("phi", c.phi);
  s.custom("input_side", [&](const Json& v) {
    if (!v.is_number_integer() || v.get<long long>() <= 0) throw UsageError("config: input_side must be positive");
    c.input_side = v.get<std::size_t>();
    has_input_side = true;
  });
  s.get("skip_connections", c.skip_connections);
  s.run();
  if (!preset.empty()) {
    // A preset fixes the architecture; only the input side may accompany it.
    for (const auto& [key, value] : j.items()) {
      if (key != "preset" && key != "input_side") {
        throw UsageError("config: '" + section + "." + key + "' cannot be combined with a preset");
      }
    }
    const auto side = has_input_side ? c.input_side : BackboneConfig{}.input_side;
    c = backbone_preset(preset, side);
  }
  c.validate();
  return c;
}

HeadConfig head_from_json(const Json& j, const std::string& section) {
  HeadConfig c;
  Section s(j, section);
  s.custom("pooling", [&](const Json& v) { c.pooling = parse_pool_kind(v.get<std::string>()); });
  s.get("dense_units", c.dense_units).get("dropout_rate", c.dropout_rate).get("num_classes", c.num_classes);
  s.run();
  c.validate();
  return c;
}

AugmentConfig augment_from_json(const Json& j, bool* enabled, const std::string& section) {
  AugmentConfig c;
  bool on = true;
  Section s(j, section);
  s.get("enabled", on)
      .get("rotation_deg", c.rotation_deg)
      .get("zoom_min", c.zoom_min)
      .get("zoom_max", c.zoom_max)
      .get("shear_deg", c.shear_deg)
      .get("flip_prob", c.flip_prob);
  s.custom("op_weights", [&](const Json& v) {
    if (!v.is_array() || v.size() != 4) throw UsageError("config: '" + section + ".op_weights' needs 4 numbers");
    for (std::size_t i = 0; i < 4; ++i) c.op_weights[i] = v.at(i).get<double>();
  });
  s.custom("mode", [&](const Json& v) { c.mode = parse_augment_mode(v.get<std::string>()); });
  s.custom("fill", [&](const Json& v) { c.fill = parse_fill(v.get<std::string>()); });
  s.run();
  c.validate();
  if (enabled) *enabled = on;
  return c;
}

TrainConfig train_from_json(const Json& j, const std::string& section) {
  TrainConfig c;
  Section s(j, section);
  s.get("epochs", c.epochs).get("batch_size", c.batch_size).get("lr", c.lr).get("seed", c.seed);
  s.custom("trainable", [&](const Json& v) { c.policy = parse_policy(v.get<std::string>()); });
  s.get("freeze_first_n", c.freeze_first_n).get("workers", c.workers);
  s.run();
  c.validate();
  return c;
}

}  // namespace ftnet
