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

// JSON forms of the configuration structs. Readers start from the struct
// defaults, reject unknown keys and wrong types with UsageError.

#pragma once

#include <json.hpp>

#include <string>

#include "ftnet/image.hpp"
#include "ftnet/model.hpp"
#include "ftnet/train.hpp"
#include "ftnet/vision.hpp"

namespace ftnet {

using Json = nlohmann::ordered_json;

Json to_json(const BackboneConfig& c);
Json to_json(const HeadConfig& c);
Json to_json(const AugmentConfig& c);
Json to_json(const TrainConfig& c);  // without the augment settings

/// `section` names the JSON location in error messages.
BackboneConfig backbone_from_json(const Json& j, const std::string& section = "backbone");
HeadConfig head_from_json(const Json& j, const std::string& section = "head");
AugmentConfig augment_from_json(const Json& j, bool* enabled, const std::string& section = "augment");
/// Leaves `augment` at its default; the augment section is read separately.
TrainConfig train_from_json(const Json& j, const std::string& section = "train");

std::string to_string(PoolKind k);
std::string to_string(ChannelOrder o);
std::string to_string(TrainablePolicy p);
PoolKind parse_pool_kind(const std::string& s);
ChannelOrder parse_channel_order(const std::string& s);
TrainablePolicy parse_policy(const std::string& s);
FillMode parse_fill(const std::string& s);
AugmentMode parse_augment_mode(const std::string& s);

}  // namespace ftnet
