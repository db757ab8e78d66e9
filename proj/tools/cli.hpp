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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ftnet/config.hpp"
#include "ftnet/dataset.hpp"
#include "ftnet/model.hpp"
#include "ftnet/train.hpp"

namespace ftnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Parsed run configuration. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
  std::filesystem::path root;         // data.root: training (target) data
  std::filesystem::path source_root;  // data.source_root: pretraining data, finetune only
  ChannelOrder source_channel_order = ChannelOrder::rgb;
  SplitRatios ratios;
  BackboneConfig backbone;
  HeadConfig head;
  bool head_classes_set = false;
  TrainConfig train;
  std::optional<std::uint64_t> config_seed;  // train.seed when the file sets it
  std::filesystem::path output;
};

/// `base_dir` resolves relative paths. Throws UsageError on unknown keys,
/// wrong types or invalid values.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Seed precedence: flag, then FF_SEED, then the config, then 1000.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config);

/// Runs one subcommand. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ftnet::cli
