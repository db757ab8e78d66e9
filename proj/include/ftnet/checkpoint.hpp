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

// Checkpoint container:
//
//   offset 0   4 bytes   magic "FTCK"
//   offset 4   4 bytes   header length L, unsigned little-endian
//   offset 8   L bytes   UTF-8 JSON header
//   offset 8+L           parameter blobs, IEEE-754 binary32 little-endian,
//                        concatenated in manifest order
//
// The header carries format_version, the backbone and head configs, class
// names, head_begin, and a layer manifest: per layer its name, type,
// trainable flag, type-specific settings and the list of stored tensors with
// their shapes. Batch-norm layers store gamma, beta, running_mean and
// running_var. The file must end exactly after the last blob.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ftnet/model.hpp"

namespace ftnet {

inline constexpr int kCheckpointVersion = 1;

std::vector<std::uint8_t> checkpoint_bytes(const Model& m);
Model parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& m, const std::filesystem::path& path);
/// Throws DataError on a bad magic, version mismatch, malformed header,
/// truncation or trailing bytes.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace ftnet
