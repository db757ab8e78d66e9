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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ftnet {

enum class ChannelOrder { rgb, bgr, gray };

/// 8-bit raster, row-major, channels interleaved.
struct ImageU8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  ChannelOrder order = ChannelOrder::gray;
  std::vector<std::uint8_t> pixels;

  ImageU8() = default;
  /// Throws UsageError when the invariants (size, gray iff 1 channel) fail.
  ImageU8(std::size_t h, std::size_t w, std::size_t c, ChannelOrder o, std::vector<std::uint8_t> px);
  ImageU8(std::size_t h, std::size_t w, std::size_t c, ChannelOrder o);

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }

  friend bool operator==(const ImageU8&, const ImageU8&) = default;
};

enum class ImageFormat { ppm, pgm, png };

/// Format implied by a file extension (.ppm, .pgm, .png; case-insensitive).
/// Throws DataError for anything else.
ImageFormat format_from_path(const std::filesystem::path& path);
bool is_supported_image(const std::filesystem::path& path);

/// Decodes binary PPM (P6), PGM (P5) or 8-bit non-interlaced PNG.
/// Three-channel results are tagged `color_order` (the caller declares the
/// source corpus convention). Errors are DataError naming the byte offset.
ImageU8 decode_image(std::span<const std::uint8_t> bytes, ImageFormat hint,
                     ChannelOrder color_order = ChannelOrder::rgb);

ImageU8 read_image(const std::filesystem::path& path, ChannelOrder color_order = ChannelOrder::rgb);

/// Binary P6 for 3 channels, P5 for 1, maxval 255.
std::vector<std::uint8_t> encode_pnm(const ImageU8& img);

void write_image(const std::filesystem::path& path, const ImageU8& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace ftnet
