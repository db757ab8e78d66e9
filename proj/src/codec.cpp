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

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ftnet/error.hpp"
#include "ftnet/image.hpp"

namespace ftnet {

ImageU8::ImageU8(std::size_t h, std::size_t w, std::size_t c, ChannelOrder o, std::vector<std::uint8_t> px)
    : height(h), width(w), channels(c), order(o), pixels(std::move(px)) {
  if (h == 0 || w == 0) throw UsageError("image: zero extent");
  if (c != 1 && c != 3) throw UsageError("image: channels must be 1 or 3");
  if ((o == ChannelOrder::gray) != (c == 1)) throw UsageError("image: order tag disagrees with channel count");
  if (pixels.size() != h * w * c) throw UsageError("image: pixel buffer size mismatch");
}

ImageU8::ImageU8(std::size_t h, std::size_t w, std::size_t c, ChannelOrder o)
    : ImageU8(h, w, c, o, std::vector<std::uint8_t>(h * w * c, 0)) {}

namespace {

[[noreturn]] void fail(const char* fmt_name, const std::string& what, std::size_t offset) {
  throw DataError(std::string(fmt_name) + ": " + what + " at offset " + std::to_string(offset));
}

// ---------------------------------------------------------------- PNM

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> b) : bytes_(b) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* name) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1u << 24)) fail("pnm", std::string(name) + " too large", start);
      ++pos_;
    }
    if (pos_ == start) fail("pnm", std::string("expected ") + name, start);
    return v;
  }

  std::size_t pos_ = 2;

 private:
  std::span<const std::uint8_t> bytes_;
};

ImageU8 decode_pnm(std::span<const std::uint8_t> bytes, bool color, ChannelOrder color_order) {
  const char* name = color ? "ppm" : "pgm";
  if (bytes.size() < 2) fail(name, "truncated magic", 0);
  if (bytes[0] != 'P' || bytes[1] != (color ? '6' : '5')) fail(name, "bad magic", 0);
  PnmHeaderReader r(bytes);
  const std::size_t w = r.number("width");
  const std::size_t h = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (w == 0 || h == 0) fail(name, "zero image extent", r.pos_);
  if (maxval == 0 || maxval > 255) fail(name, "only 8-bit maxval is supported", r.pos_);
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) fail(name, "missing header terminator", r.pos_);
  const std::size_t data = r.pos_ + 1;
  const std::size_t c = color ? 3 : 1;
  const std::size_t need = w * h * c;
  if (bytes.size() - data < need) fail(name, "truncated pixel data", bytes.size());
  std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(data),
                               bytes.begin() + static_cast<std::ptrdiff_t>(data + need));
  return ImageU8(h, w, c, color ? color_order : ChannelOrder::gray, std::move(px));
}

// ---------------------------------------------------------------- PNG

constexpr std::array<std::uint8_t, 8> kPngSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

ImageU8 decode_png(std::span<const std::uint8_t> bytes, ChannelOrder color_order) {
  if (bytes.size() < 8 || !std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    fail("png", "bad signature", 0);
  }
  std::size_t pos = 8;
  std::uint32_t width = 0, height = 0;
  int color_type = -1;
  std::vector<std::uint8_t> idat;
  bool seen_end = false;
  while (!seen_end) {
    if (bytes.size() - pos < 12) fail("png", "truncated chunk header", pos);
    const std::uint32_t len = be32(bytes, pos);
    if (len > bytes.size() - pos - 12) fail("png", "truncated chunk", pos);
    const std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
    const std::size_t body = pos + 8;
    const std::uint32_t crc = be32(bytes, body + len);
    const auto actual = static_cast<std::uint32_t>(crc32(0L, bytes.data() + pos + 4, len + 4));
    if (crc != actual) fail("png", "CRC mismatch in " + type + " chunk", pos);
    if (type == "IHDR") {
      if (len != 13) fail("png", "malformed IHDR", pos);
      width = be32(bytes, body);
      height = be32(bytes, body + 4);
      const int depth = bytes[body + 8];
      color_type = bytes[body + 9];
      const int interlace = bytes[body + 12];
      if (width == 0 || height == 0) fail("png", "zero image extent", body);
      if (std::uint64_t{width} * height > (std::uint64_t{1} << 28)) fail("png", "image too large", body);
      if (depth != 8) fail("png", "unsupported bit depth " + std::to_string(depth), body + 8);
      if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6) {
        fail("png", "unsupported color type " + std::to_string(color_type), body + 9);
      }
      if (interlace != 0) fail("png", "interlaced images are not supported", body + 12);
    } else if (type == "IDAT") {
      if (color_type < 0) fail("png", "IDAT before IHDR", pos);
      idat.insert(idat.end(), bytes.begin() + static_cast<std::ptrdiff_t>(body),
                  bytes.begin() + static_cast<std::ptrdiff_t>(body + len));
    } else if (type == "IEND") {
      seen_end = true;
    } else if (std::isupper(static_cast<unsigned char>(type[0]))) {
      fail("png", "unsupported critical chunk " + type, pos);
    }
    pos = body + len + 4;
  }
  if (color_type < 0 || idat.empty()) fail("png", "missing image data", pos);

  const std::size_t src_channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
  const std::size_t stride = width * src_channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw DataError("png: zlib init failed");
  zs.next_in = idat.data();
  zs.avail_in = static_cast<uInt>(idat.size());
  zs.next_out = raw.data();
  zs.avail_out = static_cast<uInt>(raw.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = raw.size() - zs.avail_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != raw.size()) {
    fail("png", "compressed image data is truncated or corrupt", 8);
  }

  // Undo per-scanline filters in place.
  const std::size_t bpp = src_channels;
  std::vector<std::uint8_t> px(stride * height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* in = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* out = px.data() + y * stride;
    const std::uint8_t* up = y ? px.data() + (y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= bpp ? out[i - bpp] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= bpp) ? up[i - bpp] : 0;
      int v = in[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: fail("png", "bad filter type " + std::to_string(filter) + " on row " + std::to_string(y), 8);
      }
      out[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  const std::size_t channels = (color_type == 0 || color_type == 4) ? 1 : 3;
  if (channels == src_channels) {
    return ImageU8(height, width, channels, channels == 3 ? color_order : ChannelOrder::gray, std::move(px));
  }
  // Alpha is dropped.
  ImageU8 img(height, width, channels, channels == 3 ? color_order : ChannelOrder::gray);
  for (std::size_t i = 0; i < std::size_t{width} * height; ++i) {
    for (std::size_t c = 0; c < channels; ++c) img.pixels[i * channels + c] = px[i * src_channels + c];
  }
  return img;
}

}  // namespace

ImageFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".ppm") return ImageFormat::ppm;
  if (ext == ".pgm") return ImageFormat::pgm;
  if (ext == ".png") return ImageFormat::png;
  throw DataError("unsupported image file: " + path.string());
}

bool is_supported_image(const std::filesystem::path& path) {
  try {
    format_from_path(path);
    return true;
  } catch (const DataError&) {
    return false;
  }
}

ImageU8 decode_image(std::span<const std::uint8_t> bytes, ImageFormat hint, ChannelOrder color_order) {
  if (bytes.empty()) throw DataError("decode: empty input at offset 0");
  if (color_order == ChannelOrder::gray) throw UsageError("decode: color order must be rgb or bgr");
  switch (hint) {
    case ImageFormat::ppm: return decode_pnm(bytes, true, color_order);
    case ImageFormat::pgm: return decode_pnm(bytes, false, color_order);
    case ImageFormat::png: return decode_png(bytes, color_order);
  }
  throw UsageError("decode: unknown format");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ImageU8 read_image(const std::filesystem::path& path, ChannelOrder color_order) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_image(bytes, format_from_path(path), color_order);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pnm(const ImageU8& img) {
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_image(const std::filesystem::path& path, const ImageU8& img) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write image: " + path.string());
}

}  // namespace ftnet
