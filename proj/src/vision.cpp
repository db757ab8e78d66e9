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

#include "ftnet/vision.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

#include "ftnet/error.hpp"

namespace ftnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint8_t round_u8(double v) {
  // Inputs are never negative beyond rounding noise; floor(v + 0.5) is
  // half-away-from-zero on the clamped range.
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

struct Taps {
  std::size_t lo, hi;
  double frac;
};

Taps half_pixel_taps(std::size_t dst, std::size_t in, std::size_t out) {
  double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in - 1));
  const auto lo = static_cast<std::size_t>(std::floor(src));
  return {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
}

}  // namespace

ImageU8 resize_bilinear(const ImageU8& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw UsageError("resize: target extents must be positive");
  ImageU8 out(out_h, out_w, img.channels, img.order);
  std::vector<Taps> xs(out_w);
  for (std::size_t x = 0; x < out_w; ++x) xs[x] = half_pixel_taps(x, img.width, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const Taps ty = half_pixel_taps(y, img.height, out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const Taps& tx = xs[x];
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = (1 - tx.frac) * img.at(ty.lo, tx.lo, c) + tx.frac * img.at(ty.lo, tx.hi, c);
        const double bot = (1 - tx.frac) * img.at(ty.hi, tx.lo, c) + tx.frac * img.at(ty.hi, tx.hi, c);
        out.at(y, x, c) = round_u8((1 - ty.frac) * top + ty.frac * bot);
      }
    }
  }
  return out;
}

ImageU8 sharpen(const ImageU8& img) {
  ImageU8 out(img.height, img.width, img.channels, img.order);
  const auto H = static_cast<std::ptrdiff_t>(img.height);
  const auto W = static_cast<std::ptrdiff_t>(img.width);
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x, std::size_t c) -> int {
    return img.at(static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y, 0, H - 1)),
                  static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x, 0, W - 1)), c);
  };
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        const int v = 5 * px(y, x, c) - px(y - 1, x, c) - px(y + 1, x, c) - px(y, x - 1, c) - px(y, x + 1, c);
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
            static_cast<std::uint8_t>(std::clamp(v, 0, 255));
      }
    }
  }
  return out;
}

ImageU8 bgr_to_rgb(const ImageU8& img) {
  if (img.channels != 3 || img.order != ChannelOrder::bgr) {
    throw UsageError("bgr_to_rgb: input must be a 3-channel BGR image");
  }
  ImageU8 out = img;
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) std::swap(out.pixels[i], out.pixels[i + 2]);
  out.order = ChannelOrder::rgb;
  return out;
}

Tensor scale_to_unit(const ImageU8& img, std::size_t channels) {
  if (channels != img.channels && !(img.channels == 1 && channels == 3)) {
    throw UsageError("scale_to_unit: cannot map " + std::to_string(img.channels) + " channels to " +
                     std::to_string(channels));
  }
  const std::size_t plane = img.height * img.width;
  Tensor::Array v(static_cast<Eigen::Index>(channels * plane));
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t src_c = img.channels == 1 ? 0 : c;
    for (std::size_t i = 0; i < plane; ++i) {
      v[static_cast<Eigen::Index>(c * plane + i)] = img.pixels[i * img.channels + src_c] / 255.0;
    }
  }
  return Tensor({channels, img.height, img.width}, std::move(v));
}

ImageU8 prepare_image(const ImageU8& img, const PreprocessConfig& cfg) {
  ImageU8 out = sharpen(resize_bilinear(img, cfg.image_size, cfg.image_size));
  if (out.order == ChannelOrder::bgr) out = bgr_to_rgb(out);
  return out;
}

Tensor preprocess(const ImageU8& img, const PreprocessConfig& cfg) {
  return scale_to_unit(prepare_image(img, cfg), 3);
}

// ---------------------------------------------------------------------------

AffineSpec make_affine(double rotation_deg, double zoom, double shear_deg, bool flip_h, std::size_t height,
                       std::size_t width, FillMode fill) {
  if (!(zoom > 0)) throw UsageError("augment: zoom factor must be positive");
  const double th = rotation_deg * kPi / 180.0;
  const double sh = shear_deg * kPi / 180.0;
  Eigen::Matrix2d rot;
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Eigen::Matrix2d shear;
  shear << 1.0, std::tan(sh), 0.0, 1.0;
  const Eigen::Matrix2d forward = rot * shear * (zoom * Eigen::Matrix2d::Identity());
  if (std::abs(forward.determinant()) <= 1e-9) throw UsageError("augment: degenerate transform");
  const Eigen::Matrix2d inverse = forward.inverse();
  const Eigen::Vector2d center((static_cast<double>(width) - 1) / 2.0, (static_cast<double>(height) - 1) / 2.0);
  AffineSpec spec;
  spec.matrix.leftCols<2>() = inverse;
  spec.matrix.col(2) = center - inverse * center;
  spec.flip_h = flip_h;
  spec.fill = fill;
  return spec;
}

void AugmentConfig::validate() const {
  if (!(rotation_deg >= 0) || !(shear_deg >= 0) || shear_deg >= 90) {
    throw UsageError("augment: rotation and shear ranges must be symmetric magnitudes (shear < 90)");
  }
  if (!(zoom_min > 0) || !(zoom_min <= 1.0) || !(zoom_max >= 1.0)) {
    throw UsageError("augment: zoom range must be positive and contain 1");
  }
  if (!(flip_prob >= 0) || flip_prob > 1) throw UsageError("augment: flip probability must lie in [0, 1]");
  if (!(op_weights[0] > 0) || std::any_of(op_weights.begin(), op_weights.end(),
                                          [&](double w) { return w != op_weights[0]; })) {
    throw UsageError("augment: operation weights must be equal and positive");
  }
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig c;
  c.rotation_deg = 0;
  c.zoom_min = c.zoom_max = 1.0;
  c.shear_deg = 0;
  c.flip_prob = 0;
  return c;
}

std::pair<AffineSpec, RngState> sample_augmentation(const AugmentConfig& cfg, RngState rng, std::size_t height,
                                                    std::size_t width) {
  cfg.validate();
  Rng gen(rng);
  double rotation = 0, zoom = 1, shear = 0;
  bool flip = false;
  if (cfg.mode == AugmentMode::compose) {
    rotation = gen.uniform(-cfg.rotation_deg, cfg.rotation_deg);
    zoom = gen.uniform(cfg.zoom_min, cfg.zoom_max);
    shear = gen.uniform(-cfg.shear_deg, cfg.shear_deg);
    flip = gen.uniform() < cfg.flip_prob;
  } else {
    switch (gen.below(4)) {
      case 0: rotation = gen.uniform(-cfg.rotation_deg, cfg.rotation_deg); break;
      case 1: flip = gen.uniform() < cfg.flip_prob; break;
      case 2: shear = gen.uniform(-cfg.shear_deg, cfg.shear_deg); break;
      default: zoom = gen.uniform(cfg.zoom_min, cfg.zoom_max); break;
    }
  }
  return {make_affine(rotation, zoom, shear, flip, height, width, cfg.fill), gen.state()};
}

ImageU8 affine_transform(const ImageU8& img, const AffineSpec& spec) {
  const Eigen::Matrix2d lin = spec.matrix.leftCols<2>();
  if (std::abs(lin.determinant()) <= 1e-9) throw UsageError("affine_transform: singular matrix");
  ImageU8 out(img.height, img.width, img.channels, img.order);
  const auto H = static_cast<std::ptrdiff_t>(img.height);
  const auto W = static_cast<std::ptrdiff_t>(img.width);
  const bool edge = spec.fill == FillMode::edge;
  auto sample = [&](std::ptrdiff_t y, std::ptrdiff_t x, std::size_t c) -> double {
    if (edge) {
      y = std::clamp<std::ptrdiff_t>(y, 0, H - 1);
      x = std::clamp<std::ptrdiff_t>(x, 0, W - 1);
    } else if (y < 0 || x < 0 || y >= H || x >= W) {
      return 0.0;
    }
    return img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
  };
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const Eigen::Vector2d src = spec.matrix * Eigen::Vector3d(static_cast<double>(x), static_cast<double>(y), 1.0);
      const double fx0 = std::floor(src.x());
      const double fy0 = std::floor(src.y());
      const double fx = src.x() - fx0;
      const double fy = src.y() - fy0;
      const auto x0 = static_cast<std::ptrdiff_t>(fx0);
      const auto y0 = static_cast<std::ptrdiff_t>(fy0);
      const std::size_t dst_x = spec.flip_h ? img.width - 1 - x : x;
      for (std::size_t c = 0; c < img.channels; ++c) {
        double v = (1 - fy) * (1 - fx) * sample(y0, x0, c);
        if (fx > 0) v += (1 - fy) * fx * sample(y0, x0 + 1, c);
        if (fy > 0) v += fy * (1 - fx) * sample(y0 + 1, x0, c);
        if (fx > 0 && fy > 0) v += fy * fx * sample(y0 + 1, x0 + 1, c);
        out.at(y, dst_x, c) = round_u8(v);
      }
    }
  }
  return out;
}

}  // namespace ftnet
