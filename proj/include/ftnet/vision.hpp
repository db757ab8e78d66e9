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

// Preprocessing chain (resize -> sharpen -> BGR to RGB -> unit scaling) and
// the affine augmentation engine.

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <utility>

#include "ftnet/image.hpp"
#include "ftnet/rng.hpp"
#include "ftnet/tensor.hpp"

namespace ftnet {

/// Bilinear resampling with half-pixel centers:
///     src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1]
/// Results are rounded half away from zero.
ImageU8 resize_bilinear(const ImageU8& img, std::size_t out_h, std::size_t out_w);

/// 3x3 sharpening with [[0,-1,0],[-1,5,-1],[0,-1,0]], edge-clamped borders,
/// clamped to [0, 255].
ImageU8 sharpen(const ImageU8& img);

/// Swaps channels 0 and 2 and retags the image RGB. Rejects RGB and gray
/// inputs so a swap can never be applied twice by accident.
ImageU8 bgr_to_rgb(const ImageU8& img);

/// value / 255 in channel-major [C, H, W] layout. Gray input is replicated
/// to `channels` planes when channels == 3.
Tensor scale_to_unit(const ImageU8& img, std::size_t channels = 3);

struct PreprocessConfig {
  std::size_t image_size = 256;
  ChannelOrder source_order = ChannelOrder::rgb;
};

/// resize -> sharpen -> (bgr_to_rgb when the image is tagged BGR).
ImageU8 prepare_image(const ImageU8& img, const PreprocessConfig& cfg);

/// prepare_image followed by scale_to_unit.
Tensor preprocess(const ImageU8& img, const PreprocessConfig& cfg);

// ---------------------------------------------------------------------------
// Augmentation

enum class FillMode { zero, edge };
enum class AugmentMode { compose, pick_one };

/// Inverse map from output pixel (x, y) to source coordinates
/// `matrix * (x, y, 1)`, followed by an optional horizontal mirror of the
/// output.
struct AffineSpec {
  Eigen::Matrix<double, 2, 3> matrix = Eigen::Matrix<double, 2, 3>::Identity();
  bool flip_h = false;
  FillMode fill = FillMode::zero;

  static AffineSpec identity() { return {}; }

  friend bool operator==(const AffineSpec& a, const AffineSpec& b) {
    return a.matrix == b.matrix && a.flip_h == b.flip_h && a.fill == b.fill;
  }
};

/// Builds the spec for a forward transform rotation * shear * zoom about the
/// image center (pixel-center coordinates, y pointing down, so positive
/// angles turn the content clockwise on screen).
AffineSpec make_affine(double rotation_deg, double zoom, double shear_deg, bool flip_h, std::size_t height,
                       std::size_t width, FillMode fill = FillMode::zero);

struct AugmentConfig {
  double rotation_deg = 15.0;  // draws from [-r, r]
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  double shear_deg = 10.0;  // draws from [-s, s]
  double flip_prob = 0.5;
  // rotation, flip, shear, zoom: equal by construction, validated.
  std::array<double, 4> op_weights{1.0, 1.0, 1.0, 1.0};
  AugmentMode mode = AugmentMode::compose;
  FillMode fill = FillMode::edge;

  /// Throws UsageError on unequal weights or ranges missing their identity.
  void validate() const;

  /// Every range collapsed to its identity value, flip probability 0.
  static AugmentConfig identity();
};

/// Draws one augmentation for an image of the given size.
///
/// compose: draws rotation, zoom, shear, then flip (in that order) and
/// applies all four. pick_one: first draws an op index uniformly from
/// {rotation, flip, shear, zoom}, then draws only that op's parameter.
std::pair<AffineSpec, RngState> sample_augmentation(const AugmentConfig& cfg, RngState rng, std::size_t height,
                                                    std::size_t width);

/// Inverse-mapping bilinear resample. Dimensions are preserved.
ImageU8 affine_transform(const ImageU8& img, const AffineSpec& spec);

}  // namespace ftnet
