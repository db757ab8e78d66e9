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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ftnet/image.hpp"

namespace ftnet {

struct Sample {
  std::string id;                  // file path, or "synth:<class>/<n>" for inline images
  std::optional<ImageU8> inline_image;
  int label = 0;
};

struct Dataset {
  std::string name;
  std::vector<std::string> class_names;  // sorted; index == label
  std::vector<Sample> samples;
  ChannelOrder source_order = ChannelOrder::rgb;  // tag applied to decoded colour files

  std::size_t size() const { return samples.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<int> labels() const;
  /// Sample indices grouped by label, in dataset order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;

  /// Decoded image of sample i (inline or read from disk).
  ImageU8 load(std::size_t i) const;

  /// Throws UsageError on out-of-range labels, unsorted class names or
  /// duplicate sample ids.
  void validate() const;
};

/// One subdirectory per class, each holding .ppm/.pgm/.png files. Class
/// names are the sorted directory names; files are taken in lexicographic
/// order within each class. Hidden entries (leading '.') are ignored.
Dataset ingest_directory(const std::filesystem::path& root);

/// CSV `path,label,class_name` with LF endings.
std::string manifest_csv(const Dataset& d);
void write_manifest(const Dataset& d, const std::filesystem::path& path);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Per class: shuffle with the stream (seed, class), allocate
/// floor(n * ratio) to each part and hand the remaining samples out one at a
/// time in the order train, validation, test. Each part lists indices in
/// ascending order.
SplitIndices stratified_split(const Dataset& d, SplitRatios ratios, std::uint64_t seed);

/// Throws UsageError unless the three parts partition [0, n).
void validate_split(const SplitIndices& s, std::size_t n);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Stratified k folds. Within each class the shuffled samples are dealt to
/// folds round-robin, continuing the rotation across classes so fold sizes
/// differ by at most one.
std::vector<Fold> kfold_split(const Dataset& d, std::size_t k, std::uint64_t seed);

/// CSV `index,part` with part in {train,val,test}, rows in index order.
std::string split_csv(const SplitIndices& s);
void write_split(const SplitIndices& s, const std::filesystem::path& path);
SplitIndices read_split(const std::filesystem::path& path);
SplitIndices parse_split_csv(const std::string& text);

struct SynthOptions {
  std::size_t num_classes = 4;
  std::size_t per_class = 50;
  std::size_t side = 64;
  double noise = 0.05;
  std::uint64_t seed = 1000;
  bool style = false;  // shifted stripe phase and frequency
};

/// Procedural textures: class 0 horizontal stripes, 1 vertical stripes,
/// 2 checkerboard, 3 radial gradient, plus uniform noise in
/// [-noise*255, noise*255]. Rendered as 3-channel RGB images.
Dataset synth_dataset(const SynthOptions& opts);

/// Class names used by synth_dataset.
std::vector<std::string> synth_class_names(std::size_t num_classes);

/// Writes <root>/<class>/<nnnn>.ppm for every sample.
void write_dataset_dir(const Dataset& d, const std::filesystem::path& root);

}  // namespace ftnet
