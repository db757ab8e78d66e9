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

#include "ftnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ftnet/error.hpp"
#include "ftnet/rng.hpp"

namespace ftnet {

namespace fs = std::filesystem;

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(class_names.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.at(static_cast<std::size_t>(samples[i].label)).push_back(i);
  return out;
}

ImageU8 Dataset::load(std::size_t i) const {
  const Sample& s = samples.at(i);
  if (s.inline_image) return *s.inline_image;
  return read_image(s.id, source_order);
}

void Dataset::validate() const {
  if (!std::is_sorted(class_names.begin(), class_names.end())) {
    throw UsageError("dataset " + name + ": class names are not sorted");
  }
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names.size()) {
      throw UsageError("dataset " + name + ": label out of range for " + s.id);
    }
    if (!ids.insert(s.id).second) throw UsageError("dataset " + name + ": duplicate sample " + s.id);
  }
}

Dataset ingest_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    const auto fname = entry.path().filename().string();
    if (fname.starts_with(".")) continue;
    if (!entry.is_directory()) {
      throw DataError("file outside any class directory: " + entry.path().string());
    }
    class_dirs.push_back(entry.path());
  }
  if (class_dirs.empty()) throw DataError("no class directories under " + root.string());
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  Dataset d;
  d.name = root.filename().empty() ? root.parent_path().filename().string() : root.filename().string();
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    d.class_names.push_back(class_dirs[label].filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
      if (entry.path().filename().string().starts_with(".")) continue;
      if (!entry.is_regular_file() || !is_supported_image(entry.path())) {
        throw DataError("unsupported entry in class directory: " + entry.path().string());
      }
      files.push_back(entry.path());
    }
    if (files.empty()) throw DataError("empty class directory: " + class_dirs[label].string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream probe(f, std::ios::binary);
      if (!probe) throw DataError("unreadable file: " + f.string());
      d.samples.push_back(Sample{f.string(), std::nullopt, static_cast<int>(label)});
    }
  }
  return d;
}

std::string manifest_csv(const Dataset& d) {
  std::ostringstream os;
  os << "path,label,class_name\n";
  for (const auto& s : d.samples) {
    os << s.id << ',' << s.label << ',' << d.class_names.at(static_cast<std::size_t>(s.label)) << '\n';
  }
  return os.str();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

void write_manifest(const Dataset& d, const fs::path& path) { write_text(path, manifest_csv(d)); }

SplitIndices stratified_split(const Dataset& d, SplitRatios r, std::uint64_t seed) {
  if (!(r.train > 0) || !(r.validation > 0) || !(r.test > 0)) {
    throw UsageError("split: ratios must all be positive");
  }
  if (std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) throw UsageError("split: ratios must sum to 1");
  const auto by_class = d.indices_by_class();
  SplitIndices out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::vector<std::size_t> idx = by_class[c];
    if (idx.size() < 3) {
      throw UsageError("split: class '" + d.class_names[c] + "' has fewer than 3 samples");
    }
    Rng rng(derive(Stream::split, seed, c, 0));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    const double n = static_cast<double>(idx.size());
    std::array<std::size_t, 3> counts{
        static_cast<std::size_t>(std::floor(n * r.train + 1e-9)),
        static_cast<std::size_t>(std::floor(n * r.validation + 1e-9)),
        static_cast<std::size_t>(std::floor(n * r.test + 1e-9)),
    };
    std::size_t assigned = counts[0] + counts[1] + counts[2];
    for (std::size_t part = 0; assigned < idx.size(); part = (part + 1) % 3, ++assigned) ++counts[part];
    auto it = idx.begin();
    for (auto [part, count] : {std::pair{&out.train, counts[0]}, std::pair{&out.validation, counts[1]},
                               std::pair{&out.test, counts[2]}}) {
      part->insert(part->end(), it, it + static_cast<std::ptrdiff_t>(count));
      it += static_cast<std::ptrdiff_t>(count);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void validate_split(const SplitIndices& s, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (auto i : *part) {
      if (i >= n) throw UsageError("split: index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw UsageError("split: index " + std::to_string(i) + " appears twice");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw UsageError("split: parts do not cover the dataset");
}

std::vector<Fold> kfold_split(const Dataset& d, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("kfold: k must be at least 2");
  const auto by_class = d.indices_by_class();
  std::vector<std::vector<std::size_t>> members(k);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::vector<std::size_t> idx = by_class[c];
    if (idx.size() < k) {
      throw UsageError("kfold: class '" + d.class_names[c] + "' has fewer than k=" + std::to_string(k) + " samples");
    }
    Rng rng(derive(Stream::split, seed, c, 1));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (std::size_t j = 0; j < idx.size(); ++j) members[(offset + j) % k].push_back(idx[j]);
    offset += idx.size();
  }
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    folds[f].validation = members[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), members[g].begin(), members[g].end());
    }
    std::sort(folds[f].validation.begin(), folds[f].validation.end());
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

std::string split_csv(const SplitIndices& s) {
  std::vector<std::pair<std::size_t, const char*>> rows;
  for (auto i : s.train) rows.emplace_back(i, "train");
  for (auto i : s.validation) rows.emplace_back(i, "val");
  for (auto i : s.test) rows.emplace_back(i, "test");
  std::sort(rows.begin(), rows.end());
  std::ostringstream os;
  os << "index,part\n";
  for (const auto& [i, part] : rows) os << i << ',' << part << '\n';
  return os.str();
}

void write_split(const SplitIndices& s, const fs::path& path) { write_text(path, split_csv(s)); }

SplitIndices parse_split_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "index,part") throw DataError("split file: missing header 'index,part'");
  SplitIndices s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("split file: malformed line " + std::to_string(lineno));
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("split file: bad index on line " + std::to_string(lineno));
    }
    const std::string part = line.substr(comma + 1);
    if (part == "train") s.train.push_back(idx);
    else if (part == "val") s.validation.push_back(idx);
    else if (part == "test") s.test.push_back(idx);
    else throw DataError("split file: unknown part '" + part + "' on line " + std::to_string(lineno));
  }
  return s;
}

SplitIndices read_split(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_split_csv(std::string(bytes.begin(), bytes.end()));
}

// ---------------------------------------------------------------------------

std::vector<std::string> synth_class_names(std::size_t num_classes) {
  // Numeric prefixes keep the sorted order equal to the texture order.
  if (num_classes == 2) return {"0_horizontal", "1_vertical"};
  if (num_classes == 4) return {"0_horizontal", "1_vertical", "2_checkerboard", "3_radial"};
  throw UsageError("synth: num_classes must be 2 or 4");
}

namespace {

enum class Texture { horizontal, vertical, checkerboard, radial };

double texture_value(Texture t, double x, double y, double side, bool style) {
  constexpr double kTwoPi = 6.283185307179586;
  const double period = style ? 6.0 : 10.0;
  const double phase = style ? 1.3 : 0.0;
  switch (t) {
    case Texture::horizontal: return 127.5 + 127.5 * std::cos(kTwoPi * y / period + phase);
    case Texture::vertical: return 127.5 + 127.5 * std::cos(kTwoPi * x / period + phase);
    case Texture::checkerboard: {
      const double cell = period / 2;
      const auto cx = static_cast<long>(std::floor(x / cell));
      const auto cy = static_cast<long>(std::floor(y / cell));
      return ((cx + cy) % 2 == 0) ? 230.0 : 25.0;
    }
    case Texture::radial: {
      const double c = (side - 1) / 2;
      const double r = std::hypot(x - c, y - c) / (c * std::sqrt(2.0));
      return 255.0 * (1.0 - r);
    }
  }
  return 0;
}

}  // namespace

Dataset synth_dataset(const SynthOptions& o) {
  const auto names = synth_class_names(o.num_classes);
  if (o.side < 16) throw UsageError("synth: side must be at least 16");
  if (o.per_class < 10) throw UsageError("synth: per_class must be at least 10");
  if (!(o.noise >= 0) || o.noise >= 1) throw UsageError("synth: noise must lie in [0, 1)");

  Dataset d;
  d.name = o.style ? "synth-style" : "synth";
  d.class_names = names;
  for (std::size_t label = 0; label < names.size(); ++label) {
    const auto t = static_cast<Texture>(label);
    for (std::size_t n = 0; n < o.per_class; ++n) {
      Rng rng(derive(Stream::synth, o.seed, label, n));
      ImageU8 img(o.side, o.side, 3, ChannelOrder::rgb);
      const double amp = o.noise * 255.0;
      for (std::size_t y = 0; y < o.side; ++y) {
        for (std::size_t x = 0; x < o.side; ++x) {
          const double base =
              texture_value(t, static_cast<double>(x), static_cast<double>(y), static_cast<double>(o.side), o.style);
          const double v = amp > 0 ? base + rng.uniform(-amp, amp) : base;
          const auto px = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
          for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = px;
        }
      }
      char id[64];
      std::snprintf(id, sizeof id, "synth:%s/%04zu", names[label].c_str(), n);
      d.samples.push_back(Sample{id, std::move(img), static_cast<int>(label)});
    }
  }
  return d;
}

void write_dataset_dir(const Dataset& d, const fs::path& root) {
  for (const auto& name : d.class_names) fs::create_directories(root / name);
  std::vector<std::size_t> counter(d.class_names.size(), 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto label = static_cast<std::size_t>(d.samples[i].label);
    char fname[32];
    std::snprintf(fname, sizeof fname, "%04zu.ppm", counter[label]++);
    write_image(root / d.class_names[label] / fname, d.load(i));
  }
}

}  // namespace ftnet
