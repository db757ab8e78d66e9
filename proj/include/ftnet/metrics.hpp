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

// Classification metrics. Every value is in percent. Precision, recall and F1
// are one-vs-rest per class and macro-averaged (unweighted class mean).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ftnet/config.hpp"

namespace ftnet {

/// counts[a][p]: samples of actual class a predicted as p.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::int64_t>> counts;

  std::size_t num_classes() const { return counts.size(); }
  std::int64_t total() const;
  std::int64_t tp(std::size_t c) const { return counts[c][c]; }
  std::int64_t fp(std::size_t c) const;  // column sum minus TP
  std::int64_t fn(std::size_t c) const;  // row sum minus TP
  std::int64_t tn(std::size_t c) const { return total() - tp(c) - fp(c) - fn(c); }

  /// Builds from rows; throws UsageError unless square with nonnegative
  /// cells. Missing class names default to "0", "1", ...
  static ConfusionMatrix from_counts(std::vector<std::vector<std::int64_t>> counts,
                                     std::vector<std::string> class_names = {});
};

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> actual, std::size_t k,
                                 std::vector<std::string> class_names = {});

/// 100 * trace / total.
double accuracy(const ConfusionMatrix& cm);

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;  // actual samples of the class
};

struct MacroScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::vector<ClassScores> per_class;
};

/// A zero denominator (no predicted or no actual positives) scores 0 for
/// the affected metric; F1 is 0 when precision + recall is 0.
MacroScores precision_recall_f1(const ConfusionMatrix& cm);

struct IndexErrors {
  double mae = 0;   // 100 * mean |p - a|
  double mse = 0;   // 100 * mean (p - a)^2
  double rmse = 0;  // 100 * sqrt(mean (p - a)^2)
};

/// Errors on integer label indices, so the distance between two classes is
/// the difference of their indices. Only meaningful for ordered or binary
/// labels.
IndexErrors index_error_metrics(std::span<const int> predicted, std::span<const int> actual);

struct MetricsReport {
  double accuracy_pct = 0;
  double precision_pct = 0;
  double recall_pct = 0;
  double f1_pct = 0;
  double mae_pct = 0;
  double mse_pct = 0;
  double rmse_pct = 0;
  std::vector<ClassScores> per_class;
  ConfusionMatrix confusion;
  std::int64_t n = 0;
  std::optional<double> prediction_seconds;  // serialized as null when absent
};

MetricsReport make_report(std::span<const int> predicted, std::span<const int> actual, std::size_t k,
                          std::vector<std::string> class_names = {});

/// Half away from zero to two decimals.
double round2(double v);

/// Keys in order: accuracy_pct, precision_pct, recall_pct, f1_pct, mae_pct,
/// mse_pct, rmse_pct, prediction_seconds, n, class_names, per_class,
/// confusion. Percent fields and per-class scores are rounded with round2;
/// prediction_seconds is written unrounded.
Json report_json(const MetricsReport& r);
/// report_json dumped with two-space indent and a trailing newline.
std::string report_text(const MetricsReport& r);
void write_report(const MetricsReport& r, const std::filesystem::path& path);

/// Header `actual\predicted,<names>`, one row per actual class: the class
/// name then integer cells. LF endings, no trailing separators.
std::string confusion_csv(const ConfusionMatrix& cm);
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);
ConfusionMatrix parse_confusion_csv(const std::string& text);

/// Predictions CSV with header `predicted,actual` and integer labels.
std::pair<std::vector<int>, std::vector<int>> parse_predictions_csv(const std::string& text);
std::string predictions_csv(std::span<const int> predicted, std::span<const int> actual);

}  // namespace ftnet
