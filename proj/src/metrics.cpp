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

#include "ftnet/metrics.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ftnet/error.hpp"

namespace ftnet {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::string> default_names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(std::to_string(i));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

long long parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError(what + ": '" + s + "' is not an integer");
  }
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

std::int64_t ConfusionMatrix::fp(std::size_t c) const {
  std::int64_t col = 0;
  for (const auto& row : counts) col += row[c];
  return col - tp(c);
}

std::int64_t ConfusionMatrix::fn(std::size_t c) const {
  return std::accumulate(counts[c].begin(), counts[c].end(), std::int64_t{0}) - tp(c);
}

ConfusionMatrix ConfusionMatrix::from_counts(std::vector<std::vector<std::int64_t>> counts,
                                             std::vector<std::string> class_names) {
  const std::size_t k = counts.size();
  if (k == 0) throw UsageError("confusion matrix: no classes");
  for (const auto& row : counts) {
    if (row.size() != k) throw UsageError("confusion matrix: rows must have " + std::to_string(k) + " cells");
    for (auto v : row) {
      if (v < 0) throw UsageError("confusion matrix: negative count");
    }
  }
  if (class_names.empty()) class_names = default_names(k);
  if (class_names.size() != k) throw UsageError("confusion matrix: class name count differs from size");
  return ConfusionMatrix{std::move(class_names), std::move(counts)};
}

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> actual, std::size_t k,
                                 std::vector<std::string> class_names) {
  if (predicted.size() != actual.size()) {
    throw UsageError("confusion matrix: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(actual.size()) + " labels");
  }
  if (k == 0) throw UsageError("confusion matrix: no classes");
  std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(k, 0));
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const int a = actual[i], p = predicted[i];
    if (a < 0 || p < 0 || static_cast<std::size_t>(a) >= k || static_cast<std::size_t>(p) >= k) {
      throw UsageError("confusion matrix: label out of range at position " + std::to_string(i));
    }
    ++counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)];
  }
  return ConfusionMatrix::from_counts(std::move(counts), std::move(class_names));
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw UsageError("accuracy: empty confusion matrix");
  std::int64_t trace = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) trace += cm.tp(c);
  return 100.0 * ratio(trace, cm.total());
}

MacroScores precision_recall_f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw UsageError("precision/recall: empty confusion matrix");
  MacroScores out;
  const std::size_t k = cm.num_classes();
  for (std::size_t c = 0; c < k; ++c) {
    ClassScores s;
    s.precision = 100.0 * ratio(cm.tp(c), cm.tp(c) + cm.fp(c));
    s.recall = 100.0 * ratio(cm.tp(c), cm.tp(c) + cm.fn(c));
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.support = cm.tp(c) + cm.fn(c);
    out.precision += s.precision;
    out.recall += s.recall;
    out.f1 += s.f1;
    out.per_class.push_back(s);
  }
  out.precision /= static_cast<double>(k);
  out.recall /= static_cast<double>(k);
  out.f1 /= static_cast<double>(k);
  return out;
}

IndexErrors index_error_metrics(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) throw UsageError("index errors: length mismatch");
  if (actual.empty()) throw UsageError("index errors: no samples");
  double abs_sum = 0, sq_sum = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = static_cast<double>(predicted[i]) - static_cast<double>(actual[i]);
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(actual.size());
  return {100.0 * abs_sum / n, 100.0 * sq_sum / n, 100.0 * std::sqrt(sq_sum / n)};
}

MetricsReport make_report(std::span<const int> predicted, std::span<const int> actual, std::size_t k,
                          std::vector<std::string> class_names) {
  MetricsReport r;
  r.confusion = confusion_matrix(predicted, actual, k, std::move(class_names));
  r.accuracy_pct = accuracy(r.confusion);
  const auto prf = precision_recall_f1(r.confusion);
  r.precision_pct = prf.precision;
  r.recall_pct = prf.recall;
  r.f1_pct = prf.f1;
  r.per_class = prf.per_class;
  const auto e = index_error_metrics(predicted, actual);
  r.mae_pct = e.mae;
  r.mse_pct = e.mse;
  r.rmse_pct = e.rmse;
  r.n = r.confusion.total();
  return r;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

Json report_json(const MetricsReport& r) {
  Json per_class = Json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    per_class.push_back(Json{{"class", r.confusion.class_names.at(c)},
                             {"precision_pct", round2(s.precision)},
                             {"recall_pct", round2(s.recall)},
                             {"f1_pct", round2(s.f1)},
                             {"support", s.support}});
  }
  Json j;
  j["accuracy_pct"] = round2(r.accuracy_pct);
  j["precision_pct"] = round2(r.precision_pct);
  j["recall_pct"] = round2(r.recall_pct);
  j["f1_pct"] = round2(r.f1_pct);
  j["mae_pct"] = round2(r.mae_pct);
  j["mse_pct"] = round2(r.mse_pct);
  j["rmse_pct"] = round2(r.rmse_pct);
  j["prediction_seconds"] = r.prediction_seconds ? Json(*r.prediction_seconds) : Json(nullptr);
  j["n"] = r.n;
  j["class_names"] = r.confusion.class_names;
  j["per_class"] = per_class;
  j["confusion"] = r.confusion.counts;
  return j;
}

std::string report_text(const MetricsReport& r) { return report_json(r).dump(2) + "\n"; }

void write_report(const MetricsReport& r, const std::filesystem::path& path) { write_text(path, report_text(r)); }

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "actual\\predicted";
  for (const auto& name : cm.class_names) out += "," + name;
  out += "\n";
  for (std::size_t a = 0; a < cm.num_classes(); ++a) {
    out += cm.class_names[a];
    for (auto v : cm.counts[a]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  write_text(path, confusion_csv(cm));
}

ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("confusion csv: empty input");
  auto header = split_fields(line);
  if (header.empty() || header[0] != "actual\\predicted") throw DataError("confusion csv: bad header");
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<std::vector<std::int64_t>> counts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != names.size() + 1) throw DataError("confusion csv: ragged row '" + line + "'");
    if (fields[0] != names.at(counts.size())) throw DataError("confusion csv: row order differs from header");
    std::vector<std::int64_t> row;
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(parse_int(fields[i], "confusion csv"));
    counts.push_back(std::move(row));
  }
  if (counts.size() != names.size()) throw DataError("confusion csv: matrix is not square");
  try {
    return ConfusionMatrix::from_counts(std::move(counts), std::move(names));
  } catch (const UsageError& e) {
    throw DataError(std::string("confusion csv: ") + e.what());
  }
}

std::pair<std::vector<int>, std::vector<int>> parse_predictions_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "predicted,actual") {
    throw DataError("predictions csv: expected header 'predicted,actual'");
  }
  std::vector<int> predicted, actual;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) throw DataError("predictions csv: line " + std::to_string(lineno) + " needs 2 fields");
    const auto where = "predictions csv line " + std::to_string(lineno);
    predicted.push_back(static_cast<int>(parse_int(fields[0], where)));
    actual.push_back(static_cast<int>(parse_int(fields[1], where)));
  }
  if (actual.empty()) throw DataError("predictions csv: no rows");
  return {predicted, actual};
}

std::string predictions_csv(std::span<const int> predicted, std::span<const int> actual) {
  std::string out = "predicted,actual\n";
  for (std::size_t i = 0; i < actual.size(); ++i) {
    out += std::to_string(predicted[i]) + "," + std::to_string(actual[i]) + "\n";
  }
  return out;
}

}  // namespace ftnet
