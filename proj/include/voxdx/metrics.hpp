/*
 * Copyright 2026 The voxdx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VOXDX_METRICS_HPP_
#define VOXDX_METRICS_HPP_

// Binary classification metrics with PD (label 1) as the positive class.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxdx/data.hpp"

namespace voxdx {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Which class indexes the rows of the normalized matrix.
enum class MatrixRows { kPredicted, kTruth };

// matrix[row][col], index 0 = HC and 1 = PD. Each row is divided by its
// total; rows whose class never occurs stay zero.
using Matrix2 = std::array<std::array<double, 2>, 2>;

struct Confusion {
  ConfusionCounts counts;
  Matrix2 normalized{};
  MatrixRows rows = MatrixRows::kPredicted;
};

Confusion confusion(std::span<const int> predicted, std::span<const int> truth,
                    MatrixRows rows = MatrixRows::kPredicted);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f2 = 0.0;
  bool vacuous = false;  // no positives and no false positives: F2 := 1
};

Scores precision_recall_f2(const ConfusionCounts& c);

struct RocPoint {
  double threshold = 0.0;  // +inf for the leading (0,0) point
  double fpr = 0.0;
  double tpr = 0.0;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// Threshold sweep over the distinct scores in descending order (score >=
// threshold predicts PD); tied scores share one threshold. The area is
// accumulated from integer counts so it equals the pairwise concordance
// estimate exactly. Throws if only one class is present.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> truth);

struct ClassificationReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f2 = 0.0;
  bool f2_vacuous = false;
  MatrixRows matrix_rows = MatrixRows::kPredicted;
  Matrix2 normalized_matrix{};
  std::vector<RocPoint> roc;  // empty when only one class is present
  std::optional<double> auc;

  friend bool operator==(const ClassificationReport&,
                         const ClassificationReport&) = default;
};

ClassificationReport make_report(std::span<const int> predicted,
                                 std::span<const double> scores,
                                 std::span<const int> truth,
                                 MatrixRows rows = MatrixRows::kPredicted);

std::string report_text(const ClassificationReport& r);
std::string report_json(const ClassificationReport& r);
ClassificationReport report_from_json(const std::string& json);
// Two whitespace-separated columns "fpr tpr", one point per line.
std::string roc_text(const ClassificationReport& r);

// ---------------------------------------------------------------------------

struct BaselineResult {
  double accuracy = 0.0;       // on the held-out fold
  double majority_rate = 0.0;  // held-out share of the majority training class
  double weight = 0.0;
  double bias = 0.0;
  std::vector<double> loss_history;  // training log-loss per iteration
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

// One-feature logistic regression of diagnosis on z-scored age, fitted by
// full-batch gradient descent on a seeded 80/20 holdout.
BaselineResult age_logistic_baseline(std::span<const Subject> subjects,
                                     std::uint64_t seed,
                                     int iterations = 1000,
                                     double learning_rate = 0.1);

}  // namespace voxdx

#endif  // VOXDX_METRICS_HPP_
