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

#include "voxdx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "voxdx/error.hpp"
#include "voxdx/rng.hpp"

namespace voxdx {

Confusion confusion(std::span<const int> predicted, std::span<const int> truth,
                    MatrixRows rows) {
  require(predicted.size() == truth.size(), ErrorKind::kShape,
          "confusion: " + std::to_string(predicted.size()) + " predictions vs " +
              std::to_string(truth.size()) + " labels");
  require(!truth.empty(), ErrorKind::kInvalidArgument, "confusion: no samples");
  Confusion c;
  c.rows = rows;
  std::array<std::array<std::uint64_t, 2>, 2> raw{};  // [pred][truth]
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i] == 1 ? 1 : 0;
    const int t = truth[i] == 1 ? 1 : 0;
    ++raw[p][t];
  }
  c.counts = {raw[1][1], raw[0][0], raw[1][0], raw[0][1]};
  for (int r = 0; r < 2; ++r) {
    std::uint64_t total = 0;
    for (int k = 0; k < 2; ++k)
      total += rows == MatrixRows::kPredicted ? raw[r][k] : raw[k][r];
    if (total == 0) continue;
    for (int k = 0; k < 2; ++k) {
      const std::uint64_t v = rows == MatrixRows::kPredicted ? raw[r][k] : raw[k][r];
      c.normalized[r][k] = static_cast<double>(v) / static_cast<double>(total);
    }
  }
  return c;
}

Scores precision_recall_f2(const ConfusionCounts& c) {
  Scores s;
  if (c.tp + c.fn == 0 && c.fp == 0) {
    s.f2 = 1.0;
    s.vacuous = true;
    return s;
  }
  s.precision = c.tp + c.fp == 0 ? 0.0
                                 : static_cast<double>(c.tp) /
                                       static_cast<double>(c.tp + c.fp);
  s.recall = c.tp + c.fn == 0 ? 0.0
                              : static_cast<double>(c.tp) /
                                    static_cast<double>(c.tp + c.fn);
  if (s.precision == 0.0 && s.recall == 0.0) {
    s.f2 = 0.0;
  } else {
    s.f2 = 5.0 * s.precision * s.recall / (4.0 * s.precision + s.recall);
  }
  return s;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> truth) {
  require(scores.size() == truth.size(), ErrorKind::kShape,
          "roc_auc: score and label counts differ");
  std::uint64_t pos = 0, neg = 0;
  for (int t : truth) (t == 1 ? pos : neg) += 1;
  require(pos > 0 && neg > 0, ErrorKind::kInvalidArgument,
          "roc_auc needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0, prev_tp = 0, prev_fp = 0;
  // Twice the area in units of (1/neg) x (1/pos).
  std::uint64_t area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      (truth[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    area2 += (fp - prev_fp) * (tp + prev_tp);
    curve.points.push_back({thr, static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
    prev_tp = tp;
    prev_fp = fp;
  }
  curve.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos * neg));
  return curve;
}

ClassificationReport make_report(std::span<const int> predicted,
                                 std::span<const double> scores,
                                 std::span<const int> truth, MatrixRows rows) {
  const Confusion c = confusion(predicted, truth, rows);
  const Scores s = precision_recall_f2(c.counts);
  ClassificationReport r;
  r.counts = c.counts;
  r.accuracy = static_cast<double>(c.counts.tp + c.counts.tn) /
               static_cast<double>(c.counts.total());
  r.precision = s.precision;
  r.recall = s.recall;
  r.f2 = s.f2;
  r.f2_vacuous = s.vacuous;
  r.matrix_rows = rows;
  r.normalized_matrix = c.normalized;
  const bool both = c.counts.tp + c.counts.fn > 0 && c.counts.tn + c.counts.fp > 0;
  if (both) {
    RocCurve roc = roc_auc(scores, truth);
    r.roc = std::move(roc.points);
    r.auc = roc.auc;
  }
  return r;
}

std::string report_text(const ClassificationReport& r) {
  std::ostringstream o;
  char buf[160];
  o << "samples    " << r.counts.total() << '\n';
  o << "tp " << r.counts.tp << "  tn " << r.counts.tn << "  fp " << r.counts.fp
    << "  fn " << r.counts.fn << '\n';
  std::snprintf(buf, sizeof buf,
                "accuracy   %.4f\nprecision  %.4f\nrecall     %.4f\nf2         %.4f%s\n",
                r.accuracy, r.precision, r.recall, r.f2,
                r.f2_vacuous ? "  (vacuous: no positives)" : "");
  o << buf;
  if (r.auc) {
    std::snprintf(buf, sizeof buf, "auc        %.4f\n", *r.auc);
  } else {
    std::snprintf(buf, sizeof buf, "auc        n/a (single class)\n");
  }
  o << buf;
  o << "normalized confusion (rows = "
    << (r.matrix_rows == MatrixRows::kPredicted ? "predicted" : "truth")
    << ", cols = " << (r.matrix_rows == MatrixRows::kPredicted ? "truth" : "predicted")
    << ")\n";
  const char* names[2] = {"HC", "PD"};
  o << "        HC      PD\n";
  for (int i = 0; i < 2; ++i) {
    std::snprintf(buf, sizeof buf, "%s  %6.3f  %6.3f\n", names[i],
                  r.normalized_matrix[i][0], r.normalized_matrix[i][1]);
    o << buf;
  }
  return o.str();
}

std::string report_json(const ClassificationReport& r) {
  using nlohmann::json;
  json j;
  j["schema"] = "voxdx.report.v1";
  j["counts"] = {{"tp", r.counts.tp}, {"tn", r.counts.tn},
                 {"fp", r.counts.fp}, {"fn", r.counts.fn}};
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f2"] = r.f2;
  j["f2_vacuous"] = r.f2_vacuous;
  j["matrix_rows"] = r.matrix_rows == MatrixRows::kPredicted ? "predicted" : "truth";
  j["normalized_matrix"] = {{r.normalized_matrix[0][0], r.normalized_matrix[0][1]},
                            {r.normalized_matrix[1][0], r.normalized_matrix[1][1]}};
  json roc = json::array();
  for (const RocPoint& p : r.roc) {
    json pt;
    pt["threshold"] = std::isinf(p.threshold) ? json(nullptr) : json(p.threshold);
    pt["fpr"] = p.fpr;
    pt["tpr"] = p.tpr;
    roc.push_back(pt);
  }
  j["roc"] = roc;
  j["auc"] = r.auc ? json(*r.auc) : json(nullptr);
  return j.dump(2) + "\n";
}

ClassificationReport report_from_json(const std::string& text) {
  using nlohmann::json;
  ClassificationReport r;
  try {
    const json j = json::parse(text);
    const auto& c = j.at("counts");
    r.counts = {c.at("tp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(),
                c.at("fp").get<std::uint64_t>(), c.at("fn").get<std::uint64_t>()};
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f2 = j.at("f2").get<double>();
    r.f2_vacuous = j.at("f2_vacuous").get<bool>();
    r.matrix_rows = j.at("matrix_rows").get<std::string>() == "truth"
                        ? MatrixRows::kTruth
                        : MatrixRows::kPredicted;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        r.normalized_matrix[a][b] = j.at("normalized_matrix").at(a).at(b).get<double>();
    for (const json& p : j.at("roc")) {
      RocPoint pt;
      pt.threshold = p.at("threshold").is_null()
                         ? std::numeric_limits<double>::infinity()
                         : p.at("threshold").get<double>();
      pt.fpr = p.at("fpr").get<double>();
      pt.tpr = p.at("tpr").get<double>();
      r.roc.push_back(pt);
    }
    if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

std::string roc_text(const ClassificationReport& r) {
  std::ostringstream o;
  char buf[64];
  for (const RocPoint& p : r.roc) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.fpr, p.tpr);
    o << buf;
  }
  return o.str();
}

// ---------------------------------------------------------------------------

BaselineResult age_logistic_baseline(std::span<const Subject> subjects,
                                     std::uint64_t seed, int iterations,
                                     double learning_rate) {
  std::size_t per_class[2] = {0, 0};
  for (const Subject& s : subjects) ++per_class[static_cast<int>(s.label)];
  require(per_class[0] > 0 && per_class[1] > 0, ErrorKind::kInvalidArgument,
          "age baseline needs both classes");
  require(per_class[0] >= 10 && per_class[1] >= 10, ErrorKind::kInvalidArgument,
          "age baseline needs at least 10 subjects per class");
  require(iterations >= 1, ErrorKind::kInvalidArgument, "iterations must be >= 1");

  std::vector<std::size_t> order(subjects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(subjects.size())));
  std::span<const std::size_t> train(order.data(), n_train);
  std::span<const std::size_t> test(order.data() + n_train, order.size() - n_train);

  double mean = 0.0, var = 0.0;
  for (std::size_t i : train) mean += subjects[i].age;
  mean /= static_cast<double>(train.size());
  for (std::size_t i : train) var += std::pow(subjects[i].age - mean, 2);
  const double sd = var > 0 ? std::sqrt(var / static_cast<double>(train.size())) : 1.0;
  auto feature = [&](std::size_t i) { return (subjects[i].age - mean) / sd; };
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };

  BaselineResult r;
  r.n_train = train.size();
  r.n_test = test.size();
  double w = 0.0, b = 0.0;
  const double n = static_cast<double>(train.size());
  for (int it = 0; it < iterations; ++it) {
    double gw = 0.0, gb = 0.0, loss = 0.0;
    for (std::size_t i : train) {
      const double x = feature(i);
      const double y = subjects[i].label == Label::kPD ? 1.0 : 0.0;
      const double p = sigmoid(w * x + b);
      loss -= y * std::log(std::max(p, 1e-15)) + (1 - y) * std::log(std::max(1 - p, 1e-15));
      gw += (p - y) * x;
      gb += p - y;
    }
    r.loss_history.push_back(loss / n);
    w -= learning_rate * gw / n;
    b -= learning_rate * gb / n;
  }
  r.weight = w;
  r.bias = b;

  std::size_t train_pd = 0;
  for (std::size_t i : train) train_pd += subjects[i].label == Label::kPD;
  const Label majority = 2 * train_pd >= train.size() ? Label::kPD : Label::kHC;
  std::size_t correct = 0, majority_hits = 0;
  for (std::size_t i : test) {
    const Label pred = sigmoid(w * feature(i) + b) >= 0.5 ? Label::kPD : Label::kHC;
    correct += pred == subjects[i].label;
    majority_hits += subjects[i].label == majority;
  }
  if (!test.empty()) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    r.majority_rate = static_cast<double>(majority_hits) / static_cast<double>(test.size());
  }
  return r;
}

}  // namespace voxdx
