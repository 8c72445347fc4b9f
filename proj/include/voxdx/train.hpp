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

#ifndef VOXDX_TRAIN_HPP_
#define VOXDX_TRAIN_HPP_

#include <functional>
#include <span>
#include <vector>

#include "voxdx/data.hpp"
#include "voxdx/metrics.hpp"
#include "voxdx/model.hpp"
#include "voxdx/optim.hpp"

namespace voxdx {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean over batches, cross-entropy + L2
  double train_f2 = 0.0;
  double dev_f2 = 0.0;  // NaN when the dev set is empty
  double lr = 0.0;      // rate used by the epoch's last step
  double wall_seconds = 0.0;

  // Wall time is excluded.
  bool same_values(const EpochRecord& o) const;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 when no epoch ran
  double best_dev_f2 = 0.0;

  bool same_values(const TrainHistory& o) const;
};

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(std::int64_t step, double lr, double loss)> on_step;
  // Leave the model at the best epoch's parameters rather than the last.
  bool restore_best = true;
};

// Mini-batch Adam on cross-entropy plus the L2 penalty. After every epoch
// train and dev F2 are measured in inference mode; the best epoch is the one
// with the highest dev F2 (train F2 breaks ties, later epochs win full ties).
// Throws kNumerical naming the epoch and batch on a non-finite loss.
template <typename T>
TrainHistory train(BasicModel<T>& model, std::span<const Sample> train_set,
                   std::span<const Sample> dev_set, const TrainConfig& tc,
                   const TrainOptions& options = {});

struct Predictions {
  std::vector<int> predicted;
  std::vector<double> scores;  // P(PD)
  std::vector<int> truth;
};

template <typename T>
Predictions predict(const BasicModel<T>& model, std::span<const Sample> samples,
                    std::size_t batch_size = 8);

// Requires a non-empty sample list.
template <typename T>
ClassificationReport evaluate(const BasicModel<T>& model,
                              std::span<const Sample> samples,
                              MatrixRows rows = MatrixRows::kPredicted,
                              std::size_t batch_size = 8);

// One JSON object per line: epoch, loss, train_f2, dev_f2, lr.
std::string epoch_log_line(const EpochRecord& r);

}  // namespace voxdx

#endif  // VOXDX_TRAIN_HPP_
