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

#include "voxdx/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <type_traits>

#include <json.hpp>

#include "voxdx/error.hpp"

namespace voxdx {

bool EpochRecord::same_values(const EpochRecord& o) const {
  auto eq = [](double a, double b) {
    return a == b || (std::isnan(a) && std::isnan(b));
  };
  return epoch == o.epoch && eq(train_loss, o.train_loss) &&
         eq(train_f2, o.train_f2) && eq(dev_f2, o.dev_f2) && eq(lr, o.lr);
}

bool TrainHistory::same_values(const TrainHistory& o) const {
  if (epochs.size() != o.epochs.size() || best_epoch != o.best_epoch) return false;
  if (!(best_dev_f2 == o.best_dev_f2 ||
        (std::isnan(best_dev_f2) && std::isnan(o.best_dev_f2))))
    return false;
  for (std::size_t i = 0; i < epochs.size(); ++i)
    if (!epochs[i].same_values(o.epochs[i])) return false;
  return true;
}

std::string epoch_log_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.train_loss;
  j["train_f2"] = r.train_f2;
  j["dev_f2"] = std::isnan(r.dev_f2) ? nlohmann::ordered_json(nullptr)
                                     : nlohmann::ordered_json(r.dev_f2);
  j["lr"] = r.lr;
  return j.dump();
}

namespace {

template <typename T>
BasicTensor<T> as(const Tensor& t) {
  if constexpr (std::is_same_v<T, float>) {
    return t;
  } else {
    return t.template cast<T>();
  }
}

}  // namespace

template <typename T>
Predictions predict(const BasicModel<T>& model, std::span<const Sample> samples,
                    std::size_t batch_size) {
  require(batch_size >= 1, ErrorKind::kInvalidArgument, "batch_size must be >= 1");
  Predictions out;
  const bool demo = model.config().use_demographics;
  BatchIterator it(samples, batch_size, 0, /*shuffle=*/false);
  Batch b;
  while (it.next(b)) {
    const BasicTensor<T> volumes = as<T>(b.volumes);
    const BasicTensor<T> demographics = as<T>(b.demographics);
    const BasicTensor<T> probs =
        ops::softmax(infer(model, volumes, demo ? &demographics : nullptr));
    const std::size_t c = probs.dim(1);
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < c; ++k)
        if (probs[i * c + k] > probs[i * c + arg]) arg = k;
      out.predicted.push_back(static_cast<int>(arg));
      out.scores.push_back(static_cast<double>(probs[i * c + 1]));
      out.truth.push_back(b.labels[i]);
    }
  }
  return out;
}

template <typename T>
ClassificationReport evaluate(const BasicModel<T>& model,
                              std::span<const Sample> samples, MatrixRows rows,
                              std::size_t batch_size) {
  require(!samples.empty(), ErrorKind::kInvalidArgument,
          "cannot evaluate an empty dataset");
  const Predictions p = predict(model, samples, batch_size);
  return make_report(p.predicted, p.scores, p.truth, rows);
}

template <typename T>
TrainHistory train(BasicModel<T>& model, std::span<const Sample> train_set,
                   std::span<const Sample> dev_set, const TrainConfig& tc,
                   const TrainOptions& options) {
  tc.validate();
  TrainHistory history;
  if (tc.max_epochs == 0) return history;
  require(!train_set.empty(), ErrorKind::kInvalidArgument,
          "training set is empty");

  const bool demo = model.config().use_demographics;
  const double rc = model.config().rc;
  Rng dropout_rng(derive_seed(tc.seed, 0xD0));
  AdamState<T> adam;
  std::int64_t step = 0;

  ParameterList<T> best_params;
  std::vector<ops::NormState> best_states;
  double best_dev = -1.0, best_train = -1.0;
  int perfect_streak = 0;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    BatchIterator it(train_set, tc.batch_size,
                     derive_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0, lr = tc.lr0;
    std::size_t batches = 0;
    Batch b;
    while (it.next(b)) {
      ++batches;
      lr = lr_schedule(tc.lr0, tc.decay_k, step, tc.decay_steps);
      const BasicTensor<T> volumes = as<T>(b.volumes);
      const BasicTensor<T> demographics = as<T>(b.demographics);
      LossAndGrads<T> lg = loss_and_grads(model, volumes,
                                          demo ? &demographics : nullptr,
                                          b.labels, /*training=*/true, dropout_rng);
      PenaltyResult<T> pen = l2_penalty(model.parameters(), rc);
      const double loss = lg.loss + pen.loss;
      require(std::isfinite(loss), ErrorKind::kNumerical,
              "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                  std::to_string(batches));
      for (auto& [name, g] : pen.grads) {
        BasicTensor<T>& dst = lg.grads.at(name);
        for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
      }
      adam_step(model.parameters(), lg.grads, adam, lr, tc);
      if (options.on_step) options.on_step(step, lr, loss);
      loss_sum += loss;
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.lr = lr;
    rec.train_f2 = evaluate(model, train_set).f2;
    rec.dev_f2 = dev_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                 : evaluate(model, dev_set).f2;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const double dev_key = std::isnan(rec.dev_f2) ? 0.0 : rec.dev_f2;
    if (dev_key > best_dev || (dev_key == best_dev && rec.train_f2 >= best_train)) {
      best_dev = dev_key;
      best_train = rec.train_f2;
      history.best_epoch = epoch;
      history.best_dev_f2 = rec.dev_f2;
      if (options.restore_best) {
        best_params = model.parameters();
        best_states = model.norm_states();
      }
    }
    history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    perfect_streak = rec.train_f2 == 1.0 ? perfect_streak + 1 : 0;
    if (tc.patience > 0 && perfect_streak >= tc.patience) break;
  }

  if (options.restore_best && history.best_epoch > 0) {
    model.parameters() = std::move(best_params);
    model.norm_states() = std::move(best_states);
  }
  return history;
}

#define VOXDX_INSTANTIATE_TRAIN(T)                                              \
  template TrainHistory train(BasicModel<T>&, std::span<const Sample>,          \
                              std::span<const Sample>, const TrainConfig&,      \
                              const TrainOptions&);                             \
  template Predictions predict(const BasicModel<T>&, std::span<const Sample>,   \
                               std::size_t);                                    \
  template ClassificationReport evaluate(const BasicModel<T>&,                  \
                                         std::span<const Sample>, MatrixRows,   \
                                         std::size_t);

VOXDX_INSTANTIATE_TRAIN(float)
VOXDX_INSTANTIATE_TRAIN(double)

#undef VOXDX_INSTANTIATE_TRAIN

}  // namespace voxdx
