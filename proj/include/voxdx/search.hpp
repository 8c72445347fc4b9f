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

#ifndef VOXDX_SEARCH_HPP_
#define VOXDX_SEARCH_HPP_

// Random hyperparameter search and the fixed twelve-row experiment grid.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxdx/data.hpp"
#include "voxdx/model.hpp"
#include "voxdx/optim.hpp"

namespace voxdx {

struct SampledConfig {
  ModelConfig model;
  TrainConfig train;
  friend bool operator==(const SampledConfig&, const SampledConfig&) = default;
};

// Continuous ranges accept lo == hi, which always yields lo.
struct SearchSpace {
  double lr_lo = 1e-6, lr_hi = 1e-3;  // log-uniform
  std::vector<double> alphas{0.0, 0.01, 0.1};
  double rc_lo = 1e-4, rc_hi = 1e-1;  // log-uniform
  double rc_zero_prob = 0.25;         // chance of drawing rc = 0 instead
  double kp1_lo = 0.2, kp1_hi = 1.0;  // uniform
  double kp2_lo = 0.2, kp2_hi = 1.0;
  std::vector<Variant> variants{Variant::kOriginal, Variant::kSimplified};
  std::vector<NormKind> norms{NormKind::kNone, NormKind::kBatch, NormKind::kGroup};
  std::vector<bool> demographics{false, true};
  // Fields of every trial's TrainConfig that are not sampled.
  TrainConfig base;

  void validate() const;
  bool contains(const SampledConfig& c) const;
};

// Draw order: variant, norm, demographics, lr, alpha, rc, kp1, kp2.
SampledConfig sample_config(const SearchSpace& space, Rng& rng);

struct TrialMetrics {
  double final_train_f2 = 0.0;
  double best_dev_f2 = 0.0;
  int epochs = 0;
  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

using Evaluator =
    std::function<TrialMetrics(const SampledConfig& config, std::uint64_t seed)>;

struct TrialResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string name;
  SampledConfig config;
  bool ok = false;
  std::string error;  // set when !ok
  TrialMetrics metrics;
  double wall_seconds = 0.0;

  // Wall time is excluded.
  bool same_outcome(const TrialResult& o) const;
};

struct SearchResult {
  std::vector<TrialResult> ranked;    // successful trials, best first
  std::vector<TrialResult> failures;  // in trial order
};

struct SearchOptions {
  // Append one JSON record per finished trial; with `resume`, trials whose
  // index, seed and configuration already appear in the file are not rerun.
  std::optional<std::filesystem::path> log_path;
  bool resume = false;
  std::function<void(const TrialResult&)> on_trial;
};

// Trial i uses seed derive_seed(master_seed, i) both to sample its
// configuration and, via the evaluator, to train. Ranking: best dev F2
// descending, then fewer epochs, then trial index.
SearchResult random_search(const SearchSpace& space, std::size_t budget,
                           const Evaluator& evaluator, std::uint64_t master_seed,
                           const SearchOptions& options = {});

struct GridRow {
  std::string name;
  SampledConfig config;
};

// The twelve published configurations, OM through SM-GA-GRD, with `base`
// supplying the unsampled training fields.
std::vector<GridRow> table3_preset(const TrainConfig& base = {});

// Runs the first `budget` rows (budget <= rows.size()).
SearchResult run_grid(std::span<const GridRow> rows, std::size_t budget,
                      const Evaluator& evaluator, std::uint64_t master_seed,
                      const SearchOptions& options = {});

void rank_trials(std::vector<TrialResult>& trials);

// One row per trial in index order with train and dev F2 columns; failed
// trials show their error.
std::string table_report(const SearchResult& result);

std::string trial_json(const TrialResult& t);
TrialResult trial_from_json(const std::string& line);

// Builds, trains and scores a model for each configuration. The sample
// spans must outlive the evaluator.
Evaluator training_evaluator(std::span<const Sample> train_set,
                             std::span<const Sample> dev_set,
                             Extents3 extents,
                             const DemographicEncoder& encoder);

}  // namespace voxdx

#endif  // VOXDX_SEARCH_HPP_
