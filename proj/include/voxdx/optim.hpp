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

#ifndef VOXDX_OPTIM_HPP_
#define VOXDX_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "voxdx/parameters.hpp"

namespace voxdx {

struct TrainConfig {
  double lr0 = 1e-4;
  double decay_k = 0.0;
  std::int64_t decay_steps = 1;
  std::size_t batch_size = 8;
  int max_epochs = 50;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  // Stop once training F2 has been 1.0 for this many consecutive epochs;
  // 0 disables early stopping.
  int patience = 5;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// lr0 * exp(-k * floor(step / decay_steps)).
double lr_schedule(double lr0, double k, std::int64_t step,
                   std::int64_t decay_steps);

template <typename T>
struct AdamMoments {
  BasicTensor<T> m;
  BasicTensor<T> v;
};

template <typename T>
struct AdamState {
  std::map<std::string, AdamMoments<T>, std::less<>> moments;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of every parameter. Throws if a parameter
// has no gradient, a shape disagrees, or a gradient is not finite (the
// message names the parameter); parameters are untouched on error.
template <typename T>
void adam_step(ParameterList<T>& params, const GradMap<T>& grads,
               AdamState<T>& state, double lr, const TrainConfig& tc);

template <typename T>
struct PenaltyResult {
  double loss = 0.0;
  GradMap<T> grads;  // 2 * rc * p, only for conv kernels and biases
};

// rc * sum of squared conv kernel and conv bias entries.
template <typename T>
PenaltyResult<T> l2_penalty(const ParameterList<T>& params, double rc);

}  // namespace voxdx

#endif  // VOXDX_OPTIM_HPP_
