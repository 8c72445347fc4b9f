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

#include "voxdx/optim.hpp"

#include <cmath>

#include "voxdx/error.hpp"

namespace voxdx {

void TrainConfig::validate() const {
  require(lr0 > 0 && std::isfinite(lr0), ErrorKind::kInvalidArgument,
          "lr0 must be > 0");
  require(decay_k >= 0, ErrorKind::kInvalidArgument, "decay_k must be >= 0");
  require(decay_steps >= 1, ErrorKind::kInvalidArgument, "decay_steps must be >= 1");
  require(batch_size >= 1, ErrorKind::kInvalidArgument, "batch_size must be >= 1");
  require(max_epochs >= 0, ErrorKind::kInvalidArgument, "max_epochs must be >= 0");
  require(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1,
          ErrorKind::kInvalidArgument, "Adam betas must lie in (0,1)");
  require(eps_adam > 0, ErrorKind::kInvalidArgument, "eps_adam must be > 0");
  require(patience >= 0, ErrorKind::kInvalidArgument, "patience must be >= 0");
}

double lr_schedule(double lr0, double k, std::int64_t step,
                   std::int64_t decay_steps) {
  require(decay_steps >= 1, ErrorKind::kInvalidArgument, "decay_steps must be >= 1");
  require(step >= 0, ErrorKind::kInvalidArgument, "step must be >= 0");
  if (k == 0.0) return lr0;
  return lr0 * std::exp(-k * static_cast<double>(step / decay_steps));
}

template <typename T>
void adam_step(ParameterList<T>& params, const GradMap<T>& grads,
               AdamState<T>& state, double lr, const TrainConfig& tc) {
  for (const auto& p : params) {
    auto it = grads.find(p.name);
    require(it != grads.end(), ErrorKind::kInvalidArgument,
            "no gradient for parameter '" + p.name + "'");
    require(it->second.shape() == p.value.shape(), ErrorKind::kShape,
            "gradient for '" + p.name + "' has shape " +
                shape_string(it->second.shape()) + ", parameter has " +
                shape_string(p.value.shape()));
    for (T g : it->second.data()) {
      require(std::isfinite(static_cast<double>(g)), ErrorKind::kNumerical,
              "non-finite gradient for parameter '" + p.name + "'");
    }
  }

  const std::int64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(t));
  for (auto& p : params) {
    const BasicTensor<T>& g = grads.find(p.name)->second;
    auto [it, fresh] = state.moments.try_emplace(p.name);
    AdamMoments<T>& mo = it->second;
    if (fresh) {
      mo.m = BasicTensor<T>(p.value.shape());
      mo.v = BasicTensor<T>(p.value.shape());
    }
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double gi = g[i];
      const double m = tc.beta1 * mo.m[i] + (1.0 - tc.beta1) * gi;
      const double v = tc.beta2 * mo.v[i] + (1.0 - tc.beta2) * gi * gi;
      mo.m[i] = static_cast<T>(m);
      mo.v[i] = static_cast<T>(v);
      const double update = lr * (m / c1) / (std::sqrt(v / c2) + tc.eps_adam);
      p.value[i] = static_cast<T>(p.value[i] - update);
    }
  }
  state.step = t;
}

template <typename T>
PenaltyResult<T> l2_penalty(const ParameterList<T>& params, double rc) {
  require(rc >= 0, ErrorKind::kInvalidArgument, "rc must be >= 0");
  PenaltyResult<T> r;
  if (rc == 0.0) return r;
  for (const auto& p : params) {
    if (p.role != ParamRole::kConvKernel && p.role != ParamRole::kConvBias) continue;
    double s = 0.0;
    BasicTensor<T> g(p.value.shape());
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      s += static_cast<double>(p.value[i]) * p.value[i];
      g[i] = static_cast<T>(2.0 * rc * p.value[i]);
    }
    r.loss += rc * s;
    r.grads.emplace(p.name, std::move(g));
  }
  return r;
}

template void adam_step(ParameterList<float>&, const GradMap<float>&,
                        AdamState<float>&, double, const TrainConfig&);
template void adam_step(ParameterList<double>&, const GradMap<double>&,
                        AdamState<double>&, double, const TrainConfig&);
template PenaltyResult<float> l2_penalty(const ParameterList<float>&, double);
template PenaltyResult<double> l2_penalty(const ParameterList<double>&, double);

}  // namespace voxdx
