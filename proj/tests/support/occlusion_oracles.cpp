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

#include "occlusion_oracles.hpp"

#include <algorithm>
#include <cmath>

#include "voxdx/rng.hpp"

namespace voxdx::testing {

LinearSurrogate::LinearSurrogate(Extents3 e, std::uint64_t seed, bool logistic)
    : weights(e), logistic(logistic) {
  Rng rng(seed);
  const double sd = logistic ? 0.3 : 0.01;
  for (float& w : weights.voxels) w = static_cast<float>(rng.normal(0.0, sd));
}

double LinearSurrogate::link(double s) const {
  return logistic ? 1.0 / (1.0 + std::exp(-s)) : s;
}

ProbabilityFn LinearSurrogate::scorer() const {
  return [this](std::span<const Volume> vols) {
    std::vector<double> out;
    for (const Volume& v : vols) {
      double s = bias;
      for (std::size_t i = 0; i < v.voxels.size(); ++i)
        s += static_cast<double>(weights.voxels[i]) * v.voxels[i];
      out.push_back(link(s));
    }
    return out;
  };
}

double linear_occlusion_error(Extents3 e, std::uint32_t box, std::uint32_t stride,
                              std::uint64_t seed, bool logistic) {
  const LinearSurrogate s(e, seed, logistic);
  Volume v(e);
  Rng rng(seed + 1);
  for (float& x : v.voxels) x = static_cast<float>(rng.normal());
  double score = s.bias;
  for (std::size_t i = 0; i < v.voxels.size(); ++i)
    score += static_cast<double>(s.weights.voxels[i]) * v.voxels[i];
  OcclusionOptions opts;
  opts.box = box;
  opts.stride = stride;
  const Heatmap h = occlusion_heatmap(v, s.scorer(), opts);

  std::vector<double> sum(e.count(), 0.0);
  std::vector<int> count(e.count(), 0);
  for (std::uint32_t x0 = 0; x0 < e.x; x0 += stride)
    for (std::uint32_t y0 = 0; y0 < e.y; y0 += stride)
      for (std::uint32_t z0 = 0; z0 < e.z; z0 += stride) {
        const std::uint32_t x1 = std::min(x0 + box, e.x), y1 = std::min(y0 + box, e.y),
                            z1 = std::min(z0 + box, e.z);
        double d = 0.0;
        for (std::uint32_t x = x0; x < x1; ++x)
          for (std::uint32_t y = y0; y < y1; ++y)
            for (std::uint32_t z = z0; z < z1; ++z)
              d -= static_cast<double>(s.weights.at(x, y, z)) * v.at(x, y, z);
        d = s.link(score + d) - s.link(score);
        for (std::uint32_t x = x0; x < x1; ++x)
          for (std::uint32_t y = y0; y < y1; ++y)
            for (std::uint32_t z = z0; z < z1; ++z) {
              sum[v.index(x, y, z)] += d;
              ++count[v.index(x, y, z)];
            }
      }
  double worst = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double want = count[i] ? sum[i] / count[i] : 0.0;
    worst = std::max(worst, std::abs(want - static_cast<double>(h.delta.voxels[i])));
  }
  return worst;
}

}  // namespace voxdx::testing
