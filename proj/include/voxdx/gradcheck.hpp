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

#ifndef VOXDX_GRADCHECK_HPP_
#define VOXDX_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "voxdx/error.hpp"
#include "voxdx/tensor.hpp"

namespace voxdx {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every
// coordinate i of x.
template <typename T>
BasicTensor<T> finite_difference_grad(
    const std::function<double(const BasicTensor<T>&)>& f, BasicTensor<T> x,
    double h) {
  require(h > 0, ErrorKind::kInvalidArgument, "finite difference step must be > 0");
  BasicTensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T saved = x[i];
    x[i] = static_cast<T>(saved + h);
    const double up = f(x);
    x[i] = static_cast<T>(saved - h);
    const double down = f(x);
    x[i] = saved;
    g[i] = static_cast<T>((up - down) / (2 * h));
  }
  return g;
}

// Same, restricted to the listed coordinates; returns one derivative per
// coordinate.
template <typename T>
std::vector<double> finite_difference_grad_at(
    const std::function<double(const BasicTensor<T>&)>& f, BasicTensor<T> x,
    std::span<const std::size_t> coordinates, double h) {
  require(h > 0, ErrorKind::kInvalidArgument, "finite difference step must be > 0");
  std::vector<double> out;
  out.reserve(coordinates.size());
  for (std::size_t i : coordinates) {
    const T saved = x[i];
    x[i] = static_cast<T>(saved + h);
    const double up = f(x);
    x[i] = static_cast<T>(saved - h);
    const double down = f(x);
    x[i] = saved;
    out.push_back((up - down) / (2 * h));
  }
  return out;
}

// |a - b| / max(|a|, |b|), falling back to the absolute difference when both
// magnitudes are below `floor`.
inline double relative_error(double a, double b, double floor = 1e-7) {
  const double scale = std::max(std::abs(a), std::abs(b));
  const double diff = std::abs(a - b);
  return scale < floor ? diff / floor : diff / scale;
}

// ||a - b|| / max(||a||, ||b||) over whole vectors (Euclidean norms), with
// the same floor on the denominator.
inline double normwise_relative_error(std::span<const double> a,
                                      std::span<const double> b,
                                      double floor = 1e-7) {
  require(a.size() == b.size(), ErrorKind::kShape, "vector lengths differ");
  double na = 0, nb = 0, nd = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    nd += (a[i] - b[i]) * (a[i] - b[i]);
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), floor});
  return std::sqrt(nd) / scale;
}

}  // namespace voxdx

#endif  // VOXDX_GRADCHECK_HPP_
