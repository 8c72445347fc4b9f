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

#ifndef VOXDX_OPS_HPP_
#define VOXDX_OPS_HPP_

// Forward and backward kernels for the layer primitives of the volumetric
// network. Activations are channels-last: [N, D, H, W, C].
//
// Every function here is a pure function of its arguments (dropout takes an
// explicit generator). Reductions run in a fixed order so results are
// bit-reproducible.

#include <cstddef>
#include <span>
#include <vector>

#include "voxdx/rng.hpp"
#include "voxdx/tensor.hpp"

namespace voxdx::ops {

enum class Padding { kSame, kValid };

// Placement of a sliding window along one axis.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};

// Same: out = ceil(in / stride), padding split with the smaller half first.
// Valid: out = floor((in - window) / stride) + 1; throws if window > in.
AxisGeometry axis_geometry(std::size_t in, std::size_t window,
                           std::size_t stride, Padding padding);

// ---------------------------------------------------------------------------
// conv3d: input [N,D,H,W,Cin], kernel [k,k,k,Cin,Cout], bias [Cout].

template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, std::size_t stride,
                      Padding padding);

template <typename T>
struct Conv3dGrads {
  BasicTensor<T> input;  // empty when not requested
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

template <typename T>
Conv3dGrads<T> conv3d_backward(const BasicTensor<T>& input,
                               const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output,
                               std::size_t stride, Padding padding,
                               bool need_input_grad);

// ---------------------------------------------------------------------------
// maxpool3d. Window cells falling outside the input are excluded from the
// max; ties go to the lowest flat input index.

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
PoolResult<T> maxpool3d(const BasicTensor<T>& input, std::size_t window,
                        std::size_t stride, Padding padding = Padding::kSame);

template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& grad_output,
                                  std::span<const std::size_t> argmax,
                                  const Shape& input_shape);

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T alpha);

template <typename T>
BasicTensor<T> leaky_relu_backward(const BasicTensor<T>& x,
                                   const BasicTensor<T>& grad_output, T alpha);

// ---------------------------------------------------------------------------
// dense: x [N,F] times weight [F,G] plus bias [G].

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                     const BasicTensor<T>& bias);

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x,
                             const BasicTensor<T>& weight,
                             const BasicTensor<T>& grad_output,
                             bool need_input_grad);

// ---------------------------------------------------------------------------
// Normalization. The channel axis is the last axis.

struct NormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  static NormState for_channels(std::size_t channels) {
    NormState s;
    s.running_mean.assign(channels, 0.0);
    s.running_var.assign(channels, 1.0);
    return s;
  }
};

template <typename T>
struct NormCache {
  BasicTensor<T> normalized;      // x-hat
  std::vector<double> inv_std;    // one per statistics group
  std::size_t groups = 0;         // 0 for batch norm
  bool batch_statistics = true;   // false: inference batch norm (affine)
};

template <typename T>
struct NormResult {
  BasicTensor<T> output;
  NormCache<T> cache;
};

template <typename T>
struct NormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

// Training mode normalizes with batch statistics (biased variance) and folds
// them into the running averages; inference mode uses the running averages.
template <typename T>
NormResult<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                         const BasicTensor<T>& beta, NormState& state,
                         bool training);

template <typename T>
NormGrads<T> batch_norm_backward(const NormCache<T>& cache,
                                 const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& grad_output);

// Statistics per sample and per group of C/groups adjacent channels.
template <typename T>
NormResult<T> group_norm(const BasicTensor<T>& x, std::size_t groups,
                         const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                         double eps = 1e-5);

template <typename T>
NormGrads<T> group_norm_backward(const NormCache<T>& cache,
                                 const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& grad_output);

// Eight groups, clamped to the channel count.
std::size_t default_group_count(std::size_t channels);

// ---------------------------------------------------------------------------
// Inverted dropout. The mask holds 0 or 1/keep_prob per element.

template <typename T>
BasicTensor<T> dropout_mask(const Shape& shape, double keep_prob, Rng& rng);

template <typename T>
BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double keep_prob, Rng& rng,
                       bool training);

// ---------------------------------------------------------------------------

template <typename T>
struct SoftmaxResult {
  double loss = 0.0;  // mean negative log-likelihood
  BasicTensor<T> probs;
};

template <typename T>
SoftmaxResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                       std::span<const int> labels);

// Gradient of the mean loss with respect to the logits.
template <typename T>
BasicTensor<T> softmax_cross_entropy_backward(const BasicTensor<T>& probs,
                                              std::span<const int> labels);

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

}  // namespace voxdx::ops

#endif  // VOXDX_OPS_HPP_
