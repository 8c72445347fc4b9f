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

#ifndef VOXDX_AUTOGRAD_HPP_
#define VOXDX_AUTOGRAD_HPP_

// Reverse-mode differentiation over a linear tape. Each recorded op stores
// its output value and a closure that pushes the output gradient to its
// inputs; backward() replays the closures in reverse recording order.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "voxdx/ops.hpp"
#include "voxdx/tensor.hpp"

namespace voxdx::autograd {

struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;

  bool valid() const noexcept { return id != kInvalid; }
  friend bool operator==(Var a, Var b) { return a.id == b.id; }
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const BasicTensor<T>& grad)>;

  // A leaf holds an input or a parameter.
  Var leaf(BasicTensor<T> value, bool requires_grad = true);

  // Records an op output. `backward` is only invoked when the node receives
  // a gradient, and only if some parent requires one.
  Var record(BasicTensor<T> value, std::span<const Var> parents,
             BackwardFn backward);

  const BasicTensor<T>& value(Var v) const;
  bool requires_grad(Var v) const;

  // Adds `g` into the gradient slot of `v` (no-op for non-differentiable
  // nodes).
  void accumulate(Var v, const BasicTensor<T>& g);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
  // May be called once per recording.
  void backward(Var loss);

  // Gradient of the last backward() with respect to leaf `v`; zeros if `v`
  // did not influence the loss. Interior gradients are not retained.
  BasicTensor<T> grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Differentiable ops. Each mirrors the kernel of the same name in ops::.

template <typename T>
Var conv3d(Tape<T>& tape, Var x, Var kernel, Var bias, std::size_t stride = 1,
           ops::Padding padding = ops::Padding::kSame);

template <typename T>
Var maxpool3d(Tape<T>& tape, Var x, std::size_t window, std::size_t stride,
              ops::Padding padding = ops::Padding::kSame);

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T alpha);

template <typename T>
Var dense(Tape<T>& tape, Var x, Var weight, Var bias);

template <typename T>
Var batch_norm(Tape<T>& tape, Var x, Var gamma, Var beta, ops::NormState& state,
               bool training);

template <typename T>
Var group_norm(Tape<T>& tape, Var x, std::size_t groups, Var gamma, Var beta);

// Multiplies by a precomputed dropout mask (see ops::dropout_mask).
template <typename T>
Var apply_mask(Tape<T>& tape, Var x, BasicTensor<T> mask);

template <typename T>
struct LossOutput {
  Var loss;
  BasicTensor<T> probs;
};

template <typename T>
LossOutput<T> softmax_cross_entropy(Tape<T>& tape, Var logits,
                                    std::span<const int> labels);

// Collapses every axis after the first: [N, ...] -> [N, F].
template <typename T>
Var flatten(Tape<T>& tape, Var x);

// Column concatenation of two [N,*] matrices.
template <typename T>
Var concat_columns(Tape<T>& tape, Var a, Var b);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var sum(Tape<T>& tape, Var x);

}  // namespace voxdx::autograd

#endif  // VOXDX_AUTOGRAD_HPP_
