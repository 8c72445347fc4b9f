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

#include "voxdx/autograd.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace voxdx::autograd {

template <typename T>
Var Tape<T>::leaf(BasicTensor<T> value, bool requires_grad) {
  require(!backward_done_, ErrorKind::kState,
          "tape already differentiated; clear() before recording again");
  nodes_.push_back(Node{std::move(value), {}, {}, requires_grad});
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(BasicTensor<T> value, std::span<const Var> parents,
                    BackwardFn backward) {
  require(!backward_done_, ErrorKind::kState,
          "tape already differentiated; clear() before recording again");
  bool any = false;
  for (Var p : parents) any = any || node(p).requires_grad;
  nodes_.push_back(
      Node{std::move(value), {}, any ? std::move(backward) : BackwardFn{}, any});
  return Var{nodes_.size() - 1};
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  require(v.valid() && v.id < nodes_.size(), ErrorKind::kState,
          "variable does not belong to this tape");
  return nodes_[v.id];
}

template <typename T>
const BasicTensor<T>& Tape<T>::value(Var v) const {
  return node(v).value;
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
void Tape<T>::accumulate(Var v, const BasicTensor<T>& g) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return;
  require(g.shape() == n.value.shape(), ErrorKind::kShape,
          "gradient shape " + shape_string(g.shape()) +
              " does not match value shape " + shape_string(n.value.shape()));
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
}

template <typename T>
void Tape<T>::backward(Var loss) {
  require(!nodes_.empty(), ErrorKind::kState,
          "backward called before any forward pass was recorded");
  require(!backward_done_, ErrorKind::kState,
          "backward already ran on this tape");
  const Node& l = node(loss);
  require(l.value.numel() == 1, ErrorKind::kShape,
          "backward needs a scalar loss, got shape " +
              shape_string(l.value.shape()));
  backward_done_ = true;
  if (!l.requires_grad) return;
  nodes_[loss.id].grad = BasicTensor<T>(l.value.shape(), T{1});
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Interior gradients are released once propagated; leaves keep theirs.
    BackwardFn fn = std::move(n.backward);
    BasicTensor<T> g = std::move(n.grad);
    fn(*this, g);
  }
}

template <typename T>
BasicTensor<T> Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return BasicTensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  backward_done_ = false;
}

// ---------------------------------------------------------------------------

template <typename T>
Var conv3d(Tape<T>& tape, Var x, Var kernel, Var bias, std::size_t stride,
           ops::Padding padding) {
  BasicTensor<T> y = ops::conv3d(tape.value(x), tape.value(kernel),
                                 tape.value(bias), stride, padding);
  const Var parents[] = {x, kernel, bias};
  return tape.record(std::move(y), parents,
                     [=](Tape<T>& t, const BasicTensor<T>& g) {
                       auto grads = ops::conv3d_backward(
                           t.value(x), t.value(kernel), g, stride, padding,
                           t.requires_grad(x));
                       if (t.requires_grad(x)) t.accumulate(x, grads.input);
                       t.accumulate(kernel, grads.kernel);
                       t.accumulate(bias, grads.bias);
                     });
}

template <typename T>
Var maxpool3d(Tape<T>& tape, Var x, std::size_t window, std::size_t stride,
              ops::Padding padding) {
  auto pooled = ops::maxpool3d(tape.value(x), window, stride, padding);
  const Var parents[] = {x};
  return tape.record(
      std::move(pooled.output), parents,
      [x, argmax = std::move(pooled.argmax)](Tape<T>& t,
                                             const BasicTensor<T>& g) {
        t.accumulate(x, ops::maxpool3d_backward(g, argmax, t.value(x).shape()));
      });
}

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T alpha) {
  const Var parents[] = {x};
  return tape.record(ops::leaky_relu(tape.value(x), alpha), parents,
                     [=](Tape<T>& t, const BasicTensor<T>& g) {
                       t.accumulate(x, ops::leaky_relu_backward(t.value(x), g,
                                                                alpha));
                     });
}

template <typename T>
Var dense(Tape<T>& tape, Var x, Var weight, Var bias) {
  const Var parents[] = {x, weight, bias};
  return tape.record(
      ops::dense(tape.value(x), tape.value(weight), tape.value(bias)), parents,
      [=](Tape<T>& t, const BasicTensor<T>& g) {
        auto grads = ops::dense_backward(t.value(x), t.value(weight), g,
                                         t.requires_grad(x));
        if (t.requires_grad(x)) t.accumulate(x, grads.input);
        t.accumulate(weight, grads.weight);
        t.accumulate(bias, grads.bias);
      });
}

template <typename T>
Var batch_norm(Tape<T>& tape, Var x, Var gamma, Var beta, ops::NormState& state,
               bool training) {
  auto r = ops::batch_norm(tape.value(x), tape.value(gamma), tape.value(beta),
                           state, training);
  const Var parents[] = {x, gamma, beta};
  return tape.record(std::move(r.output), parents,
                     [=, cache = std::move(r.cache)](Tape<T>& t,
                                                     const BasicTensor<T>& g) {
                       auto grads = ops::batch_norm_backward(cache,
                                                             t.value(gamma), g);
                       t.accumulate(x, grads.input);
                       t.accumulate(gamma, grads.gamma);
                       t.accumulate(beta, grads.beta);
                     });
}

template <typename T>
Var group_norm(Tape<T>& tape, Var x, std::size_t groups, Var gamma, Var beta) {
  auto r = ops::group_norm(tape.value(x), groups, tape.value(gamma),
                           tape.value(beta));
  const Var parents[] = {x, gamma, beta};
  return tape.record(std::move(r.output), parents,
                     [=, cache = std::move(r.cache)](Tape<T>& t,
                                                     const BasicTensor<T>& g) {
                       auto grads = ops::group_norm_backward(cache,
                                                             t.value(gamma), g);
                       t.accumulate(x, grads.input);
                       t.accumulate(gamma, grads.gamma);
                       t.accumulate(beta, grads.beta);
                     });
}

template <typename T>
Var apply_mask(Tape<T>& tape, Var x, BasicTensor<T> mask) {
  BasicTensor<T> y = ops::multiply(tape.value(x), mask);
  const Var parents[] = {x};
  return tape.record(std::move(y), parents,
                     [x, mask = std::move(mask)](Tape<T>& t,
                                                 const BasicTensor<T>& g) {
                       t.accumulate(x, ops::multiply(g, mask));
                     });
}

template <typename T>
LossOutput<T> softmax_cross_entropy(Tape<T>& tape, Var logits,
                                    std::span<const int> labels) {
  auto r = ops::softmax_cross_entropy(tape.value(logits), labels);
  const Var parents[] = {logits};
  std::vector<int> owned(labels.begin(), labels.end());
  Var loss = tape.record(
      BasicTensor<T>::scalar(static_cast<T>(r.loss)), parents,
      [logits, probs = r.probs, owned = std::move(owned)](
          Tape<T>& t, const BasicTensor<T>& g) {
        BasicTensor<T> gl = ops::softmax_cross_entropy_backward(probs, owned);
        for (T& v : gl.data()) v *= g[0];
        t.accumulate(logits, gl);
      });
  return {loss, std::move(r.probs)};
}

template <typename T>
Var flatten(Tape<T>& tape, Var x) {
  const Shape& s = tape.value(x).shape();
  require(!s.empty(), ErrorKind::kShape, "cannot flatten an empty tensor");
  const std::size_t n = s[0];
  BasicTensor<T> y = tape.value(x).reshaped(Shape{n, tape.value(x).numel() / n});
  const Var parents[] = {x};
  return tape.record(std::move(y), parents,
                     [x](Tape<T>& t, const BasicTensor<T>& g) {
                       t.accumulate(x, g.reshaped(t.value(x).shape()));
                     });
}

template <typename T>
Var concat_columns(Tape<T>& tape, Var a, Var b) {
  const BasicTensor<T>& va = tape.value(a);
  const BasicTensor<T>& vb = tape.value(b);
  require(va.rank() == 2 && vb.rank() == 2 && va.dim(0) == vb.dim(0),
          ErrorKind::kShape,
          "concat_columns needs [N,A] and [N,B], got " +
              shape_string(va.shape()) + " and " + shape_string(vb.shape()));
  const std::size_t n = va.dim(0), fa = va.dim(1), fb = vb.dim(1);
  BasicTensor<T> y(Shape{n, fa + fb});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(va.raw() + i * fa, fa, y.raw() + i * (fa + fb));
    std::copy_n(vb.raw() + i * fb, fb, y.raw() + i * (fa + fb) + fa);
  }
  const Var parents[] = {a, b};
  return tape.record(std::move(y), parents,
                     [=](Tape<T>& t, const BasicTensor<T>& g) {
                       BasicTensor<T> ga(Shape{n, fa}), gb(Shape{n, fb});
                       for (std::size_t i = 0; i < n; ++i) {
                         std::copy_n(g.raw() + i * (fa + fb), fa,
                                     ga.raw() + i * fa);
                         std::copy_n(g.raw() + i * (fa + fb) + fa, fb,
                                     gb.raw() + i * fb);
                       }
                       t.accumulate(a, ga);
                       t.accumulate(b, gb);
                     });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require(tape.value(a).shape() == tape.value(b).shape(), ErrorKind::kShape,
          "add shape mismatch");
  BasicTensor<T> y = tape.value(a);
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += tape.value(b)[i];
  const Var parents[] = {a, b};
  return tape.record(std::move(y), parents,
                     [=](Tape<T>& t, const BasicTensor<T>& g) {
                       t.accumulate(a, g);
                       t.accumulate(b, g);
                     });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  double s = 0.0;
  for (T v : tape.value(x).data()) s += v;
  const Var parents[] = {x};
  return tape.record(BasicTensor<T>::scalar(static_cast<T>(s)), parents,
                     [x](Tape<T>& t, const BasicTensor<T>& g) {
                       t.accumulate(x, BasicTensor<T>(t.value(x).shape(), g[0]));
                     });
}

#define VOXDX_INSTANTIATE_AUTOGRAD(T)                                          \
  template class Tape<T>;                                                      \
  template Var conv3d(Tape<T>&, Var, Var, Var, std::size_t, ops::Padding);     \
  template Var maxpool3d(Tape<T>&, Var, std::size_t, std::size_t,              \
                         ops::Padding);                                        \
  template Var leaky_relu(Tape<T>&, Var, T);                                   \
  template Var dense(Tape<T>&, Var, Var, Var);                                 \
  template Var batch_norm(Tape<T>&, Var, Var, Var, ops::NormState&, bool);     \
  template Var group_norm(Tape<T>&, Var, std::size_t, Var, Var);               \
  template Var apply_mask(Tape<T>&, Var, BasicTensor<T>);                      \
  template LossOutput<T> softmax_cross_entropy(Tape<T>&, Var,                  \
                                               std::span<const int>);          \
  template Var flatten(Tape<T>&, Var);                                         \
  template Var concat_columns(Tape<T>&, Var, Var);                             \
  template Var add(Tape<T>&, Var, Var);                                        \
  template Var sum(Tape<T>&, Var);

VOXDX_INSTANTIATE_AUTOGRAD(float)
VOXDX_INSTANTIATE_AUTOGRAD(double)

#undef VOXDX_INSTANTIATE_AUTOGRAD

}  // namespace voxdx::autograd
