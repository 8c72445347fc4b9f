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

#include "voxdx/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace voxdx::ops {
namespace {

struct Geometry3 {
  std::size_t n, d, h, w, c;  // input
  std::size_t od, oh, ow;     // output
  std::size_t pd, ph, pw;     // padding before
};

void require_rank5(const Shape& s, const char* what) {
  require(s.size() == 5, ErrorKind::kShape,
          std::string(what) + " must be rank 5 [N,D,H,W,C], got " +
              shape_string(s));
}

Geometry3 geometry(const Shape& in, std::size_t window, std::size_t stride,
                   Padding padding) {
  Geometry3 g{};
  g.n = in[0];
  g.d = in[1];
  g.h = in[2];
  g.w = in[3];
  g.c = in[4];
  const AxisGeometry ad = axis_geometry(g.d, window, stride, padding);
  const AxisGeometry ah = axis_geometry(g.h, window, stride, padding);
  const AxisGeometry aw = axis_geometry(g.w, window, stride, padding);
  g.od = ad.out;
  g.oh = ah.out;
  g.ow = aw.out;
  g.pd = ad.pad_before;
  g.ph = ah.pad_before;
  g.pw = aw.pad_before;
  return g;
}

// Input coordinate of window offset `k` for output index `o`; false when the
// position falls in the padding.
inline bool input_index(std::size_t o, std::size_t k, std::size_t stride,
                        std::size_t pad, std::size_t extent, std::size_t& i) {
  const std::ptrdiff_t v = static_cast<std::ptrdiff_t>(o * stride + k) -
                           static_cast<std::ptrdiff_t>(pad);
  if (v < 0 || v >= static_cast<std::ptrdiff_t>(extent)) return false;
  i = static_cast<std::size_t>(v);
  return true;
}

void check_conv_args(const Shape& x, const Shape& k, std::size_t stride) {
  require_rank5(x, "conv3d input");
  require(k.size() == 5 && k[0] == k[1] && k[1] == k[2], ErrorKind::kShape,
          "conv3d kernel must be [k,k,k,Cin,Cout], got " + shape_string(k));
  require(k[3] == x[4], ErrorKind::kShape,
          "conv3d kernel expects " + std::to_string(k[3]) +
              " input channels but input has " + std::to_string(x[4]));
  require(stride >= 1, ErrorKind::kInvalidArgument, "conv3d stride must be >= 1");
}

}  // namespace

AxisGeometry axis_geometry(std::size_t in, std::size_t window,
                           std::size_t stride, Padding padding) {
  require(window >= 1 && stride >= 1, ErrorKind::kInvalidArgument,
          "window and stride must be >= 1");
  require(in >= 1, ErrorKind::kShape, "zero-extent input");
  AxisGeometry g;
  if (padding == Padding::kSame) {
    g.out = (in + stride - 1) / stride;
    const std::size_t span = (g.out - 1) * stride + window;
    g.pad_before = span > in ? (span - in) / 2 : 0;
  } else {
    require(window <= in, ErrorKind::kShape,
            "window " + std::to_string(window) + " larger than input extent " +
                std::to_string(in));
    g.out = (in - window) / stride + 1;
    g.pad_before = 0;
  }
  return g;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> conv3d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, std::size_t stride,
                      Padding padding) {
  require(!input.empty(), ErrorKind::kShape, "conv3d input is empty");
  check_conv_args(input.shape(), kernel.shape(), stride);
  const std::size_t k = kernel.dim(0);
  const std::size_t cin = kernel.dim(3);
  const std::size_t cout = kernel.dim(4);
  require(bias.shape() == Shape{cout}, ErrorKind::kShape,
          "conv3d bias must be [Cout]");
  const Geometry3 g = geometry(input.shape(), k, stride, padding);

  BasicTensor<T> out(Shape{g.n, g.od, g.oh, g.ow, cout});
  const T* __restrict x = input.raw();
  const T* __restrict kw_base = kernel.raw();
  T* __restrict o = out.raw();

  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t od = 0; od < g.od; ++od)
      for (std::size_t oh = 0; oh < g.oh; ++oh)
        for (std::size_t ow = 0; ow < g.ow; ++ow) {
          T* __restrict acc =
              o + (((n * g.od + od) * g.oh + oh) * g.ow + ow) * cout;
          std::copy(bias.raw(), bias.raw() + cout, acc);
          for (std::size_t kd = 0; kd < k; ++kd) {
            std::size_t id;
            if (!input_index(od, kd, stride, g.pd, g.d, id)) continue;
            for (std::size_t kh = 0; kh < k; ++kh) {
              std::size_t ih;
              if (!input_index(oh, kh, stride, g.ph, g.h, ih)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                std::size_t iw;
                if (!input_index(ow, kx, stride, g.pw, g.w, iw)) continue;
                const T* __restrict xi =
                    x + (((n * g.d + id) * g.h + ih) * g.w + iw) * cin;
                const T* __restrict kk =
                    kw_base + ((kd * k + kh) * k + kx) * cin * cout;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  const T v = xi[ci];
                  const T* __restrict kr = kk + ci * cout;
                  for (std::size_t co = 0; co < cout; ++co) acc[co] += v * kr[co];
                }
              }
            }
          }
        }
  return out;
}

template <typename T>
Conv3dGrads<T> conv3d_backward(const BasicTensor<T>& input,
                               const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output,
                               std::size_t stride, Padding padding,
                               bool need_input_grad) {
  check_conv_args(input.shape(), kernel.shape(), stride);
  const std::size_t k = kernel.dim(0);
  const std::size_t cin = kernel.dim(3);
  const std::size_t cout = kernel.dim(4);
  const Geometry3 g = geometry(input.shape(), k, stride, padding);
  require(grad_output.shape() == Shape{g.n, g.od, g.oh, g.ow, cout},
          ErrorKind::kShape, "conv3d grad_output shape mismatch");

  Conv3dGrads<T> grads;
  grads.kernel = BasicTensor<T>(kernel.shape());
  grads.bias = BasicTensor<T>(Shape{cout});

  // Kernel transposed to [k,k,k,Cout,Cin] so the input-gradient inner loop
  // runs over contiguous Cin.
  std::vector<T> kt;
  if (need_input_grad) {
    grads.input = BasicTensor<T>(input.shape());
    kt.resize(kernel.numel());
    const std::size_t taps = k * k * k;
    for (std::size_t t = 0; t < taps; ++t)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t co = 0; co < cout; ++co)
          kt[(t * cout + co) * cin + ci] = kernel[(t * cin + ci) * cout + co];
  }

  const T* __restrict x = input.raw();
  const T* __restrict go = grad_output.raw();
  T* __restrict gk = grads.kernel.raw();
  T* __restrict gb = grads.bias.raw();
  T* __restrict gx = need_input_grad ? grads.input.raw() : nullptr;

  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t od = 0; od < g.od; ++od)
      for (std::size_t oh = 0; oh < g.oh; ++oh)
        for (std::size_t ow = 0; ow < g.ow; ++ow) {
          const T* __restrict gr =
              go + (((n * g.od + od) * g.oh + oh) * g.ow + ow) * cout;
          for (std::size_t co = 0; co < cout; ++co) gb[co] += gr[co];
          for (std::size_t kd = 0; kd < k; ++kd) {
            std::size_t id;
            if (!input_index(od, kd, stride, g.pd, g.d, id)) continue;
            for (std::size_t kh = 0; kh < k; ++kh) {
              std::size_t ih;
              if (!input_index(oh, kh, stride, g.ph, g.h, ih)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                std::size_t iw;
                if (!input_index(ow, kx, stride, g.pw, g.w, iw)) continue;
                const std::size_t tap = (kd * k + kh) * k + kx;
                const std::size_t in_off =
                    (((n * g.d + id) * g.h + ih) * g.w + iw) * cin;
                const T* __restrict xi = x + in_off;
                T* __restrict gkk = gk + tap * cin * cout;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  const T v = xi[ci];
                  if (v == T{0}) continue;
                  T* __restrict row = gkk + ci * cout;
                  for (std::size_t co = 0; co < cout; ++co) row[co] += v * gr[co];
                }
                if (gx) {
                  T* __restrict gxi = gx + in_off;
                  const T* __restrict ktt = kt.data() + tap * cout * cin;
                  for (std::size_t co = 0; co < cout; ++co) {
                    const T gv = gr[co];
                    if (gv == T{0}) continue;
                    const T* __restrict kr = ktt + co * cin;
                    for (std::size_t ci = 0; ci < cin; ++ci) gxi[ci] += gv * kr[ci];
                  }
                }
              }
            }
          }
        }
  return grads;
}

// ---------------------------------------------------------------------------

template <typename T>
PoolResult<T> maxpool3d(const BasicTensor<T>& input, std::size_t window,
                        std::size_t stride, Padding padding) {
  require(!input.empty(), ErrorKind::kShape, "maxpool3d input is empty");
  require_rank5(input.shape(), "maxpool3d input");
  const Geometry3 g = geometry(input.shape(), window, stride, padding);
  PoolResult<T> r;
  r.output = BasicTensor<T>(Shape{g.n, g.od, g.oh, g.ow, g.c});
  r.argmax.assign(r.output.numel(), 0);
  const T* x = input.raw();
  T* o = r.output.raw();
  std::vector<T> best(g.c);
  std::vector<std::size_t> arg(g.c);

  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t od = 0; od < g.od; ++od)
      for (std::size_t oh = 0; oh < g.oh; ++oh)
        for (std::size_t ow = 0; ow < g.ow; ++ow) {
          std::fill(best.begin(), best.end(),
                    -std::numeric_limits<T>::infinity());
          bool first = true;
          for (std::size_t kd = 0; kd < window; ++kd) {
            std::size_t id;
            if (!input_index(od, kd, stride, g.pd, g.d, id)) continue;
            for (std::size_t kh = 0; kh < window; ++kh) {
              std::size_t ih;
              if (!input_index(oh, kh, stride, g.ph, g.h, ih)) continue;
              for (std::size_t kx = 0; kx < window; ++kx) {
                std::size_t iw;
                if (!input_index(ow, kx, stride, g.pw, g.w, iw)) continue;
                const std::size_t base =
                    (((n * g.d + id) * g.h + ih) * g.w + iw) * g.c;
                if (first) {
                  for (std::size_t c = 0; c < g.c; ++c) {
                    best[c] = x[base + c];
                    arg[c] = base + c;
                  }
                  first = false;
                  continue;
                }
                // Cells are visited in increasing flat index, so a strict
                // comparison keeps the lowest index among ties.
                for (std::size_t c = 0; c < g.c; ++c) {
                  if (x[base + c] > best[c]) {
                    best[c] = x[base + c];
                    arg[c] = base + c;
                  }
                }
              }
            }
          }
          const std::size_t ob = (((n * g.od + od) * g.oh + oh) * g.ow + ow) * g.c;
          std::copy(best.begin(), best.end(), o + ob);
          std::copy(arg.begin(), arg.end(), r.argmax.begin() + ob);
        }
  return r;
}

template <typename T>
BasicTensor<T> maxpool3d_backward(const BasicTensor<T>& grad_output,
                                  std::span<const std::size_t> argmax,
                                  const Shape& input_shape) {
  require(argmax.size() == grad_output.numel(), ErrorKind::kShape,
          "maxpool3d argmax does not match grad_output");
  BasicTensor<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_output[i];
  return gx;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, T alpha) {
  BasicTensor<T> y = x;
  for (T& v : y.data()) v = v >= T{0} ? v : alpha * v;
  return y;
}

template <typename T>
BasicTensor<T> leaky_relu_backward(const BasicTensor<T>& x,
                                   const BasicTensor<T>& grad_output, T alpha) {
  require(x.shape() == grad_output.shape(), ErrorKind::kShape,
          "leaky_relu grad shape mismatch");
  BasicTensor<T> g = grad_output;
  for (std::size_t i = 0; i < g.numel(); ++i)
    if (x[i] < T{0}) g[i] *= alpha;
  return g;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                     const BasicTensor<T>& bias) {
  require(x.rank() == 2 && weight.rank() == 2, ErrorKind::kShape,
          "dense expects x [N,F] and weight [F,G]");
  require(x.dim(1) == weight.dim(0), ErrorKind::kShape,
          "dense inner dimensions disagree: x " + shape_string(x.shape()) +
              " weight " + shape_string(weight.shape()));
  const std::size_t n = x.dim(0), f = x.dim(1), g = weight.dim(1);
  require(bias.shape() == Shape{g}, ErrorKind::kShape, "dense bias must be [G]");
  BasicTensor<T> out(Shape{n, g});
  for (std::size_t i = 0; i < n; ++i) {
    T* __restrict o = out.raw() + i * g;
    std::copy(bias.raw(), bias.raw() + g, o);
    for (std::size_t j = 0; j < f; ++j) {
      const T v = x[i * f + j];
      if (v == T{0}) continue;
      const T* __restrict w = weight.raw() + j * g;
      for (std::size_t k = 0; k < g; ++k) o[k] += v * w[k];
    }
  }
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& x,
                             const BasicTensor<T>& weight,
                             const BasicTensor<T>& grad_output,
                             bool need_input_grad) {
  const std::size_t n = x.dim(0), f = x.dim(1), g = weight.dim(1);
  require(grad_output.shape() == Shape{n, g}, ErrorKind::kShape,
          "dense grad_output shape mismatch");
  DenseGrads<T> r;
  r.weight = BasicTensor<T>(weight.shape());
  r.bias = BasicTensor<T>(Shape{g});
  if (need_input_grad) r.input = BasicTensor<T>(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* __restrict gr = grad_output.raw() + i * g;
    for (std::size_t k = 0; k < g; ++k) r.bias[k] += gr[k];
    for (std::size_t j = 0; j < f; ++j) {
      const T v = x[i * f + j];
      if (v != T{0}) {
        T* __restrict gw = r.weight.raw() + j * g;
        for (std::size_t k = 0; k < g; ++k) gw[k] += v * gr[k];
      }
      if (need_input_grad) {
        const T* __restrict w = weight.raw() + j * g;
        T acc{0};
        for (std::size_t k = 0; k < g; ++k) acc += gr[k] * w[k];
        r.input[i * f + j] = acc;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void check_affine(const Shape& x, const Shape& gamma, const Shape& beta,
                  const char* op) {
  require(x.size() >= 2, ErrorKind::kShape,
          std::string(op) + " input must have a batch and a channel axis");
  const Shape want{x.back()};
  require(gamma == want && beta == want, ErrorKind::kShape,
          std::string(op) + " gamma/beta must be [C]");
}

// Shared backward for batch statistics: within each statistics group,
// dx = inv_std / M * (M * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat)).
// `group_of(i)` maps a flat element index to its statistics group and `m` is
// the group size.
template <typename T, typename GroupOf>
void normalized_input_grad(const NormCache<T>& cache, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& grad_output, std::size_t groups,
                           double m, GroupOf group_of, BasicTensor<T>& gx) {
  const std::size_t c = gamma.numel();
  std::vector<double> sum_d(groups, 0.0), sum_dx(groups, 0.0);
  for (std::size_t i = 0; i < grad_output.numel(); ++i) {
    const double d = static_cast<double>(grad_output[i]) * gamma[i % c];
    const std::size_t gi = group_of(i);
    sum_d[gi] += d;
    sum_dx[gi] += d * cache.normalized[i];
  }
  for (std::size_t i = 0; i < grad_output.numel(); ++i) {
    const double d = static_cast<double>(grad_output[i]) * gamma[i % c];
    const std::size_t gi = group_of(i);
    gx[i] = static_cast<T>(cache.inv_std[gi] / m *
                           (m * d - sum_d[gi] -
                            cache.normalized[i] * sum_dx[gi]));
  }
}

template <typename T>
void affine_param_grads(const NormCache<T>& cache,
                        const BasicTensor<T>& grad_output, std::size_t c,
                        NormGrads<T>& r) {
  std::vector<double> gg(c, 0.0), gb(c, 0.0);
  for (std::size_t i = 0; i < grad_output.numel(); ++i) {
    gg[i % c] += static_cast<double>(grad_output[i]) * cache.normalized[i];
    gb[i % c] += grad_output[i];
  }
  r.gamma = BasicTensor<T>(Shape{c});
  r.beta = BasicTensor<T>(Shape{c});
  for (std::size_t k = 0; k < c; ++k) {
    r.gamma[k] = static_cast<T>(gg[k]);
    r.beta[k] = static_cast<T>(gb[k]);
  }
}

}  // namespace

std::size_t default_group_count(std::size_t channels) {
  return std::min<std::size_t>(8, channels);
}

template <typename T>
NormResult<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                         const BasicTensor<T>& beta, NormState& state,
                         bool training) {
  check_affine(x.shape(), gamma.shape(), beta.shape(), "batch_norm");
  const std::size_t c = x.shape().back();
  require(state.running_mean.size() == c && state.running_var.size() == c,
          ErrorKind::kShape, "batch_norm state channel count mismatch");
  require(state.eps > 0, ErrorKind::kInvalidArgument, "batch_norm eps must be > 0");
  const std::size_t m = x.numel() / c;

  NormResult<T> r;
  r.cache.normalized = BasicTensor<T>(x.shape());
  r.cache.inv_std.assign(c, 0.0);
  r.cache.batch_statistics = training;
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  if (training) {
    for (std::size_t i = 0; i < x.numel(); ++i) mean[i % c] += x[i];
    for (std::size_t k = 0; k < c; ++k) mean[k] /= static_cast<double>(m);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double d = x[i] - mean[i % c];
      var[i % c] += d * d;
    }
    for (std::size_t k = 0; k < c; ++k) {
      var[k] /= static_cast<double>(m);
      state.running_mean[k] =
          state.momentum * state.running_mean[k] + (1 - state.momentum) * mean[k];
      state.running_var[k] =
          state.momentum * state.running_var[k] + (1 - state.momentum) * var[k];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  for (std::size_t k = 0; k < c; ++k)
    r.cache.inv_std[k] = 1.0 / std::sqrt(std::max(var[k], 0.0) + state.eps);

  r.output = BasicTensor<T>(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const std::size_t k = i % c;
    const double xh = (x[i] - mean[k]) * r.cache.inv_std[k];
    r.cache.normalized[i] = static_cast<T>(xh);
    r.output[i] = static_cast<T>(gamma[k] * xh + beta[k]);
  }
  return r;
}

template <typename T>
NormGrads<T> batch_norm_backward(const NormCache<T>& cache,
                                 const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& grad_output) {
  require(grad_output.shape() == cache.normalized.shape(), ErrorKind::kShape,
          "batch_norm grad_output shape mismatch");
  const std::size_t c = gamma.numel();
  NormGrads<T> r;
  r.input = BasicTensor<T>(grad_output.shape());
  if (cache.batch_statistics) {
    const double m = static_cast<double>(grad_output.numel() / c);
    normalized_input_grad(cache, gamma, grad_output, c, m,
                          [c](std::size_t i) { return i % c; }, r.input);
  } else {
    for (std::size_t i = 0; i < grad_output.numel(); ++i)
      r.input[i] = static_cast<T>(static_cast<double>(grad_output[i]) *
                                  gamma[i % c] * cache.inv_std[i % c]);
  }
  affine_param_grads(cache, grad_output, c, r);
  return r;
}

template <typename T>
NormResult<T> group_norm(const BasicTensor<T>& x, std::size_t groups,
                         const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                         double eps) {
  check_affine(x.shape(), gamma.shape(), beta.shape(), "group_norm");
  const std::size_t c = x.shape().back();
  require(groups >= 1 && c % groups == 0, ErrorKind::kInvalidArgument,
          "group_norm: " + std::to_string(groups) +
              " groups do not divide " + std::to_string(c) + " channels");
  const std::size_t n = x.dim(0);
  const std::size_t per_sample = x.numel() / n;
  const std::size_t cg = c / groups;
  const double m = static_cast<double>(per_sample / groups);
  auto group_of = [=](std::size_t i) {
    return (i / per_sample) * groups + (i % c) / cg;
  };

  const std::size_t total_groups = n * groups;
  std::vector<double> mean(total_groups, 0.0), var(total_groups, 0.0);
  for (std::size_t i = 0; i < x.numel(); ++i) mean[group_of(i)] += x[i];
  for (double& v : mean) v /= m;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double d = x[i] - mean[group_of(i)];
    var[group_of(i)] += d * d;
  }

  NormResult<T> r;
  r.cache.groups = groups;
  r.cache.inv_std.resize(total_groups);
  for (std::size_t gi = 0; gi < total_groups; ++gi)
    r.cache.inv_std[gi] = 1.0 / std::sqrt(var[gi] / m + eps);
  r.cache.normalized = BasicTensor<T>(x.shape());
  r.output = BasicTensor<T>(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const std::size_t gi = group_of(i);
    const double xh = (x[i] - mean[gi]) * r.cache.inv_std[gi];
    r.cache.normalized[i] = static_cast<T>(xh);
    r.output[i] = static_cast<T>(gamma[i % c] * xh + beta[i % c]);
  }
  return r;
}

template <typename T>
NormGrads<T> group_norm_backward(const NormCache<T>& cache,
                                 const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& grad_output) {
  require(grad_output.shape() == cache.normalized.shape(), ErrorKind::kShape,
          "group_norm grad_output shape mismatch");
  const std::size_t c = gamma.numel();
  const std::size_t groups = cache.groups;
  const std::size_t n = grad_output.dim(0);
  const std::size_t per_sample = grad_output.numel() / n;
  const std::size_t cg = c / groups;
  const double m = static_cast<double>(per_sample / groups);
  NormGrads<T> r;
  r.input = BasicTensor<T>(grad_output.shape());
  normalized_input_grad(
      cache, gamma, grad_output, n * groups, m,
      [=](std::size_t i) { return (i / per_sample) * groups + (i % c) / cg; },
      r.input);
  affine_param_grads(cache, grad_output, c, r);
  return r;
}

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> dropout_mask(const Shape& shape, double keep_prob, Rng& rng) {
  require(keep_prob > 0.0 && keep_prob <= 1.0, ErrorKind::kInvalidArgument,
          "dropout keep probability must be in (0, 1], got " +
              std::to_string(keep_prob));
  BasicTensor<T> mask(shape, T{1});
  if (keep_prob == 1.0) return mask;
  const T scale = static_cast<T>(1.0 / keep_prob);
  for (T& v : mask.data()) v = rng.bernoulli(keep_prob) ? scale : T{0};
  return mask;
}

template <typename T>
BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.shape() == b.shape(), ErrorKind::kShape, "multiply shape mismatch");
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
  return out;
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double keep_prob, Rng& rng,
                       bool training) {
  require(keep_prob > 0.0 && keep_prob <= 1.0, ErrorKind::kInvalidArgument,
          "dropout keep probability must be in (0, 1], got " +
              std::to_string(keep_prob));
  if (!training || keep_prob == 1.0) return x;
  return multiply(x, dropout_mask<T>(x.shape(), keep_prob, rng));
}

// ---------------------------------------------------------------------------

namespace {

void check_logits(const Shape& s, std::span<const int> labels) {
  require(s.size() == 2, ErrorKind::kShape, "logits must be [N,c]");
  require(s[1] >= 2, ErrorKind::kShape, "softmax needs at least two classes");
  require(labels.size() == s[0], ErrorKind::kShape,
          "label count does not match batch size");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < s[1],
            ErrorKind::kInvalidArgument,
            "label " + std::to_string(labels[i]) + " at row " +
                std::to_string(i) + " is out of range");
  }
}

}  // namespace

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  require(logits.rank() == 2, ErrorKind::kShape, "logits must be [N,c]");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  BasicTensor<T> p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.raw() + i * c;
    const double mx = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(row[k] - mx);
    for (std::size_t k = 0; k < c; ++k)
      p[i * c + k] = static_cast<T>(std::exp(row[k] - mx) / sum);
  }
  return p;
}

template <typename T>
SoftmaxResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                       std::span<const int> labels) {
  check_logits(logits.shape(), labels);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  SoftmaxResult<T> r;
  r.probs = softmax(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.raw() + i * c;
    const double mx = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(row[k] - mx);
    total += std::log(sum) - (row[labels[i]] - mx);
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

template <typename T>
BasicTensor<T> softmax_cross_entropy_backward(const BasicTensor<T>& probs,
                                              std::span<const int> labels) {
  check_logits(probs.shape(), labels);
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  BasicTensor<T> g = probs;
  for (std::size_t i = 0; i < n; ++i) g[i * c + labels[i]] -= T{1};
  const T inv_n = T{1} / static_cast<T>(n);
  for (T& v : g.data()) v *= inv_n;
  return g;
}

// ---------------------------------------------------------------------------

#define VOXDX_INSTANTIATE_OPS(T)                                               \
  template BasicTensor<T> conv3d(const BasicTensor<T>&, const BasicTensor<T>&, \
                                 const BasicTensor<T>&, std::size_t, Padding); \
  template Conv3dGrads<T> conv3d_backward(                                     \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
      std::size_t, Padding, bool);                                             \
  template PoolResult<T> maxpool3d(const BasicTensor<T>&, std::size_t,         \
                                   std::size_t, Padding);                      \
  template BasicTensor<T> maxpool3d_backward(                                  \
      const BasicTensor<T>&, std::span<const std::size_t>, const Shape&);      \
  template BasicTensor<T> leaky_relu(const BasicTensor<T>&, T);                \
  template BasicTensor<T> leaky_relu_backward(const BasicTensor<T>&,           \
                                              const BasicTensor<T>&, T);       \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&,  \
                                const BasicTensor<T>&);                        \
  template DenseGrads<T> dense_backward(const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&, bool);          \
  template NormResult<T> batch_norm(const BasicTensor<T>&,                     \
                                    const BasicTensor<T>&,                     \
                                    const BasicTensor<T>&, NormState&, bool);  \
  template NormGrads<T> batch_norm_backward(                                   \
      const NormCache<T>&, const BasicTensor<T>&, const BasicTensor<T>&);      \
  template NormResult<T> group_norm(const BasicTensor<T>&, std::size_t,        \
                                    const BasicTensor<T>&,                     \
                                    const BasicTensor<T>&, double);            \
  template NormGrads<T> group_norm_backward(                                   \
      const NormCache<T>&, const BasicTensor<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> dropout_mask<T>(const Shape&, double, Rng&);         \
  template BasicTensor<T> multiply(const BasicTensor<T>&,                      \
                                   const BasicTensor<T>&);                     \
  template BasicTensor<T> dropout(const BasicTensor<T>&, double, Rng&, bool);  \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                      \
  template SoftmaxResult<T> softmax_cross_entropy(const BasicTensor<T>&,       \
                                                  std::span<const int>);       \
  template BasicTensor<T> softmax_cross_entropy_backward(                      \
      const BasicTensor<T>&, std::span<const int>);

VOXDX_INSTANTIATE_OPS(float)
VOXDX_INSTANTIATE_OPS(double)

#undef VOXDX_INSTANTIATE_OPS

}  // namespace voxdx::ops
