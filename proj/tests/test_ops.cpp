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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck_cases.hpp"
#include "voxdx/ops.hpp"

using namespace voxdx;
using voxdx::testing::random_tensor;

namespace {

// Direct six-loop convolution with explicit zero padding.
TensorD naive_conv(const TensorD& x, const TensorD& w, const TensorD& b,
                   std::size_t stride, bool same) {
  const std::size_t n = x.dim(0), cin = x.dim(4), k = w.dim(0), cout = w.dim(4);
  std::size_t in[3] = {x.dim(1), x.dim(2), x.dim(3)};
  std::size_t out[3], pad[3];
  for (int a = 0; a < 3; ++a) {
    if (same) {
      out[a] = (in[a] + stride - 1) / stride;
      const long total = static_cast<long>((out[a] - 1) * stride + k) - static_cast<long>(in[a]);
      pad[a] = total > 0 ? static_cast<std::size_t>(total / 2) : 0;
    } else {
      out[a] = (in[a] - k) / stride + 1;
      pad[a] = 0;
    }
  }
  TensorD y({n, out[0], out[1], out[2], cout});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t d = 0; d < out[0]; ++d)
      for (std::size_t h = 0; h < out[1]; ++h)
        for (std::size_t ww = 0; ww < out[2]; ++ww)
          for (std::size_t co = 0; co < cout; ++co) {
            double acc = b[co];
            for (std::size_t i = 0; i < k; ++i)
              for (std::size_t j = 0; j < k; ++j)
                for (std::size_t l = 0; l < k; ++l) {
                  const long pd = static_cast<long>(d * stride + i) - static_cast<long>(pad[0]);
                  const long ph = static_cast<long>(h * stride + j) - static_cast<long>(pad[1]);
                  const long pw = static_cast<long>(ww * stride + l) - static_cast<long>(pad[2]);
                  if (pd < 0 || ph < 0 || pw < 0 || pd >= static_cast<long>(in[0]) ||
                      ph >= static_cast<long>(in[1]) || pw >= static_cast<long>(in[2]))
                    continue;
                  for (std::size_t ci = 0; ci < cin; ++ci)
                    acc += x.at({s, static_cast<std::size_t>(pd), static_cast<std::size_t>(ph),
                                 static_cast<std::size_t>(pw), ci}) *
                           w.at({i, j, l, ci, co});
                }
            y.at({s, d, h, ww, co}) = acc;
          }
  return y;
}

double max_abs_diff(const TensorD& a, const TensorD& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("same padding output extent is ceil(in / stride)") {
  for (std::size_t in = 1; in <= 40; ++in)
    for (std::size_t stride = 1; stride <= 3; ++stride)
      for (std::size_t window = 1; window <= 4; ++window) {
        const auto g = ops::axis_geometry(in, window, stride, ops::Padding::kSame);
        CHECK(g.out == (in + stride - 1) / stride);
      }
  CHECK(ops::axis_geometry(80, 3, 1, ops::Padding::kSame).pad_before == 1);
}

TEST_CASE("valid padding extent and rejection") {
  CHECK(ops::axis_geometry(10, 3, 1, ops::Padding::kValid).out == 8);
  CHECK(ops::axis_geometry(10, 3, 2, ops::Padding::kValid).out == 4);
  CHECK_THROWS_AS(ops::axis_geometry(2, 3, 1, ops::Padding::kValid), Error);
}

TEST_CASE("conv3d matches the direct loop oracle") {
  const TensorD x = random_tensor({2, 5, 4, 6, 3}, 1);
  const TensorD w = random_tensor({3, 3, 3, 3, 4}, 2);
  const TensorD b = random_tensor({4}, 3);
  for (std::size_t stride : {1, 2}) {
    CHECK(max_abs_diff(ops::conv3d(x, w, b, stride, ops::Padding::kSame),
                       naive_conv(x, w, b, stride, true)) < 1e-12);
    CHECK(max_abs_diff(ops::conv3d(x, w, b, stride, ops::Padding::kValid),
                       naive_conv(x, w, b, stride, false)) < 1e-12);
  }
}

TEST_CASE("conv3d same padding preserves extents at stride 1") {
  const Tensor x({1, 7, 9, 4, 1}, 1.0f);
  const Tensor w({3, 3, 3, 1, 2}, 1.0f);
  const Tensor b({2}, 0.0f);
  const Tensor y = ops::conv3d(x, w, b, 1, ops::Padding::kSame);
  CHECK(y.shape() == Shape{1, 7, 9, 4, 2});
  CHECK(y.at({0, 3, 4, 2, 0}) == 27.0f);  // interior sees the full window
  CHECK(y.at({0, 0, 0, 0, 1}) == 8.0f);   // corner sees 2x2x2
}

TEST_CASE("conv3d rejects channel mismatch") {
  const Tensor x({1, 4, 4, 4, 2});
  const Tensor w({3, 3, 3, 1, 2});
  const Tensor b({2});
  CHECK_THROWS_AS(ops::conv3d(x, w, b, 1, ops::Padding::kSame), Error);
}

TEST_CASE("maxpool3d picks window maxima with clipped borders") {
  TensorD x({1, 3, 1, 1, 1}, {1.0, 5.0, 2.0});
  const auto r = ops::maxpool3d(x, 2, 2);
  // ceil(3/2) = 2 outputs; the second window is clipped to the last cell.
  REQUIRE(r.output.shape() == Shape{1, 2, 1, 1, 1});
  CHECK(r.output[0] == 5.0);
  CHECK(r.output[1] == 2.0);
  CHECK(r.argmax == std::vector<std::size_t>{1, 2});
}

TEST_CASE("maxpool3d ties go to the lowest index") {
  TensorD x({1, 2, 2, 2, 1}, 3.0);
  const auto r = ops::maxpool3d(x, 2, 2);
  CHECK(r.argmax.front() == 0);
  const TensorD g = ops::maxpool3d_backward(TensorD({1, 1, 1, 1, 1}, 1.0), r.argmax, x.shape());
  CHECK(g[0] == 1.0);
  for (std::size_t i = 1; i < g.numel(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("maxpool3d keeps channels independent") {
  TensorD x({1, 2, 1, 1, 2}, {1.0, 9.0, 4.0, 2.0});
  const auto r = ops::maxpool3d(x, 2, 2);
  CHECK(r.output[0] == 4.0);
  CHECK(r.output[1] == 9.0);
}

TEST_CASE("leaky_relu forward and backward") {
  TensorD x({4}, {-2.0, -0.5, 0.0, 3.0});
  const TensorD y = ops::leaky_relu(x, 0.1);
  CHECK(y[0] == doctest::Approx(-0.2));
  CHECK(y[1] == doctest::Approx(-0.05));
  CHECK(y[2] == 0.0);
  CHECK(y[3] == 3.0);
  const TensorD g = ops::leaky_relu_backward(x, TensorD({4}, 1.0), 0.1);
  CHECK(g[0] == doctest::Approx(0.1));
  CHECK(g[2] == 1.0);  // x >= 0 passes through
  CHECK(g[3] == 1.0);
  CHECK(ops::leaky_relu(x, 0.0)[0] == 0.0);
}

TEST_CASE("dense matches a hand product") {
  TensorD x({2, 3}, {1, 2, 3, 4, 5, 6});
  TensorD w({3, 2}, {1, 0, 0, 1, 1, 1});
  TensorD b({2}, {0.5, -0.5});
  const TensorD y = ops::dense(x, w, b);
  CHECK(y == TensorD({2, 2}, {4.5, 4.5, 10.5, 10.5}));
}

TEST_CASE("batch norm training normalizes and updates running stats") {
  const TensorD x = random_tensor({6, 2, 2, 1, 3}, 4, 3.0);
  const TensorD gamma({3}, 1.0), beta({3}, 0.0);
  ops::NormState state = ops::NormState::for_channels(3);
  const auto r = ops::batch_norm(x, gamma, beta, state, true);
  const std::size_t m = x.numel() / 3;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, var = 0, ym = 0, yv = 0;
    for (std::size_t i = 0; i < m; ++i) mean += x[i * 3 + c];
    mean /= m;
    for (std::size_t i = 0; i < m; ++i) var += (x[i * 3 + c] - mean) * (x[i * 3 + c] - mean);
    var /= m;
    for (std::size_t i = 0; i < m; ++i) ym += r.output[i * 3 + c];
    ym /= m;
    for (std::size_t i = 0; i < m; ++i) yv += (r.output[i * 3 + c] - ym) * (r.output[i * 3 + c] - ym);
    yv /= m;
    CHECK(std::abs(ym) < 1e-12);
    CHECK(yv == doctest::Approx(var / (var + 1e-5)).epsilon(1e-10));
    CHECK(state.running_mean[c] == doctest::Approx(0.1 * mean).epsilon(1e-12));
    CHECK(state.running_var[c] == doctest::Approx(0.9 + 0.1 * var).epsilon(1e-12));
  }
}

TEST_CASE("batch norm inference uses running stats and leaves them alone") {
  ops::NormState state = ops::NormState::for_channels(2);
  state.running_mean = {1.0, -1.0};
  state.running_var = {4.0, 0.25};
  TensorD x({1, 1, 1, 1, 2}, {3.0, 0.0});
  const TensorD gamma({2}, {2.0, 1.0}), beta({2}, {0.5, 0.0});
  const auto before = state;
  const auto r = ops::batch_norm(x, gamma, beta, state, false);
  CHECK(r.output[0] == doctest::Approx(2.0 * 2.0 / std::sqrt(4.0 + 1e-5) + 0.5));
  CHECK(r.output[1] == doctest::Approx(1.0 / std::sqrt(0.25 + 1e-5)));
  CHECK(state.running_mean == before.running_mean);
  CHECK(state.running_var == before.running_var);
}

TEST_CASE("group norm normalizes each sample and group") {
  const TensorD x = random_tensor({2, 2, 3, 1, 4}, 5, 2.0);
  const TensorD gamma({4}, 1.0), beta({4}, 0.0);
  const auto r = ops::group_norm(x, 2, gamma, beta);
  const std::size_t spatial = 6;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t g = 0; g < 2; ++g) {
      double m = 0;
      for (std::size_t p = 0; p < spatial; ++p)
        for (std::size_t c = 2 * g; c < 2 * g + 2; ++c) m += r.output[(s * spatial + p) * 4 + c];
      CHECK(std::abs(m / (2 * spatial)) < 1e-12);
    }
}

TEST_CASE("group norm is batch independent") {
  const TensorD a = random_tensor({1, 2, 2, 2, 4}, 6);
  const TensorD b = random_tensor({1, 2, 2, 2, 4}, 7);
  TensorD ab({2, 2, 2, 2, 4});
  std::copy(a.data().begin(), a.data().end(), ab.data().begin());
  std::copy(b.data().begin(), b.data().end(), ab.data().begin() + a.numel());
  const TensorD gamma = random_tensor({4}, 8), beta = random_tensor({4}, 9);
  const auto joint = ops::group_norm(ab, 2, gamma, beta);
  const auto alone = ops::group_norm(a, 2, gamma, beta);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(joint.output[i] == alone.output[i]);
}

TEST_CASE("default group count clamps to eight") {
  CHECK(ops::default_group_count(32) == 8);
  CHECK(ops::default_group_count(128) == 8);
  CHECK(ops::default_group_count(4) == 4);
  CHECK(ops::default_group_count(1) == 1);
}

TEST_CASE("dropout mask is inverted and keeps roughly keep_prob") {
  Rng rng(11);
  const Tensor mask = ops::dropout_mask<float>({100, 100}, 0.4, rng);
  std::size_t kept = 0;
  for (float v : mask.data()) {
    CHECK((v == 0.0f || v == doctest::Approx(1.0 / 0.4)));
    kept += v != 0.0f;
  }
  CHECK(std::abs(kept / 10000.0 - 0.4) < 0.02);
}

TEST_CASE("dropout is the identity outside training and at keep 1") {
  const Tensor x({3, 4}, 2.0f);
  Rng rng(1);
  CHECK(ops::dropout(x, 0.5, rng, false) == x);
  CHECK(ops::dropout(x, 1.0, rng, true) == x);
}

TEST_CASE("softmax cross entropy") {
  TensorD logits({2, 2}, {0.0, 0.0, 1000.0, 0.0});
  const std::vector<int> labels{1, 0};
  const auto r = ops::softmax_cross_entropy(logits, labels);
  CHECK(r.probs[0] == doctest::Approx(0.5));
  CHECK(r.probs[2] == doctest::Approx(1.0));
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(std::log(2.0) / 2));
  const TensorD g = ops::softmax_cross_entropy_backward(r.probs, labels);
  CHECK(g[0] == doctest::Approx(0.25));
  CHECK(g[1] == doctest::Approx(-0.25));
}

TEST_CASE("softmax cross entropy rejects bad labels") {
  TensorD logits({1, 2});
  const std::vector<int> bad{2};
  CHECK_THROWS_AS(ops::softmax_cross_entropy(logits, bad), Error);
}
