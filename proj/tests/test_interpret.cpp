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

#include <fstream>

#include "doctest.h"
#include "occlusion_oracles.hpp"
#include "temp_dir.hpp"
#include "voxdx/interpret.hpp"

using namespace voxdx;
using namespace voxdx::testing;

TEST_CASE("box origins") {
  CHECK(box_origins(5, 2, 1) == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
  CHECK(box_origins(5, 2, 2) == std::vector<std::uint32_t>{0, 2, 4});
  CHECK(box_origins(4, 4, 3) == std::vector<std::uint32_t>{0, 3});
  CHECK_THROWS_AS(box_origins(3, 4, 1), Error);
  CHECK_THROWS_AS(box_origins(3, 0, 1), Error);
  CHECK_THROWS_AS(box_origins(3, 1, 0), Error);
}

TEST_CASE("single voxel occlusion on a linear scorer is closed form") {
  CHECK(linear_occlusion_error({4, 5, 3}, 1, 1, 1) < 1e-7);
}

TEST_CASE("single voxel occlusion on a logistic scorer is closed form") {
  CHECK(linear_occlusion_error({4, 5, 3}, 1, 1, 1, true) < 1e-7);
  CHECK(linear_occlusion_error({5, 4, 6}, 2, 1, 2, true) < 1e-7);
}

TEST_CASE("box occlusion on a linear scorer follows the mean rule") {
  CHECK(linear_occlusion_error({5, 4, 6}, 2, 1, 2) < 1e-7);
  CHECK(linear_occlusion_error({5, 4, 6}, 3, 2, 3) < 1e-7);
  CHECK(linear_occlusion_error({6, 6, 6}, 2, 3, 4) < 1e-7);  // gaps stay zero
}

TEST_CASE("heatmap bookkeeping") {
  const LinearSurrogate s({4, 4, 4}, 5);
  const Volume v({4, 4, 4}, 1.0f);
  OcclusionOptions o;
  o.box = 2;
  o.stride = 2;
  o.batch_size = 3;
  const Heatmap h = occlusion_heatmap(v, s.scorer(), o);
  CHECK(h.evaluations == 8);
  CHECK(h.box == 2);
  double base = s.bias;
  for (float w : s.weights.voxels) base += w;
  CHECK(h.baseline_probability == doctest::Approx(base));
}

TEST_CASE("a scorer that ignores the volume yields a zero map") {
  ProbabilityFn flat = [](std::span<const Volume> v) {
    return std::vector<double>(v.size(), 0.7);
  };
  const Heatmap h = occlusion_heatmap(Volume({3, 3, 3}, 2.0f), flat);
  for (float d : h.delta.voxels) CHECK(d == 0.0f);
}

TEST_CASE("model heatmap with zeroed first convolution is all zero") {
  ModelConfig c;
  c.variant = Variant::kSimplified;
  Model m = build_model(c, {8, 8, 8}, 3);
  m.parameter("conv1.kernel").value.fill(0.0f);
  Volume v({8, 8, 8});
  Rng rng(1);
  for (float& x : v.voxels) x = static_cast<float>(rng.normal());
  OcclusionOptions o;
  o.stride = 2;
  const Heatmap h = occlusion_heatmap(m, v, nullptr, o);
  for (float d : h.delta.voxels) CHECK(d == 0.0f);
}

TEST_CASE("model heatmap validates inputs") {
  ModelConfig c;
  c.use_demographics = true;
  const Model m = build_model(c, {8, 8, 8}, 3);
  const std::array<float, 2> demo{0.0f, 1.0f};
  CHECK_THROWS_AS(occlusion_heatmap(m, Volume({8, 8, 9}), &demo), Error);
  CHECK_THROWS_AS(occlusion_heatmap(m, Volume({8, 8, 8}), nullptr), Error);
}

TEST_CASE("slice orientation and scaling") {
  Volume v({2, 3, 4});
  for (std::uint32_t x = 0; x < 2; ++x)
    for (std::uint32_t y = 0; y < 3; ++y)
      for (std::uint32_t z = 0; z < 4; ++z) v.at(x, y, z) = 100.0f * x + 10.0f * y + z;
  const SliceImage sag = slice_image(v, Plane::kSagittal, 1);
  CHECK(sag.height == 3);
  CHECK(sag.width == 4);
  CHECK(sag.pixels.front() == 0);
  CHECK(sag.pixels.back() == 255);
  const SliceImage cor = slice_image(v, Plane::kCoronal, 0);
  CHECK(cor.height == 2);
  CHECK(cor.width == 4);
  const SliceImage ax = slice_image(v, Plane::kAxial, 3);
  CHECK(ax.height == 2);
  CHECK(ax.width == 3);
  CHECK(ax.pixels[1] < ax.pixels[3]);  // x varies down the rows
  CHECK_THROWS_AS(slice_image(v, Plane::kAxial, 4), Error);
  const SliceImage flat = slice_image(Volume({2, 2, 2}, 5.0f), Plane::kAxial, 0);
  for (auto p : flat.pixels) CHECK(p == 128);
}

TEST_CASE("pgm output") {
  TempDir dir("pgm");
  SliceImage img{3, 2, {0, 1, 2, 3, 4, 255}};
  write_pgm(img, dir / "a.pgm");
  std::ifstream in(dir / "a.pgm", std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  CHECK(bytes == std::string("P5\n3 2\n255\n") + std::string("\x00\x01\x02\x03\x04\xff", 6));
  CHECK(parse_plane("coronal") == Plane::kCoronal);
  CHECK_THROWS_AS(parse_plane("oblique"), Error);
}
