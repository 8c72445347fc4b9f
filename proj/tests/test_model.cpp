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
#include <fstream>

#include "doctest.h"
#include "gradcheck_cases.hpp"
#include "temp_dir.hpp"
#include "voxdx/model.hpp"

using namespace voxdx;
using voxdx::testing::random_tensor;
using voxdx::testing::TempDir;

namespace {

ModelConfig simplified(bool demo = false, NormKind norm = NormKind::kNone) {
  ModelConfig c;
  c.variant = Variant::kSimplified;
  c.use_demographics = demo;
  c.norm = norm;
  c.alpha = 0.01;
  return c;
}

Shape layer_shape(const Model& m, const std::string& name) {
  for (const auto& l : m.layers())
    if (l.name == name) return l.output;
  FAIL("no layer " << name);
  return {};
}

Tensor volumes(std::size_t n, Extents3 e, std::uint64_t seed) {
  return random_tensor({n, e.x, e.y, e.z, 1}, seed).cast<float>();
}

}  // namespace

TEST_CASE("simplified layer chain at 16x20x20") {
  const Model m(simplified(true), {16, 20, 20});
  CHECK(layer_shape(m, "conv1") == Shape{16, 20, 20, 32});
  CHECK(layer_shape(m, "pool1") == Shape{8, 10, 10, 32});
  CHECK(layer_shape(m, "conv2") == Shape{8, 10, 10, 64});
  CHECK(layer_shape(m, "pool2") == Shape{4, 5, 5, 64});
  CHECK(layer_shape(m, "conv3") == Shape{4, 5, 5, 128});
  CHECK(layer_shape(m, "pool3") == Shape{2, 3, 3, 128});
  CHECK(layer_shape(m, "flatten") == Shape{2304});
  CHECK(layer_shape(m, "concat") == Shape{130});
  CHECK(layer_shape(m, "output") == Shape{2});
  CHECK(m.parameter("conv1.kernel").value.shape() == Shape{3, 3, 3, 1, 32});
  CHECK(m.parameter("output.weight").value.shape() == Shape{130, 2});
}

TEST_CASE("parameter counts") {
  const Model m(simplified(false), {8, 10, 10});
  std::size_t conv1 = m.parameter("conv1.kernel").value.numel() +
                      m.parameter("conv1.bias").value.numel();
  CHECK(conv1 == 896);
  // conv 896 + 55360 + 221312, fc1 512*512+512, fc2 65664, output 258.
  CHECK(parameter_count(m) == 896 + 55360 + 221312 + 262656 + 65664 + 258);
  const Model g(simplified(false, NormKind::kGroup), {8, 10, 10});
  CHECK(parameter_count(g) == parameter_count(m) + 2 * (32 + 64 + 128));
}

TEST_CASE("original variant doubles the convolutions") {
  ModelConfig c;
  c.variant = Variant::kOriginal;
  c.norm = NormKind::kBatch;
  const Model m(c, {8, 8, 8});
  std::vector<std::size_t> channels;
  for (const auto& l : m.layers())
    if (l.kind == LayerKind::kConv) channels.push_back(l.output.back());
  CHECK(channels == std::vector<std::size_t>{32, 32, 64, 64, 128, 128});
  CHECK(m.norm_states().size() == 6);
}

TEST_CASE("group norm layers use eight groups") {
  const Model m(simplified(false, NormKind::kGroup), {8, 8, 8});
  for (const auto& l : m.layers())
    if (l.kind == LayerKind::kGroupNorm) CHECK(l.groups == 8);
}

TEST_CASE("too small extents name the failing pool") {
  try {
    Model m(simplified(), {8, 2, 8});
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
    CHECK(std::string(e.what()).find("pool2") != std::string::npos);
  }
  CHECK_NOTHROW(Model(simplified(), {5, 5, 5}));
  CHECK_THROWS_AS(Model(simplified(), {3, 3, 3}), Error);
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.kp1 = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(parse_variant("original") == Variant::kOriginal);
  CHECK(parse_norm("group") == NormKind::kGroup);
  CHECK_THROWS_AS(parse_norm("layer"), Error);
}

TEST_CASE("he initialization") {
  const Model m = build_model(simplified(false, NormKind::kBatch), {8, 10, 10}, 3);
  const auto& w = m.parameter("fc1.weight").value;
  double s2 = 0;
  for (float v : w.data()) s2 += double(v) * v;
  CHECK(std::sqrt(s2 / w.numel()) == doctest::Approx(std::sqrt(2.0 / 512)).epsilon(0.01));
  const auto& k = m.parameter("conv2.kernel").value;
  s2 = 0;
  for (float v : k.data()) s2 += double(v) * v;
  CHECK(std::sqrt(s2 / k.numel()) == doctest::Approx(std::sqrt(2.0 / (27 * 32))).epsilon(0.03));
  for (float v : m.parameter("conv1.bias").value.data()) CHECK(v == 0.0f);
  for (float v : m.parameter("norm1.gamma").value.data()) CHECK(v == 1.0f);
  for (float v : m.parameter("norm1.beta").value.data()) CHECK(v == 0.0f);

  const Model again = build_model(simplified(false, NormKind::kBatch), {8, 10, 10}, 3);
  const Model other = build_model(simplified(false, NormKind::kBatch), {8, 10, 10}, 4);
  CHECK(again.parameter("fc1.weight").value == w);
  CHECK_FALSE(other.parameter("fc1.weight").value == w);
}

TEST_CASE("demographics change only the output layer draw") {
  const Model a = build_model(simplified(false), {8, 10, 10}, 7);
  const Model b = build_model(simplified(true), {8, 10, 10}, 7);
  CHECK(a.parameter("fc2.weight").value == b.parameter("fc2.weight").value);
}

TEST_CASE("forward trace matches the layer table") {
  Model m = build_model(simplified(true, NormKind::kBatch), {8, 10, 10}, 1);
  const Tensor x = volumes(3, {8, 10, 10}, 2);
  const Tensor demo({3, 2}, 0.5f);
  std::vector<Shape> trace;
  Rng rng(0);
  const Tensor logits = forward(m, x, &demo, true, rng, &trace);
  CHECK(logits.shape() == Shape{3, 2});
  REQUIRE(trace.size() == m.layers().size());
  for (std::size_t i = 0; i < trace.size(); ++i) CHECK(trace[i] == m.layers()[i].output);
}

TEST_CASE("inference leaves the model untouched and is batch independent") {
  Model m = build_model(simplified(false, NormKind::kBatch), {8, 10, 10}, 1);
  m.norm_states()[0].running_mean.assign(32, 0.1);
  const auto states = m.norm_states();
  const Tensor x = volumes(3, {8, 10, 10}, 5);
  const Tensor all = infer(m, x, nullptr);
  CHECK(m.norm_states()[0].running_mean == states[0].running_mean);
  Tensor one({1, 8, 10, 10, 1});
  std::copy_n(x.raw() + 800, 800, one.raw());
  const Tensor single = infer(m, one, nullptr);
  CHECK(single[0] == doctest::Approx(all[2]).epsilon(1e-5));
  CHECK(single[1] == doctest::Approx(all[3]).epsilon(1e-5));
}

TEST_CASE("training forward updates batch norm running stats") {
  Model m = build_model(simplified(false, NormKind::kBatch), {8, 10, 10}, 1);
  Rng rng(0);
  forward(m, volumes(2, {8, 10, 10}, 5), nullptr, true, rng);
  CHECK(m.norm_states()[0].running_var[0] != 1.0);
}

TEST_CASE("input validation") {
  Model m = build_model(simplified(true), {8, 10, 10}, 1);
  const Tensor x = volumes(2, {8, 10, 10}, 5);
  const Tensor demo({2, 2});
  try {
    infer(m, volumes(2, {8, 10, 9}, 5), &demo);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
  try {
    infer(m, x, nullptr);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidArgument);
  }
  const Tensor bad({3, 2});
  CHECK_THROWS_AS(infer(m, x, &bad), Error);
  Model plain = build_model(simplified(false), {8, 10, 10}, 1);
  CHECK_THROWS_AS(infer(plain, x, &demo), Error);
}

TEST_CASE("dropout is active only in training") {
  ModelConfig c = simplified();
  c.kp1 = 0.5;
  Model m = build_model(c, {8, 10, 10}, 1);
  const Tensor x = volumes(2, {8, 10, 10}, 5);
  Rng r1(1), r2(2), r3(1);
  const Tensor a = forward(m, x, nullptr, true, r1);
  const Tensor b = forward(m, x, nullptr, true, r2);
  const Tensor a2 = forward(m, x, nullptr, true, r3);
  CHECK_FALSE(a == b);
  CHECK(a == a2);
  Rng r4(9);
  CHECK(forward(m, x, nullptr, false, r4) == infer(m, x, nullptr));
}

TEST_CASE("loss_and_grads reports every parameter") {
  Model m = build_model(simplified(true, NormKind::kGroup), {8, 10, 10}, 1);
  const Tensor x = volumes(2, {8, 10, 10}, 5);
  const Tensor demo({2, 2}, 0.3f);
  const std::vector<int> labels{0, 1};
  Rng rng(0);
  const auto lg = loss_and_grads(m, x, &demo, labels, true, rng);
  CHECK(std::isfinite(lg.loss));
  CHECK(lg.grads.size() == m.parameters().size());
  for (const auto& p : m.parameters()) CHECK(lg.grads.at(p.name).shape() == p.value.shape());
}

TEST_CASE("float model gradients track the double model") {
  Model m = build_model(simplified(), {8, 10, 10}, 1);
  const auto md = m.cast<double>();
  auto mdd = md;
  const Tensor x = volumes(2, {8, 10, 10}, 5);
  const std::vector<int> labels{0, 1};
  Rng r1(0), r2(0);
  const auto lf = loss_and_grads<float>(m, x, nullptr, labels, true, r1);
  const auto ld = loss_and_grads<double>(mdd, x.cast<double>(), nullptr, labels, true, r2);
  CHECK(lf.loss == doctest::Approx(ld.loss).epsilon(1e-4));
}

TEST_CASE("checkpoint round trip is exact") {
  TempDir dir("ckpt");
  ModelConfig c = simplified(true, NormKind::kBatch);
  c.rc = 0.05;
  c.kp2 = 0.35;
  Model m = build_model(c, {8, 10, 10}, 11);
  m.norm_states()[1].running_mean.assign(64, 1.0 / 3.0);
  m.encoder() = {61.37, 9.81};
  save_checkpoint(m, dir / "ckpt");
  const Model back = load_checkpoint(dir / "ckpt");
  CHECK(back.config() == m.config());
  CHECK(back.input_extents() == m.input_extents());
  CHECK(back.encoder() == m.encoder());
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    CHECK(back.parameters()[i].value == m.parameters()[i].value);
  for (std::size_t i = 0; i < m.norm_states().size(); ++i) {
    CHECK(back.norm_states()[i].running_mean == m.norm_states()[i].running_mean);
    CHECK(back.norm_states()[i].running_var == m.norm_states()[i].running_var);
  }
  const Tensor x = volumes(2, {8, 10, 10}, 5);
  const Tensor demo({2, 2}, 0.3f);
  CHECK(infer(back, x, &demo) == infer(m, x, &demo));
}

TEST_CASE("checkpoint loader rejects damage") {
  TempDir dir("ckpt_bad");
  save_checkpoint(build_model(simplified(), {8, 10, 10}, 1), dir / "c");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), Error);
  std::filesystem::remove(dir / "c" / "fc2.weight.mvol");
  try {
    load_checkpoint(dir / "c");
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("fc2.weight") != std::string::npos);
  }
  std::ofstream(dir / "c" / "checkpoint.cfg") << "format = something-else\n";
  CHECK_THROWS_AS(load_checkpoint(dir / "c"), Error);
}
