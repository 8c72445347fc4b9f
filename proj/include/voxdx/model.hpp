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

#ifndef VOXDX_MODEL_HPP_
#define VOXDX_MODEL_HPP_

// The two volumetric CNN variants:
//
//   Original:   [conv32 conv32 pool2] [conv64 conv64 pool4] [conv128 conv128 pool4]
//   Simplified: [conv32 pool2]        [conv64 pool4]        [conv128 pool4]
//
// followed by flatten -> FC512 -> FC128 -> output(c). Convolutions are 3^3,
// stride 1, same padding; pools use stride 2 with same-style borders. Each
// conv is optionally followed by batch or group normalization, every hidden
// layer by Leaky-ReLU, and the two FC layers by dropout. With demographics
// enabled the two encoded features are appended to the FC128 output, so the
// output layer sees 130 inputs.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>
#include <type_traits>

#include "voxdx/autograd.hpp"
#include "voxdx/data.hpp"
#include "voxdx/ops.hpp"
#include "voxdx/parameters.hpp"
#include "voxdx/rng.hpp"

namespace voxdx {

enum class Variant { kOriginal, kSimplified };
enum class NormKind { kNone, kBatch, kGroup };

const char* to_string(Variant v);
const char* to_string(NormKind n);
Variant parse_variant(const std::string& s);
NormKind parse_norm(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::kSimplified;
  NormKind norm = NormKind::kNone;
  bool use_demographics = false;
  double alpha = 0.0;  // Leaky-ReLU slope for x < 0
  double rc = 0.0;     // L2 coefficient on conv kernels and biases
  double kp1 = 1.0;    // keep probability after FC512
  double kp2 = 1.0;    // keep probability after FC128
  int num_classes = 2;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class LayerKind {
  kConv,
  kBatchNorm,
  kGroupNorm,
  kLeakyRelu,
  kMaxPool,
  kFlatten,
  kDense,
  kDropout,
  kConcatDemographics,
};

const char* to_string(LayerKind k);

struct LayerInfo {
  std::string name;
  LayerKind kind;
  Shape output;  // per-sample shape, batch axis omitted
  std::size_t window = 0;
  std::size_t stride = 0;
  std::size_t groups = 0;
  double keep_prob = 1.0;
  // Indices into the parameter list (-1 when unused) and norm state list.
  int param_a = -1;
  int param_b = -1;
  int norm_state = -1;
};

template <typename T>
class BasicModel {
 public:
  // Lays out the architecture with zero-filled parameters. Throws when the
  // extents cannot pass through the pooling chain, naming the layer.
  BasicModel(const ModelConfig& config, Extents3 input_extents);

  const ModelConfig& config() const { return config_; }
  Extents3 input_extents() const { return extents_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }

  ParameterList<T>& parameters() { return params_; }
  const ParameterList<T>& parameters() const { return params_; }
  std::vector<ops::NormState>& norm_states() { return norm_states_; }
  const std::vector<ops::NormState>& norm_states() const { return norm_states_; }

  DemographicEncoder& encoder() { return encoder_; }
  const DemographicEncoder& encoder() const { return encoder_; }

  // Throws if absent.
  const Parameter<T>& parameter(std::string_view name) const;
  Parameter<T>& parameter(std::string_view name);

  // He-normal kernels (std = sqrt(2 / fan_in)), zero biases, unit gammas.
  void initialize(std::uint64_t seed);
  void zero_parameters();

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out(config_, extents_);
    for (std::size_t i = 0; i < params_.size(); ++i)
      out.parameters()[i].value = params_[i].value.template cast<U>();
    out.norm_states() = norm_states_;
    out.encoder() = encoder_;
    return out;
  }

 private:
  ModelConfig config_;
  Extents3 extents_;
  std::vector<LayerInfo> layers_;
  ParameterList<T> params_;
  std::vector<ops::NormState> norm_states_;
  DemographicEncoder encoder_;
};

using Model = BasicModel<float>;

// Built and initialized with the given seed.
template <typename T = float>
BasicModel<T> build_model(const ModelConfig& config, Extents3 input_extents,
                          std::uint64_t seed);

// Training mode samples dropout masks from `rng` and normalizes with batch
// statistics, folding them into the running averages. `trace`, when given,
// receives every layer's runtime output shape.
template <typename T>
BasicTensor<T> forward(BasicModel<T>& model, const BasicTensor<T>& volumes,
                       const std::type_identity_t<BasicTensor<T>>* demographics, bool training,
                       Rng& rng, std::vector<Shape>* trace = nullptr);

// Inference-mode forward pass; never mutates the model.
template <typename T>
BasicTensor<T> infer(const BasicModel<T>& model, const BasicTensor<T>& volumes,
                     const std::type_identity_t<BasicTensor<T>>* demographics,
                     std::vector<Shape>* trace = nullptr);

struct GraphForward {
  autograd::Var logits;
  std::vector<autograd::Var> params;  // parallel to model.parameters()
};

// Records the forward pass on a tape for differentiation.
template <typename T>
GraphForward forward_graph(autograd::Tape<T>& tape, BasicModel<T>& model,
                           const BasicTensor<T>& volumes,
                           const std::type_identity_t<BasicTensor<T>>* demographics, bool training,
                           Rng& rng);

// Cross-entropy gradient of every parameter for one batch (no L2 term).
template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  BasicTensor<T> probs;
  GradMap<T> grads;
};

template <typename T>
LossAndGrads<T> loss_and_grads(BasicModel<T>& model,
                               const BasicTensor<T>& volumes,
                               const std::type_identity_t<BasicTensor<T>>* demographics,
                               std::span<const int> labels, bool training,
                               Rng& rng);

template <typename T>
std::size_t parameter_count(const BasicModel<T>& model);

// Checkpoint directory: checkpoint.cfg (key = value manifest listing the
// configuration, extents, demographic encoder, batch-norm running statistics
// and every tensor with its shape) plus one MVOL file per tensor stored with
// extents (1, 1, numel).
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

}  // namespace voxdx

#endif  // VOXDX_MODEL_HPP_
