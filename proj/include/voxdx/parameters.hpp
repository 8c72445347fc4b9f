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

#ifndef VOXDX_PARAMETERS_HPP_
#define VOXDX_PARAMETERS_HPP_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "voxdx/tensor.hpp"

namespace voxdx {

enum class ParamRole {
  kConvKernel,
  kConvBias,
  kNormGamma,
  kNormBeta,
  kDenseWeight,
  kDenseBias,
};

template <typename T>
struct Parameter {
  std::string name;
  ParamRole role;
  BasicTensor<T> value;
};

template <typename T>
using ParameterList = std::vector<Parameter<T>>;

// Gradients keyed by parameter name.
template <typename T>
using GradMap = std::map<std::string, BasicTensor<T>, std::less<>>;

template <typename T>
const Parameter<T>* find_parameter(const ParameterList<T>& params,
                                   std::string_view name) {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace voxdx

#endif  // VOXDX_PARAMETERS_HPP_
