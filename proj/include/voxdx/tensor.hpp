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

#ifndef VOXDX_TENSOR_HPP_
#define VOXDX_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "voxdx/error.hpp"

namespace voxdx {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array; the last axis varies fastest. Every extent is >= 1
// and the buffer length always equals the product of the extents.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  // The empty tensor is the "no value" state (rank 0, no storage).
  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(checked(std::move(shape))), data_(shape_numel(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(checked(std::move(shape))), data_(std::move(data)) {
    require(data_.size() == shape_numel(shape_), ErrorKind::kShape,
            "tensor buffer length " + std::to_string(data_.size()) +
                " does not match shape " + shape_string(shape_));
  }

  BasicTensor(Shape shape, std::initializer_list<T> values)
      : BasicTensor(std::move(shape), std::vector<T>(values)) {}

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor scalar(T v) { return BasicTensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Multi-index access; intended for tests and oracles, not hot loops.
  T& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
  const T& at(std::initializer_list<std::size_t> index) const {
    return data_[offset(index)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }
  BasicTensor reshaped(Shape shape) && {
    reshape(std::move(shape));
    return std::move(*this);
  }

  void reshape(Shape shape) {
    shape = checked(std::move(shape));
    require(shape_numel(shape) == data_.size(), ErrorKind::kShape,
            "cannot reshape " + shape_string(shape_) + " to " +
                shape_string(shape));
    shape_ = std::move(shape);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    if (empty()) return {};
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Shape checked(Shape shape) {
    for (std::size_t e : shape) {
      require(e >= 1, ErrorKind::kShape,
              "tensor extents must be >= 1, got " + shape_string(shape));
    }
    return shape;
  }

  std::size_t offset(std::initializer_list<std::size_t> index) const {
    require(index.size() == shape_.size(), ErrorKind::kShape,
            "index rank does not match tensor rank");
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
      require(i < shape_[axis], ErrorKind::kShape, "tensor index out of range");
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace voxdx

#endif  // VOXDX_TENSOR_HPP_
