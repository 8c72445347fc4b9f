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

#ifndef VOXDX_ERROR_HPP_
#define VOXDX_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace voxdx {

// Coarse classification of failures. The C API and the CLI exit codes are
// derived from this.
enum class ErrorKind {
  kInvalidArgument,  // bad configuration or precondition violation
  kShape,            // tensor / volume shape disagreement
  kData,             // malformed input files, missing subjects
  kIo,               // filesystem failures
  kNumerical,        // non-finite loss or gradient
  kState,            // API used out of order (e.g. backward before forward)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Distinct failure modes of the volume reader.
enum class VolumeErrorKind { kBadMagic, kTruncated, kNonFinite, kOpen };

class VolumeError : public Error {
 public:
  VolumeError(VolumeErrorKind which, const std::string& message)
      : Error(which == VolumeErrorKind::kOpen ? ErrorKind::kIo
                                              : ErrorKind::kData,
              message),
        which_(which) {}

  VolumeErrorKind which() const noexcept { return which_; }

 private:
  VolumeErrorKind which_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace voxdx

#endif  // VOXDX_ERROR_HPP_
