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

#ifndef VOXDX_INTERPRET_HPP_
#define VOXDX_INTERPRET_HPP_

// Occlusion sensitivity maps and slice export.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "voxdx/data.hpp"
#include "voxdx/model.hpp"

namespace voxdx {

// Scores a batch of volumes, returning P(PD) for each.
using ProbabilityFn = std::function<std::vector<double>(std::span<const Volume>)>;

struct Heatmap {
  // Per-voxel mean of P(occluded) - P(original) over the boxes covering the
  // voxel; 0 where no box reaches (only possible when stride > box).
  Volume delta;
  double baseline_probability = 0.0;
  std::uint32_t box = 2;
  std::uint32_t stride = 1;
  std::size_t evaluations = 0;  // box positions scored
};

struct OcclusionOptions {
  std::uint32_t box = 2;
  std::uint32_t stride = 1;
  std::size_t batch_size = 8;
};

// Box origins along one axis: 0, s, 2s, ... while < extent. Boxes starting
// near the far border are clipped.
std::vector<std::uint32_t> box_origins(std::uint32_t extent, std::uint32_t box,
                                       std::uint32_t stride);

// Slides a zero-valued box over `volume` (already normalized). Throws when
// box is 0 or exceeds an extent, or stride is 0.
Heatmap occlusion_heatmap(const Volume& volume, const ProbabilityFn& fn,
                          const OcclusionOptions& options = {});

// Model scorer; `demographics` must be given iff the model uses them.
Heatmap occlusion_heatmap(const Model& model, const Volume& volume,
                          const std::array<float, 2>* demographics,
                          const OcclusionOptions& options = {});

enum class Plane { kSagittal, kCoronal, kAxial };

const char* to_string(Plane p);
Plane parse_plane(const std::string& s);

// Grayscale slice image, row-major.
struct SliceImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Sagittal fixes x (rows y, columns z), coronal fixes y (rows x, columns z),
// axial fixes z (rows x, columns y). Values are rescaled linearly so the
// slice minimum maps to 0 and the maximum to 255; a constant slice maps to
// 128. Throws if the index is outside the plane's extent.
SliceImage slice_image(const Volume& volume, Plane plane, std::uint32_t index);

// Binary PGM (P5).
void write_pgm(const SliceImage& image, const std::filesystem::path& path);
void export_slice(const Volume& volume, Plane plane, std::uint32_t index,
                  const std::filesystem::path& path);

}  // namespace voxdx

#endif  // VOXDX_INTERPRET_HPP_
