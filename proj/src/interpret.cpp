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

#include "voxdx/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "voxdx/error.hpp"

namespace voxdx {

std::vector<std::uint32_t> box_origins(std::uint32_t extent, std::uint32_t box,
                                       std::uint32_t stride) {
  require(box >= 1 && stride >= 1, ErrorKind::kInvalidArgument,
          "box and stride must be >= 1");
  require(box <= extent, ErrorKind::kInvalidArgument,
          "box " + std::to_string(box) + " exceeds extent " + std::to_string(extent));
  std::vector<std::uint32_t> out;
  for (std::uint32_t o = 0; o < extent; o += stride) out.push_back(o);
  return out;
}

Heatmap occlusion_heatmap(const Volume& volume, const ProbabilityFn& fn,
                          const OcclusionOptions& options) {
  require(options.batch_size >= 1, ErrorKind::kInvalidArgument,
          "batch_size must be >= 1");
  const Extents3 e = volume.extents;
  const auto ox = box_origins(e.x, options.box, options.stride);
  const auto oy = box_origins(e.y, options.box, options.stride);
  const auto oz = box_origins(e.z, options.box, options.stride);

  Heatmap h;
  h.box = options.box;
  h.stride = options.stride;
  {
    const std::vector<double> base = fn(std::span<const Volume>(&volume, 1));
    require(base.size() == 1, ErrorKind::kState, "scorer returned the wrong count");
    h.baseline_probability = base[0];
  }

  std::vector<double> sum(e.count(), 0.0);
  std::vector<std::uint32_t> cover(e.count(), 0);

  struct Box {
    std::uint32_t x0, x1, y0, y1, z0, z1;
  };
  std::vector<Box> pending;
  std::vector<Volume> occluded;
  auto flush = [&] {
    if (pending.empty()) return;
    const std::vector<double> p = fn(occluded);
    require(p.size() == pending.size(), ErrorKind::kState,
            "scorer returned the wrong count");
    for (std::size_t k = 0; k < pending.size(); ++k) {
      const double d = p[k] - h.baseline_probability;
      const Box& b = pending[k];
      for (std::uint32_t x = b.x0; x < b.x1; ++x)
        for (std::uint32_t y = b.y0; y < b.y1; ++y)
          for (std::uint32_t z = b.z0; z < b.z1; ++z) {
            const std::size_t i = volume.index(x, y, z);
            sum[i] += d;
            ++cover[i];
          }
    }
    h.evaluations += pending.size();
    pending.clear();
    occluded.clear();
  };

  for (std::uint32_t x0 : ox)
    for (std::uint32_t y0 : oy)
      for (std::uint32_t z0 : oz) {
        Box b{x0, std::min(x0 + options.box, e.x), y0, std::min(y0 + options.box, e.y),
              z0, std::min(z0 + options.box, e.z)};
        Volume v = volume;
        for (std::uint32_t x = b.x0; x < b.x1; ++x)
          for (std::uint32_t y = b.y0; y < b.y1; ++y)
            for (std::uint32_t z = b.z0; z < b.z1; ++z) v.at(x, y, z) = 0.0f;
        pending.push_back(b);
        occluded.push_back(std::move(v));
        if (pending.size() == options.batch_size) flush();
      }
  flush();

  h.delta = Volume(e);
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (cover[i]) h.delta.voxels[i] = static_cast<float>(sum[i] / cover[i]);
  return h;
}

Heatmap occlusion_heatmap(const Model& model, const Volume& volume,
                          const std::array<float, 2>* demographics,
                          const OcclusionOptions& options) {
  require(volume.extents == model.input_extents(), ErrorKind::kShape,
          "model expects extents " + model.input_extents().str() + ", volume has " +
              volume.extents.str());
  require((demographics != nullptr) == model.config().use_demographics,
          ErrorKind::kInvalidArgument,
          model.config().use_demographics ? "model needs demographics"
                                          : "model does not use demographics");
  ProbabilityFn fn = [&](std::span<const Volume> vols) {
    const Extents3 e = volume.extents;
    const std::size_t n = vols.size();
    Tensor x(Shape{n, e.x, e.y, e.z, 1});
    Tensor d(Shape{n, 2});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(vols[i].voxels.begin(), vols[i].voxels.end(),
                x.raw() + i * e.count());
      if (demographics) {
        d[i * 2] = (*demographics)[0];
        d[i * 2 + 1] = (*demographics)[1];
      }
    }
    const Tensor probs = ops::softmax(infer(model, x, demographics ? &d : nullptr));
    const std::size_t c = probs.dim(1);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = probs[i * c + 1];
    return out;
  };
  return occlusion_heatmap(volume, fn, options);
}

// ---------------------------------------------------------------------------

const char* to_string(Plane p) {
  switch (p) {
    case Plane::kSagittal:
      return "sagittal";
    case Plane::kCoronal:
      return "coronal";
    default:
      return "axial";
  }
}

Plane parse_plane(const std::string& s) {
  if (s == "sagittal") return Plane::kSagittal;
  if (s == "coronal") return Plane::kCoronal;
  if (s == "axial") return Plane::kAxial;
  fail(ErrorKind::kInvalidArgument,
       "unknown plane '" + s + "' (expected sagittal|coronal|axial)");
}

SliceImage slice_image(const Volume& volume, Plane plane, std::uint32_t index) {
  const Extents3 e = volume.extents;
  const std::uint32_t limit =
      plane == Plane::kSagittal ? e.x : plane == Plane::kCoronal ? e.y : e.z;
  require(index < limit, ErrorKind::kInvalidArgument,
          std::string(to_string(plane)) + " index " + std::to_string(index) +
              " out of range [0," + std::to_string(limit) + ")");
  SliceImage img;
  std::vector<float> vals;
  switch (plane) {
    case Plane::kSagittal:
      img.height = e.y;
      img.width = e.z;
      for (std::uint32_t y = 0; y < e.y; ++y)
        for (std::uint32_t z = 0; z < e.z; ++z) vals.push_back(volume.at(index, y, z));
      break;
    case Plane::kCoronal:
      img.height = e.x;
      img.width = e.z;
      for (std::uint32_t x = 0; x < e.x; ++x)
        for (std::uint32_t z = 0; z < e.z; ++z) vals.push_back(volume.at(x, index, z));
      break;
    case Plane::kAxial:
      img.height = e.x;
      img.width = e.y;
      for (std::uint32_t x = 0; x < e.x; ++x)
        for (std::uint32_t y = 0; y < e.y; ++y) vals.push_back(volume.at(x, y, index));
      break;
  }
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const double mn = *lo, mx = *hi;
  img.pixels.resize(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (mx == mn) {
      img.pixels[i] = 128;
    } else {
      img.pixels[i] =
          static_cast<std::uint8_t>(std::lround((vals[i] - mn) / (mx - mn) * 255.0));
    }
  }
  return img;
}

void write_pgm(const SliceImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  require(static_cast<bool>(out), ErrorKind::kIo, "short write to " + path.string());
}

void export_slice(const Volume& volume, Plane plane, std::uint32_t index,
                  const std::filesystem::path& path) {
  write_pgm(slice_image(volume, plane, index), path);
}

}  // namespace voxdx
