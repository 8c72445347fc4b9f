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

#ifndef VOXDX_DATA_HPP_
#define VOXDX_DATA_HPP_

// Volumes, subject manifests, augmentation, splitting, batching and the
// synthetic cohort generator.
//
// MVOL layout (all little-endian):
//   bytes 0..3   magic "MVL1"
//   bytes 4..15  uint32 extents X, Y, Z (sagittal, coronal, axial)
//   bytes 16..   X*Y*Z float32 voxels, X slowest and Z fastest

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxdx/rng.hpp"
#include "voxdx/tensor.hpp"

namespace voxdx {

struct Extents3 {
  std::uint32_t x = 0;  // sagittal
  std::uint32_t y = 0;  // coronal
  std::uint32_t z = 0;  // axial

  std::size_t count() const {
    return static_cast<std::size_t>(x) * y * z;
  }
  std::string str() const;
  friend bool operator==(const Extents3&, const Extents3&) = default;
};

struct Volume {
  Extents3 extents;
  std::vector<float> voxels;

  Volume() = default;
  explicit Volume(Extents3 e, float fill = 0.0f)
      : extents(e), voxels(e.count(), fill) {}

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (x * extents.y + y) * extents.z + z;
  }
  float& at(std::size_t x, std::size_t y, std::size_t z) {
    return voxels[index(x, y, z)];
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const {
    return voxels[index(x, y, z)];
  }
  friend bool operator==(const Volume&, const Volume&) = default;
};

void save_volume(const Volume& volume, const std::filesystem::path& path);

// Throws VolumeError with kBadMagic, kTruncated, kNonFinite or kOpen.
Volume load_volume(const std::filesystem::path& path);

// Per-volume z-score. Throws on a constant volume.
Volume normalize_intensity(const Volume& volume);

// Mirrors the sagittal axis: (x, y, z) -> (X-1-x, y, z).
Volume hemisphere_flip(const Volume& volume);

// ---------------------------------------------------------------------------

enum class Sex { kFemale = 0, kMale = 1 };
enum class Label { kHC = 0, kPD = 1 };

const char* to_string(Sex s);
const char* to_string(Label l);

struct Subject {
  std::string id;
  std::string volume_path;  // relative paths resolve against the manifest dir
  int age = 0;
  Sex sex = Sex::kFemale;
  Label label = Label::kHC;
  bool flipped = false;

  friend bool operator==(const Subject&, const Subject&) = default;
};

// CSV with header `id,path,age,sex,label`. Rows are validated individually;
// errors name the 1-based line number.
std::vector<Subject> load_manifest(const std::filesystem::path& path);
void save_manifest(std::span<const Subject> subjects,
                   const std::filesystem::path& path);

// Returns the input followed by a sagittally flipped copy of each subject.
std::vector<Subject> augment(std::span<const Subject> subjects);

// ---------------------------------------------------------------------------

struct SplitFractions {
  double train = 0.85;
  double dev = 0.10;
  double test = 0.05;
};

struct DatasetSplit {
  std::vector<Subject> train;
  std::vector<Subject> dev;
  std::vector<Subject> test;
  SplitFractions fractions;
  std::uint64_t seed = 0;
};

// Largest-remainder apportionment of n items; ties favour earlier parts.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& f);

// Splits by subject id so that an original and its flipped copy always land
// together, keeping each class within one subject of its global share.
DatasetSplit stratified_split(std::span<const Subject> subjects,
                              const SplitFractions& fractions,
                              std::uint64_t seed);

void save_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_split(const std::filesystem::path& path,
                        std::span<const Subject> subjects);

// ---------------------------------------------------------------------------

// Age z-scored with training-split statistics; sex F=0, M=1.
struct DemographicEncoder {
  double age_mean = 0.0;
  double age_std = 1.0;

  static DemographicEncoder fit(std::span<const Subject> subjects);
  std::array<float, 2> encode(const Subject& s) const;
  friend bool operator==(const DemographicEncoder&,
                         const DemographicEncoder&) = default;
};

// A subject with its volume loaded, flipped if requested, and normalized.
struct Sample {
  std::string id;
  bool flipped = false;
  Volume volume;
  std::array<float, 2> demographics{};
  int label = 0;
};

std::vector<Sample> load_samples(std::span<const Subject> subjects,
                                 const std::filesystem::path& base_dir,
                                 const DemographicEncoder& encoder);

struct Batch {
  Tensor volumes;       // [N, X, Y, Z, 1]
  Tensor demographics;  // [N, 2]
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // into the sample list
};

Batch make_batch(std::span<const Sample> samples,
                 std::span<const std::size_t> indices);

// Seeded shuffle, then consecutive chunks of batch_size; the final short
// batch is kept.
class BatchIterator {
 public:
  BatchIterator(std::span<const Sample> samples, std::size_t batch_size,
                std::uint64_t shuffle_seed, bool shuffle = true);

  bool next(Batch& batch);
  std::size_t num_batches() const;
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  std::span<const Sample> samples_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------

struct SynthSpec {
  std::uint32_t n_per_class = 12;
  Extents3 extents{16, 20, 20};
  double signal_strength = 1.0;
  double age_effect = 2.0;  // years added to the PD age mean
  std::uint64_t seed = 0;
};

// Location of the simulated deficit. It sits off the sagittal midline so a
// flipped copy puts it in the other hemisphere.
struct LesionSite {
  double cx = 0, cy = 0, cz = 0;
  double sigma = 0;
  Extents3 lo;  // inclusive bounding box (center +/- 2 sigma, clipped)
  Extents3 hi;

  bool contains(std::size_t x, std::size_t y, std::size_t z) const {
    return x >= lo.x && x <= hi.x && y >= lo.y && y <= hi.y && z >= lo.z &&
           z <= hi.z;
  }
};

LesionSite lesion_site(Extents3 extents);

Volume synth_volume(const SynthSpec& spec, Label label, Rng& rng);

// Writes volumes/<id>.mvol plus manifest.csv under out_dir; returns the
// manifest path.
std::filesystem::path synth_generate(const SynthSpec& spec,
                                     const std::filesystem::path& out_dir);

}  // namespace voxdx

#endif  // VOXDX_DATA_HPP_
