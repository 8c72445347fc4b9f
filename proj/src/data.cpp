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

#include "voxdx/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "voxdx/error.hpp"

namespace voxdx {
namespace fs = std::filesystem;

std::string Extents3::str() const {
  return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(z);
}

// ---------------------------------------------------------------------------
// MVOL

namespace {

constexpr char kMagic[4] = {'M', 'V', 'L', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_volume(const Volume& volume, const fs::path& path) {
  require(volume.voxels.size() == volume.extents.count(), ErrorKind::kShape,
          "volume buffer does not match extents " + volume.extents.str());
  std::string bytes;
  bytes.reserve(16 + 4 * volume.voxels.size());
  bytes.append(kMagic, 4);
  put_u32(bytes, volume.extents.x);
  put_u32(bytes, volume.extents.y);
  put_u32(bytes, volume.extents.z);
  for (float v : volume.voxels) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo,
          "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed: " + path.string());
}

Volume load_volume(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VolumeError(VolumeErrorKind::kOpen, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin(),
                                      [](char a, unsigned char b) {
                                        return static_cast<unsigned char>(a) == b;
                                      })) {
    throw VolumeError(VolumeErrorKind::kBadMagic,
                      path.string() + ": not an MVOL file (bad magic)");
  }
  if (bytes.size() < 16) {
    throw VolumeError(VolumeErrorKind::kTruncated,
                      path.string() + ": truncated header");
  }
  Volume v;
  v.extents = {get_u32(&bytes[4]), get_u32(&bytes[8]), get_u32(&bytes[12])};
  if (v.extents.x == 0 || v.extents.y == 0 || v.extents.z == 0) {
    throw VolumeError(VolumeErrorKind::kTruncated,
                      path.string() + ": zero extent in header");
  }
  const std::size_t n = v.extents.count();
  if (bytes.size() - 16 < 4 * n) {
    throw VolumeError(VolumeErrorKind::kTruncated,
                      path.string() + ": header advertises " + v.extents.str() +
                          " voxels but payload holds only " +
                          std::to_string((bytes.size() - 16) / 4));
  }
  v.voxels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float f = std::bit_cast<float>(get_u32(&bytes[16 + 4 * i]));
    if (!std::isfinite(f)) {
      throw VolumeError(VolumeErrorKind::kNonFinite,
                        path.string() + ": non-finite voxel at index " +
                            std::to_string(i));
    }
    v.voxels[i] = f;
  }
  return v;
}

Volume normalize_intensity(const Volume& volume) {
  const std::size_t n = volume.voxels.size();
  require(n > 0, ErrorKind::kData, "cannot normalize an empty volume");
  double mean = 0.0;
  for (float v : volume.voxels) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float v : volume.voxels) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  require(var > 0.0, ErrorKind::kData,
          "cannot normalize a constant volume (zero variance)");
  const double inv = 1.0 / std::sqrt(var);
  Volume out = volume;
  for (float& v : out.voxels) v = static_cast<float>((v - mean) * inv);
  return out;
}

Volume hemisphere_flip(const Volume& volume) {
  Volume out(volume.extents);
  const std::size_t plane = static_cast<std::size_t>(volume.extents.y) * volume.extents.z;
  for (std::size_t x = 0; x < volume.extents.x; ++x) {
    const std::size_t src = x * plane;
    const std::size_t dst = (volume.extents.x - 1 - x) * plane;
    std::copy_n(volume.voxels.begin() + src, plane, out.voxels.begin() + dst);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

const char* to_string(Sex s) { return s == Sex::kMale ? "M" : "F"; }
const char* to_string(Label l) { return l == Label::kPD ? "PD" : "HC"; }

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void manifest_error(const fs::path& path, std::size_t line,
                                 const std::string& what) {
  fail(ErrorKind::kData, path.string() + " row " + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<Subject> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open manifest " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<Subject> subjects;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      const std::vector<std::string> want{"id", "path", "age", "sex", "label"};
      if (fields != want) manifest_error(path, line_no, "header must be id,path,age,sex,label");
      header_seen = true;
      continue;
    }
    if (fields.size() != 5) {
      manifest_error(path, line_no,
                     "expected 5 fields, found " + std::to_string(fields.size()));
    }
    Subject s;
    s.id = fields[0];
    s.volume_path = fields[1];
    if (s.id.empty()) manifest_error(path, line_no, "empty id");
    if (s.volume_path.empty()) manifest_error(path, line_no, "empty path");
    int age = -1;
    const auto& a = fields[2];
    auto [ptr, ec] = std::from_chars(a.data(), a.data() + a.size(), age);
    if (ec != std::errc{} || ptr != a.data() + a.size()) {
      manifest_error(path, line_no, "age '" + a + "' is not an integer");
    }
    if (age < 0 || age > 120) {
      manifest_error(path, line_no, "age " + a + " outside [0,120]");
    }
    s.age = age;
    if (fields[3] == "M") {
      s.sex = Sex::kMale;
    } else if (fields[3] == "F") {
      s.sex = Sex::kFemale;
    } else {
      manifest_error(path, line_no, "unknown sex token '" + fields[3] + "'");
    }
    if (fields[4] == "PD") {
      s.label = Label::kPD;
    } else if (fields[4] == "HC") {
      s.label = Label::kHC;
    } else {
      manifest_error(path, line_no, "unknown label token '" + fields[4] + "'");
    }
    subjects.push_back(std::move(s));
  }
  if (!header_seen) fail(ErrorKind::kData, path.string() + ": empty manifest");
  return subjects;
}

void save_manifest(std::span<const Subject> subjects, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  out << "id,path,age,sex,label\n";
  for (const Subject& s : subjects) {
    out << s.id << ',' << s.volume_path << ',' << s.age << ','
        << to_string(s.sex) << ',' << to_string(s.label) << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed: " + path.string());
}

std::vector<Subject> augment(std::span<const Subject> subjects) {
  std::vector<Subject> out(subjects.begin(), subjects.end());
  out.reserve(2 * subjects.size());
  for (const Subject& s : subjects) {
    Subject f = s;
    f.flipped = !s.flipped;
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

namespace {

void check_fractions(const SplitFractions& f) {
  require(f.train > 0 && f.dev > 0 && f.test > 0, ErrorKind::kInvalidArgument,
          "split fractions must all be positive");
  require(std::abs(f.train + f.dev + f.test - 1.0) <= 1e-9,
          ErrorKind::kInvalidArgument, "split fractions must sum to 1");
}

const char* kPartNames[3] = {"train", "dev", "test"};

}  // namespace

std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& f) {
  const double parts[3] = {f.train, f.dev, f.test};
  std::array<std::size_t, 3> size{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * parts[i];
    size[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(size[i]);
    assigned += size[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rem[a] > rem[b] + 1e-9; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++size[order[k % 3]];
  return size;
}

DatasetSplit stratified_split(std::span<const Subject> subjects,
                              const SplitFractions& fractions,
                              std::uint64_t seed) {
  check_fractions(fractions);

  // Group rows by id, remembering first appearance for stable output order.
  std::map<std::string, std::size_t> first_index;
  std::vector<std::string> group_ids;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (first_index.emplace(subjects[i].id, i).second) group_ids.push_back(subjects[i].id);
  }
  const std::size_t n = group_ids.size();
  const auto totals = apportion(n, fractions);
  for (int p = 0; p < 3; ++p) {
    require(totals[p] > 0, ErrorKind::kData,
            "too few subjects (" + std::to_string(n) + ") to populate the " +
                kPartNames[p] + " split");
  }

  // Per-class shuffled groups.
  std::array<std::vector<std::string>, 2> by_class;
  for (const auto& id : group_ids) {
    by_class[static_cast<int>(subjects[first_index[id]].label)].push_back(id);
  }
  for (int c = 0; c < 2; ++c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(by_class[c]);
  }

  // Controlled rounding: floor of each class's proportional share, then
  // hand out the leftovers by largest remainder while respecting both the
  // class totals and the split totals.
  const double parts[3] = {fractions.train, fractions.dev, fractions.test};
  std::array<std::array<std::size_t, 3>, 2> quota{};
  std::array<std::array<double, 3>, 2> rem{};
  std::array<std::size_t, 2> row_need{};
  std::array<std::size_t, 3> col_need = totals;
  for (int c = 0; c < 2; ++c) {
    const double nc = static_cast<double>(by_class[c].size());
    std::size_t assigned = 0;
    for (int p = 0; p < 3; ++p) {
      quota[c][p] = static_cast<std::size_t>(std::floor(nc * parts[p]));
      rem[c][p] = nc * parts[p] - static_cast<double>(quota[c][p]);
      assigned += quota[c][p];
      col_need[p] -= std::min(col_need[p], quota[c][p]);
    }
    row_need[c] = by_class[c].size() - assigned;
  }
  std::vector<std::pair<int, int>> cells;
  for (int c = 0; c < 2; ++c)
    for (int p = 0; p < 3; ++p) cells.emplace_back(c, p);
  std::stable_sort(cells.begin(), cells.end(), [&](auto a, auto b) {
    return rem[a.first][a.second] > rem[b.first][b.second];
  });
  for (auto [c, p] : cells) {
    if (row_need[c] > 0 && col_need[p] > 0) {
      ++quota[c][p];
      --row_need[c];
      --col_need[p];
    }
  }
  for (int c = 0; c < 2; ++c)
    for (int p = 0; p < 3 && row_need[c] > 0; ++p)
      while (row_need[c] > 0 && col_need[p] > 0) {
        ++quota[c][p];
        --row_need[c];
        --col_need[p];
      }

  std::map<std::string, int> part_of;
  for (int c = 0; c < 2; ++c) {
    std::size_t k = 0;
    for (int p = 0; p < 3; ++p)
      for (std::size_t q = 0; q < quota[c][p]; ++q) part_of[by_class[c][k++]] = p;
  }

  DatasetSplit split;
  split.fractions = fractions;
  split.seed = seed;
  std::vector<Subject>* lists[3] = {&split.train, &split.dev, &split.test};
  for (const Subject& s : subjects) lists[part_of.at(s.id)]->push_back(s);
  return split;
}

void save_split(const DatasetSplit& split, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  char buf[128];
  out << "#seed=" << split.seed << '\n';
  std::snprintf(buf, sizeof buf, "#fractions=%.17g,%.17g,%.17g\n",
                split.fractions.train, split.fractions.dev, split.fractions.test);
  out << buf << "id,split\n";
  const std::vector<Subject>* lists[3] = {&split.train, &split.dev, &split.test};
  for (int p = 0; p < 3; ++p) {
    std::vector<std::string> written;
    for (const Subject& s : *lists[p]) {
      if (std::find(written.begin(), written.end(), s.id) != written.end()) continue;
      written.push_back(s.id);
      out << s.id << ',' << kPartNames[p] << '\n';
    }
  }
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed: " + path.string());
}

DatasetSplit load_split(const fs::path& path, std::span<const Subject> subjects) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open split " + path.string());
  DatasetSplit split;
  std::map<std::string, int> part_of;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.starts_with("#seed=")) {
      split.seed = std::stoull(line.substr(6));
      continue;
    }
    if (line.starts_with("#fractions=")) {
      const auto f = split_csv(line.substr(11));
      require(f.size() == 3, ErrorKind::kData, path.string() + ": bad fractions line");
      split.fractions = {std::stod(f[0]), std::stod(f[1]), std::stod(f[2])};
      continue;
    }
    if (line.starts_with("#")) continue;
    if (!header) {
      require(line == "id,split", ErrorKind::kData,
              path.string() + ": expected header id,split");
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    require(f.size() == 2, ErrorKind::kData,
            path.string() + " row " + std::to_string(line_no) + ": expected id,split");
    int p = -1;
    for (int k = 0; k < 3; ++k)
      if (f[1] == kPartNames[k]) p = k;
    require(p >= 0, ErrorKind::kData,
            path.string() + " row " + std::to_string(line_no) +
                ": unknown split '" + f[1] + "'");
    part_of[f[0]] = p;
  }
  std::vector<Subject>* lists[3] = {&split.train, &split.dev, &split.test};
  for (const Subject& s : subjects) {
    auto it = part_of.find(s.id);
    require(it != part_of.end(), ErrorKind::kData,
            "subject '" + s.id + "' is not assigned in split " + path.string());
    lists[it->second]->push_back(s);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Samples and batches

DemographicEncoder DemographicEncoder::fit(std::span<const Subject> subjects) {
  DemographicEncoder e;
  if (subjects.empty()) return e;
  double mean = 0.0;
  for (const Subject& s : subjects) mean += s.age;
  mean /= static_cast<double>(subjects.size());
  double var = 0.0;
  for (const Subject& s : subjects) var += (s.age - mean) * (s.age - mean);
  var /= static_cast<double>(subjects.size());
  e.age_mean = mean;
  e.age_std = var > 0.0 ? std::sqrt(var) : 1.0;
  return e;
}

std::array<float, 2> DemographicEncoder::encode(const Subject& s) const {
  return {static_cast<float>((s.age - age_mean) / age_std),
          s.sex == Sex::kMale ? 1.0f : 0.0f};
}

std::vector<Sample> load_samples(std::span<const Subject> subjects,
                                 const fs::path& base_dir,
                                 const DemographicEncoder& encoder) {
  std::vector<Sample> out;
  out.reserve(subjects.size());
  for (const Subject& s : subjects) {
    fs::path p = s.volume_path;
    if (p.is_relative()) p = base_dir / p;
    Volume v;
    try {
      v = load_volume(p);
      v = normalize_intensity(v);
    } catch (const Error& e) {
      fail(e.kind() == ErrorKind::kIo ? ErrorKind::kData : e.kind(),
           "subject '" + s.id + "': " + e.what());
    }
    if (s.flipped) v = hemisphere_flip(v);
    out.push_back(Sample{s.id, s.flipped, std::move(v), encoder.encode(s),
                         static_cast<int>(s.label)});
  }
  return out;
}

Batch make_batch(std::span<const Sample> samples,
                 std::span<const std::size_t> indices) {
  require(!indices.empty(), ErrorKind::kInvalidArgument, "empty batch");
  const Extents3 e = samples[indices[0]].volume.extents;
  const std::size_t n = indices.size();
  Batch b;
  b.volumes = Tensor(Shape{n, e.x, e.y, e.z, 1});
  b.demographics = Tensor(Shape{n, 2});
  b.indices.assign(indices.begin(), indices.end());
  const std::size_t vox = e.count();
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = samples[indices[i]];
    require(s.volume.extents == e, ErrorKind::kShape,
            "sample '" + s.id + "' has extents " + s.volume.extents.str() +
                ", batch expects " + e.str());
    std::copy(s.volume.voxels.begin(), s.volume.voxels.end(),
              b.volumes.raw() + i * vox);
    b.demographics[2 * i] = s.demographics[0];
    b.demographics[2 * i + 1] = s.demographics[1];
    b.labels.push_back(s.label);
  }
  return b;
}

BatchIterator::BatchIterator(std::span<const Sample> samples,
                             std::size_t batch_size, std::uint64_t shuffle_seed,
                             bool shuffle)
    : samples_(samples), batch_size_(batch_size), order_(samples.size()) {
  require(batch_size >= 1, ErrorKind::kInvalidArgument, "batch size must be >= 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(shuffle_seed);
    rng.shuffle(order_);
  }
}

std::size_t BatchIterator::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(Batch& batch) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  batch = make_batch(samples_, std::span(order_).subspan(cursor_, end - cursor_));
  cursor_ = end;
  return true;
}

// ---------------------------------------------------------------------------
// Synthetic cohort

LesionSite lesion_site(Extents3 e) {
  LesionSite s;
  s.cx = 0.30 * (e.x - 1);
  s.cy = 0.55 * (e.y - 1);
  s.cz = 0.45 * (e.z - 1);
  s.sigma = 0.1 * std::min({e.x, e.y, e.z});
  auto lo = [&](double c, std::uint32_t) {
    return static_cast<std::uint32_t>(std::max(0.0, std::floor(c - 2 * s.sigma)));
  };
  auto hi = [&](double c, std::uint32_t ext) {
    return static_cast<std::uint32_t>(
        std::min<double>(ext - 1, std::ceil(c + 2 * s.sigma)));
  };
  s.lo = {lo(s.cx, e.x), lo(s.cy, e.y), lo(s.cz, e.z)};
  s.hi = {hi(s.cx, e.x), hi(s.cy, e.y), hi(s.cz, e.z)};
  return s;
}

namespace {

// One pass of a 3x3x3 box filter with clamped borders.
std::vector<double> box_blur(const std::vector<double>& in, Extents3 e) {
  std::vector<double> out(in.size());
  auto idx = [&](long x, long y, long z) {
    x = std::clamp<long>(x, 0, e.x - 1);
    y = std::clamp<long>(y, 0, e.y - 1);
    z = std::clamp<long>(z, 0, e.z - 1);
    return (static_cast<std::size_t>(x) * e.y + y) * e.z + z;
  };
  for (long x = 0; x < e.x; ++x)
    for (long y = 0; y < e.y; ++y)
      for (long z = 0; z < e.z; ++z) {
        double s = 0.0;
        for (long dx = -1; dx <= 1; ++dx)
          for (long dy = -1; dy <= 1; ++dy)
            for (long dz = -1; dz <= 1; ++dz) s += in[idx(x + dx, y + dy, z + dz)];
        out[idx(x, y, z)] = s / 27.0;
      }
  return out;
}

constexpr double kNoiseStd = 0.15;
constexpr double kAgeStd = 10.5;
constexpr double kAgeMean = 60.8;

}  // namespace

Volume synth_volume(const SynthSpec& spec, Label label, Rng& rng) {
  const Extents3 e = spec.extents;
  require(e.x >= 8 && e.y >= 8 && e.z >= 8, ErrorKind::kInvalidArgument,
          "synthetic extents must each be >= 8, got " + e.str());
  std::vector<double> noise(e.count());
  for (double& v : noise) v = rng.normal();
  noise = box_blur(box_blur(noise, e), e);
  double m2 = 0.0;
  for (double v : noise) m2 += v * v;
  const double scale = kNoiseStd / std::sqrt(m2 / static_cast<double>(noise.size()));

  const LesionSite lesion = lesion_site(e);
  const double rx = 0.45 * e.x, ry = 0.45 * e.y, rz = 0.45 * e.z;
  const double mx = 0.5 * (e.x - 1), my = 0.5 * (e.y - 1), mz = 0.5 * (e.z - 1);
  Volume v(e);
  for (std::uint32_t x = 0; x < e.x; ++x)
    for (std::uint32_t y = 0; y < e.y; ++y)
      for (std::uint32_t z = 0; z < e.z; ++z) {
        const double r = std::pow((x - mx) / rx, 2) + std::pow((y - my) / ry, 2) +
                         std::pow((z - mz) / rz, 2);
        const std::size_t i = v.index(x, y, z);
        if (r > 1.0) {
          v.voxels[i] = 0.0f;
          continue;
        }
        double value = 1.0 + scale * noise[i];
        if (label == Label::kPD) {
          const double d2 = std::pow(x - lesion.cx, 2) + std::pow(y - lesion.cy, 2) +
                            std::pow(z - lesion.cz, 2);
          value -= spec.signal_strength *
                   std::exp(-d2 / (2 * lesion.sigma * lesion.sigma));
        }
        v.voxels[i] = static_cast<float>(value);
      }
  return v;
}

fs::path synth_generate(const SynthSpec& spec, const fs::path& out_dir) {
  require(spec.n_per_class >= 1, ErrorKind::kInvalidArgument,
          "n_per_class must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir / "volumes", ec);
  require(!ec, ErrorKind::kIo,
          "cannot create " + (out_dir / "volumes").string() + ": " + ec.message());

  // Sex ratios of the reference cohort: 292/452 of PD and 134/204 of HC are
  // male.
  const double male_share[2] = {134.0 / 204.0, 292.0 / 452.0};
  std::vector<Subject> subjects;
  char name[32];
  for (std::uint32_t i = 0; i < 2 * spec.n_per_class; ++i) {
    const Label label = i % 2 == 0 ? Label::kHC : Label::kPD;
    Rng rng(derive_seed(spec.seed, i));
    Subject s;
    std::snprintf(name, sizeof name, "s%04u", i + 1);
    s.id = name;
    s.volume_path = "volumes/" + s.id + ".mvol";
    s.label = label;
    const double mean = kAgeMean + (label == Label::kPD ? spec.age_effect : 0.0);
    s.age = static_cast<int>(std::clamp(std::lround(rng.normal(mean, kAgeStd)), 0L, 120L));
    s.sex = rng.bernoulli(male_share[static_cast<int>(label)]) ? Sex::kMale
                                                              : Sex::kFemale;
    save_volume(synth_volume(spec, label, rng), out_dir / s.volume_path);
    subjects.push_back(std::move(s));
  }
  const fs::path manifest = out_dir / "manifest.csv";
  save_manifest(subjects, manifest);
  return manifest;
}

}  // namespace voxdx
