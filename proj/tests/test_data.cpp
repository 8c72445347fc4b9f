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
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "doctest.h"
#include "temp_dir.hpp"
#include "voxdx/data.hpp"

using namespace voxdx;
using voxdx::testing::TempDir;

namespace {

Volume ramp(Extents3 e) {
  Volume v(e);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) v.voxels[i] = 0.25f * static_cast<float>(i) - 3.0f;
  return v;
}

std::vector<Subject> cohort(std::size_t n_hc, std::size_t n_pd) {
  std::vector<Subject> out;
  for (std::size_t i = 0; i < n_hc + n_pd; ++i) {
    Subject s;
    s.id = "sub" + std::to_string(i);
    s.volume_path = s.id + ".mvol";
    s.age = 50 + static_cast<int>(i % 20);
    s.sex = i % 3 == 0 ? Sex::kMale : Sex::kFemale;
    s.label = i < n_hc ? Label::kHC : Label::kPD;
    out.push_back(s);
  }
  return out;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

VolumeErrorKind load_failure(const std::filesystem::path& p) {
  try {
    load_volume(p);
  } catch (const VolumeError& e) {
    return e.which();
  }
  FAIL("load_volume accepted " << p);
  return VolumeErrorKind::kOpen;
}

}  // namespace

TEST_CASE("mvol round trip is bit exact") {
  TempDir dir("mvol");
  const Volume v = ramp({3, 4, 5});
  save_volume(v, dir / "a.mvol");
  CHECK(load_volume(dir / "a.mvol") == v);
}

TEST_CASE("mvol byte layout") {
  TempDir dir("layout");
  Volume v({2, 1, 3});
  v.at(1, 0, 2) = 1.0f;
  save_volume(v, dir / "a.mvol");
  const std::string b = read_bytes(dir / "a.mvol");
  REQUIRE(b.size() == 16 + 4 * 6);
  CHECK(b.substr(0, 4) == "MVL1");
  CHECK(static_cast<unsigned char>(b[4]) == 2);
  CHECK(static_cast<unsigned char>(b[8]) == 1);
  CHECK(static_cast<unsigned char>(b[12]) == 3);
  float last;
  std::memcpy(&last, b.data() + 16 + 4 * 5, 4);  // X slowest, Z fastest
  CHECK(last == 1.0f);
}

TEST_CASE("mvol reader distinguishes failure modes") {
  TempDir dir("bad");
  save_volume(ramp({2, 2, 2}), dir / "good.mvol");
  std::string good = read_bytes(dir / "good.mvol");

  std::string magic = good;
  magic[0] = 'X';
  write_bytes(dir / "magic.mvol", magic);
  CHECK(load_failure(dir / "magic.mvol") == VolumeErrorKind::kBadMagic);

  write_bytes(dir / "short.mvol", good.substr(0, good.size() - 3));
  CHECK(load_failure(dir / "short.mvol") == VolumeErrorKind::kTruncated);
  write_bytes(dir / "header.mvol", good.substr(0, 10));
  CHECK(load_failure(dir / "header.mvol") == VolumeErrorKind::kTruncated);

  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 16 + 4 * 3, &q, 4);
  write_bytes(dir / "nan.mvol", nan);
  CHECK(load_failure(dir / "nan.mvol") == VolumeErrorKind::kNonFinite);

  CHECK(load_failure(dir / "missing.mvol") == VolumeErrorKind::kOpen);
}

TEST_CASE("normalize_intensity yields zero mean and unit variance") {
  const Volume n = normalize_intensity(ramp({4, 5, 6}));
  double m = 0, v = 0;
  for (float x : n.voxels) m += x;
  m /= n.voxels.size();
  for (float x : n.voxels) v += (x - m) * (x - m);
  v /= n.voxels.size();
  CHECK(std::abs(m) < 1e-5);
  CHECK(v == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_THROWS_AS(normalize_intensity(Volume({2, 2, 2}, 3.0f)), Error);
}

TEST_CASE("hemisphere flip mirrors x and is an involution") {
  const Volume v = ramp({5, 3, 2});
  const Volume f = hemisphere_flip(v);
  for (std::size_t x = 0; x < 5; ++x)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t z = 0; z < 2; ++z) CHECK(f.at(x, y, z) == v.at(4 - x, y, z));
  CHECK(hemisphere_flip(f) == v);
}

TEST_CASE("manifest round trip") {
  TempDir dir("manifest");
  const auto subjects = cohort(3, 4);
  save_manifest(subjects, dir / "m.csv");
  CHECK(load_manifest(dir / "m.csv") == subjects);
}

TEST_CASE("manifest errors name the line") {
  TempDir dir("manifest_err");
  const std::map<std::string, std::string> cases{
      {"id,path,age,sex,label\na,a.mvol,40,M,PD\nb,b.mvol,x,M,PD\n", " row 3:"},
      {"id,path,age,sex,label\na,a.mvol,40,Q,PD\n", " row 2:"},
      {"id,path,age,sex,label\na,a.mvol,40,M,XX\n", " row 2:"},
      {"id,path,age,sex,label\na,a.mvol,40,M\n", " row 2:"},
      {"id,file,age,sex,label\n", " row 1:"},
  };
  for (const auto& [text, where] : cases) {
    std::ofstream(dir / "m.csv") << text;
    try {
      load_manifest(dir / "m.csv");
      FAIL("accepted " << text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kData);
      CHECK(std::string(e.what()).find(where) != std::string::npos);
    }
  }
}

TEST_CASE("augment doubles and flips") {
  const auto subjects = cohort(2, 3);
  const auto aug = augment(subjects);
  REQUIRE(aug.size() == 10);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(aug[i] == subjects[i]);
    CHECK(aug[i + 5].id == subjects[i].id);
    CHECK(aug[i + 5].flipped);
  }
  CHECK(augment(std::span<const Subject>{}).empty());
}

TEST_CASE("apportion sums to n and favours earlier parts on ties") {
  for (std::size_t n = 0; n < 60; ++n) {
    const auto a = apportion(n, {0.85, 0.10, 0.05});
    CHECK(a[0] + a[1] + a[2] == n);
  }
  CHECK(apportion(24, {0.85, 0.10, 0.05}) == std::array<std::size_t, 3>{21, 2, 1});
  CHECK(apportion(3, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == std::array<std::size_t, 3>{1, 1, 1});
}

TEST_CASE("split keeps each subject's copies together over 100 seeds") {
  const auto subjects = cohort(11, 13);
  const auto aug = augment(subjects);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const DatasetSplit split = stratified_split(aug, {}, seed);
    std::map<std::string, std::set<int>> parts;
    const std::vector<Subject>* lists[3] = {&split.train, &split.dev, &split.test};
    std::size_t total = 0;
    for (int p = 0; p < 3; ++p) {
      for (const auto& s : *lists[p]) parts[s.id].insert(p);
      total += lists[p]->size();
    }
    CHECK(total == aug.size());
    for (const auto& [id, ps] : parts) CHECK(ps.size() == 1);
    CHECK(split.train.size() == 42);
    CHECK(split.dev.size() == 4);
    CHECK(split.test.size() == 2);
  }
}

TEST_CASE("split stratifies by class") {
  const auto subjects = cohort(40, 60);
  const DatasetSplit split = stratified_split(subjects, {0.6, 0.2, 0.2}, 3);
  auto pd = [](const std::vector<Subject>& v) {
    std::size_t n = 0;
    for (const auto& s : v) n += s.label == Label::kPD;
    return n;
  };
  CHECK(pd(split.train) == 36);
  CHECK(pd(split.dev) == 12);
  CHECK(pd(split.test) == 12);
}

TEST_CASE("split rejects bad fractions and tiny cohorts") {
  const auto subjects = cohort(1, 1);
  CHECK_THROWS_AS(stratified_split(subjects, {}, 0), Error);
  CHECK_THROWS_AS(stratified_split(cohort(10, 10), {0.5, 0.5, 0.0}, 0), Error);
  CHECK_THROWS_AS(stratified_split(cohort(10, 10), {0.5, 0.4, 0.2}, 0), Error);
}

TEST_CASE("split file round trip") {
  TempDir dir("split");
  const auto subjects = cohort(6, 6);
  const auto split = stratified_split(subjects, {0.5, 0.25, 0.25}, 17);
  save_split(split, dir / "split.csv");
  const auto back = load_split(dir / "split.csv", subjects);
  CHECK(back.train == split.train);
  CHECK(back.dev == split.dev);
  CHECK(back.test == split.test);
  CHECK(back.seed == 17);
  CHECK(back.fractions.dev == 0.25);

  auto extra = subjects;
  extra.push_back(extra.front());
  extra.back().id = "stranger";
  CHECK_THROWS_AS(load_split(dir / "split.csv", extra), Error);
}

TEST_CASE("demographic encoder") {
  std::vector<Subject> s(2);
  s[0].age = 50;
  s[1].age = 70;
  s[1].sex = Sex::kMale;
  const auto e = DemographicEncoder::fit(s);
  CHECK(e.age_mean == 60.0);
  CHECK(e.age_std == 10.0);
  CHECK(e.encode(s[0]) == std::array<float, 2>{-1.0f, 0.0f});
  CHECK(e.encode(s[1]) == std::array<float, 2>{1.0f, 1.0f});
  std::vector<Subject> same(3);
  CHECK(DemographicEncoder::fit(same).age_std == 1.0);
}

TEST_CASE("load_samples flips and normalizes") {
  TempDir dir("samples");
  auto subjects = cohort(1, 0);
  save_volume(ramp({3, 2, 2}), dir / subjects[0].volume_path);
  const auto aug = augment(subjects);
  const auto samples = load_samples(aug, dir.path(), {});
  REQUIRE(samples.size() == 2);
  CHECK(samples[1].flipped);
  CHECK(samples[1].volume == hemisphere_flip(samples[0].volume));
  subjects[0].volume_path = "nope.mvol";
  try {
    load_samples(subjects, dir.path(), {});
    FAIL("missing volume accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(std::string(e.what()).find("sub0") != std::string::npos);
  }
}

TEST_CASE("batch iterator covers every sample once") {
  std::vector<Sample> samples(11);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].volume = Volume({2, 2, 2}, static_cast<float>(i));
    samples[i].label = static_cast<int>(i % 2);
  }
  BatchIterator it(samples, 4, 5);
  CHECK(it.num_batches() == 3);
  Batch b;
  std::multiset<std::size_t> seen;
  std::vector<std::size_t> sizes;
  while (it.next(b)) {
    sizes.push_back(b.labels.size());
    CHECK(b.volumes.shape() == Shape{b.labels.size(), 2, 2, 2, 1});
    for (std::size_t k = 0; k < b.indices.size(); ++k) {
      seen.insert(b.indices[k]);
      CHECK(b.volumes[k * 8] == static_cast<float>(b.indices[k]));
    }
  }
  CHECK(sizes == std::vector<std::size_t>{4, 4, 3});
  CHECK(seen.size() == 11);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 11);
  CHECK(BatchIterator(samples, 4, 5).order() == it.order());
  BatchIterator plain(samples, 4, 5, false);
  CHECK(plain.order().front() == 0);
}

TEST_CASE("synthetic cohort is deterministic and marks the lesion") {
  TempDir a("synth_a"), b("synth_b");
  SynthSpec spec;
  spec.n_per_class = 2;
  spec.seed = 4;
  synth_generate(spec, a.path());
  synth_generate(spec, b.path());
  const auto subjects = load_manifest(a / "manifest.csv");
  REQUIRE(subjects.size() == 4);
  for (const auto& s : subjects)
    CHECK(read_bytes(a / s.volume_path) == read_bytes(b / s.volume_path));
  CHECK(subjects[0].label == Label::kHC);
  CHECK(subjects[1].label == Label::kPD);

  const LesionSite site = lesion_site(spec.extents);
  CHECK(site.cx < 0.5 * (spec.extents.x - 1));  // off the midline
  Rng r1(1), r2(1);
  const Volume hc = synth_volume(spec, Label::kHC, r1);
  const Volume pd = synth_volume(spec, Label::kPD, r2);
  const auto cx = static_cast<std::size_t>(std::lround(site.cx));
  const auto cy = static_cast<std::size_t>(std::lround(site.cy));
  const auto cz = static_cast<std::size_t>(std::lround(site.cz));
  CHECK(hc.at(cx, cy, cz) - pd.at(cx, cy, cz) > 0.8f * spec.signal_strength);
  CHECK(hc.at(0, 0, 0) == pd.at(0, 0, 0));
}
