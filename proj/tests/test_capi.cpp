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
#include <string>

#include "doctest.h"
#include "temp_dir.hpp"
#include "voxdx/voxdx.h"

namespace {

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

// One small synthetic dataset shared by the cases below.
struct Dataset {
  voxdx::testing::TempDir dir{"capi"};
  std::string manifest, split;
  Dataset() {
    vdx_synth_config sc;
    vdx_synth_config_default(&sc);
    sc.n_per_class = 6;
    sc.extents[0] = 8;
    sc.extents[1] = 10;
    sc.extents[2] = 10;
    sc.seed = 3;
    REQUIRE(vdx_synth_generate(&sc, dir.path().c_str()) == VDX_OK);
    manifest = (dir / "manifest.csv").string();
    split = (dir / "split.csv").string();
    vdx_split_config spc;
    vdx_split_config_default(&spc);
    REQUIRE(vdx_split_create(manifest.c_str(), &spc, split.c_str()) == VDX_OK);
  }
};

Dataset& dataset() {
  static Dataset d;
  return d;
}

vdx_model* make_model(int demo) {
  vdx_model_config mc;
  vdx_model_config_default(&mc);
  mc.use_demographics = demo;
  mc.alpha = 0.01;
  const uint32_t ext[3] = {8, 10, 10};
  vdx_model* m = nullptr;
  REQUIRE(vdx_model_create(&mc, ext, 1, &m) == VDX_OK);
  return m;
}

vdx_train_config quick_train(int epochs) {
  vdx_train_config tc;
  vdx_train_config_default(&tc);
  tc.max_epochs = epochs;
  tc.batch_size = 4;
  tc.seed = 2;
  return tc;
}

}  // namespace

TEST_CASE("status strings and last error") {
  CHECK(std::string(vdx_version()) == "0.1.0");
  CHECK(std::string(vdx_status_string(VDX_OK)) == "ok");
  CHECK(std::string(vdx_status_string(VDX_ERR_SHAPE)).size() > 0);
  vdx_model* m = nullptr;
  CHECK(vdx_model_load("/nonexistent/ckpt", &m) != VDX_OK);
  CHECK(m == nullptr);
  CHECK(std::strlen(vdx_last_error()) > 0);
  uint32_t ext[3];
  CHECK(vdx_dataset_extents(dataset().manifest.c_str(), ext) == VDX_OK);
  CHECK(std::strlen(vdx_last_error()) == 0);
}

TEST_CASE("null arguments are rejected") {
  CHECK(vdx_synth_generate(nullptr, "x") == VDX_ERR_INVALID_ARGUMENT);
  CHECK(vdx_model_create(nullptr, nullptr, 0, nullptr) == VDX_ERR_INVALID_ARGUMENT);
  CHECK(vdx_model_save(nullptr, "x") == VDX_ERR_INVALID_ARGUMENT);
  CHECK(vdx_history_size(nullptr) == 0);
  vdx_model_free(nullptr);
  vdx_history_free(nullptr);
  vdx_report_free(nullptr);
  vdx_search_result_free(nullptr);
}

TEST_CASE("bad enum values are rejected") {
  vdx_model_config mc;
  vdx_model_config_default(&mc);
  mc.norm = 7;
  const uint32_t ext[3] = {8, 10, 10};
  vdx_model* m = nullptr;
  CHECK(vdx_model_create(&mc, ext, 1, &m) == VDX_ERR_INVALID_ARGUMENT);
  vdx_model_config_default(&mc);
  const uint32_t tiny[3] = {8, 2, 10};
  CHECK(vdx_model_create(&mc, tiny, 1, &m) == VDX_ERR_SHAPE);
  CHECK(std::string(vdx_last_error()).find("pool2") != std::string::npos);
}

TEST_CASE("dataset extents") {
  uint32_t ext[3] = {0, 0, 0};
  REQUIRE(vdx_dataset_extents(dataset().manifest.c_str(), ext) == VDX_OK);
  CHECK(ext[0] == 8);
  CHECK(ext[1] == 10);
  CHECK(ext[2] == 10);
}

TEST_CASE("model metadata and checkpoint round trip") {
  vdx_model* m = make_model(1);
  uint64_t n = 0;
  REQUIRE(vdx_model_parameter_count(m, &n) == VDX_OK);
  CHECK(n == 896 + 55360 + 221312 + 262656 + 65664 + 262);
  const auto ckpt = (dataset().dir / "ckpt_meta").string();
  REQUIRE(vdx_model_save(m, ckpt.c_str()) == VDX_OK);
  vdx_model* back = nullptr;
  REQUIRE(vdx_model_load(ckpt.c_str(), &back) == VDX_OK);
  vdx_model_config c;
  REQUIRE(vdx_model_config_get(back, &c) == VDX_OK);
  CHECK(c.use_demographics == 1);
  CHECK(c.alpha == 0.01);
  uint32_t ext[3];
  REQUIRE(vdx_model_extents(back, ext) == VDX_OK);
  CHECK(ext[1] == 10);
  vdx_model_free(back);
  vdx_model_free(m);
}

TEST_CASE("train, evaluate and explain") {
  Dataset& d = dataset();
  vdx_model* m = make_model(1);
  const vdx_train_config tc = quick_train(3);
  const auto log = d.dir / "train.jsonl";
  vdx_history* h = nullptr;
  REQUIRE(vdx_train(m, d.manifest.c_str(), d.split.c_str(), &tc, log.c_str(), &h) == VDX_OK);
  CHECK(vdx_history_size(h) == 3);
  CHECK(count_lines(log) == 3);
  vdx_epoch_record rec;
  REQUIRE(vdx_history_epoch(h, 2, &rec) == VDX_OK);
  CHECK(rec.epoch == 3);
  CHECK(std::isfinite(rec.train_loss));
  CHECK(vdx_history_epoch(h, 3, &rec) == VDX_ERR_INVALID_ARGUMENT);
  CHECK(vdx_history_best_epoch(h) >= 1);
  vdx_history_free(h);

  vdx_report* r = nullptr;
  REQUIRE(vdx_evaluate(m, d.manifest.c_str(), d.split.c_str(), "all", 0, &r) == VDX_OK);
  vdx_report_summary s;
  REQUIRE(vdx_report_summary_get(r, &s) == VDX_OK);
  CHECK(s.tp + s.tn + s.fp + s.fn == 24);  // 12 subjects, each flipped
  CHECK(s.has_auc == 1);
  size_t needed = 0;
  char small[8];
  REQUIRE(vdx_report_text(r, small, sizeof small, &needed) == VDX_OK);
  CHECK(needed > sizeof small);
  CHECK(std::strlen(small) == 7);
  REQUIRE(vdx_report_json(r, nullptr, 0, &needed) == VDX_OK);
  std::string full(needed, '\0');
  REQUIRE(vdx_report_json(r, full.data(), full.size(), nullptr) == VDX_OK);
  CHECK(full.find("voxdx.report.v1") != std::string::npos);
  REQUIRE(vdx_report_write_roc(r, (d.dir / "roc.txt").c_str()) == VDX_OK);
  CHECK(count_lines(d.dir / "roc.txt") >= 2);
  vdx_report_free(r);
  CHECK(vdx_evaluate(m, d.manifest.c_str(), d.split.c_str(), "holdout", 0, &r) ==
        VDX_ERR_INVALID_ARGUMENT);

  double baseline = -1;
  const auto hm = d.dir / "hm.mvol";
  REQUIRE(vdx_heatmap(m, d.manifest.c_str(), "s0002", 1, 4, 4, hm.c_str(), &baseline) == VDX_OK);
  CHECK((baseline >= 0 && baseline <= 1));
  CHECK(std::filesystem::file_size(hm) == 16 + 4 * 800);
  CHECK(vdx_heatmap(m, d.manifest.c_str(), "nobody", 0, 4, 4, hm.c_str(), nullptr) ==
        VDX_ERR_DATA);
  REQUIRE(vdx_export_slice(hm.c_str(), VDX_PLANE_AXIAL, 5, (d.dir / "s.pgm").c_str()) == VDX_OK);
  CHECK(vdx_export_slice(hm.c_str(), VDX_PLANE_AXIAL, 10, (d.dir / "s.pgm").c_str()) ==
        VDX_ERR_INVALID_ARGUMENT);
  vdx_model_free(m);
}

TEST_CASE("extent mismatch between model and data") {
  vdx_model_config mc;
  vdx_model_config_default(&mc);
  const uint32_t ext[3] = {8, 10, 12};
  vdx_model* m = nullptr;
  REQUIRE(vdx_model_create(&mc, ext, 1, &m) == VDX_OK);
  const vdx_train_config tc = quick_train(1);
  CHECK(vdx_train(m, dataset().manifest.c_str(), dataset().split.c_str(), &tc, nullptr,
                  nullptr) == VDX_ERR_SHAPE);
  CHECK(std::string(vdx_last_error()).find("extents") != std::string::npos);
  vdx_model_free(m);
}

TEST_CASE("grid search through the C API") {
  Dataset& d = dataset();
  vdx_train_config base = quick_train(1);
  vdx_search_result* r = nullptr;
  const auto log = d.dir / "search.jsonl";
  REQUIRE(vdx_search_run(d.manifest.c_str(), d.split.c_str(), nullptr, &base, "table3", 2, 5,
                         log.c_str(), 0, &r) == VDX_OK);
  CHECK(vdx_search_ranked_count(r) + vdx_search_failure_count(r) == 2);
  CHECK(count_lines(log) == 2);
  vdx_trial_info info;
  REQUIRE(vdx_search_trial(r, 0, &info) == VDX_OK);
  CHECK((std::string(info.name) == "OM" || std::string(info.name) == "SM"));
  CHECK(info.train.max_epochs == 1);
  size_t needed = 0;
  REQUIRE(vdx_search_table(r, nullptr, 0, &needed) == VDX_OK);
  std::string table(needed, '\0');
  REQUIRE(vdx_search_table(r, table.data(), table.size(), nullptr) == VDX_OK);
  CHECK(table.find("Dev F2") != std::string::npos);
  vdx_search_result_free(r);
  CHECK(vdx_search_run(d.manifest.c_str(), d.split.c_str(), nullptr, &base, "table9", 2, 5,
                       nullptr, 0, &r) == VDX_ERR_INVALID_ARGUMENT);
}
