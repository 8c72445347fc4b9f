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

#include <fstream>
#include <set>

#include "doctest.h"
#include "run_config.hpp"
#include "temp_dir.hpp"

using namespace voxdx::cli;

TEST_CASE("defaults come from the schema") {
  const RunConfig c;
  CHECK(c.get("variant") == "simplified");
  CHECK(c.source("variant") == Source::kDefault);
  CHECK(c.f64("lr0") == 0.0001);
  CHECK(c.i64("max_epochs") == 50);
  CHECK(c.extents("extents") == std::array<std::uint32_t, 3>{16, 20, 20});
  CHECK_FALSE(c.flag("use_demographics"));
}

TEST_CASE("schema keys are unique and their defaults validate") {
  std::set<std::string> names;
  for (const auto& k : schema()) {
    CHECK(names.insert(k.name).second);
    CHECK_FALSE(k.commands.empty());
    CHECK_NOTHROW(validate_value(k, k.default_value));
  }
}

TEST_CASE("flag beats file beats default regardless of order") {
  RunConfig c;
  c.merge_text("lr0 = 0.01\nbatch_size = 4\n", "run.cfg");
  c.set("lr0", "0.5", Source::kFlag);
  CHECK(c.f64("lr0") == 0.5);
  CHECK(c.source("lr0") == Source::kFlag);
  CHECK(c.u64("batch_size") == 4);
  CHECK(c.source("batch_size") == Source::kFile);
  CHECK(c.i64("max_epochs") == 50);
  CHECK(c.source("max_epochs") == Source::kDefault);

  RunConfig d;
  d.set("lr0", "0.5", Source::kFlag);
  d.merge_text("lr0 = 0.01\n", "run.cfg");
  CHECK(d.f64("lr0") == 0.5);
}

TEST_CASE("config text syntax") {
  RunConfig c;
  c.merge_text("# comment\n\n  norm=group   # trailing\nuse-demographics = yes\n", "x");
  CHECK(c.get("norm") == "group");
  CHECK(c.flag("use_demographics"));
  CHECK(normalize_key("max-epochs") == "max_epochs");
}

TEST_CASE("config errors name origin and line") {
  const std::pair<const char*, const char*> cases[] = {
      {"lr0 = 1\nbogus = 3\n", "f.cfg:2: unknown key"},
      {"norm = layer\n", "f.cfg:1: invalid value 'layer' for norm (expected none|batch|group)"},
      {"\n\nextents = 4,4\n", "f.cfg:3:"},
      {"max_epochs\n", "f.cfg:1: expected key = value"},
      {"batch_size = -1\n", "f.cfg:1:"},
      {"use_demographics = maybe\n", "f.cfg:1:"},
  };
  for (const auto& [text, want] : cases) {
    RunConfig c;
    try {
      c.merge_text(text, "f.cfg");
      FAIL("accepted " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).rfind(want, 0) == 0);
    }
  }
}

TEST_CASE("config file loading") {
  voxdx::testing::TempDir dir("cfg");
  std::ofstream(dir / "a.cfg") << "seed = 42\n";
  RunConfig c;
  c.merge_file(dir / "a.cfg");
  CHECK(c.u64("seed") == 42);
  CHECK_THROWS_AS(c.merge_file(dir / "missing.cfg"), ConfigError);
}
