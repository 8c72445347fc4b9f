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

#include "run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace voxdx::cli {

namespace {

using K = KeyType;

const std::vector<std::string> kSynth{"synth"};
const std::vector<std::string> kSplit{"split"};
const std::vector<std::string> kModel{"train", "search"};
const std::vector<std::string> kTrain{"train", "search"};
const std::vector<std::string> kData{"split", "train", "eval", "heatmap", "search"};
const std::vector<std::string> kCheckpoint{"train", "eval", "heatmap"};
const std::vector<std::string> kSearch{"search"};
const std::vector<std::string> kAll{"synth", "split", "train", "eval", "heatmap", "search"};

std::vector<KeySpec> build_schema() {
  return {
      {"seed", K::kUint, "0", "master seed for every random draw", kAll, {}},
      {"data_dir", K::kString, "data", "dataset directory", kAll, {}},
      {"manifest", K::kString, "", "manifest CSV (default <data_dir>/manifest.csv)", kData, {}},
      {"split", K::kString, "", "split record (default <data_dir>/split.csv)", kData, {}},
      // synth
      {"n_per_class", K::kUint, "12", "subjects per class", kSynth, {}},
      {"extents", K::kExtents, "16,20,20", "volume extents X,Y,Z", kSynth, {}},
      {"signal_strength", K::kDouble, "1.0", "depth of the simulated PD deficit", kSynth, {}},
      {"age_effect", K::kDouble, "2.0", "years added to the PD mean age", kSynth, {}},
      // split
      {"train_frac", K::kDouble, "0.85", "train share", kSplit, {}},
      {"dev_frac", K::kDouble, "0.10", "dev share", kSplit, {}},
      {"test_frac", K::kDouble, "0.05", "test share", kSplit, {}},
      // model
      {"variant", K::kChoice, "simplified", "architecture", kModel, {"original", "simplified"}},
      {"norm", K::kChoice, "none", "normalization after each conv", kModel,
       {"none", "batch", "group"}},
      {"use_demographics", K::kBool, "false", "append age and sex before the output layer",
       kModel, {}},
      {"alpha", K::kDouble, "0", "Leaky-ReLU slope", kModel, {}},
      {"rc", K::kDouble, "0", "L2 coefficient on conv kernels and biases", kModel, {}},
      {"kp1", K::kDouble, "1", "keep probability after FC512", kModel, {}},
      {"kp2", K::kDouble, "1", "keep probability after FC128", kModel, {}},
      {"num_classes", K::kInt, "2", "output classes", kModel, {}},
      // training
      {"lr0", K::kDouble, "0.0001", "initial learning rate", kTrain, {}},
      {"decay_k", K::kDouble, "0", "exponential decay rate", kTrain, {}},
      {"decay_steps", K::kInt, "1", "steps per decay stage", kTrain, {}},
      {"batch_size", K::kUint, "8", "mini-batch size", kTrain, {}},
      {"max_epochs", K::kInt, "50", "epoch budget", kTrain, {}},
      {"patience", K::kInt, "5", "stop after this many perfect-train-F2 epochs (0: never)",
       kTrain, {}},
      {"checkpoint", K::kString, "checkpoint", "checkpoint directory", kCheckpoint, {}},
      {"log", K::kString, "", "per-epoch JSON-lines training log", {"train"}, {}},
      // eval
      {"subset", K::kChoice, "test", "split part to evaluate", {"eval"},
       {"train", "dev", "test", "all"}},
      {"matrix_rows", K::kChoice, "predicted", "class indexing confusion-matrix rows",
       {"eval"}, {"predicted", "truth"}},
      {"report", K::kString, "", "write the report as JSON", {"eval"}, {}},
      {"roc", K::kString, "", "write ROC points (fpr tpr)", {"eval"}, {}},
      // heatmap
      {"subject", K::kString, "", "manifest id to explain", {"heatmap"}, {}},
      {"flipped", K::kBool, "false", "use the mirrored copy", {"heatmap"}, {}},
      {"box", K::kUint, "2", "occlusion box edge", {"heatmap"}, {}},
      {"stride", K::kUint, "1", "occlusion box step", {"heatmap"}, {}},
      {"out", K::kString, "heatmap.mvol", "heatmap MVOL path", {"heatmap"}, {}},
      {"slices", K::kString, "", "PGM slices as plane:index list, e.g. axial:10,sagittal:4",
       {"heatmap"}, {}},
      // search
      {"preset", K::kChoice, "none", "fixed grid instead of random sampling", kSearch,
       {"none", "table3"}},
      {"budget", K::kUint, "12", "number of trials", kSearch, {}},
      {"results", K::kString, "search.jsonl", "per-trial JSON-lines log", kSearch, {}},
      {"resume", K::kBool, "false", "reuse completed trials from the results log", kSearch,
       {}},
      {"table", K::kString, "", "write the trial table here as well as to stdout", kSearch,
       {}},
      {"lr_lo", K::kDouble, "1e-6", "learning-rate range low (log-uniform)", kSearch, {}},
      {"lr_hi", K::kDouble, "1e-3", "learning-rate range high", kSearch, {}},
      {"rc_lo", K::kDouble, "1e-4", "rc range low (log-uniform)", kSearch, {}},
      {"rc_hi", K::kDouble, "1e-1", "rc range high", kSearch, {}},
      {"rc_zero_prob", K::kDouble, "0.25", "probability of drawing rc = 0", kSearch, {}},
      {"kp_lo", K::kDouble, "0.2", "keep-probability range low", kSearch, {}},
      {"kp_hi", K::kDouble, "1.0", "keep-probability range high", kSearch, {}},
  };
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename I>
bool parse_int(const std::string& s, I& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

bool parse_extents(const std::string& s, std::array<std::uint32_t, 3>& out) {
  std::stringstream ss(s);
  std::string part;
  int n = 0;
  while (std::getline(ss, part, ',')) {
    if (n == 3 || !parse_int(trim(part), out[static_cast<std::size_t>(n)]) ||
        out[static_cast<std::size_t>(n)] == 0)
      return false;
    ++n;
  }
  return n == 3;
}

}  // namespace

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = build_schema();
  return s;
}

std::string normalize_key(std::string_view key) {
  std::string k(key);
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

const KeySpec* find_key(std::string_view name) {
  const std::string k = normalize_key(name);
  for (const auto& s : schema())
    if (s.name == k) return &s;
  return nullptr;
}

void validate_value(const KeySpec& spec, const std::string& value) {
  bool ok = true;
  switch (spec.type) {
    case K::kString:
      break;
    case K::kInt: {
      std::int64_t v;
      ok = parse_int(value, v);
      break;
    }
    case K::kUint: {
      std::uint64_t v;
      ok = parse_int(value, v);
      break;
    }
    case K::kDouble: {
      double v;
      ok = parse_double(value, v);
      break;
    }
    case K::kBool: {
      bool v;
      ok = parse_bool(value, v);
      break;
    }
    case K::kExtents: {
      std::array<std::uint32_t, 3> v;
      ok = parse_extents(value, v);
      break;
    }
    case K::kChoice:
      ok = std::find(spec.choices.begin(), spec.choices.end(), value) != spec.choices.end();
      break;
  }
  if (!ok) {
    std::string msg = "invalid value '" + value + "' for " + spec.name;
    if (spec.type == K::kChoice) {
      msg += " (expected ";
      for (std::size_t i = 0; i < spec.choices.size(); ++i)
        msg += (i ? "|" : "") + spec.choices[i];
      msg += ")";
    }
    throw ConfigError(msg);
  }
}

RunConfig::RunConfig() {
  for (const auto& s : schema()) values_[s.name] = {s.default_value, Source::kDefault};
}

void RunConfig::set(std::string_view key, const std::string& value, Source source) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown key '" + std::string(key) + "'");
  validate_value(*spec, value);
  Entry& e = values_[spec->name];
  if (source < e.source) return;
  e = {value, source};
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set(key, value, Source::kFile);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

const RunConfig::Entry& RunConfig::entry(std::string_view key) const {
  auto it = values_.find(normalize_key(key));
  if (it == values_.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  return it->second;
}

const std::string& RunConfig::get(std::string_view key) const { return entry(key).value; }

Source RunConfig::source(std::string_view key) const { return entry(key).source; }

std::int64_t RunConfig::i64(std::string_view key) const {
  std::int64_t v = 0;
  parse_int(get(key), v);
  return v;
}

std::uint64_t RunConfig::u64(std::string_view key) const {
  std::uint64_t v = 0;
  parse_int(get(key), v);
  return v;
}

double RunConfig::f64(std::string_view key) const {
  double v = 0;
  parse_double(get(key), v);
  return v;
}

bool RunConfig::flag(std::string_view key) const {
  bool v = false;
  parse_bool(get(key), v);
  return v;
}

std::array<std::uint32_t, 3> RunConfig::extents(std::string_view key) const {
  std::array<std::uint32_t, 3> v{};
  parse_extents(get(key), v);
  return v;
}

}  // namespace voxdx::cli
