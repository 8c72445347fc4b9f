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

// voxdx command-line front end. Talks to the engine only through the C API.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "voxdx/voxdx.h"

namespace {

namespace fs = std::filesystem;
using voxdx::cli::ConfigError;
using voxdx::cli::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Carries a C API failure to the top level.
struct ApiFailure {
  vdx_status status;
  std::string message;
};

void check(vdx_status s) {
  if (s != VDX_OK) throw ApiFailure{s, vdx_last_error()};
}

int exit_code(vdx_status s) {
  switch (s) {
    case VDX_OK:
      return kExitOk;
    case VDX_ERR_INVALID_ARGUMENT:
      return kExitUsage;
    case VDX_ERR_NUMERICAL:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

std::string manifest_path(const RunConfig& c) {
  const std::string m = c.str("manifest");
  return m.empty() ? (fs::path(c.str("data_dir")) / "manifest.csv").string() : m;
}

std::string split_path(const RunConfig& c) {
  const std::string s = c.str("split");
  return s.empty() ? (fs::path(c.str("data_dir")) / "split.csv").string() : s;
}

vdx_model_config model_config(const RunConfig& c) {
  vdx_model_config m;
  vdx_model_config_default(&m);
  m.variant = c.str("variant") == "original" ? VDX_VARIANT_ORIGINAL : VDX_VARIANT_SIMPLIFIED;
  const std::string norm = c.str("norm");
  m.norm = norm == "batch" ? VDX_NORM_BATCH : norm == "group" ? VDX_NORM_GROUP : VDX_NORM_NONE;
  m.use_demographics = c.flag("use_demographics") ? 1 : 0;
  m.alpha = c.f64("alpha");
  m.rc = c.f64("rc");
  m.kp1 = c.f64("kp1");
  m.kp2 = c.f64("kp2");
  m.num_classes = static_cast<int32_t>(c.i64("num_classes"));
  return m;
}

vdx_train_config train_config(const RunConfig& c) {
  vdx_train_config t;
  vdx_train_config_default(&t);
  t.lr0 = c.f64("lr0");
  t.decay_k = c.f64("decay_k");
  t.decay_steps = c.i64("decay_steps");
  t.batch_size = static_cast<uint32_t>(c.u64("batch_size"));
  t.max_epochs = static_cast<int32_t>(c.i64("max_epochs"));
  t.patience = static_cast<int32_t>(c.i64("patience"));
  t.seed = c.u64("seed");
  return t;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

template <typename Fn>
std::string read_string(Fn&& fn) {
  size_t needed = 0;
  check(fn(nullptr, 0, &needed));
  std::string s(needed, '\0');
  check(fn(s.data(), s.size(), &needed));
  s.resize(needed - 1);
  return s;
}

// ---------------------------------------------------------------------------

void cmd_synth(const RunConfig& c) {
  vdx_synth_config s;
  vdx_synth_config_default(&s);
  s.n_per_class = static_cast<uint32_t>(c.u64("n_per_class"));
  const auto e = c.extents("extents");
  for (int i = 0; i < 3; ++i) s.extents[i] = e[static_cast<std::size_t>(i)];
  s.signal_strength = c.f64("signal_strength");
  s.age_effect = c.f64("age_effect");
  s.seed = c.u64("seed");
  check(vdx_synth_generate(&s, c.str("data_dir").c_str()));
  std::cout << "wrote " << 2 * s.n_per_class << " subjects to " << manifest_path(c) << '\n';
}

void cmd_split(const RunConfig& c) {
  vdx_split_config s;
  s.train = c.f64("train_frac");
  s.dev = c.f64("dev_frac");
  s.test = c.f64("test_frac");
  s.seed = c.u64("seed");
  check(vdx_split_create(manifest_path(c).c_str(), &s, split_path(c).c_str()));
  std::cout << "wrote split " << split_path(c) << '\n';
}

void cmd_train(const RunConfig& c) {
  const std::string manifest = manifest_path(c);
  uint32_t extents[3];
  check(vdx_dataset_extents(manifest.c_str(), extents));
  const vdx_model_config mc = model_config(c);
  const vdx_train_config tc = train_config(c);
  vdx_model* model = nullptr;
  check(vdx_model_create(&mc, extents, c.u64("seed"), &model));
  std::unique_ptr<vdx_model, decltype(&vdx_model_free)> guard(model, vdx_model_free);

  const std::string log = c.str("log");
  vdx_history* history = nullptr;
  check(vdx_train(model, manifest.c_str(), split_path(c).c_str(), &tc,
                  log.empty() ? nullptr : log.c_str(), &history));
  std::unique_ptr<vdx_history, decltype(&vdx_history_free)> hguard(history,
                                                                   vdx_history_free);
  for (size_t i = 0; i < vdx_history_size(history); ++i) {
    vdx_epoch_record r;
    check(vdx_history_epoch(history, i, &r));
    std::cout << "epoch " << r.epoch << "  loss " << fmt(r.train_loss) << "  train_f2 "
              << fmt(r.train_f2) << "  dev_f2 " << fmt(r.dev_f2) << "  lr " << r.lr << '\n';
  }
  check(vdx_model_save(model, c.str("checkpoint").c_str()));
  std::cout << "best epoch " << vdx_history_best_epoch(history) << "; checkpoint "
            << c.str("checkpoint") << '\n';
}

void cmd_eval(const RunConfig& c) {
  vdx_model* model = nullptr;
  check(vdx_model_load(c.str("checkpoint").c_str(), &model));
  std::unique_ptr<vdx_model, decltype(&vdx_model_free)> guard(model, vdx_model_free);
  vdx_report* report = nullptr;
  check(vdx_evaluate(model, manifest_path(c).c_str(), split_path(c).c_str(),
                     c.str("subset").c_str(), c.str("matrix_rows") == "truth", &report));
  std::unique_ptr<vdx_report, decltype(&vdx_report_free)> rguard(report, vdx_report_free);
  std::cout << read_string([&](char* b, size_t n, size_t* need) {
    return vdx_report_text(report, b, n, need);
  });
  if (!c.str("report").empty()) check(vdx_report_write_json(report, c.str("report").c_str()));
  if (!c.str("roc").empty()) check(vdx_report_write_roc(report, c.str("roc").c_str()));
}

void cmd_heatmap(const RunConfig& c) {
  if (c.str("subject").empty()) throw ConfigError("heatmap needs --subject");
  // Validate the slice list before the expensive part.
  std::vector<std::pair<int32_t, uint32_t>> slices;
  std::vector<std::string> names;
  {
    std::stringstream ss(c.str("slices"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw ConfigError("slice '" + item + "' must be plane:index");
      const std::string plane = item.substr(0, colon);
      int32_t p = plane == "sagittal" ? VDX_PLANE_SAGITTAL
                  : plane == "coronal" ? VDX_PLANE_CORONAL
                  : plane == "axial"   ? VDX_PLANE_AXIAL
                                       : -1;
      if (p < 0) throw ConfigError("unknown plane '" + plane + "'");
      try {
        slices.emplace_back(p, static_cast<uint32_t>(std::stoul(item.substr(colon + 1))));
      } catch (const std::exception&) {
        throw ConfigError("bad slice index in '" + item + "'");
      }
      names.push_back(plane + item.substr(colon + 1));
    }
  }
  vdx_model* model = nullptr;
  check(vdx_model_load(c.str("checkpoint").c_str(), &model));
  std::unique_ptr<vdx_model, decltype(&vdx_model_free)> guard(model, vdx_model_free);
  const std::string out = c.str("out");
  double baseline = 0;
  check(vdx_heatmap(model, manifest_path(c).c_str(), c.str("subject").c_str(),
                    c.flag("flipped"), static_cast<uint32_t>(c.u64("box")),
                    static_cast<uint32_t>(c.u64("stride")), out.c_str(), &baseline));
  std::cout << "baseline P(PD) " << fmt(baseline) << "; heatmap " << out << '\n';
  const fs::path stem = fs::path(out).replace_extension();
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const std::string pgm = stem.string() + "_" + names[i] + ".pgm";
    check(vdx_export_slice(out.c_str(), slices[i].first, slices[i].second, pgm.c_str()));
    std::cout << "slice " << pgm << '\n';
  }
}

void cmd_search(const RunConfig& c) {
  vdx_search_space space;
  vdx_search_space_default(&space);
  space.lr_lo = c.f64("lr_lo");
  space.lr_hi = c.f64("lr_hi");
  space.rc_lo = c.f64("rc_lo");
  space.rc_hi = c.f64("rc_hi");
  space.rc_zero_prob = c.f64("rc_zero_prob");
  space.kp1_lo = space.kp2_lo = c.f64("kp_lo");
  space.kp1_hi = space.kp2_hi = c.f64("kp_hi");
  const vdx_train_config base = train_config(c);
  const std::string preset = c.str("preset");
  const std::string results = c.str("results");
  vdx_search_result* result = nullptr;
  check(vdx_search_run(manifest_path(c).c_str(), split_path(c).c_str(), &space, &base,
                       preset == "none" ? nullptr : preset.c_str(),
                       static_cast<uint32_t>(c.u64("budget")), c.u64("seed"),
                       results.empty() ? nullptr : results.c_str(), c.flag("resume"),
                       &result));
  std::unique_ptr<vdx_search_result, decltype(&vdx_search_result_free)> guard(
      result, vdx_search_result_free);
  const std::string table = read_string([&](char* b, size_t n, size_t* need) {
    return vdx_search_table(result, b, n, need);
  });
  std::cout << table;
  if (vdx_search_ranked_count(result) > 0) {
    vdx_trial_info best;
    check(vdx_search_trial(result, 0, &best));
    std::cout << "best: " << best.name << " (dev F2 " << fmt(best.best_dev_f2) << ")\n";
  }
  if (!c.str("table").empty()) {
    std::ofstream f(c.str("table"));
    if (!f) throw ApiFailure{VDX_ERR_IO, "cannot write " + c.str("table")};
    f << table;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxdx: volumetric CNN diagnosis pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vdx_version());

  using Command = void (*)(const RunConfig&);
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"synth", {"generate a synthetic dataset", cmd_synth}},
      {"split", {"write a stratified train/dev/test split", cmd_split}},
      {"train", {"train a model and save its checkpoint", cmd_train}},
      {"eval", {"evaluate a checkpoint", cmd_eval}},
      {"heatmap", {"occlusion heatmap for one subject", cmd_heatmap}},
      {"search", {"random search or the fixed experiment grid", cmd_search}},
  };

  std::map<std::string, std::string> config_file;
  std::map<std::string, bool> show_config;
  std::map<std::string, std::map<std::string, std::string>> flag_values;
  std::map<std::string, std::map<std::string, CLI::Option*>> flag_options;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, info] : commands) {
    CLI::App* sub = app.add_subcommand(name, info.first);
    subs[name] = sub;
    sub->add_option("--config", config_file[name], "flat key = value config file");
    sub->add_flag("--show-config", show_config[name],
                  "print the resolved configuration and exit");
    for (const auto& key : voxdx::cli::schema()) {
      if (std::find(key.commands.begin(), key.commands.end(), name) == key.commands.end())
        continue;
      std::string dashed = key.name;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      flag_options[name][key.name] =
          sub->add_option("--" + dashed, flag_values[name][key.name],
                          key.help + " [" + key.default_value + "]");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  for (const auto& [name, info] : commands) {
    if (!subs[name]->parsed()) continue;
    try {
      RunConfig config;
      if (!config_file[name].empty()) config.merge_file(config_file[name]);
      for (const auto& [key, opt] : flag_options[name])
        if (opt->count() > 0)
          config.set(key, flag_values[name][key], voxdx::cli::Source::kFlag);
      if (show_config[name]) {
        static const char* kSource[] = {"default", "file", "flag"};
        for (const auto& key : voxdx::cli::schema())
          std::cout << key.name << " = " << config.get(key.name) << "  # "
                    << kSource[static_cast<int>(config.source(key.name))] << '\n';
        return kExitOk;
      }
      info.second(config);
      return kExitOk;
    } catch (const ConfigError& e) {
      std::cerr << "voxdx " << name << ": " << e.what() << '\n';
      return kExitUsage;
    } catch (const ApiFailure& f) {
      std::cerr << "voxdx " << name << ": " << vdx_status_string(f.status) << ": "
                << f.message << '\n';
      return exit_code(f.status);
    }
  }
  return kExitUsage;
}
