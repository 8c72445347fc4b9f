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

#include "voxdx/voxdx.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "voxdx/data.hpp"
#include "voxdx/error.hpp"
#include "voxdx/interpret.hpp"
#include "voxdx/metrics.hpp"
#include "voxdx/model.hpp"
#include "voxdx/search.hpp"
#include "voxdx/train.hpp"

struct vdx_model {
  voxdx::Model model;
};

struct vdx_history {
  voxdx::TrainHistory history;
};

struct vdx_report {
  voxdx::ClassificationReport report;
};

struct vdx_search_result {
  voxdx::SearchResult result;
};

namespace {

namespace fs = std::filesystem;
using namespace voxdx;

thread_local std::string g_last_error;

vdx_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument:
      return VDX_ERR_INVALID_ARGUMENT;
    case ErrorKind::kShape:
      return VDX_ERR_SHAPE;
    case ErrorKind::kData:
      return VDX_ERR_DATA;
    case ErrorKind::kIo:
      return VDX_ERR_IO;
    case ErrorKind::kNumerical:
      return VDX_ERR_NUMERICAL;
    case ErrorKind::kState:
      return VDX_ERR_STATE;
  }
  return VDX_ERR_INTERNAL;
}

template <typename F>
vdx_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return VDX_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VDX_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VDX_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return VDX_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorKind::kInvalidArgument, std::string(what) + " is NULL");
}

void copy_out(const std::string& s, char* buffer, std::size_t capacity,
              std::size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buffer && capacity > 0) {
    const std::size_t n = std::min(s.size(), capacity - 1);
    std::memcpy(buffer, s.data(), n);
    buffer[n] = '\0';
  }
}

void write_file(const std::string& text, const char* path) {
  need(path, "path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, std::string("cannot write ") + path);
  out << text;
  require(static_cast<bool>(out), ErrorKind::kIo, std::string("short write to ") + path);
}

ModelConfig from_c(const vdx_model_config& c) {
  ModelConfig m;
  require(c.variant == VDX_VARIANT_ORIGINAL || c.variant == VDX_VARIANT_SIMPLIFIED,
          ErrorKind::kInvalidArgument, "unknown variant");
  require(c.norm >= VDX_NORM_NONE && c.norm <= VDX_NORM_GROUP,
          ErrorKind::kInvalidArgument, "unknown norm");
  m.variant = c.variant == VDX_VARIANT_ORIGINAL ? Variant::kOriginal : Variant::kSimplified;
  m.norm = static_cast<NormKind>(c.norm);
  m.use_demographics = c.use_demographics != 0;
  m.alpha = c.alpha;
  m.rc = c.rc;
  m.kp1 = c.kp1;
  m.kp2 = c.kp2;
  m.num_classes = c.num_classes;
  m.validate();
  return m;
}

vdx_model_config to_c(const ModelConfig& m) {
  vdx_model_config c{};
  c.variant = m.variant == Variant::kOriginal ? VDX_VARIANT_ORIGINAL : VDX_VARIANT_SIMPLIFIED;
  c.norm = static_cast<int32_t>(m.norm);
  c.use_demographics = m.use_demographics ? 1 : 0;
  c.alpha = m.alpha;
  c.rc = m.rc;
  c.kp1 = m.kp1;
  c.kp2 = m.kp2;
  c.num_classes = m.num_classes;
  return c;
}

TrainConfig from_c(const vdx_train_config& c) {
  TrainConfig t;
  t.lr0 = c.lr0;
  t.decay_k = c.decay_k;
  t.decay_steps = c.decay_steps;
  t.batch_size = c.batch_size;
  t.max_epochs = c.max_epochs;
  t.seed = c.seed;
  t.beta1 = c.beta1;
  t.beta2 = c.beta2;
  t.eps_adam = c.eps_adam;
  t.patience = c.patience;
  t.validate();
  return t;
}

vdx_train_config to_c(const TrainConfig& t) {
  vdx_train_config c{};
  c.lr0 = t.lr0;
  c.decay_k = t.decay_k;
  c.decay_steps = t.decay_steps;
  c.batch_size = static_cast<uint32_t>(t.batch_size);
  c.max_epochs = t.max_epochs;
  c.seed = t.seed;
  c.beta1 = t.beta1;
  c.beta2 = t.beta2;
  c.eps_adam = t.eps_adam;
  c.patience = t.patience;
  return c;
}

// A dataset split with every part augmented and loaded.
struct Prepared {
  DatasetSplit split;  // augmented parts
  fs::path base_dir;
};

Prepared prepare(const char* manifest_path, const char* split_path) {
  need(manifest_path, "manifest_path");
  need(split_path, "split_path");
  const std::vector<Subject> subjects = load_manifest(manifest_path);
  DatasetSplit s = load_split(split_path, subjects);
  s.train = augment(s.train);
  s.dev = augment(s.dev);
  s.test = augment(s.test);
  return {std::move(s), fs::path(manifest_path).parent_path()};
}

void check_extents(const Model& model, std::span<const Sample> samples) {
  for (const Sample& s : samples) {
    require(s.volume.extents == model.input_extents(), ErrorKind::kShape,
            "model expects extents " + model.input_extents().str() + " but subject '" +
                s.id + "' has " + s.volume.extents.str());
  }
}

SearchSpace from_c(const vdx_search_space& c) {
  SearchSpace s;
  s.lr_lo = c.lr_lo;
  s.lr_hi = c.lr_hi;
  s.rc_lo = c.rc_lo;
  s.rc_hi = c.rc_hi;
  s.rc_zero_prob = c.rc_zero_prob;
  s.kp1_lo = c.kp1_lo;
  s.kp1_hi = c.kp1_hi;
  s.kp2_lo = c.kp2_lo;
  s.kp2_hi = c.kp2_hi;
  require(c.alpha_count <= VDX_MAX_ALPHAS, ErrorKind::kInvalidArgument,
          "too many alpha choices");
  s.alphas.assign(c.alphas, c.alphas + c.alpha_count);
  s.variants.clear();
  if (c.variant_mask & 1u) s.variants.push_back(Variant::kOriginal);
  if (c.variant_mask & 2u) s.variants.push_back(Variant::kSimplified);
  s.norms.clear();
  for (int i = 0; i < 3; ++i)
    if (c.norm_mask & (1u << i)) s.norms.push_back(static_cast<NormKind>(i));
  s.demographics.clear();
  if (c.demographics_mask & 1u) s.demographics.push_back(false);
  if (c.demographics_mask & 2u) s.demographics.push_back(true);
  return s;
}

}  // namespace

extern "C" {

const char* vdx_version(void) { return "0.1.0"; }

const char* vdx_status_string(vdx_status status) {
  switch (status) {
    case VDX_OK:
      return "ok";
    case VDX_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case VDX_ERR_SHAPE:
      return "shape mismatch";
    case VDX_ERR_DATA:
      return "data error";
    case VDX_ERR_IO:
      return "i/o error";
    case VDX_ERR_NUMERICAL:
      return "numerical failure";
    case VDX_ERR_STATE:
      return "invalid state";
    case VDX_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* vdx_last_error(void) { return g_last_error.c_str(); }

// ---------------------------------------------------------------------------

void vdx_synth_config_default(vdx_synth_config* config) {
  if (!config) return;
  const SynthSpec d;
  config->n_per_class = d.n_per_class;
  config->extents[0] = d.extents.x;
  config->extents[1] = d.extents.y;
  config->extents[2] = d.extents.z;
  config->signal_strength = d.signal_strength;
  config->age_effect = d.age_effect;
  config->seed = d.seed;
}

vdx_status vdx_synth_generate(const vdx_synth_config* config, const char* out_dir) {
  return guarded([&] {
    need(config, "config");
    need(out_dir, "out_dir");
    SynthSpec s;
    s.n_per_class = config->n_per_class;
    s.extents = {config->extents[0], config->extents[1], config->extents[2]};
    s.signal_strength = config->signal_strength;
    s.age_effect = config->age_effect;
    s.seed = config->seed;
    synth_generate(s, out_dir);
  });
}

void vdx_split_config_default(vdx_split_config* config) {
  if (!config) return;
  const SplitFractions f;
  config->train = f.train;
  config->dev = f.dev;
  config->test = f.test;
  config->seed = 0;
}

vdx_status vdx_split_create(const char* manifest_path, const vdx_split_config* config,
                            const char* split_path) {
  return guarded([&] {
    need(manifest_path, "manifest_path");
    need(config, "config");
    need(split_path, "split_path");
    const auto subjects = load_manifest(manifest_path);
    const DatasetSplit s = stratified_split(
        subjects, SplitFractions{config->train, config->dev, config->test}, config->seed);
    save_split(s, split_path);
  });
}

vdx_status vdx_dataset_extents(const char* manifest_path, uint32_t out[3]) {
  return guarded([&] {
    need(manifest_path, "manifest_path");
    need(out, "out");
    const auto subjects = load_manifest(manifest_path);
    require(!subjects.empty(), ErrorKind::kData, "manifest lists no subjects");
    fs::path vp = subjects.front().volume_path;
    if (vp.is_relative()) vp = fs::path(manifest_path).parent_path() / vp;
    const Extents3 e = load_volume(vp).extents;
    out[0] = e.x;
    out[1] = e.y;
    out[2] = e.z;
  });
}

// ---------------------------------------------------------------------------

void vdx_model_config_default(vdx_model_config* config) {
  if (config) *config = to_c(ModelConfig{});
}

void vdx_train_config_default(vdx_train_config* config) {
  if (config) *config = to_c(TrainConfig{});
}

vdx_status vdx_model_create(const vdx_model_config* config, const uint32_t extents[3],
                            uint64_t seed, vdx_model** out) {
  return guarded([&] {
    need(config, "config");
    need(extents, "extents");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<vdx_model>(vdx_model{
        build_model(from_c(*config), Extents3{extents[0], extents[1], extents[2]}, seed)});
    *out = m.release();
  });
}

vdx_status vdx_model_load(const char* checkpoint_dir, vdx_model** out) {
  return guarded([&] {
    need(checkpoint_dir, "checkpoint_dir");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<vdx_model>(vdx_model{load_checkpoint(checkpoint_dir)});
    *out = m.release();
  });
}

vdx_status vdx_model_save(const vdx_model* model, const char* checkpoint_dir) {
  return guarded([&] {
    need(model, "model");
    need(checkpoint_dir, "checkpoint_dir");
    save_checkpoint(model->model, checkpoint_dir);
  });
}

void vdx_model_free(vdx_model* model) { delete model; }

vdx_status vdx_model_config_get(const vdx_model* model, vdx_model_config* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = to_c(model->model.config());
  });
}

vdx_status vdx_model_extents(const vdx_model* model, uint32_t out[3]) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const Extents3 e = model->model.input_extents();
    out[0] = e.x;
    out[1] = e.y;
    out[2] = e.z;
  });
}

vdx_status vdx_model_parameter_count(const vdx_model* model, uint64_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = parameter_count(model->model);
  });
}

// ---------------------------------------------------------------------------

vdx_status vdx_train(vdx_model* model, const char* manifest_path, const char* split_path,
                     const vdx_train_config* config, const char* log_path,
                     vdx_history** history) {
  return guarded([&] {
    need(model, "model");
    need(config, "config");
    if (history) *history = nullptr;
    const TrainConfig tc = from_c(*config);
    const Prepared p = prepare(manifest_path, split_path);
    const DemographicEncoder enc = DemographicEncoder::fit(p.split.train);
    const auto train_set = load_samples(p.split.train, p.base_dir, enc);
    const auto dev_set = load_samples(p.split.dev, p.base_dir, enc);
    check_extents(model->model, train_set);
    check_extents(model->model, dev_set);

    std::ofstream log;
    if (log_path) {
      log.open(log_path, std::ios::trunc);
      require(static_cast<bool>(log), ErrorKind::kIo,
              std::string("cannot write ") + log_path);
    }
    TrainOptions opts;
    opts.on_epoch = [&](const EpochRecord& r) {
      if (log.is_open()) {
        log << epoch_log_line(r) << '\n';
        log.flush();
      }
    };
    model->model.encoder() = enc;
    auto h = std::make_unique<vdx_history>(
        vdx_history{train(model->model, train_set, dev_set, tc, opts)});
    if (history) *history = h.release();
  });
}

size_t vdx_history_size(const vdx_history* history) {
  return history ? history->history.epochs.size() : 0;
}

vdx_status vdx_history_epoch(const vdx_history* history, size_t index,
                             vdx_epoch_record* out) {
  return guarded([&] {
    need(history, "history");
    need(out, "out");
    require(index < history->history.epochs.size(), ErrorKind::kInvalidArgument,
            "epoch index out of range");
    const EpochRecord& r = history->history.epochs[index];
    *out = {r.epoch, r.train_loss, r.train_f2, r.dev_f2, r.lr, r.wall_seconds};
  });
}

int32_t vdx_history_best_epoch(const vdx_history* history) {
  return history ? history->history.best_epoch : 0;
}

void vdx_history_free(vdx_history* history) { delete history; }

// ---------------------------------------------------------------------------

vdx_status vdx_evaluate(const vdx_model* model, const char* manifest_path,
                        const char* split_path, const char* subset, int32_t truth_rows,
                        vdx_report** out) {
  return guarded([&] {
    need(model, "model");
    need(subset, "subset");
    need(out, "out");
    *out = nullptr;
    const Prepared p = prepare(manifest_path, split_path);
    const std::string which = subset;
    std::vector<Subject> chosen;
    if (which == "train" || which == "all")
      chosen.insert(chosen.end(), p.split.train.begin(), p.split.train.end());
    if (which == "dev" || which == "all")
      chosen.insert(chosen.end(), p.split.dev.begin(), p.split.dev.end());
    if (which == "test" || which == "all")
      chosen.insert(chosen.end(), p.split.test.begin(), p.split.test.end());
    require(which == "train" || which == "dev" || which == "test" || which == "all",
            ErrorKind::kInvalidArgument,
            "unknown subset '" + which + "' (expected train|dev|test|all)");
    const auto samples = load_samples(chosen, p.base_dir, model->model.encoder());
    check_extents(model->model, samples);
    auto r = std::make_unique<vdx_report>(vdx_report{evaluate(
        model->model, samples, truth_rows ? MatrixRows::kTruth : MatrixRows::kPredicted)});
    *out = r.release();
  });
}

vdx_status vdx_report_summary_get(const vdx_report* report, vdx_report_summary* out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    const ClassificationReport& r = report->report;
    *out = {};
    out->tp = r.counts.tp;
    out->tn = r.counts.tn;
    out->fp = r.counts.fp;
    out->fn = r.counts.fn;
    out->accuracy = r.accuracy;
    out->precision = r.precision;
    out->recall = r.recall;
    out->f2 = r.f2;
    out->f2_vacuous = r.f2_vacuous ? 1 : 0;
    out->has_auc = r.auc.has_value() ? 1 : 0;
    out->auc = r.auc.value_or(std::nan(""));
  });
}

vdx_status vdx_report_text(const vdx_report* report, char* buffer, size_t capacity,
                           size_t* needed) {
  return guarded([&] {
    need(report, "report");
    copy_out(report_text(report->report), buffer, capacity, needed);
  });
}

vdx_status vdx_report_json(const vdx_report* report, char* buffer, size_t capacity,
                           size_t* needed) {
  return guarded([&] {
    need(report, "report");
    copy_out(report_json(report->report), buffer, capacity, needed);
  });
}

vdx_status vdx_report_write_json(const vdx_report* report, const char* path) {
  return guarded([&] {
    need(report, "report");
    write_file(report_json(report->report) + "\n", path);
  });
}

vdx_status vdx_report_write_roc(const vdx_report* report, const char* path) {
  return guarded([&] {
    need(report, "report");
    write_file(roc_text(report->report), path);
  });
}

void vdx_report_free(vdx_report* report) { delete report; }

// ---------------------------------------------------------------------------

vdx_status vdx_heatmap(const vdx_model* model, const char* manifest_path,
                       const char* subject_id, int32_t flipped, uint32_t box,
                       uint32_t stride, const char* out_path, double* baseline) {
  return guarded([&] {
    need(model, "model");
    need(manifest_path, "manifest_path");
    need(subject_id, "subject_id");
    need(out_path, "out_path");
    const auto subjects = load_manifest(manifest_path);
    const Subject* found = nullptr;
    for (const auto& s : subjects)
      if (s.id == subject_id) found = &s;
    require(found != nullptr, ErrorKind::kData,
            std::string("subject '") + subject_id + "' is not in the manifest");
    Subject s = *found;
    s.flipped = flipped != 0;
    const auto samples = load_samples(std::span<const Subject>(&s, 1),
                                      fs::path(manifest_path).parent_path(),
                                      model->model.encoder());
    check_extents(model->model, samples);
    const Sample& sample = samples.front();
    OcclusionOptions opts;
    opts.box = box;
    opts.stride = stride;
    const Heatmap h = occlusion_heatmap(
        model->model, sample.volume,
        model->model.config().use_demographics ? &sample.demographics : nullptr, opts);
    save_volume(h.delta, out_path);
    if (baseline) *baseline = h.baseline_probability;
  });
}

vdx_status vdx_export_slice(const char* volume_path, int32_t plane, uint32_t index,
                            const char* pgm_path) {
  return guarded([&] {
    need(volume_path, "volume_path");
    need(pgm_path, "pgm_path");
    require(plane >= VDX_PLANE_SAGITTAL && plane <= VDX_PLANE_AXIAL,
            ErrorKind::kInvalidArgument, "unknown plane");
    export_slice(load_volume(volume_path), static_cast<Plane>(plane), index, pgm_path);
  });
}

// ---------------------------------------------------------------------------

void vdx_search_space_default(vdx_search_space* space) {
  if (!space) return;
  const SearchSpace d;
  *space = {};
  space->lr_lo = d.lr_lo;
  space->lr_hi = d.lr_hi;
  space->rc_lo = d.rc_lo;
  space->rc_hi = d.rc_hi;
  space->rc_zero_prob = d.rc_zero_prob;
  space->kp1_lo = d.kp1_lo;
  space->kp1_hi = d.kp1_hi;
  space->kp2_lo = d.kp2_lo;
  space->kp2_hi = d.kp2_hi;
  space->alpha_count = static_cast<uint32_t>(d.alphas.size());
  for (std::size_t i = 0; i < d.alphas.size(); ++i) space->alphas[i] = d.alphas[i];
  space->variant_mask = 3u;
  space->norm_mask = 7u;
  space->demographics_mask = 3u;
}

vdx_status vdx_search_run(const char* manifest_path, const char* split_path,
                          const vdx_search_space* space, const vdx_train_config* base,
                          const char* preset, uint32_t budget, uint64_t seed,
                          const char* log_path, int32_t resume, vdx_search_result** out) {
  return guarded([&] {
    need(base, "base");
    need(out, "out");
    *out = nullptr;
    const TrainConfig tc = from_c(*base);
    const Prepared p = prepare(manifest_path, split_path);
    const DemographicEncoder enc = DemographicEncoder::fit(p.split.train);
    const auto train_set = load_samples(p.split.train, p.base_dir, enc);
    const auto dev_set = load_samples(p.split.dev, p.base_dir, enc);
    require(!train_set.empty(), ErrorKind::kData, "train split is empty");
    const Extents3 extents = train_set.front().volume.extents;
    const Evaluator eval = training_evaluator(train_set, dev_set, extents, enc);

    SearchOptions opts;
    if (log_path) opts.log_path = fs::path(log_path);
    opts.resume = resume != 0;
    SearchResult r;
    if (preset) {
      require(std::string(preset) == "table3", ErrorKind::kInvalidArgument,
              std::string("unknown preset '") + preset + "' (expected table3)");
      const auto rows = table3_preset(tc);
      r = run_grid(rows, budget, eval, seed, opts);
    } else {
      SearchSpace s = space ? from_c(*space) : SearchSpace{};
      s.base = tc;
      r = random_search(s, budget, eval, seed, opts);
    }
    *out = std::make_unique<vdx_search_result>(vdx_search_result{std::move(r)}).release();
  });
}

size_t vdx_search_ranked_count(const vdx_search_result* result) {
  return result ? result->result.ranked.size() : 0;
}

size_t vdx_search_failure_count(const vdx_search_result* result) {
  return result ? result->result.failures.size() : 0;
}

vdx_status vdx_search_trial(const vdx_search_result* result, size_t rank,
                            vdx_trial_info* out) {
  return guarded([&] {
    need(result, "result");
    need(out, "out");
    require(rank < result->result.ranked.size(), ErrorKind::kInvalidArgument,
            "rank out of range");
    const TrialResult& t = result->result.ranked[rank];
    *out = {};
    out->index = t.index;
    out->seed = t.seed;
    std::snprintf(out->name, sizeof out->name, "%s", t.name.c_str());
    out->model = to_c(t.config.model);
    out->train = to_c(t.config.train);
    out->ok = t.ok ? 1 : 0;
    out->final_train_f2 = t.metrics.final_train_f2;
    out->best_dev_f2 = t.metrics.best_dev_f2;
    out->epochs = t.metrics.epochs;
    out->wall_seconds = t.wall_seconds;
  });
}

vdx_status vdx_search_table(const vdx_search_result* result, char* buffer,
                            size_t capacity, size_t* needed) {
  return guarded([&] {
    need(result, "result");
    copy_out(table_report(result->result), buffer, capacity, needed);
  });
}

void vdx_search_result_free(vdx_search_result* result) { delete result; }

}  // extern "C"
