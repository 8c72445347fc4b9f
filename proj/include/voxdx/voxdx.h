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

#ifndef VOXDX_VOXDX_H_
#define VOXDX_VOXDX_H_

/*
 * C interface to the voxdx volumetric classification engine.
 *
 * Every function returns a vdx_status. On failure a description of the most
 * recent error on the calling thread is available from vdx_last_error().
 * Handles are opaque and must be released with the matching *_free call;
 * passing NULL to a *_free function is a no-op.
 *
 * Datasets are addressed by a manifest CSV (id,path,age,sex,label) and a
 * split record produced by vdx_split_create. Relative volume paths resolve
 * against the manifest's directory. Each split part is augmented with
 * sagittally flipped copies before use.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(VOXDX_BUILDING_LIBRARY)
#define VDX_API __attribute__((visibility("default")))
#else
#define VDX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vdx_status {
  VDX_OK = 0,
  VDX_ERR_INVALID_ARGUMENT = 1,
  VDX_ERR_SHAPE = 2,
  VDX_ERR_DATA = 3,
  VDX_ERR_IO = 4,
  VDX_ERR_NUMERICAL = 5,
  VDX_ERR_STATE = 6,
  VDX_ERR_INTERNAL = 7
} vdx_status;

VDX_API const char* vdx_version(void);
VDX_API const char* vdx_status_string(vdx_status status);
/* Message of the last failed call on this thread; "" if none. */
VDX_API const char* vdx_last_error(void);

/* ------------------------------------------------------------------------ */
/* Synthetic data and splits */

typedef struct vdx_synth_config {
  uint32_t n_per_class;
  uint32_t extents[3];
  double signal_strength;
  double age_effect;
  uint64_t seed;
} vdx_synth_config;

VDX_API void vdx_synth_config_default(vdx_synth_config* config);

/* Writes out_dir/manifest.csv and out_dir/volumes/<id>.mvol. */
VDX_API vdx_status vdx_synth_generate(const vdx_synth_config* config,
                                      const char* out_dir);

typedef struct vdx_split_config {
  double train;
  double dev;
  double test;
  uint64_t seed;
} vdx_split_config;

VDX_API void vdx_split_config_default(vdx_split_config* config);
VDX_API vdx_status vdx_split_create(const char* manifest_path,
                                    const vdx_split_config* config,
                                    const char* split_path);

/* Extents of the first volume listed in the manifest. */
VDX_API vdx_status vdx_dataset_extents(const char* manifest_path,
                                       uint32_t out[3]);

/* ------------------------------------------------------------------------ */
/* Models */

typedef enum vdx_variant {
  VDX_VARIANT_ORIGINAL = 0,
  VDX_VARIANT_SIMPLIFIED = 1
} vdx_variant;

typedef enum vdx_norm {
  VDX_NORM_NONE = 0,
  VDX_NORM_BATCH = 1,
  VDX_NORM_GROUP = 2
} vdx_norm;

typedef struct vdx_model_config {
  int32_t variant; /* vdx_variant */
  int32_t norm;    /* vdx_norm */
  int32_t use_demographics;
  double alpha;
  double rc;
  double kp1;
  double kp2;
  int32_t num_classes;
} vdx_model_config;

typedef struct vdx_train_config {
  double lr0;
  double decay_k;
  int64_t decay_steps;
  uint32_t batch_size;
  int32_t max_epochs;
  uint64_t seed;
  double beta1;
  double beta2;
  double eps_adam;
  int32_t patience;
} vdx_train_config;

VDX_API void vdx_model_config_default(vdx_model_config* config);
VDX_API void vdx_train_config_default(vdx_train_config* config);

typedef struct vdx_model vdx_model;

VDX_API vdx_status vdx_model_create(const vdx_model_config* config,
                                    const uint32_t extents[3], uint64_t seed,
                                    vdx_model** out);
VDX_API vdx_status vdx_model_load(const char* checkpoint_dir, vdx_model** out);
VDX_API vdx_status vdx_model_save(const vdx_model* model,
                                  const char* checkpoint_dir);
VDX_API void vdx_model_free(vdx_model* model);

VDX_API vdx_status vdx_model_config_get(const vdx_model* model,
                                        vdx_model_config* out);
VDX_API vdx_status vdx_model_extents(const vdx_model* model,
                                     uint32_t out[3]);
VDX_API vdx_status vdx_model_parameter_count(const vdx_model* model,
                                             uint64_t* out);

/* ------------------------------------------------------------------------ */
/* Training */

typedef struct vdx_epoch_record {
  int32_t epoch;
  double train_loss;
  double train_f2;
  double dev_f2; /* NaN when the dev split is empty */
  double lr;
  double wall_seconds;
} vdx_epoch_record;

typedef struct vdx_history vdx_history;

/* Fits the demographic encoder on the train split, trains, and leaves the
 * model at its best epoch. `log_path` (nullable) receives one JSON line per
 * epoch. `history` (nullable) receives the per-epoch records. */
VDX_API vdx_status vdx_train(vdx_model* model, const char* manifest_path,
                             const char* split_path,
                             const vdx_train_config* config,
                             const char* log_path, vdx_history** history);

VDX_API size_t vdx_history_size(const vdx_history* history);
VDX_API vdx_status vdx_history_epoch(const vdx_history* history, size_t index,
                                     vdx_epoch_record* out);
VDX_API int32_t vdx_history_best_epoch(const vdx_history* history);
VDX_API void vdx_history_free(vdx_history* history);

/* ------------------------------------------------------------------------ */
/* Evaluation */

typedef struct vdx_report vdx_report;

typedef struct vdx_report_summary {
  uint64_t tp;
  uint64_t tn;
  uint64_t fp;
  uint64_t fn;
  double accuracy;
  double precision;
  double recall;
  double f2;
  int32_t f2_vacuous;
  int32_t has_auc;
  double auc;
} vdx_report_summary;

/* `subset` is "train", "dev", "test" or "all". With `truth_rows` set, the
 * normalized confusion matrix is indexed by true class instead of
 * predicted class. */
VDX_API vdx_status vdx_evaluate(const vdx_model* model,
                                const char* manifest_path,
                                const char* split_path, const char* subset,
                                int32_t truth_rows, vdx_report** out);
VDX_API vdx_status vdx_report_summary_get(const vdx_report* report,
                                          vdx_report_summary* out);
/* Copies the rendering into `buffer` (NUL-terminated, truncated to
 * `capacity`); `needed` (nullable) receives the full length plus one. */
VDX_API vdx_status vdx_report_text(const vdx_report* report, char* buffer,
                                   size_t capacity, size_t* needed);
VDX_API vdx_status vdx_report_json(const vdx_report* report, char* buffer,
                                   size_t capacity, size_t* needed);
VDX_API vdx_status vdx_report_write_json(const vdx_report* report,
                                         const char* path);
/* Two columns "fpr tpr". */
VDX_API vdx_status vdx_report_write_roc(const vdx_report* report,
                                        const char* path);
VDX_API void vdx_report_free(vdx_report* report);

/* ------------------------------------------------------------------------ */
/* Occlusion heatmaps */

typedef enum vdx_plane {
  VDX_PLANE_SAGITTAL = 0,
  VDX_PLANE_CORONAL = 1,
  VDX_PLANE_AXIAL = 2
} vdx_plane;

/* Heatmap of one manifest subject (`flipped` selects the mirrored copy),
 * written as MVOL. `baseline` (nullable) receives the unoccluded P(PD). */
VDX_API vdx_status vdx_heatmap(const vdx_model* model,
                               const char* manifest_path,
                               const char* subject_id, int32_t flipped,
                               uint32_t box, uint32_t stride,
                               const char* out_path, double* baseline);

/* Writes a binary PGM of one slice of an MVOL volume. */
VDX_API vdx_status vdx_export_slice(const char* volume_path, int32_t plane,
                                    uint32_t index, const char* pgm_path);

/* ------------------------------------------------------------------------ */
/* Hyperparameter search */

#define VDX_MAX_ALPHAS 8

typedef struct vdx_search_space {
  double lr_lo, lr_hi;
  double rc_lo, rc_hi;
  double rc_zero_prob;
  double kp1_lo, kp1_hi;
  double kp2_lo, kp2_hi;
  uint32_t alpha_count;
  double alphas[VDX_MAX_ALPHAS];
  uint32_t variant_mask;      /* bit i set: vdx_variant i allowed */
  uint32_t norm_mask;         /* bit i set: vdx_norm i allowed */
  uint32_t demographics_mask; /* bit 0: without, bit 1: with */
} vdx_search_space;

VDX_API void vdx_search_space_default(vdx_search_space* space);

typedef struct vdx_search_result vdx_search_result;

typedef struct vdx_trial_info {
  uint64_t index;
  uint64_t seed;
  char name[32];
  vdx_model_config model;
  vdx_train_config train;
  int32_t ok;
  double final_train_f2;
  double best_dev_f2;
  int32_t epochs;
  double wall_seconds;
} vdx_trial_info;

/* `preset` is NULL for random search or "table3" for the fixed grid.
 * `space` is ignored for the preset and may be NULL (defaults). `base`
 * supplies the unsampled training fields. `log_path` (nullable) receives
 * one JSON record per trial; with `resume`, completed trials are reused. */
VDX_API vdx_status vdx_search_run(const char* manifest_path,
                                  const char* split_path,
                                  const vdx_search_space* space,
                                  const vdx_train_config* base,
                                  const char* preset, uint32_t budget,
                                  uint64_t seed, const char* log_path,
                                  int32_t resume, vdx_search_result** out);
VDX_API size_t vdx_search_ranked_count(const vdx_search_result* result);
VDX_API size_t vdx_search_failure_count(const vdx_search_result* result);
/* Ranked trial `rank` (0 = best). */
VDX_API vdx_status vdx_search_trial(const vdx_search_result* result,
                                    size_t rank, vdx_trial_info* out);
/* Trial table in run order with train and dev F2 columns. */
VDX_API vdx_status vdx_search_table(const vdx_search_result* result,
                                    char* buffer, size_t capacity,
                                    size_t* needed);
VDX_API void vdx_search_result_free(vdx_search_result* result);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* VOXDX_VOXDX_H_ */
