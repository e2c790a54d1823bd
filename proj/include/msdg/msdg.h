/*
 * Copyright 2026 The msdg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * msdg: dictionary-guided transformer for single-shot mass spectra.
 *
 * Every function returns an msdg_status. On failure the message for the
 * calling thread is available from msdg_last_error() until the next call.
 * Handles are opaque; free them with the matching *_free function.
 *
 * Functions that produce text take (buf, cap, needed): *needed (if non-NULL)
 * receives the full size including the NUL. A NULL buf skips the copy; a
 * non-NULL buf that is too small gets a truncated, NUL-terminated copy and
 * the call returns MSDG_ERR_USAGE.
 */

#ifndef MSDG_MSDG_H
#define MSDG_MSDG_H

#include <stddef.h>
#include <stdint.h>

#if defined(MSDG_BUILDING_LIBRARY)
#define MSDG_API __attribute__((visibility("default")))
#else
#define MSDG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the command-line tool. */
typedef enum msdg_status {
    MSDG_OK = 0,
    MSDG_ERR_INTERNAL = 1,
    MSDG_ERR_CONFIG = 2,
    MSDG_ERR_FORMAT = 3,
    MSDG_ERR_NUMERIC = 4,
    MSDG_ERR_USAGE = 5,
    MSDG_ERR_DIMENSION = 6,
    MSDG_ERR_IO = 7
} msdg_status;

typedef enum msdg_model_kind {
    MSDG_MODEL_FULL = 0,
    MSDG_MODEL_EFFICIENT = 1,
    MSDG_MODEL_MS_FORMER = 2
} msdg_model_kind;

typedef struct msdg_dataset msdg_dataset;
typedef struct msdg_model msdg_model;

MSDG_API const char* msdg_version(void);
MSDG_API const char* msdg_last_error(void);
MSDG_API const char* msdg_status_name(msdg_status status);

/* ---- datasets ---------------------------------------------------------- */

/* Synthetic dataset from a key=value data config (NULL for the desk
 * defaults) or a preset name ("desk", "paper-proportion"; NULL for desk).
 * When both are given the config file's keys override the preset. */
MSDG_API msdg_status msdg_dataset_generate(const char* config_path, const char* preset, uint64_t seed,
                                           msdg_dataset** out);
MSDG_API msdg_status msdg_dataset_load(const char* path, msdg_dataset** out);
MSDG_API msdg_status msdg_dataset_save(const msdg_dataset* ds, const char* path);
/* Peak table sidecar holding the class templates (CSV). */
MSDG_API msdg_status msdg_dataset_save_peaks(const msdg_dataset* ds, const char* path);
MSDG_API msdg_status msdg_dataset_load_peaks(msdg_dataset* ds, const char* path);
MSDG_API msdg_status msdg_dataset_split(const msdg_dataset* ds, double train_fraction, uint64_t seed,
                                        msdg_dataset** train, msdg_dataset** test);
MSDG_API size_t msdg_dataset_size(const msdg_dataset* ds);
MSDG_API size_t msdg_dataset_length(const msdg_dataset* ds);
/* counts[k] receives the number of spectra of class k + 1. */
MSDG_API msdg_status msdg_dataset_class_counts(const msdg_dataset* ds, size_t counts[5]);
MSDG_API msdg_status msdg_dataset_spectrum(const msdg_dataset* ds, size_t index, float* intensities, size_t cap,
                                           uint8_t* label);
MSDG_API void msdg_dataset_free(msdg_dataset* ds);

/* ---- models ------------------------------------------------------------ */

typedef void (*msdg_epoch_callback)(size_t epoch, double loss, double lr, double test_macro_f1, void* user);

/* Trains a full or ablation model on `data` (which must carry a peak table).
 * model_config_path / train_config_path may be NULL for defaults. The data
 * are split train_fraction / rest (1.0 trains on everything); the held-out
 * part is returned in *test when test is non-NULL. The per-epoch history is
 * written as CSV to history_path when non-NULL. test_macro_f1 passed to the
 * callback is negative when not evaluated that epoch. */
MSDG_API msdg_status msdg_train(const msdg_dataset* data, const char* model_config_path,
                                const char* train_config_path, msdg_model_kind kind, double train_fraction,
                                msdg_epoch_callback callback, void* user, msdg_model** model,
                                msdg_dataset** test, const char* history_path);

MSDG_API msdg_status msdg_model_load(const char* path, msdg_model** out);
MSDG_API msdg_status msdg_model_save(const msdg_model* model, const char* path);
MSDG_API msdg_status msdg_model_export_efficient(const msdg_model* model, msdg_model** out);
MSDG_API msdg_model_kind msdg_model_get_kind(const msdg_model* model);
MSDG_API size_t msdg_model_patches(const msdg_model* model);
MSDG_API size_t msdg_model_length(const msdg_model* model);
/* network: weights excluding learnable token sequences and cached buffers;
 * trainable: all trained scalars; buffers: stored untrained scalars. */
MSDG_API msdg_status msdg_model_parameter_counts(const msdg_model* model, uint64_t* network, uint64_t* trainable,
                                                 uint64_t* buffers);
/* Itemized parameter table as CSV (component,count,kind). */
MSDG_API msdg_status msdg_model_parameter_report(const msdg_model* model, char* buf, size_t cap, size_t* needed);
/* Per-patch peak probabilities (cap >= patches) and the predicted class. */
MSDG_API msdg_status msdg_model_predict(const msdg_model* model, const float* intensities, size_t length,
                                        double* yhat, size_t cap, uint8_t* class_id);
MSDG_API void msdg_model_free(msdg_model* model);

/* ---- evaluation -------------------------------------------------------- */

/* Metrics CSV into csv_buf; human-readable table into table_buf (either may
 * be NULL). macro_f1 may be NULL. */
MSDG_API msdg_status msdg_evaluate(const msdg_model* model, const msdg_dataset* ds, double* macro_f1,
                                   char* csv_buf, size_t csv_cap, size_t* csv_needed, char* table_buf,
                                   size_t table_cap, size_t* table_needed);
/* Latency benchmark; CSV with columns model,batch,mean_ms,std_ms,spectra_per_s. */
MSDG_API msdg_status msdg_benchmark(const msdg_model* model, const size_t* batches, size_t batch_count,
                                    size_t warmup, size_t runs, uint64_t seed, char* csv_buf, size_t cap,
                                    size_t* needed);
/* Writes slice_class<id>.csv per class and selection.csv for spectrum
 * `index` of `ds` into out_dir; *files receives the number written. */
MSDG_API msdg_status msdg_inspect_attention(const msdg_model* model, const msdg_dataset* ds, size_t index,
                                            const char* out_dir, size_t* files);

#ifdef __cplusplus
}
#endif

#endif /* MSDG_MSDG_H */
