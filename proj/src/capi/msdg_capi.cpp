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

#include "msdg/msdg.h"

#include <cstring>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "common/binary_io.hpp"
#include "evaluation/evaluation.hpp"
#include "spectra/data_config.hpp"
#include "training/training.hpp"

struct msdg_dataset {
    msdg::Dataset data;
    std::optional<std::vector<msdg::ClassTemplate>> templates;
};

struct msdg_model {
    msdg::Model model;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
msdg_status guarded(F&& body) {
    g_last_error.clear();
    try {
        return body();
    } catch (const msdg::Error& e) {
        g_last_error = e.what();
        return static_cast<msdg_status>(static_cast<int>(e.kind()));
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return MSDG_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MSDG_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw msdg::UsageError(what);
}

msdg_status copy_text(const std::string& text, char* buf, std::size_t cap, std::size_t* needed) {
    if (needed) *needed = text.size() + 1;
    if (!buf) return MSDG_OK;
    if (cap == 0) throw msdg::UsageError("output buffer has zero capacity");
    const std::size_t n = std::min(text.size(), cap - 1);
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
    if (n < text.size()) {
        throw msdg::UsageError("output buffer of " + std::to_string(cap) + " bytes is too small, need " +
                               std::to_string(text.size() + 1));
    }
    return MSDG_OK;
}

msdg::ModelKind to_kind(msdg_model_kind kind) {
    switch (kind) {
        case MSDG_MODEL_FULL: return msdg::ModelKind::kFull;
        case MSDG_MODEL_EFFICIENT: return msdg::ModelKind::kEfficient;
        case MSDG_MODEL_MS_FORMER: return msdg::ModelKind::kMsFormer;
    }
    throw msdg::UsageError("unknown model kind");
}

}  // namespace

extern "C" {

const char* msdg_version(void) { return "1.0.0"; }

const char* msdg_last_error(void) { return g_last_error.c_str(); }

const char* msdg_status_name(msdg_status status) {
    switch (status) {
        case MSDG_OK: return "ok";
        case MSDG_ERR_INTERNAL: return "internal error";
        case MSDG_ERR_CONFIG: return "configuration error";
        case MSDG_ERR_FORMAT: return "format error";
        case MSDG_ERR_NUMERIC: return "numeric error";
        case MSDG_ERR_USAGE: return "usage error";
        case MSDG_ERR_DIMENSION: return "dimension error";
        case MSDG_ERR_IO: return "i/o error";
    }
    return "unknown status";
}

msdg_status msdg_dataset_generate(const char* config_path, const char* preset, uint64_t seed, msdg_dataset** out) {
    return guarded([&] {
        require(out != nullptr, "out handle is NULL");
        msdg::DataConfig cfg;
        if (config_path) {
            msdg::KeyValueConfig kv = msdg::KeyValueConfig::load(config_path);
            if (preset && !kv.has("preset")) {
                // Keys in the file apply on top of the requested preset.
                std::ostringstream merged;
                merged << "preset=" << preset << '\n';
                const auto bytes = msdg::read_file_bytes(config_path);
                merged << std::string(bytes.begin(), bytes.end());
                kv = msdg::KeyValueConfig::parse(merged.str(), config_path);
            }
            cfg = msdg::DataConfig::from_keyvalue(kv);
        } else {
            cfg = msdg::DataConfig::from_preset(preset ? preset : "desk");
        }
        msdg::GeneratedData gen = msdg::generate(cfg, seed);
        *out = new msdg_dataset{std::move(gen.dataset), std::move(gen.templates)};
        return MSDG_OK;
    });
}

msdg_status msdg_dataset_load(const char* path, msdg_dataset** out) {
    return guarded([&] {
        require(path && out, "path or out handle is NULL");
        *out = new msdg_dataset{msdg::load_dataset(path), std::nullopt};
        return MSDG_OK;
    });
}

msdg_status msdg_dataset_save(const msdg_dataset* ds, const char* path) {
    return guarded([&] {
        require(ds && path, "dataset or path is NULL");
        msdg::save_dataset(path, ds->data);
        return MSDG_OK;
    });
}

msdg_status msdg_dataset_save_peaks(const msdg_dataset* ds, const char* path) {
    return guarded([&] {
        require(ds && path, "dataset or path is NULL");
        if (!ds->templates) throw msdg::UsageError("dataset carries no peak table");
        msdg::save_templates(path, *ds->templates);
        return MSDG_OK;
    });
}

msdg_status msdg_dataset_load_peaks(msdg_dataset* ds, const char* path) {
    return guarded([&] {
        require(ds && path, "dataset or path is NULL");
        ds->templates = msdg::load_templates(path);
        return MSDG_OK;
    });
}

msdg_status msdg_dataset_split(const msdg_dataset* ds, double train_fraction, uint64_t seed, msdg_dataset** train,
                               msdg_dataset** test) {
    return guarded([&] {
        require(ds && train && test, "NULL argument");
        if (!(train_fraction > 0 && train_fraction < 1)) throw msdg::ConfigError("train fraction must lie in (0, 1)");
        auto [a, b] = msdg::split_dataset(ds->data, train_fraction, seed);
        *train = new msdg_dataset{std::move(a), ds->templates};
        *test = new msdg_dataset{std::move(b), ds->templates};
        return MSDG_OK;
    });
}

size_t msdg_dataset_size(const msdg_dataset* ds) { return ds ? ds->data.spectra.size() : 0; }

size_t msdg_dataset_length(const msdg_dataset* ds) { return ds ? ds->data.axis.size() : 0; }

msdg_status msdg_dataset_class_counts(const msdg_dataset* ds, size_t counts[5]) {
    return guarded([&] {
        require(ds && counts, "NULL argument");
        const auto c = ds->data.class_counts();
        for (int i = 0; i < msdg::kNumClasses; ++i) counts[i] = c[i];
        return MSDG_OK;
    });
}

msdg_status msdg_dataset_spectrum(const msdg_dataset* ds, size_t index, float* intensities, size_t cap,
                                  uint8_t* label) {
    return guarded([&] {
        require(ds != nullptr, "dataset is NULL");
        if (index >= ds->data.spectra.size()) {
            throw msdg::UsageError("spectrum index " + std::to_string(index) + " out of range (dataset has " +
                                   std::to_string(ds->data.spectra.size()) + ")");
        }
        const auto& s = ds->data.spectra[index];
        if (intensities) {
            if (cap < s.intensities.size()) throw msdg::UsageError("intensity buffer too small");
            std::copy(s.intensities.begin(), s.intensities.end(), intensities);
        }
        if (label) *label = s.label;
        return MSDG_OK;
    });
}

void msdg_dataset_free(msdg_dataset* ds) { delete ds; }

msdg_status msdg_train(const msdg_dataset* data, const char* model_config_path, const char* train_config_path,
                       msdg_model_kind kind, double train_fraction, msdg_epoch_callback callback, void* user,
                       msdg_model** model, msdg_dataset** test, const char* history_path) {
    return guarded([&] {
        require(data && model, "dataset or model handle is NULL");
        if (!data->templates) throw msdg::UsageError("training needs the dataset's peak table");
        const msdg::ModelConfig cfg =
            model_config_path ? msdg::ModelConfig::load(model_config_path) : msdg::ModelConfig::desk();
        const msdg::TrainConfig tc = train_config_path ? msdg::TrainConfig::load(train_config_path) : msdg::TrainConfig{};
        msdg::EpochCallback cb;
        if (callback) {
            cb = [callback, user](const msdg::EpochReport& r) {
                callback(r.epoch, r.loss, r.lr, r.test_f1 ? *r.test_f1 : -1.0, user);
            };
        }
        msdg::TrainRun run =
            msdg::run_training(data->data, *data->templates, cfg, to_kind(kind), tc, train_fraction, cb);
        if (history_path) {
            const std::string csv = run.history.to_csv();
            msdg::write_file_bytes(history_path,
                                   std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
        }
        if (test) *test = new msdg_dataset{std::move(run.test), data->templates};
        *model = new msdg_model{std::move(run.model)};
        return MSDG_OK;
    });
}

msdg_status msdg_model_load(const char* path, msdg_model** out) {
    return guarded([&] {
        require(path && out, "path or out handle is NULL");
        *out = new msdg_model{msdg::load_checkpoint(path)};
        return MSDG_OK;
    });
}

msdg_status msdg_model_save(const msdg_model* model, const char* path) {
    return guarded([&] {
        require(model && path, "model or path is NULL");
        msdg::save_checkpoint(path, model->model);
        return MSDG_OK;
    });
}

msdg_status msdg_model_export_efficient(const msdg_model* model, msdg_model** out) {
    return guarded([&] {
        require(model && out, "NULL argument");
        *out = new msdg_model{msdg::export_efficient(model->model)};
        return MSDG_OK;
    });
}

msdg_model_kind msdg_model_get_kind(const msdg_model* model) {
    return static_cast<msdg_model_kind>(static_cast<int>(model->model.kind()));
}

size_t msdg_model_patches(const msdg_model* model) { return model ? model->model.config().patches() : 0; }

size_t msdg_model_length(const msdg_model* model) { return model ? model->model.config().length : 0; }

msdg_status msdg_model_parameter_counts(const msdg_model* model, uint64_t* network, uint64_t* trainable,
                                        uint64_t* buffers) {
    return guarded([&] {
        require(model != nullptr, "model is NULL");
        const auto pc = model->model.parameter_count();
        if (network) *network = pc.network();
        if (trainable) *trainable = pc.trainable();
        if (buffers) *buffers = pc.buffers();
        return MSDG_OK;
    });
}

msdg_status msdg_model_parameter_report(const msdg_model* model, char* buf, size_t cap, size_t* needed) {
    return guarded([&] {
        require(model != nullptr, "model is NULL");
        std::ostringstream out;
        out << "component,count,kind\n";
        for (const auto& item : model->model.parameter_count().items) {
            out << item.name << ',' << item.count << ','
                << (item.buffer ? "buffer" : item.learnable_sequence ? "learnable_sequence" : "weight") << '\n';
        }
        return copy_text(out.str(), buf, cap, needed);
    });
}

msdg_status msdg_model_predict(const msdg_model* model, const float* intensities, size_t length, double* yhat,
                               size_t cap, uint8_t* class_id) {
    return guarded([&] {
        require(model && intensities, "model or intensities is NULL");
        msdg::Spectrum s;
        s.intensities.assign(intensities, intensities + length);
        const auto y = model->model.predict(s);
        if (yhat) {
            if (cap < y.size()) throw msdg::UsageError("prediction buffer too small");
            std::copy(y.begin(), y.end(), yhat);
        }
        if (class_id) {
            *class_id = msdg::classify(y, model->model.references(), model->model.config().dust_threshold).class_id;
        }
        return MSDG_OK;
    });
}

void msdg_model_free(msdg_model* model) { delete model; }

msdg_status msdg_evaluate(const msdg_model* model, const msdg_dataset* ds, double* macro_f1, char* csv_buf,
                          size_t csv_cap, size_t* csv_needed, char* table_buf, size_t table_cap,
                          size_t* table_needed) {
    return guarded([&] {
        require(model && ds, "model or dataset is NULL");
        const msdg::MetricsReport report = msdg::evaluate(model->model, ds->data);
        if (macro_f1) *macro_f1 = report.macro_f1;
        copy_text(report.to_csv(), csv_buf, csv_cap, csv_needed);
        return copy_text(report.to_table(), table_buf, table_cap, table_needed);
    });
}

msdg_status msdg_benchmark(const msdg_model* model, const size_t* batches, size_t batch_count, size_t warmup,
                           size_t runs, uint64_t seed, char* csv_buf, size_t cap, size_t* needed) {
    return guarded([&] {
        require(model != nullptr, "model is NULL");
        msdg::BenchOptions options;
        if (batches) options.batches.assign(batches, batches + batch_count);
        options.warmup = warmup;
        options.runs = runs;
        options.seed = seed;
        return copy_text(msdg::bench_csv(msdg::benchmark(model->model, options)), csv_buf, cap, needed);
    });
}

msdg_status msdg_inspect_attention(const msdg_model* model, const msdg_dataset* ds, size_t index,
                                   const char* out_dir, size_t* files) {
    return guarded([&] {
        require(model && ds && out_dir, "NULL argument");
        if (index >= ds->data.spectra.size()) {
            throw msdg::UsageError("spectrum index " + std::to_string(index) + " out of range (dataset has " +
                                   std::to_string(ds->data.spectra.size()) + ")");
        }
        const auto dump = msdg::dump_attention(model->model, ds->data.spectra[index]);
        const auto paths = msdg::write_attention_csv(dump, out_dir);
        if (files) *files = paths.size();
        return MSDG_OK;
    });
}

}  // extern "C"
