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

// Command-line front end. Talks to the library only through msdg.h.

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msdg/msdg.h"

namespace {

struct DatasetDeleter {
    void operator()(msdg_dataset* d) const { msdg_dataset_free(d); }
};
struct ModelDeleter {
    void operator()(msdg_model* m) const { msdg_model_free(m); }
};
using DatasetPtr = std::unique_ptr<msdg_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<msdg_model, ModelDeleter>;

// Thrown to unwind with a library status; main turns it into the exit code.
struct Failure {
    msdg_status status;
};

void check(msdg_status status, const std::string& context) {
    if (status == MSDG_OK) return;
    std::fprintf(stderr, "msdg: %s: %s (%s)\n", context.c_str(), msdg_last_error(), msdg_status_name(status));
    throw Failure{status};
}

const char* kind_name(msdg_model_kind kind) {
    switch (kind) {
        case MSDG_MODEL_FULL: return "ms-dgformer";
        case MSDG_MODEL_EFFICIENT: return "efficient";
        case MSDG_MODEL_MS_FORMER: return "ms-former";
    }
    return "unknown";
}

DatasetPtr load_dataset(const std::string& path) {
    msdg_dataset* ds = nullptr;
    check(msdg_dataset_load(path.c_str(), &ds), "loading " + path);
    return DatasetPtr(ds);
}

ModelPtr load_model(const std::string& path) {
    msdg_model* m = nullptr;
    check(msdg_model_load(path.c_str(), &m), "loading " + path);
    return ModelPtr(m);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) {
        std::fprintf(stderr, "msdg: cannot write %s\n", path.c_str());
        throw Failure{MSDG_ERR_IO};
    }
}

void print_counts(const msdg_model* m, const char* label) {
    uint64_t network = 0, trainable = 0, buffers = 0;
    check(msdg_model_parameter_counts(m, &network, &trainable, &buffers), "counting parameters");
    std::printf("%s (%s): network weights %llu, trainable %llu, buffers %llu\n", label,
                kind_name(msdg_model_get_kind(m)), static_cast<unsigned long long>(network),
                static_cast<unsigned long long>(trainable), static_cast<unsigned long long>(buffers));
}

void epoch_progress(size_t epoch, double loss, double lr, double f1, void*) {
    if (f1 >= 0) {
        std::fprintf(stderr, "epoch %zu  loss %.6f  lr %.3e  test macro-F1 %.4f\n", epoch, loss, lr, f1);
    } else {
        std::fprintf(stderr, "epoch %zu  loss %.6f  lr %.3e\n", epoch, loss, lr);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dictionary-guided transformer for single-shot mass spectra"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(msdg_version()));

    // gen-data
    std::string gen_config, gen_preset, gen_out, gen_peaks;
    std::uint64_t gen_seed = 7;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen->add_option("--config", gen_config, "Data config (key=value)")->check(CLI::ExistingFile);
    gen->add_option("--preset", gen_preset, "desk or paper-proportion");
    gen->add_option("--out", gen_out, "Output dataset file")->required();
    gen->add_option("--peaks", gen_peaks, "Peak table output (default: <out>.peaks.csv)");
    gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();

    // train
    std::string tr_data, tr_peaks, tr_model_cfg, tr_train_cfg, tr_out, tr_history, tr_test_out;
    std::string tr_ablation = "none";
    double tr_split = 0.8;
    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--data", tr_data, "Dataset file")->required()->check(CLI::ExistingFile);
    train->add_option("--peaks", tr_peaks, "Peak table (default: <data>.peaks.csv)");
    train->add_option("--model-config", tr_model_cfg, "Model config (key=value)")->check(CLI::ExistingFile);
    train->add_option("--train-config", tr_train_cfg, "Training config (key=value)")->check(CLI::ExistingFile);
    train->add_option("--out-checkpoint", tr_out, "Checkpoint to write")->required();
    train->add_option("--ablation", tr_ablation, "ms-former or none")
        ->check(CLI::IsMember({"ms-former", "none"}))
        ->capture_default_str();
    train->add_option("--split", tr_split, "Training fraction; 1 trains on everything")->capture_default_str();
    train->add_option("--history", tr_history, "History CSV (default: <out-checkpoint>.history.csv)");
    train->add_option("--test-out", tr_test_out, "Write the held-out split here");

    // export-e
    std::string ex_ckpt, ex_out;
    auto* exp = app.add_subcommand("export-e", "Export the efficient inference model");
    exp->add_option("--checkpoint", ex_ckpt, "Trained checkpoint")->required()->check(CLI::ExistingFile);
    exp->add_option("--out", ex_out, "Efficient checkpoint to write")->required();

    // eval
    std::string ev_ckpt, ev_data, ev_out;
    auto* ev = app.add_subcommand("eval", "Classification metrics on a dataset");
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", ev_data, "Dataset file")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "Metrics CSV");

    // bench
    std::string bn_ckpt, bn_out;
    std::vector<std::size_t> bn_batches{1, 4, 8};
    std::size_t bn_warmup = 10, bn_runs = 100;
    std::uint64_t bn_seed = 0;
    auto* bn = app.add_subcommand("bench", "Inference latency and throughput");
    bn->add_option("--checkpoint", bn_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    bn->add_option("--batches", bn_batches, "Batch sizes")->delimiter(',')->capture_default_str();
    bn->add_option("--warmup", bn_warmup, "Untimed warm-up runs")->capture_default_str();
    bn->add_option("--runs", bn_runs, "Timed runs")->capture_default_str();
    bn->add_option("--seed", bn_seed, "Input seed")->capture_default_str();
    bn->add_option("--out", bn_out, "Benchmark CSV");

    // inspect-attn
    std::string ia_ckpt, ia_data, ia_out = "attention";
    std::size_t ia_index = 0;
    auto* ia = app.add_subcommand("inspect-attn", "Dump slice and selection attention maps");
    ia->add_option("--checkpoint", ia_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    ia->add_option("--data", ia_data, "Dataset file")->required()->check(CLI::ExistingFile);
    ia->add_option("--spectrum-index", ia_index, "Spectrum to inspect")->capture_default_str();
    ia->add_option("--out-dir", ia_out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : MSDG_ERR_USAGE;
    }

    try {
        if (*gen) {
            msdg_dataset* raw = nullptr;
            check(msdg_dataset_generate(gen_config.empty() ? nullptr : gen_config.c_str(),
                                        gen_preset.empty() ? nullptr : gen_preset.c_str(), gen_seed, &raw),
                  "generating data");
            DatasetPtr ds(raw);
            check(msdg_dataset_save(ds.get(), gen_out.c_str()), "writing " + gen_out);
            const std::string peaks = gen_peaks.empty() ? gen_out + ".peaks.csv" : gen_peaks;
            check(msdg_dataset_save_peaks(ds.get(), peaks.c_str()), "writing " + peaks);
            size_t counts[5];
            check(msdg_dataset_class_counts(ds.get(), counts), "counting classes");
            std::printf("class,count\n");
            for (int c = 0; c < 5; ++c) std::printf("%d,%zu\n", c + 1, counts[c]);
            std::printf("total,%zu\n", msdg_dataset_size(ds.get()));
        } else if (*train) {
            DatasetPtr ds = load_dataset(tr_data);
            const std::string peaks = tr_peaks.empty() ? tr_data + ".peaks.csv" : tr_peaks;
            check(msdg_dataset_load_peaks(ds.get(), peaks.c_str()), "loading peak table " + peaks);
            const std::string history = tr_history.empty() ? tr_out + ".history.csv" : tr_history;
            const msdg_model_kind kind = tr_ablation == "ms-former" ? MSDG_MODEL_MS_FORMER : MSDG_MODEL_FULL;
            msdg_model* raw = nullptr;
            msdg_dataset* test = nullptr;
            check(msdg_train(ds.get(), tr_model_cfg.empty() ? nullptr : tr_model_cfg.c_str(),
                             tr_train_cfg.empty() ? nullptr : tr_train_cfg.c_str(), kind, tr_split, epoch_progress,
                             nullptr, &raw, &test, history.c_str()),
                  "training");
            ModelPtr model(raw);
            DatasetPtr held_out(test);
            check(msdg_model_save(model.get(), tr_out.c_str()), "writing " + tr_out);
            if (!tr_test_out.empty()) check(msdg_dataset_save(held_out.get(), tr_test_out.c_str()), "writing " + tr_test_out);
            print_counts(model.get(), "trained");
            std::printf("checkpoint %s\nhistory %s\n", tr_out.c_str(), history.c_str());
        } else if (*exp) {
            ModelPtr full = load_model(ex_ckpt);
            msdg_model* raw = nullptr;
            check(msdg_model_export_efficient(full.get(), &raw), "exporting");
            ModelPtr eff(raw);
            check(msdg_model_save(eff.get(), ex_out.c_str()), "writing " + ex_out);
            print_counts(full.get(), "before");
            print_counts(eff.get(), "after");
        } else if (*ev) {
            ModelPtr model = load_model(ev_ckpt);
            DatasetPtr ds = load_dataset(ev_data);
            std::vector<char> csv(1 << 16), table(1 << 16);
            double f1 = 0;
            check(msdg_evaluate(model.get(), ds.get(), &f1, csv.data(), csv.size(), nullptr, table.data(),
                                table.size(), nullptr),
                  "evaluating");
            std::printf("%s", table.data());
            if (!ev_out.empty()) write_text(ev_out, csv.data());
        } else if (*bn) {
            ModelPtr model = load_model(bn_ckpt);
            std::vector<char> csv(1 << 16);
            check(msdg_benchmark(model.get(), bn_batches.data(), bn_batches.size(), bn_warmup, bn_runs, bn_seed,
                                 csv.data(), csv.size(), nullptr),
                  "benchmarking");
            std::printf("%s", csv.data());
            if (!bn_out.empty()) write_text(bn_out, csv.data());
        } else if (*ia) {
            ModelPtr model = load_model(ia_ckpt);
            DatasetPtr ds = load_dataset(ia_data);
            size_t files = 0;
            check(msdg_inspect_attention(model.get(), ds.get(), ia_index, ia_out.c_str(), &files), "inspecting");
            std::printf("wrote %zu files to %s\n", files, ia_out.c_str());
        }
    } catch (const Failure& f) {
        return static_cast<int>(f.status);
    }
    return 0;
}
