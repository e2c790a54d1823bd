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

#include "evaluation/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace msdg {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

MetricsReport MetricsReport::from_confusion(const Confusion& confusion) {
    MetricsReport r;
    r.confusion = confusion;
    const double total = static_cast<double>(r.total());
    double diagonal = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        std::uint64_t tp = confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < kNumClasses; ++o) {
            if (o == c) continue;
            fp += confusion[o][c];
            fn += confusion[c][o];
        }
        auto& m = r.per_class[c];
        m.support = tp + fn;
        m.precision = ratio(tp, tp + fp);
        m.recall = ratio(tp, tp + fn);
        m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
        r.micro_f1[c] = m.f1;
        r.macro_precision += m.precision / kNumClasses;
        r.macro_recall += m.recall / kNumClasses;
        r.macro_f1 += m.f1 / kNumClasses;
        diagonal += tp;
    }
    r.balanced_accuracy = r.macro_recall;
    r.accuracy = ratio(diagonal, total);
    return r;
}

std::uint64_t MetricsReport::total() const {
    std::uint64_t n = 0;
    for (const auto& row : confusion) {
        for (auto v : row) n += v;
    }
    return n;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "scope,class,precision,recall,f1,support\n";
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& m = per_class[c];
        out << "class," << class_name(static_cast<std::uint8_t>(c + 1)) << ',' << fixed(m.precision, 6) << ','
            << fixed(m.recall, 6) << ',' << fixed(m.f1, 6) << ',' << m.support << '\n';
    }
    out << "macro,all," << fixed(macro_precision, 6) << ',' << fixed(macro_recall, 6) << ',' << fixed(macro_f1, 6)
        << ',' << total() << '\n';
    out << "accuracy,balanced,,," << fixed(balanced_accuracy, 6) << ',' << total() << '\n';
    out << "accuracy,plain,,," << fixed(accuracy, 6) << ',' << total() << '\n';
    return out.str();
}

std::string MetricsReport::to_table() const {
    std::ostringstream out;
    out << "class          precision  recall  f1      support\n";
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& m = per_class[c];
        char line[128];
        std::snprintf(line, sizeof line, "%-14s %-10s %-7s %-7s %llu\n", class_name(static_cast<std::uint8_t>(c + 1)),
                      fixed(m.precision).c_str(), fixed(m.recall).c_str(), fixed(m.f1).c_str(),
                      static_cast<unsigned long long>(m.support));
        out << line;
    }
    out << "macro          " << fixed(macro_precision) << "     " << fixed(macro_recall) << "  " << fixed(macro_f1)
        << '\n';
    out << "balanced accuracy " << fixed(balanced_accuracy) << ", accuracy " << fixed(accuracy) << '\n';
    out << "confusion (rows true, columns predicted)\n";
    for (const auto& row : confusion) {
        for (int c = 0; c < kNumClasses; ++c) out << (c ? " " : "  ") << row[c];
        out << '\n';
    }
    return out.str();
}

std::vector<Prediction> predict_dataset(const Model& model, const Dataset& ds, std::size_t batch_size) {
    if (ds.axis.size() != model.config().length) {
        throw DimensionError("dataset has " + std::to_string(ds.axis.size()) + " samples per spectrum, model expects " +
                             std::to_string(model.config().length));
    }
    if (batch_size == 0) throw UsageError("batch size must be positive");
    NoGradGuard guard;
    const std::size_t n = model.config().patches();
    std::vector<Prediction> out;
    out.reserve(ds.spectra.size());
    for (std::size_t start = 0; start < ds.spectra.size(); start += batch_size) {
        const std::size_t end = std::min(ds.spectra.size(), start + batch_size);
        std::vector<const Spectrum*> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(&ds.spectra[i]);
        const ForwardOutput fwd = model.forward(batch_tensor(batch));
        const auto probs = fwd.probs.data();
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const std::vector<double> yhat(probs.begin() + b * n, probs.begin() + (b + 1) * n);
            const Classification c = classify(yhat, model.references(), model.config().dust_threshold);
            out.push_back({batch[b]->label, c.class_id, c.best_similarity});
        }
    }
    return out;
}

MetricsReport metrics_from_predictions(const std::vector<Prediction>& predictions) {
    if (predictions.empty()) throw UsageError("cannot evaluate an empty test set");
    Confusion confusion{};
    for (const auto& p : predictions) {
        if (p.label < 1 || p.label > kNumClasses || p.predicted < 1 || p.predicted > kNumClasses) {
            throw FormatError("class id outside 1..5 in predictions");
        }
        ++confusion[p.label - 1][p.predicted - 1];
    }
    return MetricsReport::from_confusion(confusion);
}

MetricsReport evaluate(const Model& model, const Dataset& ds) {
    if (ds.spectra.empty()) throw UsageError("cannot evaluate an empty test set");
    return metrics_from_predictions(predict_dataset(model, ds));
}

std::vector<BenchRow> benchmark(const Model& model, const BenchOptions& options) {
    if (options.runs == 0) throw UsageError("benchmark needs at least one timed run");
    using clock = std::chrono::steady_clock;
    const std::size_t l = model.config().length;
    Rng rng(options.seed);
    std::vector<BenchRow> rows;
    NoGradGuard guard;
    for (std::size_t batch : options.batches) {
        if (batch == 0) throw UsageError("benchmark batch sizes must be positive");
        std::vector<Real> values(batch * l);
        for (auto& v : values) v = static_cast<Real>(rng.uniform());
        const Tensor input = Tensor::from({batch, l}, std::move(values));
        for (std::size_t i = 0; i < options.warmup; ++i) model.forward(input);
        std::vector<double> ms;
        ms.reserve(options.runs);
        for (std::size_t i = 0; i < options.runs; ++i) {
            const auto t0 = clock::now();
            const ForwardOutput out = model.forward(input);
            const auto t1 = clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        double mean = 0;
        for (double v : ms) mean += v;
        mean /= static_cast<double>(ms.size());
        double var = 0;
        for (double v : ms) var += (v - mean) * (v - mean);
        const double sd = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
        rows.push_back({model_kind_name(model.kind()), batch, mean, sd, static_cast<double>(batch) * 1000.0 / mean});
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "model,batch,mean_ms,std_ms,spectra_per_s\n";
    for (const auto& r : rows) {
        out << r.model << ',' << r.batch << ',' << fixed(r.mean_ms) << ',' << fixed(r.std_ms) << ','
            << fixed(r.spectra_per_s, 2) << '\n';
    }
    return out.str();
}

AttentionDump dump_attention(const Model& model, const Spectrum& s) {
    const ModelConfig& cfg = model.config();
    AttentionDump dump;
    dump.classes = cfg.positive_classes;
    dump.patches = cfg.patches();
    dump.members = cfg.per_class() + 1;
    if (model.kind() == ModelKind::kMsFormer) throw ConfigError("model has no attention over sub-dictionaries");

    NoGradGuard guard;
    std::vector<Real> values(s.intensities.begin(), s.intensities.end());
    const std::size_t length = values.size();
    ForwardOptions options;
    options.capture_attention = true;
    const ForwardOutput out = model.forward(Tensor::from({length}, std::move(values)), options);
    dump.selection = selection_map(out.selection, 0);

    if (model.kind() == ModelKind::kFull) {
        const auto& L = out.slice.layout;
        const std::size_t n = dump.patches, m = dump.members, token = m - 1;
        for (std::size_t i = 0; i < dump.classes.size(); ++i) {
            std::vector<double> map(n * m, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t g = i * n + j;
                for (std::size_t hd = 0; hd < L.heads; ++hd) {
                    const Real* row = out.slice.values.data() + ((g * L.heads + hd) * L.queries + token) * L.keys;
                    for (std::size_t k = 0; k < m; ++k) map[j * m + k] += row[k] / static_cast<double>(L.heads);
                }
            }
            dump.slice.push_back(std::move(map));
        }
    }
    return dump;
}

std::vector<double> selection_column_means(const AttentionDump& dump) {
    const std::size_t c = dump.classes.size();
    std::vector<double> means(c, 0.0);
    for (std::size_t j = 0; j < dump.patches; ++j) {
        for (std::size_t i = 0; i < c; ++i) means[i] += dump.selection[j * c + i];
    }
    for (auto& m : means) m /= static_cast<double>(dump.patches);
    return means;
}

std::vector<std::string> write_attention_csv(const AttentionDump& dump, const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IoError("cannot create directory " + directory + ": " + ec.message());
    std::vector<std::string> paths;
    auto write = [&](const std::string& name, const std::string& header, const std::vector<double>& values,
                     std::size_t cols) {
        const std::string path = (fs::path(directory) / name).string();
        std::ofstream f(path);
        if (!f) throw IoError("cannot write " + path);
        f << header << '\n';
        char buf[32];
        for (std::size_t j = 0; j < dump.patches; ++j) {
            f << j;
            for (std::size_t k = 0; k < cols; ++k) {
                std::snprintf(buf, sizeof buf, ",%.8g", values[j * cols + k]);
                f << buf;
            }
            f << '\n';
        }
        if (!f) throw IoError("failed writing " + path);
        paths.push_back(path);
    };
    for (std::size_t i = 0; i < dump.slice.size(); ++i) {
        std::string header = "patch";
        for (std::size_t k = 0; k + 1 < dump.members; ++k) header += ",member_" + std::to_string(k);
        header += ",token";
        write("slice_class" + std::to_string(dump.classes[i]) + ".csv", header, dump.slice[i], dump.members);
    }
    std::string header = "patch";
    for (auto id : dump.classes) header += ",class_" + std::to_string(id);
    write("selection.csv", header, dump.selection, dump.classes.size());
    return paths;
}

}  // namespace msdg
