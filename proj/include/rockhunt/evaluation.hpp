// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "rockhunt/arena.hpp"
#include "rockhunt/engine.hpp"
#include "rockhunt/error.hpp"
#include "rockhunt/model_format.hpp"

namespace rockhunt {

/// Rows are ground truth, columns are predictions.
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<std::uint64_t>> counts;

    explicit ConfusionMatrix(std::vector<std::string> names = {})
        : classes(std::move(names)), counts(classes.size(), std::vector<std::uint64_t>(classes.size(), 0)) {}

    std::uint64_t total() const noexcept {
        std::uint64_t t = 0;
        for (const auto& r : counts)
            for (auto c : r) t += c;
        return t;
    }

    std::uint64_t correct() const noexcept {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
        return t;
    }

    void add(std::size_t truth, std::size_t pred) {
        if (truth >= classes.size() || pred >= classes.size()) throw EvalError("class index out of range");
        ++counts[truth][pred];
    }

    void merge(const ConfusionMatrix& o) {
        if (o.classes != classes) throw EvalError("cannot merge confusion matrices over different classes");
        for (std::size_t i = 0; i < counts.size(); ++i)
            for (std::size_t j = 0; j < counts.size(); ++j) counts[i][j] += o.counts[i][j];
    }

    /// Each row as percentages of its own total; empty rows stay zero.
    std::vector<std::vector<double>> row_percentages() const {
        std::vector<std::vector<double>> p(counts.size(), std::vector<double>(counts.size(), 0.0));
        for (std::size_t i = 0; i < counts.size(); ++i) {
            std::uint64_t n = 0;
            for (auto c : counts[i]) n += c;
            if (n == 0) continue;
            for (std::size_t j = 0; j < counts.size(); ++j) p[i][j] = 100.0 * double(counts[i][j]) / double(n);
        }
        return p;
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred,
                                 std::vector<std::string> classes) {
    if (truth.size() != pred.size())
        throw EvalError("truth has " + std::to_string(truth.size()) + " labels, predictions " +
                        std::to_string(pred.size()));
    ConfusionMatrix cm(std::move(classes));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || pred[i] < 0) throw EvalError("negative class index");
        cm.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i]));
    }
    return cm;
}

inline ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> pred,
                                 std::vector<std::string> classes) {
    if (truth.size() != pred.size())
        throw EvalError("truth has " + std::to_string(truth.size()) + " labels, predictions " +
                        std::to_string(pred.size()));
    const auto index = [&](const std::string& name) {
        auto it = std::find(classes.begin(), classes.end(), name);
        if (it == classes.end()) throw EvalError("unknown label '" + name + "'");
        return static_cast<std::int32_t>(it - classes.begin());
    };
    std::vector<std::int32_t> t, p;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        t.push_back(index(truth[i]));
        p.push_back(index(pred[i]));
    }
    return confusion(t, p, std::move(classes));
}

inline double accuracy(const ConfusionMatrix& cm) {
    const auto n = cm.total();
    if (n == 0) throw EvalError("accuracy of an empty confusion matrix");
    return double(cm.correct()) / double(n);
}

/// Index of the largest score; ties go to the lower index.
inline std::int32_t argmax(std::span<const float> scores) {
    if (scores.empty()) throw EvalError("argmax of no scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<std::int32_t>(best);
}

/// Predicted class of one image through `interp` (an interpreter over `g`).
inline std::int32_t classify(Interpreter& interp, const ModelGraph& g, const Tensor& image) {
    auto r = interp.invoke(prepare_input(g, image));
    return argmax(output_values(r.outputs.at(0)));
}

struct EvalExample {
    Tensor image;
    std::int32_t label = 0;
};

/// Scores every example; with threads > 1 each worker owns an interpreter
/// and the partial matrices are summed, which is order-independent.
inline ConfusionMatrix evaluate(const ModelGraph& g, std::span<const EvalExample> examples,
                                std::vector<std::string> classes, unsigned threads = 1) {
    ConfusionMatrix total(classes);
    if (examples.empty()) return total;
    threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(examples.size()));
    std::vector<ConfusionMatrix> partial(threads, ConfusionMatrix(classes));
    std::vector<std::exception_ptr> errors(threads);
    const auto work = [&](unsigned t) {
        try {
            Interpreter interp(g);
            for (std::size_t i = t; i < examples.size(); i += threads)
                partial[t].add(static_cast<std::size_t>(examples[i].label),
                               static_cast<std::size_t>(classify(interp, g, examples[i].image)));
        } catch (...) {
            errors[t] = std::current_exception();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (const auto& p : partial) total.merge(p);
    return total;
}

// --------------------------------------------------------------- benchmark

struct BenchReport {
    std::string name;
    double inference_ms = 0;        // median of the timed runs
    std::size_t peak_ram_bytes = 0; // arena peak
    std::size_t rom_bytes = 0;      // serialized model size
    std::optional<double> accuracy; // absent without an eval set
    std::vector<double> run_ms;     // every timed run, in order
};

inline double median(std::vector<double> v) {
    if (v.empty()) throw EvalError("median of no samples");
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct BenchOptions {
    std::size_t reps = 10;
    std::size_t warmup = 2;
    unsigned eval_threads = 1;
    std::vector<std::string> classes = {"other", "rock", "rover"};
};

/// Times `reps` sequential inferences on a fixed input (the first eval
/// image, or zeros) after `warmup` discarded runs, and fills in the static
/// metrics. Accuracy is scored only when `eval_set` is non-empty.
inline BenchReport benchmark(const ModelGraph& g, std::span<const EvalExample> eval_set, const BenchOptions& opts = {},
                             std::string name = "model") {
    if (opts.reps < 3) throw ArgumentError("benchmark needs at least 3 reps");
    BenchReport r;
    r.name = std::move(name);
    Interpreter interp(g);
    r.peak_ram_bytes = interp.plan().peak_bytes;
    r.rom_bytes = rom_size(g);

    const auto& in = g.tensor(g.inputs.at(0));
    const Tensor input = eval_set.empty() ? Tensor::zeros(in.shape, in.dtype, in.qparams)
                                          : prepare_input(g, eval_set.front().image);
    for (std::size_t i = 0; i < opts.warmup; ++i) interp.invoke(input);
    for (std::size_t i = 0; i < opts.reps; ++i) r.run_ms.push_back(interp.invoke(input).trace.total_ms);
    r.inference_ms = median(r.run_ms);

    if (!eval_set.empty()) r.accuracy = accuracy(evaluate(g, eval_set, opts.classes, opts.eval_threads));
    return r;
}

// ------------------------------------------------------------------ report

/// Bytes in 1024-based units with one decimal: 957200 -> "934.8".
inline std::string format_kib(std::size_t bytes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", double(bytes) / 1024.0);
    return buf;
}

inline std::string format_mib(std::size_t bytes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", double(bytes) / (1024.0 * 1024.0));
    return buf;
}

inline const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols = {"Model", "Inference Time (ms)", "Peak RAM (K)", "ROM Usage (M)",
                                                  "Accuracy"};
    return cols;
}

namespace detail {

inline std::vector<std::string> report_cells(const BenchReport& r) {
    char ms[32], acc[32] = "-";
    std::snprintf(ms, sizeof ms, "%.3f", r.inference_ms);
    if (r.accuracy) std::snprintf(acc, sizeof acc, "%.1f%%", *r.accuracy * 100.0);
    return {r.name, ms, format_kib(r.peak_ram_bytes), format_mib(r.rom_bytes), acc};
}

} // namespace detail

/// Aligned text table, one row per report in input order. K and M are
/// 1024-based.
inline std::string report_table(std::span<const BenchReport> reports) {
    if (reports.empty()) throw ArgumentError("report_table needs at least one report");
    std::vector<std::vector<std::string>> rows{report_columns()};
    for (const auto& r : reports) rows.push_back(detail::report_cells(r));
    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::string out;
    const auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += " | ";
            const auto pad = std::string(width[c] - row[c].size(), ' ');
            out += c == 0 ? row[c] + pad : pad + row[c]; // names left, numbers right
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    };
    emit(rows[0]);
    for (std::size_t c = 0; c < width.size(); ++c) {
        if (c) out += "-+-";
        out += std::string(width[c], '-');
    }
    out += '\n';
    for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
    out += "K = 1024 bytes, M = 1024 K. Peak RAM is the activation arena; ROM counts model bytes only.\n";
    return out;
}

/// Tab-separated twin of report_table() with raw byte counts.
inline std::string report_tsv(std::span<const BenchReport> reports) {
    std::string out = "model\tinference_ms\tpeak_ram_bytes\trom_bytes\taccuracy\n";
    for (const auto& r : reports) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "\t%.6f\t%zu\t%zu\t", r.inference_ms, r.peak_ram_bytes, r.rom_bytes);
        out += r.name + buf;
        if (r.accuracy) {
            char acc[32];
            std::snprintf(acc, sizeof acc, "%.6f", *r.accuracy);
            out += acc;
        } else {
            out += '-';
        }
        out += '\n';
    }
    return out;
}

} // namespace rockhunt
