#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "segqa/dataset.hpp"
#include "segqa/errors.hpp"

namespace segqa {

struct ClassStats {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t support = 0;
};

// 5x5 confusion matrix, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::array<std::array<int64_t, kNumSdClasses>, kNumSdClasses> counts{};

    void add(int truth, int pred) {
        if (truth < 0 || truth >= kNumSdClasses || pred < 0 || pred >= kNumSdClasses)
            throw Error("confusion matrix: class index out of range");
        ++counts[size_t(truth)][size_t(pred)];
    }

    int64_t total() const {
        int64_t t = 0;
        for (const auto& row : counts)
            for (int64_t c : row) t += c;
        return t;
    }
    int64_t row_sum(int i) const {
        int64_t t = 0;
        for (int64_t c : counts[size_t(i)]) t += c;
        return t;
    }
    int64_t col_sum(int j) const {
        int64_t t = 0;
        for (const auto& row : counts) t += row[size_t(j)];
        return t;
    }
    int64_t trace() const {
        int64_t t = 0;
        for (int i = 0; i < kNumSdClasses; ++i) t += counts[size_t(i)][size_t(i)];
        return t;
    }

    double accuracy() const {
        int64_t t = total();
        return t ? double(trace()) / double(t) : 0.0;
    }

    ClassStats class_stats(int i) const {
        ClassStats s;
        s.support = row_sum(i);
        int64_t tp = counts[size_t(i)][size_t(i)];
        int64_t pred = col_sum(i);
        s.precision = pred ? double(tp) / double(pred) : 0.0;
        s.recall = s.support ? double(tp) / double(s.support) : 0.0;
        s.f1 = (s.precision + s.recall) > 0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : counts) rows.push_back(row);
        return rows;
    }
};

// Node-level evaluation summary. Regression reports MAE/MSE in mm;
// classification reports accuracy, the confusion matrix, and per-class plus
// macro-averaged precision/recall/F1 (micro averages equal accuracy for
// single-label classification and are emitted for completeness).
struct EvalReport {
    std::string task;
    std::string variant;
    int64_t n_samples = 0;
    int64_t n_nodes = 0;
    double runtime_seconds = 0.0;

    double mae = 0.0;
    double mse = 0.0;
    double clamp_rate = 0.0;

    double accuracy_pct = 0.0;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    std::vector<ClassStats> per_class;
    ConfusionMatrix confusion;

    double mean_loss = 0.0;  // pretext tasks

    bool is_classification() const { return task == "classification"; }
    bool is_regression() const { return task == "regression"; }

    void finalize_classification() {
        per_class.clear();
        macro_precision = macro_recall = macro_f1 = 0.0;
        for (int i = 0; i < kNumSdClasses; ++i) {
            auto s = confusion.class_stats(i);
            per_class.push_back(s);
            macro_precision += s.precision / kNumSdClasses;
            macro_recall += s.recall / kNumSdClasses;
            macro_f1 += s.f1 / kNumSdClasses;
        }
        accuracy_pct = 100.0 * confusion.accuracy();
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task"] = task;
        j["variant"] = variant;
        j["n_samples"] = n_samples;
        j["n_nodes"] = n_nodes;
        j["runtime_seconds"] = runtime_seconds;
        if (is_regression()) {
            j["mae"] = mae;
            j["mse"] = mse;
            j["clamp_rate"] = clamp_rate;
        } else if (is_classification()) {
            j["accuracy_pct"] = accuracy_pct;
            j["averaging"] = "macro (headline); micro equals accuracy";
            j["macro"] = {{"precision", macro_precision},
                          {"recall", macro_recall},
                          {"f1", macro_f1}};
            j["micro"] = {{"precision", accuracy_pct / 100.0},
                          {"recall", accuracy_pct / 100.0},
                          {"f1", accuracy_pct / 100.0}};
            nlohmann::json pc = nlohmann::json::array();
            for (int i = 0; i < kNumSdClasses; ++i)
                pc.push_back({{"class", std::string(1, sd_class_letter(SdClass(i)))},
                              {"precision", per_class[size_t(i)].precision},
                              {"recall", per_class[size_t(i)].recall},
                              {"f1", per_class[size_t(i)].f1},
                              {"support", per_class[size_t(i)].support}});
            j["per_class"] = pc;
            j["confusion_rows_true_cols_pred"] = confusion.to_json();
        } else {
            j["mean_loss"] = mean_loss;
        }
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "task: " << task << "  variant: " << variant << "\n";
        os << "samples: " << n_samples << "  nodes: " << n_nodes << "  runtime: "
           << runtime_seconds << " s\n";
        if (is_regression()) {
            os << "MAE: " << mae << " mm  MSE: " << mse << " mm^2  clamp rate: " << clamp_rate
               << "\n";
        } else if (is_classification()) {
            os << "accuracy: " << accuracy_pct << "%  (macro averages; micro = accuracy)\n";
            os << "macro P/R/F1: " << macro_precision << " / " << macro_recall << " / " << macro_f1
               << "\n";
            os << "per-class (P, R, F1, support):\n";
            for (int i = 0; i < kNumSdClasses; ++i)
                os << "  " << sd_class_letter(SdClass(i)) << ": " << per_class[size_t(i)].precision
                   << ", " << per_class[size_t(i)].recall << ", " << per_class[size_t(i)].f1
                   << ", " << per_class[size_t(i)].support << "\n";
            os << "confusion (rows true A..E, cols predicted A..E):\n";
            for (int i = 0; i < kNumSdClasses; ++i) {
                os << " ";
                for (int c = 0; c < kNumSdClasses; ++c) os << "\t" << confusion.counts[size_t(i)][size_t(c)];
                os << "\n";
            }
        } else {
            os << "mean loss: " << mean_loss << "\n";
        }
        return os.str();
    }
};

}  // namespace segqa
