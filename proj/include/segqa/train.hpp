#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "segqa/checkpoint.hpp"
#include "segqa/dataset.hpp"
#include "segqa/export_mesh.hpp"
#include "segqa/losses.hpp"
#include "segqa/metrics.hpp"
#include "segqa/model.hpp"
#include "segqa/optim.hpp"

namespace segqa {

using nn::GraphIndex;
using nn::ModelConfig;
using nn::ModelVariant;
using nn::SegErrorModel;
using nn::TaskMode;
using FTensor = ad::Tensor<float>;

// ---- in-memory dataset ----

struct LoadedSample {
    Sample sample;
    GraphIndex graph;
    FTensor subvolumes;  // N x 1 x s x s x s
};

struct DatasetInMemory {
    nlohmann::json manifest;
    double spacing_mm = 0.02;
    std::vector<LoadedSample> samples;
    std::map<int64_t, size_t> by_id;

    static DatasetInMemory load(const std::string& dir,
                                const std::vector<int64_t>* only_ids = nullptr) {
        namespace fs = std::filesystem;
        DatasetInMemory d;
        d.manifest = read_manifest(dir);
        d.spacing_mm = d.manifest.at("config").value("spacing_mm", 0.02);
        std::set<int64_t> wanted;
        if (only_ids) wanted.insert(only_ids->begin(), only_ids->end());
        for (const auto& entry : d.manifest.at("samples")) {
            int64_t id = entry.at("id");
            if (only_ids && !wanted.count(id)) continue;
            LoadedSample ls;
            ls.sample = read_sample((fs::path(dir) / std::string(entry.at("file"))).string());
            ls.sample.meta.id = id;
            ls.sample.meta.phantom_id = entry.at("phantom");
            ls.sample.meta.hausdorff = entry.at("hausdorff");
            ls.sample.meta.spacing_mm = d.spacing_mm;
            ls.graph = GraphIndex::build(ls.sample.graph);
            const int n = int(ls.sample.node_count());
            const int s = ls.sample.subvolume_size;
            ls.subvolumes = FTensor::from({n, 1, s, s, s}, ls.sample.subvolumes);
            d.by_id[id] = d.samples.size();
            d.samples.push_back(std::move(ls));
        }
        return d;
    }

    LoadedSample& at_id(int64_t id) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw Error("dataset: sample id " + std::to_string(id) + " not loaded");
        return samples[it->second];
    }
};

// ---- configuration ----

struct TrainConfig {
    std::string task = "regression";  // regression|classification|vertnorm|recon|maskrecon
    std::string variant = "full";     // full|cnn_mlp|gnn_mlp
    std::string dataset_dir;
    std::string out_checkpoint;
    std::string log_path;  // defaults to out_checkpoint + ".log.jsonl"
    int epochs = 100;
    double base_lr = 1e-3;
    double min_lr = 0.0;
    double weight_decay = 1e-3;
    std::string optimizer = "auto";  // auto|adamw|adadelta
    uint64_t seed = 0;
    std::array<int64_t, 3> split_counts{-1, -1, -1};  // -1 -> group-proportional
    uint64_t split_seed = 0;
    double mask_ratio = 0.5;
    std::string pretrained_encoder;
    ModelConfig model;

    bool is_pretext() const {
        return task == "vertnorm" || task == "recon" || task == "maskrecon";
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task"] = task;
        j["variant"] = variant;
        j["dataset_dir"] = dataset_dir;
        j["out_checkpoint"] = out_checkpoint;
        j["log_path"] = log_path;
        j["epochs"] = epochs;
        j["base_lr"] = base_lr;
        j["min_lr"] = min_lr;
        j["weight_decay"] = weight_decay;
        j["optimizer"] = optimizer;
        j["seed"] = seed;
        j["split_counts"] = split_counts;
        j["split_seed"] = split_seed;
        j["mask_ratio"] = mask_ratio;
        j["pretrained_encoder"] = pretrained_encoder;
        j["model"] = model.to_json();
        return j;
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        c.task = j.value("task", c.task);
        c.variant = j.value("variant", c.variant);
        c.dataset_dir = j.value("dataset_dir", c.dataset_dir);
        c.out_checkpoint = j.value("out_checkpoint", c.out_checkpoint);
        c.log_path = j.value("log_path", c.log_path);
        c.epochs = j.value("epochs", c.epochs);
        c.base_lr = j.value("base_lr", c.base_lr);
        c.min_lr = j.value("min_lr", c.min_lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.optimizer = j.value("optimizer", c.optimizer);
        c.seed = j.value("seed", c.seed);
        if (j.contains("split_counts")) {
            auto sc = j.at("split_counts");
            for (int i = 0; i < 3; ++i) c.split_counts[size_t(i)] = sc.at(size_t(i));
        }
        c.split_seed = j.value("split_seed", c.split_seed);
        c.mask_ratio = j.value("mask_ratio", c.mask_ratio);
        c.pretrained_encoder = j.value("pretrained_encoder", c.pretrained_encoder);
        if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
        return c;
    }
};

// Group-proportional default: whole phantoms split roughly 70/10/20.
inline SplitResult resolve_split(const nlohmann::json& manifest,
                                 std::array<int64_t, 3> counts, uint64_t seed) {
    if (counts[0] >= 0 && counts[1] >= 0 && counts[2] >= 0)
        return split_dataset(manifest, counts, seed);

    std::map<int, int64_t> group_sizes;
    for (const auto& s : manifest.at("samples")) group_sizes[int(s.at("phantom"))]++;
    const int64_t g = int64_t(group_sizes.size());
    if (g < 2) throw InsufficientSamplesError("resolve_split: need at least 2 phantoms");
    int64_t test_groups = std::max<int64_t>(1, (g * 2) / 10);
    int64_t val_groups = g >= 5 ? std::max<int64_t>(1, g / 10) : 0;
    int64_t train_groups = g - test_groups - val_groups;
    if (train_groups < 1) throw InsufficientSamplesError("resolve_split: too few phantoms");

    // translate group counts into sample counts in shuffled group order
    std::vector<int> order;
    for (auto& [pid, sz] : group_sizes) order.push_back(pid);
    Rng rng(seed);
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    std::array<int64_t, 3> sample_counts{0, 0, 0};
    int64_t gi = 0;
    for (int pid : order) {
        int slot = gi < train_groups ? 0 : (gi < train_groups + val_groups ? 1 : 2);
        sample_counts[size_t(slot)] += group_sizes[pid];
        ++gi;
    }
    return split_dataset(manifest, sample_counts, seed);
}

// ---- per-task loss ----

namespace detail {

inline FTensor regression_target(const LoadedSample& ls, double sd_scale) {
    const size_t n = ls.sample.node_count();
    std::vector<float> t(n);
    for (size_t i = 0; i < n; ++i) {
        double mm = double(ls.sample.sd_labels[i]) * ls.sample.meta.spacing_mm;
        t[i] = float(std::clamp(mm, -sd_scale, sd_scale));
    }
    return FTensor::from({int(n), 1}, std::move(t));
}

inline std::vector<int> class_targets(const LoadedSample& ls) {
    return std::vector<int>(ls.sample.class_labels.begin(), ls.sample.class_labels.end());
}

inline FTensor normal_target(const LoadedSample& ls) {
    return FTensor::from({int(ls.sample.node_count()), 3}, ls.sample.normals);
}

inline FTensor masked_subvolumes(const LoadedSample& ls, double ratio, uint64_t seed) {
    const size_t n = ls.sample.node_count();
    const size_t block = ls.sample.subvolumes.size() / std::max<size_t>(n, 1);
    std::vector<float> masked(ls.sample.subvolumes.size());
    for (size_t i = 0; i < n; ++i) {
        std::vector<float> b(ls.sample.subvolumes.begin() + int64_t(i * block),
                             ls.sample.subvolumes.begin() + int64_t((i + 1) * block));
        auto [mb, ind] = mask_subvolume(b, ratio, derive_seed(seed, i, 0x6d, 0));
        std::copy(mb.begin(), mb.end(), masked.begin() + int64_t(i * block));
    }
    const int s = ls.sample.subvolume_size;
    return FTensor::from({int(n), 1, s, s, s}, std::move(masked));
}

}  // namespace detail

inline FTensor task_loss(const TrainConfig& cfg, SegErrorModel<float>& model, LoadedSample& ls,
                         bool train, uint64_t step_seed) {
    if (cfg.task == "regression") {
        auto pred = model.forward(ls.subvolumes, &ls.graph, train, step_seed);
        return ad::smooth_l1(pred, detail::regression_target(ls, model.config().head.sd_scale),
                             1.0f);
    }
    if (cfg.task == "classification") {
        auto logits = model.forward(ls.subvolumes, &ls.graph, train, step_seed);
        return ad::cross_entropy(logits, detail::class_targets(ls));
    }
    if (cfg.task == "vertnorm") {
        auto pred = model.vertnorm_forward(ls.subvolumes);
        return ad::cosine_similarity_loss(pred, detail::normal_target(ls));
    }
    if (cfg.task == "recon") {
        auto pred = model.recon_forward(ls.subvolumes);
        return ad::l1_loss(pred, ls.subvolumes);
    }
    if (cfg.task == "maskrecon") {
        auto masked = detail::masked_subvolumes(ls, cfg.mask_ratio, step_seed);
        auto pred = model.recon_forward(masked);
        return ad::l1_loss(pred, ls.subvolumes);
    }
    throw Error("unknown task: " + cfg.task);
}

// ---- training ----

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> log;
    int best_epoch = -1;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::string checkpoint_path;
    std::string log_path;
    SplitResult split;
};

inline ModelConfig model_config_for_task(const TrainConfig& cfg) {
    ModelConfig mc = cfg.model;
    if (cfg.task == "regression") {
        mc.variant = nn::variant_from_string(cfg.variant);
        mc.mode = TaskMode::Regression;
    } else if (cfg.task == "classification") {
        mc.variant = nn::variant_from_string(cfg.variant);
        mc.mode = TaskMode::Classification;
    } else if (cfg.task == "vertnorm") {
        mc.variant = ModelVariant::VertNorm;
    } else if (cfg.task == "recon") {
        mc.variant = ModelVariant::Recon;
    } else if (cfg.task == "maskrecon") {
        mc.variant = ModelVariant::MaskRecon;
    } else {
        throw Error("unknown task: " + cfg.task);
    }
    return mc;
}

inline std::unique_ptr<ad::Optimizer<float>> make_optimizer(const TrainConfig& cfg,
                                                            SegErrorModel<float>& model) {
    std::string kind = cfg.optimizer;
    if (kind == "auto") kind = cfg.is_pretext() ? "adadelta" : "adamw";
    if (kind == "adamw") {
        ad::AdamW<float>::Config oc;
        oc.lr = float(cfg.base_lr);
        oc.weight_decay = float(cfg.weight_decay);
        return std::make_unique<ad::AdamW<float>>(model.store().param_tensors(), oc);
    }
    if (kind == "adadelta") {
        ad::Adadelta<float>::Config oc;
        oc.lr = float(cfg.base_lr);
        return std::make_unique<ad::Adadelta<float>>(model.store().param_tensors(), oc);
    }
    throw Error("unknown optimizer: " + cfg.optimizer);
}

// Full training loop: cosine schedule over epochs, seeded per-epoch
// shuffling, one graph per optimization step, best checkpoint selected by
// validation loss.
inline TrainResult train(const TrainConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.dataset_dir.empty()) throw Error("train: dataset_dir required");
    if (cfg.epochs < 1) throw Error("train: epochs must be >= 1");

    auto manifest = read_manifest(cfg.dataset_dir);
    TrainResult result;
    result.split = resolve_split(manifest, cfg.split_counts, cfg.split_seed);

    std::vector<int64_t> load_ids = result.split.train;
    load_ids.insert(load_ids.end(), result.split.val.begin(), result.split.val.end());
    auto data = DatasetInMemory::load(cfg.dataset_dir, &load_ids);

    ModelConfig mc = model_config_for_task(cfg);
    SegErrorModel<float> model(mc);

    std::string provenance;
    if (!cfg.pretrained_encoder.empty()) {
        auto file = nn::CheckpointFile::read(cfg.pretrained_encoder);
        auto pretext = nn::load_model<float>(file);
        nn::transfer_encoder_weights(pretext.store(), model.store());
        provenance = "encoder initialized from " + cfg.pretrained_encoder + " (" +
                     std::string(file.header.at("variant")) + ")";
    }

    auto optimizer = make_optimizer(cfg, model);
    ad::CosineSchedule schedule{cfg.base_lr, cfg.min_lr, int64_t(cfg.epochs)};

    const bool have_val = !result.split.val.empty();
    std::vector<std::vector<float>> best_params, best_buffers;
    auto snapshot = [&]() {
        best_params.clear();
        best_buffers.clear();
        for (const auto& [n, t] : model.store().params()) best_params.push_back(t.data());
        for (const auto& [n, t] : model.store().buffers()) best_buffers.push_back(t.data());
    };
    auto restore = [&]() {
        if (best_params.empty()) return;
        auto& params = const_cast<std::vector<std::pair<std::string, FTensor>>&>(
            model.store().params());
        auto& buffers = const_cast<std::vector<std::pair<std::string, FTensor>>&>(
            model.store().buffers());
        for (size_t i = 0; i < params.size(); ++i) params[i].second.data() = best_params[i];
        for (size_t i = 0; i < buffers.size(); ++i) buffers[i].second.data() = best_buffers[i];
    };

    std::vector<int64_t> order = result.split.train;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = schedule.lr(epoch);
        optimizer->set_lr(float(lr));

        Rng shuffle_rng(derive_seed(cfg.seed, uint64_t(epoch), 0x53, 0));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        double train_loss = 0.0;
        for (int64_t id : order) {
            auto& ls = data.at_id(id);
            optimizer->zero_grad();
            auto loss = task_loss(cfg, model, ls, true,
                                  derive_seed(cfg.seed, uint64_t(epoch), uint64_t(id), 0x57));
            loss.backward();
            optimizer->step();
            train_loss += double(loss.item());
        }
        train_loss /= double(std::max<size_t>(order.size(), 1));

        double val_loss = train_loss;
        if (have_val) {
            val_loss = 0.0;
            for (int64_t id : result.split.val) {
                auto& ls = data.at_id(id);
                auto loss = task_loss(cfg, model, ls, false, derive_seed(cfg.seed, uint64_t(id), 0xe, 0));
                val_loss += double(loss.item());
            }
            val_loss /= double(result.split.val.size());
        }

        if (val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            snapshot();
        }
        result.log.push_back({epoch, lr, train_loss, val_loss});
    }

    restore();  // reported model is the min-validation-loss epoch, never simply the last

    if (!cfg.out_checkpoint.empty()) {
        fs::path ckpt(cfg.out_checkpoint);
        if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
        nlohmann::json meta;
        meta["task"] = cfg.task;
        meta["best_epoch"] = result.best_epoch;
        meta["best_val_loss"] = result.best_val_loss;
        meta["trained_epochs"] = cfg.epochs;
        meta["train_config"] = cfg.to_json();
        if (!provenance.empty()) meta["provenance"] = provenance;
        nn::save_checkpoint(cfg.out_checkpoint, model, optimizer.get(), meta);
        result.checkpoint_path = cfg.out_checkpoint;

        std::string log_path = cfg.log_path.empty() ? cfg.out_checkpoint + ".log.jsonl" : cfg.log_path;
        std::ofstream os(log_path);
        if (!os) throw IoError("cannot write log: " + log_path);
        nlohmann::json head;
        head["protocol"] = {{"task", cfg.task},       {"variant", cfg.variant},
                            {"epochs", cfg.epochs},   {"base_lr", cfg.base_lr},
                            {"weight_decay", cfg.weight_decay},
                            {"optimizer", optimizer->kind()},
                            {"schedule", "cosine"},   {"seed", cfg.seed},
                            {"val_available", have_val}};
        os << head.dump() << "\n";
        for (const auto& r : result.log) {
            nlohmann::json line = {{"epoch", r.epoch},
                                   {"lr", r.lr},
                                   {"train_loss", r.train_loss},
                                   {"val_loss", r.val_loss}};
            os << line.dump() << "\n";
        }
        result.log_path = log_path;
    }
    return result;
}

// ---- evaluation ----

inline EvalReport evaluate_model(SegErrorModel<float>& model, const std::string& task,
                                 DatasetInMemory& data, const std::vector<int64_t>& ids,
                                 double mask_ratio = 0.5, uint64_t seed = 0) {
    if (ids.empty()) throw Error("evaluate: empty split");
    auto t0 = std::chrono::steady_clock::now();

    EvalReport report;
    report.task = task;
    report.variant = to_string(model.config().variant);
    report.n_samples = int64_t(ids.size());

    double abs_acc = 0.0, sq_acc = 0.0, loss_acc = 0.0;
    int64_t clamped = 0;

    for (int64_t id : ids) {
        auto& ls = data.at_id(id);
        const size_t n = ls.sample.node_count();
        report.n_nodes += int64_t(n);

        if (task == "regression") {
            auto pred = model.forward(ls.subvolumes, &ls.graph, false, 0);
            const double sd_scale = model.config().head.sd_scale;
            for (size_t i = 0; i < n; ++i) {
                double truth = double(ls.sample.sd_labels[i]) * ls.sample.meta.spacing_mm;
                if (std::fabs(truth) > sd_scale) ++clamped;
                double err = double(pred.data()[i]) - truth;
                abs_acc += std::fabs(err);
                sq_acc += err * err;
            }
        } else if (task == "classification") {
            auto logits = model.forward(ls.subvolumes, &ls.graph, false, 0);
            for (size_t i = 0; i < n; ++i) {
                int best = 0;
                for (int c = 1; c < kNumSdClasses; ++c)
                    if (logits.data()[i * kNumSdClasses + size_t(c)] >
                        logits.data()[i * kNumSdClasses + size_t(best)])
                        best = c;
                report.confusion.add(int(ls.sample.class_labels[i]), best);
            }
        } else {
            TrainConfig tmp;
            tmp.task = task;
            tmp.mask_ratio = mask_ratio;
            auto loss = task_loss(tmp, model, ls, false, derive_seed(seed, uint64_t(id), 0xe, 0));
            loss_acc += double(loss.item());
        }
    }

    if (task == "regression") {
        report.mae = abs_acc / double(report.n_nodes);
        report.mse = sq_acc / double(report.n_nodes);
        report.clamp_rate = double(clamped) / double(report.n_nodes);
    } else if (task == "classification") {
        report.finalize_classification();
    } else {
        report.mean_loss = loss_acc / double(report.n_samples);
    }
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                                      const std::string& dataset_dir,
                                      const std::vector<int64_t>& ids, uint64_t seed = 0) {
    auto file = nn::CheckpointFile::read(checkpoint_path);
    auto model = nn::load_model<float>(file);
    std::string task = file.header.value("task", "regression");
    double mask_ratio = 0.5;
    if (file.header.contains("train_config"))
        mask_ratio = file.header.at("train_config").value("mask_ratio", 0.5);
    auto data = DatasetInMemory::load(dataset_dir, &ids);
    return evaluate_model(model, task, data, ids, mask_ratio, seed);
}

// ---- ablation suite ----

struct AblationConfig {
    std::string dataset_dir;
    std::string out_dir;
    int epochs = 30;
    int pretrain_epochs = 20;
    double base_lr = 1e-3;
    double weight_decay = 1e-3;
    double pretrain_lr = 1.0;
    uint64_t seed = 0;
    std::array<int64_t, 3> split_counts{-1, -1, -1};
    uint64_t split_seed = 0;
    bool with_pretraining = false;
    ModelConfig model;
};

struct AblationRow {
    std::string name;
    bool failed = false;
    std::string error;
    EvalReport report;
    std::vector<char> low_recall_classes;  // recall < 10%
};

struct AblationReport {
    std::vector<AblationRow> rows;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["rows"] = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json row;
            row["name"] = r.name;
            row["failed"] = r.failed;
            if (r.failed) {
                row["error"] = r.error;
            } else {
                row["report"] = r.report.to_json();
                row["low_recall_classes"] = std::string(r.low_recall_classes.begin(),
                                                        r.low_recall_classes.end());
            }
            j["rows"].push_back(row);
        }
        // published full-scale reference values for context (original
        // scanned dataset; not reproducible at desk scale)
        j["reference_full_scale"] = {{"regression_mae", 0.04182},
                                     {"regression_mse", 0.00429},
                                     {"classification_accuracy_pct", 79.53},
                                     {"classification_f1", 0.6943}};
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "variant              accuracy%   macroP   macroR   macroF1  low-recall\n";
        for (const auto& r : rows) {
            if (r.failed) {
                os << r.name << "  FAILED: " << r.error << "\n";
                continue;
            }
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-20s %8.2f %8.3f %8.3f %8.3f  %s\n", r.name.c_str(),
                          r.report.accuracy_pct, r.report.macro_precision, r.report.macro_recall,
                          r.report.macro_f1,
                          std::string(r.low_recall_classes.begin(), r.low_recall_classes.end())
                              .c_str());
            os << buf;
        }
        return os.str();
    }
};

// Trains and evaluates the classification variants side by side; optionally
// adds the three pretext initializations of the full model.
inline AblationReport run_ablation_suite(const AblationConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    AblationReport report;

    auto manifest = read_manifest(cfg.dataset_dir);
    auto split = resolve_split(manifest, cfg.split_counts, cfg.split_seed);

    auto base_train_config = [&](const std::string& variant) {
        TrainConfig tc;
        tc.task = "classification";
        tc.variant = variant;
        tc.dataset_dir = cfg.dataset_dir;
        tc.epochs = cfg.epochs;
        tc.base_lr = cfg.base_lr;
        tc.weight_decay = cfg.weight_decay;
        tc.seed = cfg.seed;
        tc.split_counts = cfg.split_counts;
        tc.split_seed = cfg.split_seed;
        tc.model = cfg.model;
        return tc;
    };

    auto run_row = [&](const std::string& name, TrainConfig tc) {
        AblationRow row;
        row.name = name;
        try {
            tc.out_checkpoint = (fs::path(cfg.out_dir) / (name + ".ckpt")).string();
            auto tr = train(tc);
            row.report = evaluate_checkpoint(tc.out_checkpoint, cfg.dataset_dir, split.test);
            for (int c = 0; c < kNumSdClasses; ++c)
                if (row.report.per_class[size_t(c)].recall < 0.10)
                    row.low_recall_classes.push_back(sd_class_letter(SdClass(c)));
        } catch (const Error& e) {
            row.failed = true;
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    };

    run_row("full", base_train_config("full"));
    run_row("cnn_mlp", base_train_config("cnn_mlp"));
    run_row("gnn_mlp", base_train_config("gnn_mlp"));

    if (cfg.with_pretraining) {
        for (const std::string pretext : {"vertnorm", "recon", "maskrecon"}) {
            try {
                TrainConfig pc;
                pc.task = pretext;
                pc.dataset_dir = cfg.dataset_dir;
                pc.epochs = cfg.pretrain_epochs;
                pc.base_lr = cfg.pretrain_lr;
                pc.seed = cfg.seed;
                pc.split_counts = cfg.split_counts;
                pc.split_seed = cfg.split_seed;
                pc.model = cfg.model;
                pc.out_checkpoint = (fs::path(cfg.out_dir) / (pretext + ".ckpt")).string();
                train(pc);

                auto tc = base_train_config("full");
                tc.pretrained_encoder = pc.out_checkpoint;
                run_row("full+" + pretext, tc);
            } catch (const Error& e) {
                AblationRow row;
                row.name = "full+" + pretext;
                row.failed = true;
                row.error = e.what();
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

}  // namespace segqa
