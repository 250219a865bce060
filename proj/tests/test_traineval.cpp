#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "segqa/export_mesh.hpp"
#include "segqa/metrics.hpp"
#include "segqa/train.hpp"
#include "support/oracles.hpp"

using namespace segqa;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

GenConfig tiny_dataset_config(const std::string& out_dir, int phantoms = 2, int perturbations = 3) {
    GenConfig cfg;
    cfg.out_dir = out_dir;
    cfg.n_phantoms = phantoms;
    cfg.perturbations = perturbations;
    cfg.grid = 26;
    cfg.spacing_mm = 0.04;
    cfg.seed = 21;
    cfg.num_bumps = 6;
    cfg.amplitude_lo = -5.0;
    cfg.amplitude_hi = 5.0;
    cfg.sigma_lo = 1.5;
    cfg.sigma_hi = 3.0;
    cfg.hd_gate_lo = 0.0;
    cfg.hd_gate_hi = 25.0;
    cfg.taubin_iterations = 3;
    cfg.decimate_ratio = 0.35;
    return cfg;
}

ModelConfig tiny_model() {
    ModelConfig mc;
    mc.encoder = {4, 8, 3};
    mc.nodeformer.layers = 2;
    mc.nodeformer.heads = 2;
    mc.nodeformer.dim = 16;
    mc.nodeformer.random_features = 16;
    mc.init_seed = 5;
    return mc;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("confusion matrix self-consistency and perfect predictions") {
    ConfusionMatrix cm;
    // perfect diagonal
    for (int c = 0; c < 5; ++c)
        for (int i = 0; i < 3 + c; ++i) cm.add(c, c);
    REQUIRE(cm.accuracy() == 1.0);
    for (int c = 0; c < 5; ++c) {
        auto s = cm.class_stats(c);
        REQUIRE(s.precision == 1.0);
        REQUIRE(s.recall == 1.0);
        REQUIRE(s.f1 == 1.0);
    }
    REQUIRE(cm.trace() == cm.total());

    EvalReport r;
    r.task = "classification";
    r.confusion = cm;
    r.finalize_classification();
    REQUIRE(r.accuracy_pct == 100.0);
    REQUIRE(r.macro_f1 == 1.0);
}

TEST_CASE("hand-built confusion matrix matches enumeration") {
    // 10 nodes: 4 C correct, 3 C predicted D, 2 A correct, 1 E predicted C
    ConfusionMatrix cm;
    for (int i = 0; i < 4; ++i) cm.add(2, 2);
    for (int i = 0; i < 3; ++i) cm.add(2, 3);
    for (int i = 0; i < 2; ++i) cm.add(0, 0);
    cm.add(4, 2);

    REQUIRE(cm.total() == 10);
    REQUIRE(cm.counts[2][2] == 4);
    REQUIRE(cm.counts[2][3] == 3);
    REQUIRE(cm.counts[0][0] == 2);
    REQUIRE(cm.counts[4][2] == 1);
    REQUIRE(cm.accuracy() == Catch::Approx(0.6));

    // recall = diagonal / row sum
    REQUIRE(cm.class_stats(2).recall == Catch::Approx(4.0 / 7.0));
    REQUIRE(cm.class_stats(0).recall == 1.0);
    REQUIRE(cm.class_stats(4).recall == 0.0);
    // precision = diagonal / column sum
    REQUIRE(cm.class_stats(2).precision == Catch::Approx(4.0 / 5.0));
    REQUIRE(cm.class_stats(3).precision == 0.0);

    // accuracy from the matrix equals accuracy computed directly
    double direct = (4 + 2 + 0 + 0 + 0) / 10.0;
    REQUIRE(cm.accuracy() == Catch::Approx(direct));
}

TEST_CASE("regression metric accumulation matches the analytic offset case") {
    // constant +0.1 offset: MAE 0.1, MSE 0.01
    double abs_acc = 0, sq_acc = 0;
    const int n = 250;
    Rng rng(3);
    for (int i = 0; i < n; ++i) {
        double truth = rng.uniform(-0.2, 0.2);
        double pred = truth + 0.1;
        abs_acc += std::fabs(pred - truth);
        sq_acc += (pred - truth) * (pred - truth);
    }
    REQUIRE(abs_acc / n == Catch::Approx(0.1).margin(1e-12));
    REQUIRE(sq_acc / n == Catch::Approx(0.01).margin(1e-12));
}

TEST_CASE("colored mesh export paints classes and mismatches") {
    Sample s;
    s.graph.node_positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    s.graph.edges = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    s.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    s.subvolumes.assign(4 * 125, 0.0f);
    s.sd_labels = {0, 0, 0, 0};
    s.normals.assign(12, 0.0f);
    s.class_labels = {0, 1, 2, 4};

    TempDir dir("segqa_export_test");

    // all correct: zero black vertices, class C gets the palette middle entry
    auto path1 = (dir.path / "correct.ply").string();
    std::vector<uint8_t> pred = {0, 1, 2, 4};
    export_colored_mesh(s, pred, &s.class_labels, path1);
    std::vector<RgbColor> colors;
    auto mesh = read_mesh(path1, nullptr, &colors);
    REQUIRE(mesh.faces == s.faces);
    int black = 0;
    for (const auto& c : colors) black += (c == RgbColor{0, 0, 0});
    REQUIRE(black == 0);
    REQUIRE(colors[2] == kSdClassPalette[2]);

    // all wrong: every vertex black
    auto path2 = (dir.path / "wrong.ply").string();
    std::vector<uint8_t> wrong = {1, 2, 3, 0};
    export_colored_mesh(s, wrong, &s.class_labels, path2);
    read_mesh(path2, nullptr, &colors);
    for (const auto& c : colors) REQUIRE(c == RgbColor{0, 0, 0});

    // length mismatch is rejected
    std::vector<uint8_t> short_pred = {0};
    REQUIRE_THROWS_AS(export_colored_mesh(s, short_pred, nullptr, path2), Error);

    // regression ramp export round-trips
    auto path3 = (dir.path / "sd.ply").string();
    std::vector<float> sd = {-0.5f, 0.0f, 0.25f, 0.5f};
    export_sd_colored_mesh(s, sd, 0.5, path3);
    read_mesh(path3, nullptr, &colors);
    REQUIRE(colors[0] == RgbColor{0, 0, 255});    // strongly negative: blue
    REQUIRE(colors[1] == RgbColor{255, 255, 255});  // zero: white
    REQUIRE(colors[3] == RgbColor{255, 0, 0});    // strongly positive: red
}

TEST_CASE("training writes checkpoint and a complete, schedule-consistent log") {
    TempDir data_dir("segqa_train_data");
    TempDir out_dir("segqa_train_out");
    generate_dataset(tiny_dataset_config(data_dir.path.string()));

    TrainConfig tc;
    tc.task = "classification";
    tc.variant = "cnn_mlp";
    tc.dataset_dir = data_dir.path.string();
    tc.out_checkpoint = (out_dir.path / "cls.ckpt").string();
    tc.epochs = 5;
    tc.base_lr = 1e-3;
    tc.weight_decay = 1e-3;
    tc.seed = 3;
    tc.split_counts = {3, 0, 3};
    tc.model = tiny_model();

    auto result = train(tc);
    REQUIRE(std::filesystem::exists(tc.out_checkpoint));
    REQUIRE(std::filesystem::exists(result.log_path));
    REQUIRE(result.log.size() == 5);

    ad::CosineSchedule sched{tc.base_lr, tc.min_lr, 5};
    std::set<int> seen;
    for (const auto& rec : result.log) {
        REQUIRE(seen.insert(rec.epoch).second);  // every epoch exactly once
        REQUIRE(rec.lr == Catch::Approx(sched.lr(rec.epoch)).margin(1e-15));
        REQUIRE(std::isfinite(rec.train_loss));
    }

    // log file: header line + one line per epoch
    std::ifstream is(result.log_path);
    std::string line;
    REQUIRE(std::getline(is, line));
    auto head = nlohmann::json::parse(line);
    REQUIRE(head.at("protocol").at("epochs") == 5);
    REQUIRE(head.at("protocol").at("base_lr") == 1e-3);
    REQUIRE(head.at("protocol").at("weight_decay") == 1e-3);
    int lines = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++lines;
    REQUIRE(lines == 5);

    // best-checkpoint rule: meta records argmin of the validation curve
    auto file = nn::CheckpointFile::read(tc.out_checkpoint);
    double best = 1e300;
    int best_epoch = -1;
    for (const auto& rec : result.log)
        if (rec.val_loss < best) {
            best = rec.val_loss;
            best_epoch = rec.epoch;
        }
    REQUIRE(int(file.header.at("best_epoch")) == best_epoch);
    REQUIRE(double(file.header.at("best_val_loss")) == Catch::Approx(best));
}

TEST_CASE("training is bit-deterministic given the seed") {
    TempDir data_dir("segqa_det_data");
    TempDir out_dir("segqa_det_out");
    generate_dataset(tiny_dataset_config(data_dir.path.string()));

    // identical config (including output paths), run twice
    auto run = [&]() {
        TrainConfig tc;
        tc.task = "regression";
        tc.variant = "full";
        tc.dataset_dir = data_dir.path.string();
        tc.out_checkpoint = (out_dir.path / "model.ckpt").string();
        tc.epochs = 3;
        tc.seed = 9;
        tc.split_counts = {3, 0, 3};
        tc.model = tiny_model();
        return train(tc);
    };
    auto r1 = run();
    auto bytes1 = read_file((out_dir.path / "model.ckpt").string());
    auto log1 = read_file(r1.log_path);
    auto r2 = run();
    auto bytes2 = read_file((out_dir.path / "model.ckpt").string());
    auto log2 = read_file(r2.log_path);

    REQUIRE(r1.log.size() == r2.log.size());
    for (size_t i = 0; i < r1.log.size(); ++i) {
        REQUIRE(r1.log[i].train_loss == r2.log[i].train_loss);
        REQUIRE(r1.log[i].val_loss == r2.log[i].val_loss);
    }
    REQUIRE(bytes1 == bytes2);
    REQUIRE(log1 == log2);
}

TEST_CASE("two-sample overfit run collapses the training loss") {
    TempDir data_dir("segqa_overfit_data");
    TempDir out_dir("segqa_overfit_out");
    auto gen = tiny_dataset_config(data_dir.path.string(), 2, 2);
    gen.decimate_ratio = 0.25;
    generate_dataset(gen);

    TrainConfig tc;
    tc.task = "regression";
    tc.variant = "full";
    tc.dataset_dir = data_dir.path.string();
    tc.out_checkpoint = (out_dir.path / "overfit.ckpt").string();
    tc.epochs = 200;
    tc.base_lr = 3e-3;
    tc.weight_decay = 0.0;
    tc.seed = 4;
    tc.split_counts = {2, 0, 2};
    tc.model = tiny_model();

    auto result = train(tc);
    REQUIRE(result.log.front().train_loss > 0.0);
    REQUIRE(result.log.back().train_loss < 0.10 * result.log.front().train_loss);
}

TEST_CASE("evaluate on perfect and shifted predictions via checkpoints") {
    TempDir data_dir("segqa_eval_data");
    TempDir out_dir("segqa_eval_out");
    generate_dataset(tiny_dataset_config(data_dir.path.string()));

    TrainConfig tc;
    tc.task = "classification";
    tc.variant = "cnn_mlp";
    tc.dataset_dir = data_dir.path.string();
    tc.out_checkpoint = (out_dir.path / "m.ckpt").string();
    tc.epochs = 2;
    tc.seed = 8;
    tc.split_counts = {3, 0, 3};
    tc.model = tiny_model();
    auto tr = train(tc);

    auto report = evaluate_checkpoint(tc.out_checkpoint, tc.dataset_dir, tr.split.test);
    REQUIRE(report.n_samples == 3);
    REQUIRE(report.n_nodes > 0);
    REQUIRE(report.confusion.total() == report.n_nodes);
    REQUIRE(report.accuracy_pct >= 0.0);
    REQUIRE(report.accuracy_pct <= 100.0);

    // metric self-consistency between the matrix and the headline number
    REQUIRE(report.accuracy_pct ==
            Catch::Approx(100.0 * double(report.confusion.trace()) /
                          double(report.confusion.total())));

    // checkpoint round trip: evaluating twice yields identical reports
    // (modulo wall-clock runtime)
    auto report2 = evaluate_checkpoint(tc.out_checkpoint, tc.dataset_dir, tr.split.test);
    auto j1 = report.to_json();
    auto j2 = report2.to_json();
    j1.erase("runtime_seconds");
    j2.erase("runtime_seconds");
    REQUIRE(j1 == j2);

    REQUIRE_THROWS_AS(evaluate_checkpoint(tc.out_checkpoint, tc.dataset_dir, {}), Error);
}

TEST_CASE("pretext tasks train end to end") {
    TempDir data_dir("segqa_pretext_data");
    TempDir out_dir("segqa_pretext_out");
    generate_dataset(tiny_dataset_config(data_dir.path.string()));

    for (const std::string task : {"vertnorm", "recon", "maskrecon"}) {
        TrainConfig tc;
        tc.task = task;
        tc.dataset_dir = data_dir.path.string();
        tc.out_checkpoint = (out_dir.path / (task + ".ckpt")).string();
        tc.epochs = 2;
        tc.base_lr = 1.0;  // adadelta scale
        tc.seed = 6;
        tc.split_counts = {3, 0, 3};
        tc.model = tiny_model();
        auto result = train(tc);
        REQUIRE(result.log.size() == 2);
        for (const auto& rec : result.log) REQUIRE(std::isfinite(rec.train_loss));

        auto file = nn::CheckpointFile::read(tc.out_checkpoint);
        REQUIRE(file.header.at("task") == task);
    }
}

TEST_CASE("ablation suite produces a row per variant with per-class flags") {
    TempDir data_dir("segqa_ablate_data");
    TempDir out_dir("segqa_ablate_out");
    generate_dataset(tiny_dataset_config(data_dir.path.string()));

    AblationConfig ac;
    ac.dataset_dir = data_dir.path.string();
    ac.out_dir = out_dir.path.string();
    ac.epochs = 2;
    ac.seed = 12;
    ac.split_counts = {3, 0, 3};
    ac.model = tiny_model();

    auto report = run_ablation_suite(ac);
    REQUIRE(report.rows.size() == 3);
    for (const auto& row : report.rows) {
        REQUIRE_FALSE(row.failed);
        REQUIRE(row.report.per_class.size() == 5);
    }
    auto j = report.to_json();
    REQUIRE(j.contains("reference_full_scale"));
    REQUIRE(double(j["reference_full_scale"]["regression_mae"]) == Catch::Approx(0.04182));
    REQUIRE(double(j["reference_full_scale"]["classification_accuracy_pct"]) ==
            Catch::Approx(79.53));
    REQUIRE(!report.to_text().empty());
}
