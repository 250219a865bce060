// Command-line front end for the segmentation-error toolkit: synthetic
// dataset generation, pretext and mainstream training, evaluation, colored
// mesh export, the ablation suite, and the gradient-check harness.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "segqa/grad_check.hpp"
#include "segqa/train.hpp"

using namespace segqa;
using nlohmann::json;

namespace {

json load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ParseError("malformed config " + path + ": " + e.what(), 0);
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write: " + path);
    os << content;
}

std::vector<int64_t> split_ids(const SplitResult& split, const std::string& name) {
    if (name == "train") return split.train;
    if (name == "val") return split.val;
    if (name == "test") return split.test;
    throw Error("unknown split name: " + name + " (expected train|val|test)");
}

struct SplitFlags {
    std::vector<int64_t> counts;
    uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--split", counts,
                        "train,val,test sample counts (whole-phantom groups); "
                        "omit for a group-proportional default")
            ->expected(3);
        cmd->add_option("--split-seed", seed, "seed for the phantom-group shuffle");
    }
    std::array<int64_t, 3> resolve() const {
        if (counts.empty()) return {-1, -1, -1};
        return {counts[0], counts[1], counts[2]};
    }
};

int run_grad_check_suite(bool verbose) {
    using DTensor = ad::Tensor<double>;
    struct Case {
        std::string name;
        double max_rel;
    };
    std::vector<Case> cases;
    Rng seeder(20240801);

    auto rand_tensor = [&](ad::Shape shape, double scale = 1.0, double keep_away = 0.0) {
        Rng rng(seeder.next_u64());
        DTensor t = DTensor::zeros(std::move(shape));
        for (auto& v : t.data()) {
            v = rng.normal() * scale;
            if (keep_away > 0 && std::fabs(v) < keep_away) v = v < 0 ? -keep_away : keep_away;
        }
        return t;
    };

    auto check = [&](const std::string& name, auto fn, std::vector<DTensor> inputs) {
        cases.push_back({name, ad::grad_check(fn, inputs)});
    };

    {
        auto a = rand_tensor({3, 4}), b = rand_tensor({3, 4}, 1.0, 0.3);
        check("add", [](auto& xs) { return ad::sum(ad::add(xs[0], xs[1])); }, {a, b});
        check("mul", [](auto& xs) { return ad::sum(ad::mul(xs[0], xs[1])); }, {a, b});
        check("div", [](auto& xs) { return ad::sum(ad::div(xs[0], xs[1])); }, {a, b});
        auto row = rand_tensor({1, 4}, 1.0, 0.3);
        check("broadcast", [](auto& xs) { return ad::sum(ad::mul(xs[0], xs[1])); }, {a, row});
    }
    {
        auto m1 = rand_tensor({3, 4}), m2 = rand_tensor({4, 2});
        check("matmul", [](auto& xs) { return ad::sum(ad::tanh_op(ad::matmul(xs[0], xs[1]))); },
              {m1, m2});
        check("transpose", [](auto& xs) { return ad::sum(ad::mul(ad::transpose(xs[0]), 2.0)); },
              {m1});
    }
    {
        auto x = rand_tensor({4, 5}, 1.0, 0.05);
        check("relu", [](auto& xs) { return ad::sum(ad::relu(xs[0])); }, {x});
        check("leaky_relu", [](auto& xs) { return ad::sum(ad::leaky_relu(xs[0], 0.05)); }, {x});
        check("tanh", [](auto& xs) { return ad::sum(ad::tanh_op(xs[0])); }, {x});
        check("exp", [](auto& xs) { return ad::sum(ad::exp_op(ad::mul(xs[0], 0.5))); }, {x});
        check("softmax", [](auto& xs) { return ad::sum(ad::mul(ad::softmax(xs[0], 1), xs[0])); },
              {x});
        check("log_softmax",
              [](auto& xs) { return ad::sum(ad::mul(ad::log_softmax(xs[0], 1), xs[0])); }, {x});
        check("dropout",
              [](auto& xs) { return ad::sum(ad::tanh_op(ad::dropout(xs[0], 0.4, true, 123))); },
              {x});
        check("sum_axis", [](auto& xs) { return ad::sum(ad::mul(ad::sum_axis(xs[0], 0), 1.5)); },
              {x});
        check("slice", [](auto& xs) { return ad::sum(ad::slice(xs[0], 1, 1, 3)); }, {x});
        check("reshape", [](auto& xs) { return ad::sum(ad::tanh_op(ad::reshape(xs[0], {5, 4}))); },
              {x});
    }
    {
        auto x = rand_tensor({8, 3});
        auto g = rand_tensor({3}, 1.0, 0.2);
        auto b = rand_tensor({3});
        check("batch_norm_train",
              [](auto& xs) {
                  std::vector<double> rm(3, 0.0), rv(3, 1.0);
                  return ad::sum(ad::tanh_op(ad::batch_norm(xs[0], xs[1], xs[2], rm, rv, true)));
              },
              {x, g, b});
    }
    {
        auto x = rand_tensor({1, 2, 3, 3, 3}, 0.7);
        auto w = rand_tensor({3, 2, 2, 2, 2}, 0.5);
        auto b = rand_tensor({3}, 0.3);
        check("conv3d",
              [](auto& xs) { return ad::sum(ad::tanh_op(ad::conv3d(xs[0], xs[1], xs[2]))); },
              {x, w, b});
        auto xt = rand_tensor({1, 3, 2, 2, 2}, 0.7);
        auto wt = rand_tensor({3, 2, 2, 2, 2}, 0.5);
        auto bt = rand_tensor({2}, 0.3);
        check("conv_transpose3d",
              [](auto& xs) {
                  return ad::sum(ad::tanh_op(ad::conv_transpose3d(xs[0], xs[1], xs[2])));
              },
              {xt, wt, bt});
    }
    {
        auto x = rand_tensor({5, 3});
        std::vector<int64_t> idx = {4, 0, 0, 2, 3, 1};
        check("gather_rows",
              [idx](auto& xs) { return ad::sum(ad::tanh_op(ad::gather_rows(xs[0], idx))); }, {x});
        auto y = rand_tensor({6, 3});
        check("scatter_add_rows",
              [idx](auto& xs) { return ad::sum(ad::tanh_op(ad::scatter_add_rows(xs[0], idx, 5))); },
              {y});
    }
    {
        auto p = rand_tensor({6, 1}, 0.8, 0.05);
        auto t = rand_tensor({6, 1}, 0.8, 0.05);
        check("smooth_l1", [t](auto& xs) { return ad::smooth_l1(xs[0], t, 1.0); }, {p});
        check("l1", [t](auto& xs) { return ad::l1_loss(xs[0], t); }, {p});
        auto logits = rand_tensor({5, 4}, 1.2);
        std::vector<int> cls = {0, 3, 1, 2, 2};
        check("cross_entropy", [cls](auto& xs) { return ad::cross_entropy(xs[0], cls); }, {logits});
        auto v = rand_tensor({5, 3}, 1.0, 0.1);
        auto n = rand_tensor({5, 3}, 1.0, 0.1);
        check("cosine_loss", [n](auto& xs) { return ad::cosine_similarity_loss(xs[0], n); }, {v});
    }
    {
        // composed network: encoder -> one attention layer -> head
        nn::ModelConfig cfg;
        cfg.variant = nn::ModelVariant::Full;
        cfg.mode = nn::TaskMode::Regression;
        cfg.encoder = {2, 4, 3};
        cfg.nodeformer.layers = 1;
        cfg.nodeformer.heads = 2;
        cfg.nodeformer.dim = 8;
        cfg.nodeformer.random_features = 8;
        cfg.init_seed = 17;
        nn::SegErrorModel<double> model(cfg);
        Rng rng(31);
        auto sub = DTensor::zeros({6, 1, 5, 5, 5});
        for (auto& v : sub.data()) v = rng.uniform(-1, 1);
        MeshGraph g;
        g.node_positions.resize(6);
        g.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}};
        auto gi = nn::GraphIndex::build(g);
        auto target = DTensor::randn({6, 1}, rng, 0.2);
        auto params = model.store().param_tensors();
        double err = ad::grad_check(
            [&](auto&) { return ad::smooth_l1(model.forward(sub, &gi, true, 99), target, 1.0); },
            params, 1e-5);
        cases.push_back({"encoder+nodeformer+head", err});
    }

    bool ok = true;
    for (const auto& c : cases) {
        bool pass = c.max_rel < 1e-4;
        ok = ok && pass;
        if (verbose || !pass)
            std::printf("%-28s max rel err %.3e  %s\n", c.name.c_str(), c.max_rel,
                        pass ? "ok" : "FAIL");
    }
    std::printf("grad-check: %zu cases, %s\n", cases.size(), ok ? "all under 1e-4" : "FAILURES");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"segmentation-error estimation toolkit"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic phantom dataset");
    std::string gen_config_path, gen_out;
    GenConfig gen_cfg;
    gen->add_option("--config", gen_config_path, "JSON config file");
    auto* gen_out_opt = gen->add_option("--out", gen_out, "output dataset directory");
    auto* gp = gen->add_option("--phantoms", gen_cfg.n_phantoms, "number of phantoms");
    auto* gq = gen->add_option("--perturbations", gen_cfg.perturbations, "perturbations per phantom");
    auto* gg = gen->add_option("--grid", gen_cfg.grid, "cubic grid extent");
    auto* gs = gen->add_option("--spacing", gen_cfg.spacing_mm, "mm per voxel");
    auto* gseed = gen->add_option("--seed", gen_cfg.seed, "master seed");
    auto* gb = gen->add_option("--bumps", gen_cfg.num_bumps, "noise bumps per perturbation");
    auto* gal = gen->add_option("--amp-lo", gen_cfg.amplitude_lo, "bump amplitude lower bound (voxels)");
    auto* gah = gen->add_option("--amp-hi", gen_cfg.amplitude_hi, "bump amplitude upper bound (voxels)");
    auto* gsl = gen->add_option("--sigma-lo", gen_cfg.sigma_lo, "bump sigma lower bound (voxels)");
    auto* gsh = gen->add_option("--sigma-hi", gen_cfg.sigma_hi, "bump sigma upper bound (voxels)");
    auto* ghl = gen->add_option("--hd-lo", gen_cfg.hd_gate_lo, "Hausdorff gate lower bound (voxels)");
    auto* ghh = gen->add_option("--hd-hi", gen_cfg.hd_gate_hi, "Hausdorff gate upper bound (voxels)");
    auto* gdr = gen->add_option("--decimate-ratio", gen_cfg.decimate_ratio, "face-count ratio kept");
    auto* gti = gen->add_option("--taubin-iters", gen_cfg.taubin_iterations, "smoothing iterations");

    // ---- train / pretrain ----
    auto add_train_like = [&](CLI::App* cmd, TrainConfig& cfg, std::string& config_path,
                              SplitFlags& split) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--data", cfg.dataset_dir, "dataset directory");
        cmd->add_option("--out", cfg.out_checkpoint, "output checkpoint path");
        cmd->add_option("--log", cfg.log_path, "JSONL log path (default <out>.log.jsonl)");
        cmd->add_option("--epochs", cfg.epochs, "training epochs");
        cmd->add_option("--lr", cfg.base_lr, "base learning rate");
        cmd->add_option("--min-lr", cfg.min_lr, "cosine schedule floor");
        cmd->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
        cmd->add_option("--optimizer", cfg.optimizer, "auto|adamw|adadelta");
        cmd->add_option("--seed", cfg.seed, "training seed");
        split.attach(cmd);
    };

    auto* train_cmd = app.add_subcommand("train", "train the error model (regression or classification)");
    TrainConfig train_cfg;
    std::string train_config_path;
    SplitFlags train_split;
    train_cmd->add_option("--task", train_cfg.task, "regression|classification");
    train_cmd->add_option("--variant", train_cfg.variant, "full|cnn_mlp|gnn_mlp");
    train_cmd->add_option("--pretrained-encoder", train_cfg.pretrained_encoder,
                          "pretext checkpoint to initialize the encoder from");
    add_train_like(train_cmd, train_cfg, train_config_path, train_split);

    auto* pre_cmd = app.add_subcommand("pretrain", "train a pretext network (vertnorm|recon|maskrecon)");
    TrainConfig pre_cfg;
    pre_cfg.task = "vertnorm";
    pre_cfg.base_lr = 1.0;  // adadelta scale
    std::string pre_config_path;
    SplitFlags pre_split;
    pre_cmd->add_option("--task", pre_cfg.task, "vertnorm|recon|maskrecon");
    pre_cmd->add_option("--mask-ratio", pre_cfg.mask_ratio, "masked fraction for maskrecon");
    add_train_like(pre_cmd, pre_cfg, pre_config_path, pre_split);

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string eval_ckpt, eval_data, eval_split_name = "test", eval_report_path;
    uint64_t eval_seed = 0;
    SplitFlags eval_split;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--split-name", eval_split_name, "train|val|test (default test)");
    eval_cmd->add_option("--report", eval_report_path, "write the JSON report here");
    eval_cmd->add_option("--seed", eval_seed, "seed for stochastic eval losses");
    eval_split.attach(eval_cmd);

    // ---- export-mesh ----
    auto* exp_cmd = app.add_subcommand("export-mesh", "write a colored PLY for a sample");
    std::string exp_data, exp_out, exp_ckpt, exp_mode = "class";
    int64_t exp_sample = 0;
    exp_cmd->add_option("--data", exp_data, "dataset directory")->required();
    exp_cmd->add_option("--sample", exp_sample, "sample id")->required();
    exp_cmd->add_option("--out", exp_out, "output PLY path")->required();
    exp_cmd->add_option("--checkpoint", exp_ckpt,
                        "predict with this checkpoint (omit to color ground truth)");
    exp_cmd->add_option("--mode", exp_mode, "class|sd coloring");
    uint64_t exp_seed = 0;
    exp_cmd->add_option("--seed", exp_seed, "seed (unused in eval-mode prediction)");

    // ---- ablate ----
    auto* abl_cmd = app.add_subcommand("ablate", "train and compare model variants");
    AblationConfig abl_cfg;
    std::string abl_report_path, abl_config_path;
    SplitFlags abl_split;
    abl_cmd->add_option("--config", abl_config_path, "JSON config file");
    abl_cmd->add_option("--data", abl_cfg.dataset_dir, "dataset directory");
    abl_cmd->add_option("--out-dir", abl_cfg.out_dir, "directory for per-variant checkpoints");
    abl_cmd->add_option("--epochs", abl_cfg.epochs, "epochs per variant");
    abl_cmd->add_option("--pretrain-epochs", abl_cfg.pretrain_epochs, "epochs per pretext task");
    abl_cmd->add_option("--seed", abl_cfg.seed, "seed");
    abl_cmd->add_flag("--with-pretraining", abl_cfg.with_pretraining,
                      "also run the three pretext initializations");
    abl_cmd->add_option("--report", abl_report_path, "write the JSON report here");
    abl_split.attach(abl_cmd);

    // ---- grad-check ----
    auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of every operator");
    bool gc_verbose = false;
    gc_cmd->add_flag("--verbose", gc_verbose, "print every case, not only failures");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            if (!gen_config_path.empty()) {
                GenConfig from_file = GenConfig::from_json(load_config_file(gen_config_path));
                // flags override the file
                if (!*gp) gen_cfg.n_phantoms = from_file.n_phantoms;
                if (!*gq) gen_cfg.perturbations = from_file.perturbations;
                if (!*gg) gen_cfg.grid = from_file.grid;
                if (!*gs) gen_cfg.spacing_mm = from_file.spacing_mm;
                if (!*gseed) gen_cfg.seed = from_file.seed;
                if (!*gb) gen_cfg.num_bumps = from_file.num_bumps;
                if (!*gal) gen_cfg.amplitude_lo = from_file.amplitude_lo;
                if (!*gah) gen_cfg.amplitude_hi = from_file.amplitude_hi;
                if (!*gsl) gen_cfg.sigma_lo = from_file.sigma_lo;
                if (!*gsh) gen_cfg.sigma_hi = from_file.sigma_hi;
                if (!*ghl) gen_cfg.hd_gate_lo = from_file.hd_gate_lo;
                if (!*ghh) gen_cfg.hd_gate_hi = from_file.hd_gate_hi;
                if (!*gdr) gen_cfg.decimate_ratio = from_file.decimate_ratio;
                if (!*gti) gen_cfg.taubin_iterations = from_file.taubin_iterations;
            }
            if (!*gen_out_opt) throw Error("gen-data: --out is required");
            gen_cfg.out_dir = gen_out;
            auto res = generate_dataset(gen_cfg);
            std::cout << "wrote " << res.written << " samples (" << res.failed
                      << " failures) to " << gen_cfg.out_dir << "\n";
            return res.written > 0 ? 0 : 1;
        }

        auto run_training = [&](TrainConfig cfg, const std::string& config_path,
                                const SplitFlags& split, bool pretext) {
            if (!config_path.empty()) {
                TrainConfig file_cfg = TrainConfig::from_json(load_config_file(config_path));
                file_cfg.task = cfg.task;
                if (!cfg.dataset_dir.empty()) file_cfg.dataset_dir = cfg.dataset_dir;
                if (!cfg.out_checkpoint.empty()) file_cfg.out_checkpoint = cfg.out_checkpoint;
                if (!cfg.pretrained_encoder.empty())
                    file_cfg.pretrained_encoder = cfg.pretrained_encoder;
                std::swap(cfg, file_cfg);
            }
            cfg.split_counts = split.resolve();
            cfg.split_seed = split.seed;
            if (pretext && !(cfg.task == "vertnorm" || cfg.task == "recon" || cfg.task == "maskrecon"))
                throw Error("pretrain: task must be vertnorm|recon|maskrecon, got " + cfg.task);
            if (!pretext && !(cfg.task == "regression" || cfg.task == "classification"))
                throw Error("train: task must be regression|classification, got " + cfg.task);
            auto result = train(cfg);
            std::cout << "trained " << cfg.task << " (" << cfg.variant << "): best epoch "
                      << result.best_epoch << ", best val loss " << result.best_val_loss
                      << "\ncheckpoint: " << result.checkpoint_path << "\nlog: " << result.log_path
                      << "\n";
            return 0;
        };

        if (train_cmd->parsed()) return run_training(train_cfg, train_config_path, train_split, false);
        if (pre_cmd->parsed()) return run_training(pre_cfg, pre_config_path, pre_split, true);

        if (eval_cmd->parsed()) {
            auto manifest = read_manifest(eval_data);
            auto split = resolve_split(manifest, eval_split.resolve(), eval_split.seed);
            auto ids = split_ids(split, eval_split_name);
            auto report = evaluate_checkpoint(eval_ckpt, eval_data, ids, eval_seed);
            std::cout << report.to_text();
            if (!eval_report_path.empty())
                write_text_file(eval_report_path, report.to_json().dump(2) + "\n");
            return 0;
        }

        if (exp_cmd->parsed()) {
            std::vector<int64_t> only = {exp_sample};
            auto data = DatasetInMemory::load(exp_data, &only);
            auto& ls = data.at_id(exp_sample);
            if (exp_ckpt.empty()) {
                if (exp_mode == "sd") {
                    std::vector<float> mm(ls.sample.sd_labels.size());
                    for (size_t i = 0; i < mm.size(); ++i)
                        mm[i] = float(ls.sample.sd_labels[i] * ls.sample.meta.spacing_mm);
                    export_sd_colored_mesh(ls.sample, mm, 0.5, exp_out);
                } else {
                    export_colored_mesh(ls.sample, ls.sample.class_labels, nullptr, exp_out);
                }
            } else {
                auto file = nn::CheckpointFile::read(exp_ckpt);
                auto model = nn::load_model<float>(file);
                if (model.config().mode == nn::TaskMode::Classification && exp_mode == "class") {
                    auto logits = model.forward(ls.subvolumes, &ls.graph, false, 0);
                    std::vector<uint8_t> pred(ls.sample.node_count());
                    for (size_t i = 0; i < pred.size(); ++i) {
                        int best = 0;
                        for (int c = 1; c < kNumSdClasses; ++c)
                            if (logits.data()[i * kNumSdClasses + size_t(c)] >
                                logits.data()[i * kNumSdClasses + size_t(best)])
                                best = c;
                        pred[i] = uint8_t(best);
                    }
                    export_colored_mesh(ls.sample, pred, &ls.sample.class_labels, exp_out);
                } else {
                    auto sd = model.forward(ls.subvolumes, &ls.graph, false, 0);
                    std::vector<float> mm(sd.data().begin(), sd.data().end());
                    export_sd_colored_mesh(ls.sample, mm, model.config().head.sd_scale, exp_out);
                }
            }
            std::cout << "wrote " << exp_out << "\n";
            return 0;
        }

        if (abl_cmd->parsed()) {
            if (!abl_config_path.empty()) {
                auto j = load_config_file(abl_config_path);
                if (j.contains("model")) abl_cfg.model = nn::ModelConfig::from_json(j.at("model"));
                abl_cfg.epochs = j.value("epochs", abl_cfg.epochs);
                abl_cfg.pretrain_epochs = j.value("pretrain_epochs", abl_cfg.pretrain_epochs);
                abl_cfg.base_lr = j.value("base_lr", abl_cfg.base_lr);
                abl_cfg.weight_decay = j.value("weight_decay", abl_cfg.weight_decay);
                if (abl_cfg.dataset_dir.empty())
                    abl_cfg.dataset_dir = j.value("dataset_dir", abl_cfg.dataset_dir);
                if (abl_cfg.out_dir.empty()) abl_cfg.out_dir = j.value("out_dir", abl_cfg.out_dir);
            }
            if (abl_cfg.dataset_dir.empty()) throw Error("ablate: --data is required");
            if (abl_cfg.out_dir.empty()) throw Error("ablate: --out-dir is required");
            abl_cfg.split_counts = abl_split.resolve();
            abl_cfg.split_seed = abl_split.seed;
            auto report = run_ablation_suite(abl_cfg);
            std::cout << report.to_text();
            if (!abl_report_path.empty())
                write_text_file(abl_report_path, report.to_json().dump(2) + "\n");
            bool any_failed = false;
            for (const auto& r : report.rows) any_failed = any_failed || r.failed;
            return any_failed ? 1 : 0;
        }

        if (gc_cmd->parsed()) return run_grad_check_suite(gc_verbose);
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
