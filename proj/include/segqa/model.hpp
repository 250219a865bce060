#pragma once

#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "segqa/nn.hpp"
#include "segqa/nodeformer.hpp"

namespace segqa::nn {

enum class ModelVariant { Full, CnnMlp, GnnMlp, VertNorm, Recon, MaskRecon };
enum class TaskMode { Regression, Classification };

inline std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::Full: return "full";
        case ModelVariant::CnnMlp: return "cnn_mlp";
        case ModelVariant::GnnMlp: return "gnn_mlp";
        case ModelVariant::VertNorm: return "vertnorm";
        case ModelVariant::Recon: return "recon";
        case ModelVariant::MaskRecon: return "maskrecon";
    }
    return "full";
}

inline ModelVariant variant_from_string(const std::string& s) {
    if (s == "full") return ModelVariant::Full;
    if (s == "cnn_mlp") return ModelVariant::CnnMlp;
    if (s == "gnn_mlp") return ModelVariant::GnnMlp;
    if (s == "vertnorm") return ModelVariant::VertNorm;
    if (s == "recon") return ModelVariant::Recon;
    if (s == "maskrecon") return ModelVariant::MaskRecon;
    throw Error("unknown model variant: " + s);
}

inline std::string to_string(TaskMode m) {
    return m == TaskMode::Regression ? "regression" : "classification";
}

inline TaskMode mode_from_string(const std::string& s) {
    if (s == "regression") return TaskMode::Regression;
    if (s == "classification") return TaskMode::Classification;
    throw Error("unknown task mode: " + s);
}

struct EncoderConfig {
    int c1 = 16;
    int c2 = 32;
    int kernel = 3;
};

struct NodeformerConfig {
    int layers = 3;
    int heads = 8;
    int dim = 64;
    int random_features = 64;
    double tau = 0.25;
    int gumbel_samples = 1;
    bool use_edge_bias = true;
    double leaky_alpha = 0.01;
};

struct HeadConfig {
    double dropout = 0.2;
    double sd_scale = 0.5;  // mm mapped onto the tanh output range
};

struct ModelConfig {
    ModelVariant variant = ModelVariant::Full;
    TaskMode mode = TaskMode::Regression;
    EncoderConfig encoder;
    NodeformerConfig nodeformer;
    HeadConfig head;
    uint64_t init_seed = 1;
    int subvolume_size = 5;

    nlohmann::json to_json() const {
        return {
            {"variant", to_string(variant)},
            {"mode", to_string(mode)},
            {"encoder", {{"c1", encoder.c1}, {"c2", encoder.c2}, {"kernel", encoder.kernel}}},
            {"nodeformer",
             {{"layers", nodeformer.layers},
              {"heads", nodeformer.heads},
              {"dim", nodeformer.dim},
              {"random_features", nodeformer.random_features},
              {"tau", nodeformer.tau},
              {"gumbel_samples", nodeformer.gumbel_samples},
              {"use_edge_bias", nodeformer.use_edge_bias},
              {"leaky_alpha", nodeformer.leaky_alpha}}},
            {"head", {{"dropout", head.dropout}, {"sd_scale", head.sd_scale}}},
            {"init_seed", init_seed},
            {"subvolume_size", subvolume_size},
        };
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.variant = variant_from_string(j.value("variant", "full"));
        c.mode = mode_from_string(j.value("mode", "regression"));
        if (j.contains("encoder")) {
            const auto& e = j["encoder"];
            c.encoder.c1 = e.value("c1", c.encoder.c1);
            c.encoder.c2 = e.value("c2", c.encoder.c2);
            c.encoder.kernel = e.value("kernel", c.encoder.kernel);
        }
        if (j.contains("nodeformer")) {
            const auto& n = j["nodeformer"];
            c.nodeformer.layers = n.value("layers", c.nodeformer.layers);
            c.nodeformer.heads = n.value("heads", c.nodeformer.heads);
            c.nodeformer.dim = n.value("dim", c.nodeformer.dim);
            c.nodeformer.random_features = n.value("random_features", c.nodeformer.random_features);
            c.nodeformer.tau = n.value("tau", c.nodeformer.tau);
            c.nodeformer.gumbel_samples = n.value("gumbel_samples", c.nodeformer.gumbel_samples);
            c.nodeformer.use_edge_bias = n.value("use_edge_bias", c.nodeformer.use_edge_bias);
            c.nodeformer.leaky_alpha = n.value("leaky_alpha", c.nodeformer.leaky_alpha);
        }
        if (j.contains("head")) {
            const auto& h = j["head"];
            c.head.dropout = h.value("dropout", c.head.dropout);
            c.head.sd_scale = h.value("sd_scale", c.head.sd_scale);
        }
        c.init_seed = j.value("init_seed", c.init_seed);
        c.subvolume_size = j.value("subvolume_size", c.subvolume_size);
        return c;
    }
};

// The composite segmentation-error network and its relatives. Which blocks
// exist depends on the variant:
//   full:      conv encoder -> linear lift -> nodeformer stack -> MLP head
//   cnn_mlp:   conv encoder -> MLP head (no graph layers)
//   gnn_mlp:   linear lift of the flat 125-dim subvolume -> nodeformer -> head
//   vertnorm:  conv encoder -> linear head to unit 3-vectors
//   recon / maskrecon: conv encoder -> mirrored transposed-conv decoder
template <class T>
class SegErrorModel {
public:
    explicit SegErrorModel(const ModelConfig& cfg) : cfg_(cfg) {
        Rng rng(cfg.init_seed);
        const int d = cfg.nodeformer.dim;
        const int k = cfg.encoder.kernel;
        const int flat = cfg.subvolume_size * cfg.subvolume_size * cfg.subvolume_size;

        if (has_encoder()) {
            conv1_ = Conv3dLayer<T>(store_, "encoder.conv1", 1, cfg.encoder.c1, k, rng);
            conv2_ = Conv3dLayer<T>(store_, "encoder.conv2", cfg.encoder.c1, cfg.encoder.c2, k, rng);
        }

        switch (cfg.variant) {
            case ModelVariant::Full:
                input_proj_ = Linear<T>(store_, "input_proj", cfg.encoder.c2, d, rng);
                make_nodeformer_stack(rng);
                make_head(d, rng);
                break;
            case ModelVariant::CnnMlp:
                make_head(cfg.encoder.c2, rng);
                break;
            case ModelVariant::GnnMlp:
                input_proj_ = Linear<T>(store_, "input_proj", flat, d, rng);
                make_nodeformer_stack(rng);
                make_head(d, rng);
                break;
            case ModelVariant::VertNorm:
                vertnorm_head_ = Linear<T>(store_, "vertnorm_head", cfg.encoder.c2, 3, rng, 1.0);
                break;
            case ModelVariant::Recon:
            case ModelVariant::MaskRecon:
                deconv1_ = ConvTranspose3dLayer<T>(store_, "decoder.deconv1", cfg.encoder.c2,
                                                   cfg.encoder.c1, k, rng);
                deconv2_ = ConvTranspose3dLayer<T>(store_, "decoder.deconv2", cfg.encoder.c1, 1, k,
                                                   rng);
                break;
        }
    }

    const ModelConfig& config() const { return cfg_; }
    ParameterStore<T>& store() { return store_; }
    const ParameterStore<T>& store() const { return store_; }

    bool has_encoder() const { return cfg_.variant != ModelVariant::GnnMlp; }
    bool has_graph_stack() const {
        return cfg_.variant == ModelVariant::Full || cfg_.variant == ModelVariant::GnnMlp;
    }

    // Conv feature extractor: N x 1 x s x s x s -> N x c2.
    Tensor<T> encode(const Tensor<T>& subvolumes) const {
        check_subvolumes(subvolumes);
        auto h = relu(conv1_.forward(subvolumes));
        h = relu(conv2_.forward(h));
        return flatten_rows(h);
    }

    // Per-node predictions: regression N x 1 (scaled tanh), classification
    // N x 5 logits. The graph index is required for variants with a
    // nodeformer stack.
    Tensor<T> forward(const Tensor<T>& subvolumes, const GraphIndex* graph, bool train,
                      uint64_t seed) const {
        switch (cfg_.variant) {
            case ModelVariant::Full: {
                require_graph(graph);
                auto x = input_proj_.forward(encode(subvolumes));
                for (size_t i = 0; i < layers_.size(); ++i)
                    x = layers_[i].forward(x, *graph, train, derive_seed(seed, i, 0x4e, 0));
                return head_forward(x, train, seed);
            }
            case ModelVariant::CnnMlp:
                return head_forward(encode(subvolumes), train, seed);
            case ModelVariant::GnnMlp: {
                require_graph(graph);
                check_subvolumes(subvolumes);
                auto x = input_proj_.forward(flatten_rows(subvolumes));
                for (size_t i = 0; i < layers_.size(); ++i)
                    x = layers_[i].forward(x, *graph, train, derive_seed(seed, i, 0x4e, 0));
                return head_forward(x, train, seed);
            }
            default:
                throw Error("forward: variant " + to_string(cfg_.variant) +
                            " is a pretext network, use its dedicated entry point");
        }
    }

    // Pretext: node-wise vertex normals, unit length. N x 3.
    Tensor<T> vertnorm_forward(const Tensor<T>& subvolumes) const {
        if (cfg_.variant != ModelVariant::VertNorm)
            throw Error("vertnorm_forward requires the vertnorm variant");
        auto raw = vertnorm_head_.forward(encode(subvolumes));
        auto nrm = sqrt_op(add(sum_axis(mul(raw, raw), 1), T(1e-10)));
        return div(raw, nrm);
    }

    // Pretext: subvolume reconstruction. N x 1 x s x s x s.
    Tensor<T> recon_forward(const Tensor<T>& subvolumes) const {
        if (cfg_.variant != ModelVariant::Recon && cfg_.variant != ModelVariant::MaskRecon)
            throw Error("recon_forward requires a reconstruction variant");
        check_subvolumes(subvolumes);
        auto h = relu(conv1_.forward(subvolumes));
        h = relu(conv2_.forward(h));
        h = relu(deconv1_.forward(h));
        return deconv2_.forward(h);
    }

    void resample_random_features(uint64_t seed) {
        for (size_t i = 0; i < layers_.size(); ++i)
            layers_[i].resample_random_features(derive_seed(seed, i, 0x52, 0));
    }

    std::vector<NodeformerLayer<T>>& nodeformer_layers() { return layers_; }

private:
    void make_nodeformer_stack(Rng& rng) {
        NodeformerLayerConfig lc;
        lc.dim = cfg_.nodeformer.dim;
        lc.heads = cfg_.nodeformer.heads;
        lc.random_features = cfg_.nodeformer.random_features;
        lc.tau = cfg_.nodeformer.tau;
        lc.gumbel_samples = cfg_.nodeformer.gumbel_samples;
        lc.use_edge_bias = cfg_.nodeformer.use_edge_bias;
        lc.leaky_alpha = cfg_.nodeformer.leaky_alpha;
        for (int i = 0; i < cfg_.nodeformer.layers; ++i)
            layers_.emplace_back(store_, "layers." + std::to_string(i), lc, rng);
    }

    void make_head(int in, Rng& rng) {
        head_in_ = in;
        const int h1 = std::max(in / 2, 4), h2 = std::max(in / 4, 4);
        const int out = cfg_.mode == TaskMode::Regression ? 1 : 5;
        fc1_ = Linear<T>(store_, "head.fc1", in, h1, rng);
        bn1_ = BatchNorm1dLayer<T>(store_, "head.bn1", h1);
        fc2_ = Linear<T>(store_, "head.fc2", h1, h2, rng);
        bn2_ = BatchNorm1dLayer<T>(store_, "head.bn2", h2);
        fc3_ = Linear<T>(store_, "head.fc3", h2, out, rng, 1.0);
    }

    Tensor<T> head_forward(const Tensor<T>& x, bool train, uint64_t seed) const {
        auto h = dropout(bn1_.forward(relu(fc1_.forward(x)), train), cfg_.head.dropout, train,
                         derive_seed(seed, 0xd1, 0, 0));
        h = dropout(bn2_.forward(relu(fc2_.forward(h)), train), cfg_.head.dropout, train,
                    derive_seed(seed, 0xd2, 0, 0));
        auto out = fc3_.forward(h);
        if (cfg_.mode == TaskMode::Regression)
            return mul(tanh_op(out), T(cfg_.head.sd_scale));
        return out;  // logits; softmax applied by the loss / evaluation
    }

    void check_subvolumes(const Tensor<T>& s) const {
        const int sz = cfg_.subvolume_size;
        if (s.ndim() != 5 || s.dim(1) != 1 || s.dim(2) != sz || s.dim(3) != sz || s.dim(4) != sz)
            throw ShapeMismatchError("expected subvolumes N x 1 x " + std::to_string(sz) + "^3, got " +
                                     shape_str(s.shape()));
    }

    void require_graph(const GraphIndex* g) const {
        if (!g) throw Error("forward: this variant requires a graph");
    }

    ModelConfig cfg_;
    ParameterStore<T> store_;
    Conv3dLayer<T> conv1_, conv2_;
    Linear<T> input_proj_;
    std::vector<NodeformerLayer<T>> layers_;
    Linear<T> fc1_, fc2_, fc3_;
    BatchNorm1dLayer<T> bn1_, bn2_;
    Linear<T> vertnorm_head_;
    ConvTranspose3dLayer<T> deconv1_, deconv2_;
    int head_in_ = 0;
};

// Copies encoder parameters (names starting "encoder.") from a pretext
// store into a model store. Throws ShapeMismatchError listing every
// offending parameter. Non-encoder parameters are untouched.
template <class T>
inline int transfer_encoder_weights(const ParameterStore<T>& pretext, ParameterStore<T>& target) {
    std::string bad;
    int copied = 0;
    for (const auto& [name, tensor] : pretext.params()) {
        if (name.rfind("encoder.", 0) != 0) continue;
        auto* dst = target.find(name);
        if (!dst) {
            bad += (bad.empty() ? "" : ", ") + name + " (missing in target)";
            continue;
        }
        if (dst->shape() != tensor.shape()) {
            bad += (bad.empty() ? "" : ", ") + name + " " + shape_str(tensor.shape()) + " vs " +
                   shape_str(dst->shape());
            continue;
        }
        dst->data() = tensor.data();
        ++copied;
    }
    if (!bad.empty()) throw ShapeMismatchError("transfer_encoder_weights: " + bad);
    if (copied == 0) throw Error("transfer_encoder_weights: no encoder parameters found");
    return copied;
}

}  // namespace segqa::nn
