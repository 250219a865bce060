#pragma once

#include <cstdint>
#include <vector>

#include "segqa/mesh.hpp"
#include "segqa/nn.hpp"
#include "segqa/rng.hpp"
#include "segqa/tensor.hpp"

namespace segqa::nn {

// Edge indexing of a mesh graph prepared for gather/scatter: both directions
// of every undirected edge, plus 1/degree per node (0 for isolated nodes).
struct GraphIndex {
    int n = 0;
    std::vector<int64_t> src, dst;
    std::vector<double> inv_degree;

    static GraphIndex build(const MeshGraph& g) {
        GraphIndex gi;
        gi.n = int(g.node_count());
        gi.src.reserve(g.edges.size() * 2);
        gi.dst.reserve(g.edges.size() * 2);
        std::vector<int64_t> degree(g.node_count(), 0);
        for (auto [i, j] : g.edges) {
            gi.src.push_back(i);
            gi.dst.push_back(j);
            gi.src.push_back(j);
            gi.dst.push_back(i);
            ++degree[i];
            ++degree[j];
        }
        gi.inv_degree.resize(g.node_count());
        for (size_t i = 0; i < degree.size(); ++i)
            gi.inv_degree[i] = degree[i] ? 1.0 / double(degree[i]) : 0.0;
        return gi;
    }
};

// Linear-time attention with positive random features
// phi(x) = exp(w^T x - |x|^2 / 2) / sqrt(m) over m shared Gaussian directions:
// out_i = sum_j [phi(q_i)^T phi(k_j)] v_j / sum_j phi(q_i)^T phi(k_j),
// computed via two global sums in O(N m d). The 1/sqrt(m) factor and the
// detached max-stabilizers cancel in the ratio. Approximates dense softmax
// attention with scores q_i . k_j.
template <class T>
Tensor<T> kernel_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                           const Tensor<T>& random_features) {
    auto project = [&](const Tensor<T>& x) {
        auto a = matmul(x, transpose(random_features));            // N x m
        auto sq = mul(sum_axis(mul(x, x), 1), T(0.5));             // N x 1
        return sub(a, sq);
    };

    auto logit_q = project(q);
    auto logit_k = project(k);

    auto stab_q = Tensor<T>::from({q.dim(0), 1}, rowwise_max_values(logit_q));
    auto row_max_k = rowwise_max_values(logit_k);
    T global_max_k = row_max_k[0];
    for (T x : row_max_k) global_max_k = std::max(global_max_k, x);
    auto phi_q = exp_op(sub(logit_q, stab_q));
    auto phi_k = exp_op(add(logit_k, T(-global_max_k)));

    auto phi_k_t = transpose(phi_k);                                // m x N
    auto kv = matmul(phi_k_t, v);                                   // m x dh
    auto ksum = sum_axis(phi_k_t, 1);                               // m x 1
    auto numer = matmul(phi_q, kv);                                 // N x dh
    auto denom = matmul(phi_q, ksum);                               // N x 1
    return div(numer, denom);
}

struct NodeformerLayerConfig {
    int dim = 64;
    int heads = 8;
    int random_features = 64;
    double tau = 0.25;
    int gumbel_samples = 1;
    bool use_edge_bias = true;
    double leaky_alpha = 0.01;
};

// One graph-transformer layer: per-head kernelized attention over all node
// pairs with Gumbel-perturbed keys during training, optional learned-weight
// neighbor-mean edge bias, residual connection, batch norm, leaky relu.
template <class T>
struct NodeformerLayer {
    NodeformerLayerConfig cfg;
    Linear<T> q_proj, k_proj, v_proj;
    Tensor<T> edge_weight;      // {1}
    BatchNorm1dLayer<T> bn;
    Tensor<T> random_features;  // buffer, m x (dim/heads), shared by all heads

    NodeformerLayer() = default;
    NodeformerLayer(ParameterStore<T>& store, const std::string& prefix,
                    const NodeformerLayerConfig& c, Rng& rng)
        : cfg(c) {
        if (cfg.dim % cfg.heads != 0) throw Error("nodeformer: dim must be divisible by heads");
        if (cfg.random_features < 1) throw Error("nodeformer: random_features must be >= 1");
        if (!(cfg.tau > 0)) throw Error("nodeformer: tau must be > 0");
        q_proj = Linear<T>(store, prefix + ".q", cfg.dim, cfg.dim, rng, 1.0);
        k_proj = Linear<T>(store, prefix + ".k", cfg.dim, cfg.dim, rng, 1.0);
        v_proj = Linear<T>(store, prefix + ".v", cfg.dim, cfg.dim, rng, 1.0);
        edge_weight = store.add_param(prefix + ".edge_weight", Tensor<T>::full({1}, T(1)));
        bn = BatchNorm1dLayer<T>(store, prefix + ".bn", cfg.dim);
        random_features = store.add_buffer(
            prefix + ".random_features",
            Tensor<T>::randn({cfg.random_features, cfg.dim / cfg.heads}, rng));
    }

    // Redraws the shared random directions; used by the approximation tests.
    void resample_random_features(uint64_t seed) {
        Rng rng(seed);
        for (auto& x : random_features.data()) x = T(rng.normal());
    }

    Tensor<T> forward(const Tensor<T>& x, const GraphIndex& graph, bool train,
                      uint64_t seed) const {
        const int n = x.dim(0);
        const int dh = cfg.dim / cfg.heads;

        auto q = q_proj.forward(x);
        auto k = k_proj.forward(x);
        auto v = v_proj.forward(x);

        std::vector<Tensor<T>> head_outputs;
        for (int h = 0; h < cfg.heads; ++h) {
            auto qh = slice(q, 1, h * dh, dh);
            auto kh = slice(k, 1, h * dh, dh);
            auto vh = slice(v, 1, h * dh, dh);

            if (!train) {
                head_outputs.push_back(kernel_attention(qh, kh, vh, random_features));
                continue;
            }
            // training samples latent structures: keys perturbed by tau-scaled
            // Gumbel noise, attention averaged over gumbel_samples draws
            Tensor<T> acc;
            for (int s = 0; s < cfg.gumbel_samples; ++s) {
                Rng rng(derive_seed(seed, uint64_t(h), uint64_t(s), 0x6b));
                Tensor<T> g = Tensor<T>::zeros({n, dh});
                for (auto& gv : g.data()) gv = T(cfg.tau * rng.gumbel());
                auto out = kernel_attention(qh, add(kh, g), vh, random_features);
                acc = (s == 0) ? out : add(acc, out);
            }
            head_outputs.push_back(cfg.gumbel_samples > 1
                                       ? mul(acc, T(1.0 / cfg.gumbel_samples))
                                       : acc);
        }
        auto attn = concat(head_outputs, 1);  // N x dim

        if (cfg.use_edge_bias && !graph.src.empty()) {
            auto gathered = gather_rows(v, graph.src);
            auto summed = scatter_add_rows(gathered, graph.dst, n);
            std::vector<T> invdeg(graph.inv_degree.begin(), graph.inv_degree.end());
            auto nbr_mean = mul(summed, Tensor<T>::from({n, 1}, invdeg));
            attn = add(attn, mul(nbr_mean, edge_weight));
        }

        auto res = add(attn, x);
        return leaky_relu(bn.forward(res, train), T(cfg.leaky_alpha));
    }
};

}  // namespace segqa::nn
