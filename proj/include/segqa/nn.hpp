#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "segqa/rng.hpp"
#include "segqa/tensor.hpp"
#include "segqa/tensor_nn.hpp"

namespace segqa::nn {

using namespace segqa::ad;

// Ordered, named registry of trainable parameters and non-trainable buffers.
// Tensors are shared handles: layers and the store see the same storage.
template <class T>
class ParameterStore {
public:
    Tensor<T>& add_param(const std::string& name, Tensor<T> t) {
        check_unique(name);
        t.set_requires_grad(true);
        index_[name] = {0, params_.size()};
        params_.emplace_back(name, std::move(t));
        return params_.back().second;
    }

    Tensor<T>& add_buffer(const std::string& name, Tensor<T> t) {
        check_unique(name);
        t.set_requires_grad(false);
        index_[name] = {1, buffers_.size()};
        buffers_.emplace_back(name, std::move(t));
        return buffers_.back().second;
    }

    const std::vector<std::pair<std::string, Tensor<T>>>& params() const { return params_; }
    const std::vector<std::pair<std::string, Tensor<T>>>& buffers() const { return buffers_; }

    std::vector<Tensor<T>> param_tensors() const {
        std::vector<Tensor<T>> out;
        for (const auto& [n, t] : params_) out.push_back(t);
        return out;
    }

    Tensor<T>* find(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) return nullptr;
        auto [list, idx] = it->second;
        return list == 0 ? &params_[idx].second : &buffers_[idx].second;
    }
    const Tensor<T>* find(const std::string& name) const {
        return const_cast<ParameterStore*>(this)->find(name);
    }

    int64_t total_parameters() const {
        int64_t n = 0;
        for (const auto& [name, t] : params_) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

private:
    void check_unique(const std::string& name) const {
        if (index_.count(name)) throw Error("ParameterStore: duplicate name " + name);
    }

    std::vector<std::pair<std::string, Tensor<T>>> params_, buffers_;
    std::unordered_map<std::string, std::pair<int, size_t>> index_;
};

// ---- layers ----

template <class T>
struct Linear {
    Tensor<T> weight;  // in x out
    Tensor<T> bias;    // 1 x out

    Linear() = default;
    Linear(ParameterStore<T>& store, const std::string& prefix, int in, int out, Rng& rng,
           double gain = std::sqrt(2.0)) {
        T stddev = T(gain / std::sqrt(double(in)));
        weight = store.add_param(prefix + ".weight", Tensor<T>::randn({in, out}, rng, stddev));
        bias = store.add_param(prefix + ".bias", Tensor<T>::zeros({1, out}));
    }

    Tensor<T> forward(const Tensor<T>& x) const { return add(matmul(x, weight), bias); }
};

template <class T>
struct Conv3dLayer {
    Tensor<T> weight;  // K x C x k x k x k
    Tensor<T> bias;    // K

    Conv3dLayer() = default;
    Conv3dLayer(ParameterStore<T>& store, const std::string& prefix, int cin, int cout, int k,
                Rng& rng) {
        T stddev = T(std::sqrt(2.0 / (double(cin) * k * k * k)));
        weight = store.add_param(prefix + ".weight",
                                 Tensor<T>::randn({cout, cin, k, k, k}, rng, stddev));
        bias = store.add_param(prefix + ".bias", Tensor<T>::zeros({cout}));
    }

    Tensor<T> forward(const Tensor<T>& x) const { return conv3d(x, weight, bias); }
};

template <class T>
struct ConvTranspose3dLayer {
    Tensor<T> weight;  // C x K x k x k x k
    Tensor<T> bias;    // K

    ConvTranspose3dLayer() = default;
    ConvTranspose3dLayer(ParameterStore<T>& store, const std::string& prefix, int cin, int cout,
                         int k, Rng& rng) {
        T stddev = T(std::sqrt(2.0 / (double(cin) * k * k * k)));
        weight = store.add_param(prefix + ".weight",
                                 Tensor<T>::randn({cin, cout, k, k, k}, rng, stddev));
        bias = store.add_param(prefix + ".bias", Tensor<T>::zeros({cout}));
    }

    Tensor<T> forward(const Tensor<T>& x) const { return conv_transpose3d(x, weight, bias); }
};

template <class T>
struct BatchNorm1dLayer {
    Tensor<T> gamma, beta;
    Tensor<T> running_mean, running_var;  // buffers

    BatchNorm1dLayer() = default;
    BatchNorm1dLayer(ParameterStore<T>& store, const std::string& prefix, int dim) {
        gamma = store.add_param(prefix + ".gamma", Tensor<T>::full({dim}, T(1)));
        beta = store.add_param(prefix + ".beta", Tensor<T>::zeros({dim}));
        running_mean = store.add_buffer(prefix + ".running_mean", Tensor<T>::zeros({dim}));
        running_var = store.add_buffer(prefix + ".running_var", Tensor<T>::full({dim}, T(1)));
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) const {
        // buffers are shared handles; in-place running-stat updates land in the store
        auto& rm = const_cast<Tensor<T>&>(running_mean).data();
        auto& rv = const_cast<Tensor<T>&>(running_var).data();
        return batch_norm(x, gamma, beta, rm, rv, train);
    }
};

}  // namespace segqa::nn
