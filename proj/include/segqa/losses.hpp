#pragma once

#include <cmath>
#include <vector>

#include "segqa/tensor.hpp"

namespace segqa::ad {

// All losses are mean-reduced scalars.

template <class T>
Tensor<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target, T beta = T(1)) {
    if (pred.shape() != target.shape())
        throw ShapeMismatchError("smooth_l1: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                 shape_str(target.shape()));
    if (!(beta > T(0))) throw Error("smooth_l1: beta must be > 0");
    Tensor<T> out = detail::make_op<T>({1}, {pred.node(), target.node()});
    const int64_t n = pred.numel();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
        T d = pred.data()[size_t(i)] - target.data()[size_t(i)];
        T a = std::fabs(d);
        acc += a < beta ? T(0.5) * d * d / beta : a - T(0.5) * beta;
    }
    out.data()[0] = acc / T(n);
    if (out.requires_grad()) {
        auto pn = pred.node(), tn = target.node();
        out.node()->backward_fn = [pn, tn, beta, n](TensorNode<T>& o) {
            const T go = o.grad[0] / T(n);
            if (pn->requires_grad) pn->ensure_grad();
            if (tn->requires_grad) tn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) {
                T d = pn->value[size_t(i)] - tn->value[size_t(i)];
                T g = std::fabs(d) < beta ? d / beta : (d > T(0) ? T(1) : T(-1));
                if (pn->requires_grad) pn->grad[size_t(i)] += go * g;
                if (tn->requires_grad) tn->grad[size_t(i)] -= go * g;
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape())
        throw ShapeMismatchError("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                 shape_str(target.shape()));
    Tensor<T> out = detail::make_op<T>({1}, {pred.node(), target.node()});
    const int64_t n = pred.numel();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i)
        acc += std::fabs(pred.data()[size_t(i)] - target.data()[size_t(i)]);
    out.data()[0] = acc / T(n);
    if (out.requires_grad()) {
        auto pn = pred.node(), tn = target.node();
        out.node()->backward_fn = [pn, tn, n](TensorNode<T>& o) {
            const T go = o.grad[0] / T(n);
            if (pn->requires_grad) pn->ensure_grad();
            if (tn->requires_grad) tn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) {
                T d = pn->value[size_t(i)] - tn->value[size_t(i)];
                T g = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                if (pn->requires_grad) pn->grad[size_t(i)] += go * g;
                if (tn->requires_grad) tn->grad[size_t(i)] -= go * g;
            }
        };
    }
    return out;
}

// Cross entropy of logits (N x C) against integer class indices.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
    if (logits.ndim() != 2) throw ShapeMismatchError("cross_entropy: logits must be 2D");
    const int64_t n = logits.dim(0), c = logits.dim(1);
    if (int64_t(targets.size()) != n)
        throw ShapeMismatchError("cross_entropy: one target per row required");
    for (int t : targets)
        if (t < 0 || int64_t(t) >= c) throw Error("cross_entropy: class index out of range");

    Tensor<T> out = detail::make_op<T>({1}, {logits.node()});
    auto probs = std::make_shared<std::vector<T>>(size_t(n * c));
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T* row = &logits.data()[size_t(i * c)];
        T mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        T lse = mx + std::log(denom);
        for (int64_t j = 0; j < c; ++j) (*probs)[size_t(i * c + j)] = std::exp(row[j] - lse);
        acc -= row[targets[size_t(i)]] - lse;
    }
    out.data()[0] = acc / T(n);
    if (out.requires_grad()) {
        auto ln = logits.node();
        out.node()->backward_fn = [ln, probs, targets, n, c](TensorNode<T>& o) {
            ln->ensure_grad();
            const T go = o.grad[0] / T(n);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < c; ++j) {
                    T p = (*probs)[size_t(i * c + j)];
                    T onehot = (int64_t(targets[size_t(i)]) == j) ? T(1) : T(0);
                    ln->grad[size_t(i * c + j)] += go * (p - onehot);
                }
        };
    }
    return out;
}

// 1 - mean_i cos(pred_i, target_i), rows as vectors, epsilon-guarded norms.
template <class T>
Tensor<T> cosine_similarity_loss(const Tensor<T>& pred, const Tensor<T>& target, T eps = T(1e-8)) {
    if (pred.shape() != target.shape() || pred.ndim() != 2)
        throw ShapeMismatchError("cosine_similarity_loss: expected matching 2D shapes");
    auto dots = sum_axis(mul(pred, target), 1);
    auto pn = sqrt_op(add(sum_axis(mul(pred, pred), 1), eps));
    auto tn = sqrt_op(add(sum_axis(mul(target, target), 1), eps));
    auto cos = div(dots, mul(pn, tn));
    return sub(Tensor<T>::scalar(T(1)), mean(cos));
}

}  // namespace segqa::ad
