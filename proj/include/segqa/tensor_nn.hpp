#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "segqa/rng.hpp"
#include "segqa/tensor.hpp"

namespace segqa::ad {

namespace detail {

struct ConvDims {
    int n, c, d, h, w;        // input
    int k;                    // kernel extent (cubic)
    int od, oh, ow;           // anchor grid (valid windows)
};

// Rearranges windows of src (N x C x D x H x W) anchored on the anchor grid
// into a row-major matrix with rows (n, od, oh, ow) and cols (c, kz, ky, kx).
template <class T>
void gather_windows(const std::vector<T>& src, const ConvDims& cd, std::vector<T>& col) {
    const int64_t cols = int64_t(cd.c) * cd.k * cd.k * cd.k;
    col.assign(size_t(int64_t(cd.n) * cd.od * cd.oh * cd.ow * cols), T(0));
    int64_t row = 0;
    for (int n = 0; n < cd.n; ++n)
        for (int od = 0; od < cd.od; ++od)
            for (int oh = 0; oh < cd.oh; ++oh)
                for (int ow = 0; ow < cd.ow; ++ow, ++row) {
                    T* dst = &col[size_t(row * cols)];
                    for (int c = 0; c < cd.c; ++c)
                        for (int kz = 0; kz < cd.k; ++kz)
                            for (int ky = 0; ky < cd.k; ++ky) {
                                const T* s = &src[size_t(
                                    ((((int64_t(n) * cd.c + c) * cd.d + od + kz) * cd.h + oh + ky) *
                                     cd.w) + ow)];
                                for (int kx = 0; kx < cd.k; ++kx) *dst++ = s[kx];
                            }
                }
}

// Adjoint of gather_windows: accumulates the matrix back into dst.
template <class T>
void scatter_windows(const std::vector<T>& col, const ConvDims& cd, std::vector<T>& dst) {
    const int64_t cols = int64_t(cd.c) * cd.k * cd.k * cd.k;
    int64_t row = 0;
    for (int n = 0; n < cd.n; ++n)
        for (int od = 0; od < cd.od; ++od)
            for (int oh = 0; oh < cd.oh; ++oh)
                for (int ow = 0; ow < cd.ow; ++ow, ++row) {
                    const T* s = &col[size_t(row * cols)];
                    for (int c = 0; c < cd.c; ++c)
                        for (int kz = 0; kz < cd.k; ++kz)
                            for (int ky = 0; ky < cd.k; ++ky) {
                                T* d = &dst[size_t(
                                    ((((int64_t(n) * cd.c + c) * cd.d + od + kz) * cd.h + oh + ky) *
                                     cd.w) + ow)];
                                for (int kx = 0; kx < cd.k; ++kx) d[kx] += *s++;
                            }
                }
}

}  // namespace detail

// 3D convolution, stride 1, no padding. x: N x C x D x H x W,
// weight: K x C x k x k x k, bias: K (optional, pass an empty tensor to skip).
template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (x.ndim() != 5) throw ShapeMismatchError("conv3d: input must be 5D, got " + shape_str(x.shape()));
    if (weight.ndim() != 5 || weight.dim(2) != weight.dim(3) || weight.dim(2) != weight.dim(4))
        throw ShapeMismatchError("conv3d: weight must be K x C x k x k x k, got " + shape_str(weight.shape()));
    if (weight.dim(1) != x.dim(1))
        throw ShapeMismatchError("conv3d: channel mismatch " + shape_str(x.shape()) + " vs " +
                                 shape_str(weight.shape()));
    const int k = weight.dim(2);
    detail::ConvDims cd{x.dim(0), x.dim(1), x.dim(2), x.dim(3), x.dim(4), k,
                        x.dim(2) - k + 1, x.dim(3) - k + 1, x.dim(4) - k + 1};
    if (cd.od <= 0 || cd.oh <= 0 || cd.ow <= 0)
        throw ShapeMismatchError("conv3d: kernel larger than input " + shape_str(x.shape()));
    const int kout = weight.dim(0);
    const bool has_bias = bias.numel() > 0;
    if (has_bias && (bias.ndim() != 1 || bias.dim(0) != kout))
        throw ShapeMismatchError("conv3d: bias must have shape (K)");

    std::vector<std::shared_ptr<TensorNode<T>>> parents{x.node(), weight.node()};
    if (has_bias) parents.push_back(bias.node());
    Tensor<T> out = detail::make_op<T>({cd.n, kout, cd.od, cd.oh, cd.ow}, parents);

    const int64_t rows = int64_t(cd.n) * cd.od * cd.oh * cd.ow;
    const int64_t cols = int64_t(cd.c) * k * k * k;
    auto col = std::make_shared<std::vector<T>>();
    detail::gather_windows(x.data(), cd, *col);

    // res(rows x K) = col(rows x cols) * W^T(cols x K)
    std::vector<T> res(size_t(rows * kout));
    {
        detail::ConstMatMap<T> C(col->data(), rows, cols);
        detail::ConstMatMap<T> W(weight.data().data(), kout, cols);
        detail::MatMap<T> R(res.data(), rows, kout);
        R.noalias() = C * W.transpose();
    }
    {
        auto& ov = out.data();
        const int64_t spatial = int64_t(cd.od) * cd.oh * cd.ow;
        for (int64_t n = 0; n < cd.n; ++n)
            for (int64_t ko = 0; ko < kout; ++ko) {
                const T b = has_bias ? bias.data()[size_t(ko)] : T(0);
                for (int64_t s = 0; s < spatial; ++s)
                    ov[size_t((n * kout + ko) * spatial + s)] =
                        res[size_t((n * spatial + s) * kout + ko)] + b;
            }
    }

    if (out.requires_grad()) {
        auto xn = x.node();
        auto wn = weight.node();
        auto bn = has_bias ? bias.node() : nullptr;
        out.node()->backward_fn = [xn, wn, bn, cd, kout, col, rows, cols](TensorNode<T>& o) {
            const int64_t spatial = int64_t(cd.od) * cd.oh * cd.ow;
            std::vector<T> gres(size_t(rows * kout));
            for (int64_t n = 0; n < cd.n; ++n)
                for (int64_t ko = 0; ko < kout; ++ko)
                    for (int64_t s = 0; s < spatial; ++s)
                        gres[size_t((n * spatial + s) * kout + ko)] =
                            o.grad[size_t((n * kout + ko) * spatial + s)];

            detail::ConstMatMap<T> G(gres.data(), rows, kout);
            if (wn->requires_grad) {
                wn->ensure_grad();
                detail::ConstMatMap<T> C(col->data(), rows, cols);
                detail::MatMap<T> GW(wn->grad.data(), kout, cols);
                GW.noalias() += G.transpose() * C;
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                std::vector<T> gcol(size_t(rows * cols));
                detail::ConstMatMap<T> W(wn->value.data(), kout, cols);
                detail::MatMap<T> GC(gcol.data(), rows, cols);
                GC.noalias() = G * W;
                detail::scatter_windows(gcol, cd, xn->grad);
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t n = 0; n < cd.n; ++n)
                    for (int64_t ko = 0; ko < kout; ++ko)
                        for (int64_t s = 0; s < spatial; ++s)
                            bn->grad[size_t(ko)] += o.grad[size_t((n * kout + ko) * spatial + s)];
            }
        };
    }
    return out;
}

// Transposed 3D convolution, stride 1, no padding: output spatial extent is
// input + k - 1. x: N x C x D x H x W, weight: C x K x k x k x k, bias: K.
template <class T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (x.ndim() != 5) throw ShapeMismatchError("conv_transpose3d: input must be 5D");
    if (weight.ndim() != 5 || weight.dim(2) != weight.dim(3) || weight.dim(2) != weight.dim(4))
        throw ShapeMismatchError("conv_transpose3d: weight must be C x K x k x k x k");
    if (weight.dim(0) != x.dim(1))
        throw ShapeMismatchError("conv_transpose3d: channel mismatch " + shape_str(x.shape()) +
                                 " vs " + shape_str(weight.shape()));
    const int k = weight.dim(2);
    const int kout = weight.dim(1);
    const int od = x.dim(2) + k - 1, oh = x.dim(3) + k - 1, ow = x.dim(4) + k - 1;
    const bool has_bias = bias.numel() > 0;
    if (has_bias && (bias.ndim() != 1 || bias.dim(0) != kout))
        throw ShapeMismatchError("conv_transpose3d: bias must have shape (K)");

    // The output windows anchored at input positions form the adjoint map of
    // a conv3d whose input is `out` and whose anchor grid is x's spatial grid.
    detail::ConvDims cd{x.dim(0), kout, od, oh, ow, k, x.dim(2), x.dim(3), x.dim(4)};

    std::vector<std::shared_ptr<TensorNode<T>>> parents{x.node(), weight.node()};
    if (has_bias) parents.push_back(bias.node());
    Tensor<T> out = detail::make_op<T>({cd.n, kout, od, oh, ow}, parents);

    const int64_t rows = int64_t(cd.n) * cd.od * cd.oh * cd.ow;  // input positions
    const int64_t cols = int64_t(kout) * k * k * k;
    const int64_t cin = x.dim(1);
    const int64_t in_spatial = int64_t(x.dim(2)) * x.dim(3) * x.dim(4);

    // X2: rows (n, pos) x cols C
    auto x2 = std::make_shared<std::vector<T>>(size_t(rows * cin));
    for (int64_t n = 0; n < cd.n; ++n)
        for (int64_t c = 0; c < cin; ++c)
            for (int64_t s = 0; s < in_spatial; ++s)
                (*x2)[size_t((n * in_spatial + s) * cin + c)] =
                    x.data()[size_t((n * cin + c) * in_spatial + s)];

    std::vector<T> g(size_t(rows * cols));
    {
        detail::ConstMatMap<T> X2(x2->data(), rows, cin);
        detail::ConstMatMap<T> W(weight.data().data(), cin, cols);
        detail::MatMap<T> G(g.data(), rows, cols);
        G.noalias() = X2 * W;
    }
    detail::scatter_windows(g, cd, out.data());
    if (has_bias) {
        auto& ov = out.data();
        const int64_t out_spatial = int64_t(od) * oh * ow;
        for (int64_t n = 0; n < cd.n; ++n)
            for (int64_t ko = 0; ko < kout; ++ko)
                for (int64_t s = 0; s < out_spatial; ++s)
                    ov[size_t((n * kout + ko) * out_spatial + s)] += bias.data()[size_t(ko)];
    }

    if (out.requires_grad()) {
        auto xn = x.node();
        auto wn = weight.node();
        auto bn = has_bias ? bias.node() : nullptr;
        out.node()->backward_fn = [xn, wn, bn, cd, x2, rows, cols, cin, in_spatial](TensorNode<T>& o) {
            std::vector<T> dg;
            detail::gather_windows(o.grad, cd, dg);
            detail::ConstMatMap<T> DG(dg.data(), rows, cols);
            if (xn->requires_grad) {
                xn->ensure_grad();
                std::vector<T> dx2(size_t(rows * cin));
                detail::ConstMatMap<T> W(wn->value.data(), cin, cols);
                detail::MatMap<T> DX2(dx2.data(), rows, cin);
                DX2.noalias() = DG * W.transpose();
                for (int64_t n = 0; n < cd.n; ++n)
                    for (int64_t c = 0; c < cin; ++c)
                        for (int64_t s = 0; s < in_spatial; ++s)
                            xn->grad[size_t((n * cin + c) * in_spatial + s)] +=
                                dx2[size_t((n * in_spatial + s) * cin + c)];
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                detail::ConstMatMap<T> X2(x2->data(), rows, cin);
                detail::MatMap<T> GW(wn->grad.data(), cin, cols);
                GW.noalias() += X2.transpose() * DG;
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                const int64_t kout = cd.c;
                const int64_t out_spatial = int64_t(cd.d) * cd.h * cd.w;
                for (int64_t n = 0; n < cd.n; ++n)
                    for (int64_t ko = 0; ko < kout; ++ko)
                        for (int64_t s = 0; s < out_spatial; ++s)
                            bn->grad[size_t(ko)] += o.grad[size_t((n * kout + ko) * out_spatial + s)];
            }
        };
    }
    return out;
}

// Inverted dropout. Training keeps each element with probability 1-p and
// rescales by 1/(1-p); eval mode is the identity (returns the input tensor).
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool train, uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw Error("dropout: p must be in [0, 1]");
    if (!train || p == 0.0) return x;

    Tensor<T> out = detail::make_op<T>(x.shape(), {x.node()});
    auto mask = std::make_shared<std::vector<uint8_t>>(x.data().size());
    Rng rng(seed);
    const T scale = p < 1.0 ? T(1.0 / (1.0 - p)) : T(0);
    for (size_t i = 0; i < x.data().size(); ++i) {
        bool keep = rng.uniform() >= p;
        (*mask)[i] = keep;
        out.data()[i] = keep ? x.data()[i] * scale : T(0);
    }
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn, mask, scale](TensorNode<T>& o) {
            xn->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i)
                if ((*mask)[i]) xn->grad[i] += o.grad[i] * scale;
        };
    }
    return out;
}

// Batch normalization over the row axis of an N x D tensor (rows are the
// batch). Training uses biased batch statistics and updates the running
// buffers in place; eval normalizes with the running statistics.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     std::vector<T>& running_mean, std::vector<T>& running_var, bool train,
                     T momentum = T(0.1), T eps = T(1e-5)) {
    if (x.ndim() != 2) throw ShapeMismatchError("batch_norm: expected 2D input, got " + shape_str(x.shape()));
    const int64_t n = x.dim(0), d = x.dim(1);
    if (gamma.numel() != d || beta.numel() != d || int64_t(running_mean.size()) != d ||
        int64_t(running_var.size()) != d)
        throw ShapeMismatchError("batch_norm: parameter width mismatch");

    Tensor<T> out = detail::make_op<T>(x.shape(), {x.node(), gamma.node(), beta.node()});
    auto xhat = std::make_shared<std::vector<T>>(size_t(n * d));
    auto inv_std = std::make_shared<std::vector<T>>(size_t(d));

    const auto& xv = x.data();
    if (train) {
        for (int64_t j = 0; j < d; ++j) {
            T m = T(0);
            for (int64_t i = 0; i < n; ++i) m += xv[size_t(i * d + j)];
            m /= T(n);
            T var = T(0);
            for (int64_t i = 0; i < n; ++i) {
                T c = xv[size_t(i * d + j)] - m;
                var += c * c;
            }
            var /= T(n);
            running_mean[size_t(j)] = (T(1) - momentum) * running_mean[size_t(j)] + momentum * m;
            running_var[size_t(j)] = (T(1) - momentum) * running_var[size_t(j)] + momentum * var;
            T istd = T(1) / std::sqrt(var + eps);
            (*inv_std)[size_t(j)] = istd;
            for (int64_t i = 0; i < n; ++i)
                (*xhat)[size_t(i * d + j)] = (xv[size_t(i * d + j)] - m) * istd;
        }
    } else {
        for (int64_t j = 0; j < d; ++j) {
            T istd = T(1) / std::sqrt(running_var[size_t(j)] + eps);
            (*inv_std)[size_t(j)] = istd;
            for (int64_t i = 0; i < n; ++i)
                (*xhat)[size_t(i * d + j)] = (xv[size_t(i * d + j)] - running_mean[size_t(j)]) * istd;
        }
    }
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j)
            out.data()[size_t(i * d + j)] =
                gamma.data()[size_t(j)] * (*xhat)[size_t(i * d + j)] + beta.data()[size_t(j)];

    if (out.requires_grad()) {
        auto xn = x.node();
        auto gn = gamma.node();
        auto bn = beta.node();
        out.node()->backward_fn = [xn, gn, bn, xhat, inv_std, n, d, train](TensorNode<T>& o) {
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (int64_t j = 0; j < d; ++j) {
                    T acc = T(0);
                    for (int64_t i = 0; i < n; ++i)
                        acc += o.grad[size_t(i * d + j)] * (*xhat)[size_t(i * d + j)];
                    gn->grad[size_t(j)] += acc;
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t j = 0; j < d; ++j) {
                    T acc = T(0);
                    for (int64_t i = 0; i < n; ++i) acc += o.grad[size_t(i * d + j)];
                    bn->grad[size_t(j)] += acc;
                }
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (int64_t j = 0; j < d; ++j) {
                    const T g = gn->value[size_t(j)];
                    const T istd = (*inv_std)[size_t(j)];
                    if (train) {
                        T mean_dy = T(0), mean_dy_xhat = T(0);
                        for (int64_t i = 0; i < n; ++i) {
                            mean_dy += o.grad[size_t(i * d + j)];
                            mean_dy_xhat += o.grad[size_t(i * d + j)] * (*xhat)[size_t(i * d + j)];
                        }
                        mean_dy /= T(n);
                        mean_dy_xhat /= T(n);
                        for (int64_t i = 0; i < n; ++i)
                            xn->grad[size_t(i * d + j)] +=
                                g * istd *
                                (o.grad[size_t(i * d + j)] - mean_dy -
                                 (*xhat)[size_t(i * d + j)] * mean_dy_xhat);
                    } else {
                        for (int64_t i = 0; i < n; ++i)
                            xn->grad[size_t(i * d + j)] += g * istd * o.grad[size_t(i * d + j)];
                    }
                }
            }
        };
    }
    return out;
}

}  // namespace segqa::ad
