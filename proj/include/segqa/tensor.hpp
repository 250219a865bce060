#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "segqa/errors.hpp"
#include "segqa/rng.hpp"

namespace segqa::ad {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

template <class T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Dense tensor participating in a reverse-mode tape. Copying a Tensor copies
// the handle, not the storage; graphs are built define-by-run and freed when
// the last handle to an output goes away.
template <class T>
class Tensor {
public:
    using Node = TensorNode<T>;

    Tensor() : node_(std::make_shared<Node>()) {}
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value.assign(size_t(shape_numel(t.node_->shape)), T(0));
        return t;
    }
    static Tensor full(Shape shape, T fill) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.node_->value.begin(), t.node_->value.end(), fill);
        return t;
    }
    static Tensor from(Shape shape, std::vector<T> data) {
        if (int64_t(data.size()) != shape_numel(shape))
            throw ShapeMismatchError("Tensor::from: data length does not match shape " + shape_str(shape));
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        return t;
    }
    static Tensor scalar(T v) { return from({1}, {v}); }
    static Tensor randn(Shape shape, Rng& rng, T stddev = T(1)) {
        Tensor t = zeros(std::move(shape));
        for (auto& x : t.node_->value) x = T(rng.normal()) * stddev;
        return t;
    }

    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[size_t(i)]; }
    int ndim() const { return int(node_->shape.size()); }
    int64_t numel() const { return int64_t(node_->value.size()); }

    std::vector<T>& data() { return node_->value; }
    const std::vector<T>& data() const { return node_->value; }
    T item() const {
        if (numel() != 1) throw ShapeMismatchError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    Tensor& set_requires_grad(bool b = true) {
        node_->requires_grad = b;
        return *this;
    }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    // Reverse pass from a scalar output. Accumulates into .grad of every
    // requires_grad node reachable through the tape.
    void backward() {
        if (numel() != 1) throw ShapeMismatchError("backward() requires a scalar output");
        std::vector<Node*> order;
        std::unordered_set<Node*> visited;
        topo(node_.get(), visited, order);
        node_->ensure_grad();
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
        }
    }

    std::shared_ptr<Node> node() const { return node_; }

private:
    static void topo(Node* n, std::unordered_set<Node*>& visited, std::vector<Node*>& order) {
        if (!visited.insert(n).second) return;
        for (auto& p : n->parents) topo(p.get(), visited, order);
        order.push_back(n);
    }

    std::shared_ptr<Node> node_;
};

namespace detail {

template <class T>
Tensor<T> make_op(Shape shape, std::vector<std::shared_ptr<TensorNode<T>>> parents) {
    Tensor<T> out = Tensor<T>::zeros(std::move(shape));
    bool req = false;
    for (auto& p : parents) req = req || p->requires_grad;
    if (req) {
        out.node()->requires_grad = true;
        out.node()->parents = std::move(parents);
    }
    return out;
}

// Right-aligned numpy-style broadcast of two shapes.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    Shape out(std::max(a.size(), b.size()));
    for (size_t i = 0; i < out.size(); ++i) {
        int da = i < out.size() - a.size() ? 1 : a[i - (out.size() - a.size())];
        int db = i < out.size() - b.size() ? 1 : b[i - (out.size() - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeMismatchError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Per-output-dim element strides of an input under broadcasting (0 where the
// input dim is 1).
inline std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<int64_t> strides(out.size(), 0);
    int64_t s = 1;
    for (int i = int(in.size()) - 1; i >= 0; --i) {
        size_t oi = out.size() - (in.size() - i);
        strides[oi] = (in[i] == 1 && out[oi] != 1) ? 0 : s;
        s *= in[i];
    }
    return strides;
}

// Walks a broadcast output in flat order, tracking the input offset.
struct BcastWalker {
    const Shape* oshape;
    std::vector<int64_t> strides;
    std::vector<int64_t> idx;
    int64_t offset = 0;

    BcastWalker(const Shape& out, std::vector<int64_t> s)
        : oshape(&out), strides(std::move(s)), idx(out.size(), 0) {}

    void advance() {
        for (int i = int(oshape->size()) - 1; i >= 0; --i) {
            offset += strides[size_t(i)];
            if (++idx[size_t(i)] < (*oshape)[size_t(i)]) return;
            offset -= strides[size_t(i)] * (*oshape)[size_t(i)];
            idx[size_t(i)] = 0;
        }
    }
};

}  // namespace detail

// ---- elementwise binary ops with broadcasting ----

template <class T, class FwdFn, class BwdFn>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, FwdFn fwd, BwdFn bwd) {
    Shape os = detail::broadcast_shape(a.shape(), b.shape());
    Tensor<T> out = detail::make_op<T>(os, {a.node(), b.node()});
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    const int64_t n = out.numel();

    if (a.shape() == os && b.shape() == os) {
        for (int64_t i = 0; i < n; ++i) ov[size_t(i)] = fwd(av[size_t(i)], bv[size_t(i)]);
    } else {
        detail::BcastWalker wa(os, detail::broadcast_strides(a.shape(), os));
        detail::BcastWalker wb(os, detail::broadcast_strides(b.shape(), os));
        for (int64_t i = 0; i < n; ++i) {
            ov[size_t(i)] = fwd(av[size_t(wa.offset)], bv[size_t(wb.offset)]);
            wa.advance();
            wb.advance();
        }
    }

    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        out.node()->backward_fn = [an, bn, os, bwd](TensorNode<T>& o) {
            const bool need_a = an->requires_grad, need_b = bn->requires_grad;
            if (need_a) an->ensure_grad();
            if (need_b) bn->ensure_grad();
            detail::BcastWalker wa(os, detail::broadcast_strides(an->shape, os));
            detail::BcastWalker wb(os, detail::broadcast_strides(bn->shape, os));
            const int64_t n = int64_t(o.value.size());
            for (int64_t i = 0; i < n; ++i) {
                T ga, gb;
                bwd(an->value[size_t(wa.offset)], bn->value[size_t(wb.offset)], o.grad[size_t(i)], ga, gb);
                if (need_a) an->grad[size_t(wa.offset)] += ga;
                if (need_b) bn->grad[size_t(wb.offset)] += gb;
                wa.advance();
                wb.advance();
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(a, b, [](T x, T y) { return x + y; },
                     [](T, T, T g, T& ga, T& gb) { ga = g; gb = g; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(a, b, [](T x, T y) { return x - y; },
                     [](T, T, T g, T& ga, T& gb) { ga = g; gb = -g; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(a, b, [](T x, T y) { return x * y; },
                     [](T x, T y, T g, T& ga, T& gb) { ga = g * y; gb = g * x; });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(a, b, [](T x, T y) { return x / y; },
                     [](T x, T y, T g, T& ga, T& gb) {
                         ga = g / y;
                         gb = -g * x / (y * y);
                     });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, T s) { return add(a, Tensor<T>::scalar(s)); }
template <class T>
Tensor<T> mul(const Tensor<T>& a, T s) { return mul(a, Tensor<T>::scalar(s)); }
template <class T>
Tensor<T> neg(const Tensor<T>& a) { return mul(a, T(-1)); }

// ---- elementwise unary ops ----

template <class T, class FwdFn, class BwdFn>
Tensor<T> unary_op(const Tensor<T>& a, FwdFn fwd, BwdFn bwd_from_in_out) {
    Tensor<T> out = detail::make_op<T>(a.shape(), {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    for (size_t i = 0; i < av.size(); ++i) ov[i] = fwd(av[i]);
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        out.node()->backward_fn = [an, on, bwd_from_in_out](TensorNode<T>& o) {
            an->ensure_grad();
            for (size_t i = 0; i < o.value.size(); ++i)
                an->grad[i] += o.grad[i] * bwd_from_in_out(an->value[i], o.value[i]);
        };
    }
    return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    return unary_op(a, [](T x) { return x > T(0) ? x : T(0); },
                    [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& a, T alpha = T(0.01)) {
    return unary_op(a, [alpha](T x) { return x > T(0) ? x : alpha * x; },
                    [alpha](T x, T) { return x > T(0) ? T(1) : alpha; });
}

template <class T>
Tensor<T> tanh_op(const Tensor<T>& a) {
    return unary_op(a, [](T x) { return std::tanh(x); },
                    [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> exp_op(const Tensor<T>& a) {
    return unary_op(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> sqrt_op(const Tensor<T>& a) {
    return unary_op(a, [](T x) { return std::sqrt(x); },
                    [](T, T y) { return T(0.5) / y; });
}

template <class T>
Tensor<T> abs_op(const Tensor<T>& a) {
    return unary_op(a, [](T x) { return std::fabs(x); },
                    [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

// ---- matmul / transpose (2D) ----

namespace detail {
template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace detail

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw ShapeMismatchError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                 shape_str(b.shape()));
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    Tensor<T> out = detail::make_op<T>({n, m}, {a.node(), b.node()});
    detail::ConstMatMap<T> A(a.data().data(), n, k), B(b.data().data(), k, m);
    detail::MatMap<T> C(out.data().data(), n, m);
    C.noalias() = A * B;

    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        out.node()->backward_fn = [an, bn, n, k, m](TensorNode<T>& o) {
            detail::ConstMatMap<T> G(o.grad.data(), n, m);
            detail::ConstMatMap<T> A(an->value.data(), n, k), B(bn->value.data(), k, m);
            if (an->requires_grad) {
                an->ensure_grad();
                detail::MatMap<T> GA(an->grad.data(), n, k);
                GA.noalias() += G * B.transpose();
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                detail::MatMap<T> GB(bn->grad.data(), k, m);
                GB.noalias() += A.transpose() * G;
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.ndim() != 2) throw ShapeMismatchError("transpose: expected 2D tensor");
    const int n = a.dim(0), m = a.dim(1);
    Tensor<T> out = detail::make_op<T>({m, n}, {a.node()});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.data()[size_t(j) * n + i] = a.data()[size_t(i) * m + j];
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, n, m](TensorNode<T>& o) {
            an->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    an->grad[size_t(i) * m + j] += o.grad[size_t(j) * n + i];
        };
    }
    return out;
}

// ---- reductions ----

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    Tensor<T> out = detail::make_op<T>({1}, {a.node()});
    T acc = T(0);
    for (T v : a.data()) acc += v;
    out.data()[0] = acc;
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an](TensorNode<T>& o) {
            an->ensure_grad();
            for (auto& g : an->grad) g += o.grad[0];
        };
    }
    return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
    return mul(sum(a), T(1) / T(a.numel()));
}

// Sum over one axis, keeping it as size 1.
template <class T>
Tensor<T> sum_axis(const Tensor<T>& a, int axis) {
    if (axis < 0 || axis >= a.ndim()) throw ShapeMismatchError("sum_axis: axis out of range");
    Shape os = a.shape();
    const int64_t outer = std::accumulate(os.begin(), os.begin() + axis, int64_t(1), std::multiplies<>());
    const int64_t nred = os[size_t(axis)];
    const int64_t inner =
        std::accumulate(os.begin() + axis + 1, os.end(), int64_t(1), std::multiplies<>());
    os[size_t(axis)] = 1;

    Tensor<T> out = detail::make_op<T>(os, {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
            T acc = T(0);
            for (int64_t r = 0; r < nred; ++r) acc += av[size_t((o * nred + r) * inner + in)];
            ov[size_t(o * inner + in)] = acc;
        }
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, outer, nred, inner](TensorNode<T>& o) {
            an->ensure_grad();
            for (int64_t ou = 0; ou < outer; ++ou)
                for (int64_t in = 0; in < inner; ++in) {
                    T g = o.grad[size_t(ou * inner + in)];
                    for (int64_t r = 0; r < nred; ++r)
                        an->grad[size_t((ou * nred + r) * inner + in)] += g;
                }
        };
    }
    return out;
}

// ---- softmax family ----

namespace detail {
struct AxisSpan {
    int64_t outer, n, inner;
};
inline AxisSpan axis_span(const Shape& s, int axis) {
    AxisSpan sp{1, s[size_t(axis)], 1};
    for (int i = 0; i < axis; ++i) sp.outer *= s[size_t(i)];
    for (size_t i = size_t(axis) + 1; i < s.size(); ++i) sp.inner *= s[i];
    return sp;
}
}  // namespace detail

template <class T>
Tensor<T> softmax(const Tensor<T>& a, int axis) {
    if (axis < 0 || axis >= a.ndim()) throw ShapeMismatchError("softmax: axis out of range");
    auto sp = detail::axis_span(a.shape(), axis);
    Tensor<T> out = detail::make_op<T>(a.shape(), {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            auto at = [&](int64_t r) { return size_t((o * sp.n + r) * sp.inner + in); };
            T mx = av[at(0)];
            for (int64_t r = 1; r < sp.n; ++r) mx = std::max(mx, av[at(r)]);
            T denom = T(0);
            for (int64_t r = 0; r < sp.n; ++r) {
                T e = std::exp(av[at(r)] - mx);
                ov[at(r)] = e;
                denom += e;
            }
            for (int64_t r = 0; r < sp.n; ++r) ov[at(r)] /= denom;
        }
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, sp](TensorNode<T>& o) {
            an->ensure_grad();
            for (int64_t ou = 0; ou < sp.outer; ++ou)
                for (int64_t in = 0; in < sp.inner; ++in) {
                    auto at = [&](int64_t r) { return size_t((ou * sp.n + r) * sp.inner + in); };
                    T dotv = T(0);
                    for (int64_t r = 0; r < sp.n; ++r) dotv += o.grad[at(r)] * o.value[at(r)];
                    for (int64_t r = 0; r < sp.n; ++r)
                        an->grad[at(r)] += o.value[at(r)] * (o.grad[at(r)] - dotv);
                }
        };
    }
    return out;
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& a, int axis) {
    if (axis < 0 || axis >= a.ndim()) throw ShapeMismatchError("log_softmax: axis out of range");
    auto sp = detail::axis_span(a.shape(), axis);
    Tensor<T> out = detail::make_op<T>(a.shape(), {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t in = 0; in < sp.inner; ++in) {
            auto at = [&](int64_t r) { return size_t((o * sp.n + r) * sp.inner + in); };
            T mx = av[at(0)];
            for (int64_t r = 1; r < sp.n; ++r) mx = std::max(mx, av[at(r)]);
            T denom = T(0);
            for (int64_t r = 0; r < sp.n; ++r) denom += std::exp(av[at(r)] - mx);
            T lse = mx + std::log(denom);
            for (int64_t r = 0; r < sp.n; ++r) ov[at(r)] = av[at(r)] - lse;
        }
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, sp](TensorNode<T>& o) {
            an->ensure_grad();
            for (int64_t ou = 0; ou < sp.outer; ++ou)
                for (int64_t in = 0; in < sp.inner; ++in) {
                    auto at = [&](int64_t r) { return size_t((ou * sp.n + r) * sp.inner + in); };
                    T gsum = T(0);
                    for (int64_t r = 0; r < sp.n; ++r) gsum += o.grad[at(r)];
                    for (int64_t r = 0; r < sp.n; ++r)
                        an->grad[at(r)] += o.grad[at(r)] - std::exp(o.value[at(r)]) * gsum;
                }
        };
    }
    return out;
}

// ---- shape ops ----

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeMismatchError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    Tensor<T> out = detail::make_op<T>(shape, {a.node()});
    out.data() = a.data();
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an](TensorNode<T>& o) {
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        };
    }
    return out;
}

template <class T>
Tensor<T> flatten_rows(const Tensor<T>& a) {
    // N x rest -> N x prod(rest)
    if (a.ndim() < 2) throw ShapeMismatchError("flatten_rows: need at least 2 dims");
    int n = a.dim(0);
    return reshape(a, {n, int(a.numel() / n)});
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw ShapeMismatchError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis < 0 || axis >= int(s0.size())) throw ShapeMismatchError("concat: axis out of range");
    Shape os = s0;
    int total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != int(s0.size())) throw ShapeMismatchError("concat: rank mismatch");
        for (int i = 0; i < p.ndim(); ++i)
            if (i != axis && p.dim(i) != s0[size_t(i)])
                throw ShapeMismatchError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                         shape_str(s0));
        total += p.dim(axis);
    }
    os[size_t(axis)] = total;

    std::vector<std::shared_ptr<TensorNode<T>>> ps;
    for (const auto& p : parts) ps.push_back(p.node());
    Tensor<T> out = detail::make_op<T>(os, ps);

    auto sp = detail::axis_span(os, axis);
    auto& ov = out.data();
    int64_t row_off = 0;
    for (const auto& p : parts) {
        const auto spp = detail::axis_span(p.shape(), axis);
        const auto& pv = p.data();
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t r = 0; r < spp.n; ++r)
                for (int64_t in = 0; in < sp.inner; ++in)
                    ov[size_t((o * sp.n + row_off + r) * sp.inner + in)] =
                        pv[size_t((o * spp.n + r) * sp.inner + in)];
        row_off += spp.n;
    }

    if (out.requires_grad()) {
        std::vector<int64_t> sizes;
        for (const auto& p : parts) sizes.push_back(p.dim(axis));
        out.node()->backward_fn = [ps, sizes, sp](TensorNode<T>& o) {
            int64_t row_off = 0;
            for (size_t pi = 0; pi < ps.size(); ++pi) {
                auto& pn = ps[pi];
                int64_t n = sizes[pi];
                if (pn->requires_grad) {
                    pn->ensure_grad();
                    for (int64_t ou = 0; ou < sp.outer; ++ou)
                        for (int64_t r = 0; r < n; ++r)
                            for (int64_t in = 0; in < sp.inner; ++in)
                                pn->grad[size_t((ou * n + r) * sp.inner + in)] +=
                                    o.grad[size_t((ou * sp.n + row_off + r) * sp.inner + in)];
                }
                row_off += n;
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, int axis, int start, int len) {
    if (axis < 0 || axis >= a.ndim()) throw ShapeMismatchError("slice: axis out of range");
    if (start < 0 || len <= 0 || start + len > a.dim(axis))
        throw ShapeMismatchError("slice: range out of bounds");
    Shape os = a.shape();
    os[size_t(axis)] = len;
    Tensor<T> out = detail::make_op<T>(os, {a.node()});
    auto spa = detail::axis_span(a.shape(), axis);
    const auto& av = a.data();
    auto& ov = out.data();
    for (int64_t o = 0; o < spa.outer; ++o)
        for (int64_t r = 0; r < len; ++r)
            for (int64_t in = 0; in < spa.inner; ++in)
                ov[size_t((o * len + r) * spa.inner + in)] =
                    av[size_t((o * spa.n + start + r) * spa.inner + in)];
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, spa, start, len](TensorNode<T>& o) {
            an->ensure_grad();
            for (int64_t ou = 0; ou < spa.outer; ++ou)
                for (int64_t r = 0; r < len; ++r)
                    for (int64_t in = 0; in < spa.inner; ++in)
                        an->grad[size_t((ou * spa.n + start + r) * spa.inner + in)] +=
                            o.grad[size_t((ou * len + r) * spa.inner + in)];
        };
    }
    return out;
}

// ---- row gather / scatter (graph indexing) ----

template <class T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int64_t>& indices) {
    if (a.ndim() != 2) throw ShapeMismatchError("gather_rows: expected 2D tensor");
    const int64_t rows = a.dim(0), cols = a.dim(1);
    for (int64_t i : indices)
        if (i < 0 || i >= rows) throw ShapeMismatchError("gather_rows: index out of range");
    Tensor<T> out = detail::make_op<T>({int(indices.size()), int(cols)}, {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    for (size_t r = 0; r < indices.size(); ++r)
        std::copy_n(av.begin() + indices[r] * cols, cols, ov.begin() + int64_t(r) * cols);
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, indices, cols](TensorNode<T>& o) {
            an->ensure_grad();
            for (size_t r = 0; r < indices.size(); ++r)
                for (int64_t c = 0; c < cols; ++c)
                    an->grad[size_t(indices[r] * cols + c)] += o.grad[size_t(int64_t(r) * cols + c)];
        };
    }
    return out;
}

template <class T>
Tensor<T> scatter_add_rows(const Tensor<T>& a, const std::vector<int64_t>& indices, int out_rows) {
    if (a.ndim() != 2) throw ShapeMismatchError("scatter_add_rows: expected 2D tensor");
    if (int64_t(indices.size()) != a.dim(0))
        throw ShapeMismatchError("scatter_add_rows: one index per input row required");
    const int64_t cols = a.dim(1);
    for (int64_t i : indices)
        if (i < 0 || i >= out_rows) throw ShapeMismatchError("scatter_add_rows: index out of range");
    Tensor<T> out = detail::make_op<T>({out_rows, int(cols)}, {a.node()});
    const auto& av = a.data();
    auto& ov = out.data();
    for (size_t r = 0; r < indices.size(); ++r)
        for (int64_t c = 0; c < cols; ++c)
            ov[size_t(indices[r] * cols + c)] += av[size_t(int64_t(r) * cols + c)];
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, indices, cols](TensorNode<T>& o) {
            an->ensure_grad();
            for (size_t r = 0; r < indices.size(); ++r)
                for (int64_t c = 0; c < cols; ++c)
                    an->grad[size_t(int64_t(r) * cols + c)] += o.grad[size_t(indices[r] * cols + c)];
        };
    }
    return out;
}

// Row-wise max values, detached from the tape (used for stabilizers).
template <class T>
std::vector<T> rowwise_max_values(const Tensor<T>& a) {
    if (a.ndim() != 2) throw ShapeMismatchError("rowwise_max_values: expected 2D tensor");
    const int64_t rows = a.dim(0), cols = a.dim(1);
    std::vector<T> out(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        T mx = a.data()[size_t(r * cols)];
        for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, a.data()[size_t(r * cols + c)]);
        out[size_t(r)] = mx;
    }
    return out;
}

}  // namespace segqa::ad
