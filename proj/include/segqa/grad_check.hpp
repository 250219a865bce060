#pragma once

#include <cmath>
#include <vector>

#include "segqa/tensor.hpp"

namespace segqa::ad {

// Compares tape gradients against central finite differences, elementwise,
// in 64-bit. f must be a pure function of the inputs building a fresh graph
// per call and returning a scalar. Relative error uses
// |ad - fd| / max(1, |ad|, |fd|).
template <class F>
inline double grad_check(F&& f, std::vector<Tensor<double>>& inputs, double eps = 1e-4) {
    for (auto& x : inputs) {
        x.set_requires_grad(true);
        x.zero_grad();
    }
    Tensor<double> y = f(inputs);
    y.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& x : inputs) analytic.push_back(x.grad());

    double max_rel = 0.0;
    for (size_t xi = 0; xi < inputs.size(); ++xi) {
        auto& vals = inputs[xi].data();
        for (size_t i = 0; i < vals.size(); ++i) {
            const double keep = vals[i];
            vals[i] = keep + eps;
            double fp = f(inputs).item();
            vals[i] = keep - eps;
            double fm = f(inputs).item();
            vals[i] = keep;
            double fd = (fp - fm) / (2.0 * eps);
            double ad = analytic[xi][i];
            double rel = std::fabs(ad - fd) / std::max({1.0, std::fabs(ad), std::fabs(fd)});
            if (rel > max_rel) max_rel = rel;
        }
    }
    return max_rel;
}

}  // namespace segqa::ad
