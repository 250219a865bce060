#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "segqa/grid.hpp"

namespace segqa {

namespace detail {

constexpr double kEdtInf = 1e20;

// 1D squared-distance transform, lower envelope of parabolas
// (Felzenszwalb-Huttenlocher). d[x] = min_v (x-v)^2 + f[v].
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d,
                   std::vector<int>& v, std::vector<double>& z) {
    const int n = int(f.size());
    int k = 0;
    v[0] = 0;
    z[0] = -kEdtInf;
    z[1] = +kEdtInf;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = +kEdtInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace detail

// Squared Euclidean distance (in voxel units) from every voxel to the nearest
// voxel where source(x,y,z) is true. Exact: separable passes over x, y, z.
template <class SourcePred>
inline std::vector<double> squared_edt(int nx, int ny, int nz, SourcePred source) {
    std::vector<double> g(size_t(nx) * ny * nz);
    auto idx = [&](int x, int y, int z) { return (size_t(z) * ny + y) * nx + x; };

    const int nmax = std::max({nx, ny, nz});
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    for (int zz = 0; zz < nz; ++zz)
        for (int yy = 0; yy < ny; ++yy) {
            f.resize(nx);
            for (int xx = 0; xx < nx; ++xx)
                f[xx] = source(xx, yy, zz) ? 0.0 : detail::kEdtInf;
            d.resize(nx);
            detail::edt_1d(f, d, v, z);
            for (int xx = 0; xx < nx; ++xx) g[idx(xx, yy, zz)] = d[xx];
        }

    for (int zz = 0; zz < nz; ++zz)
        for (int xx = 0; xx < nx; ++xx) {
            f.resize(ny);
            for (int yy = 0; yy < ny; ++yy) f[yy] = g[idx(xx, yy, zz)];
            d.resize(ny);
            detail::edt_1d(f, d, v, z);
            for (int yy = 0; yy < ny; ++yy) g[idx(xx, yy, zz)] = d[yy];
        }

    for (int yy = 0; yy < ny; ++yy)
        for (int xx = 0; xx < nx; ++xx) {
            f.resize(nz);
            for (int zz = 0; zz < nz; ++zz) f[zz] = g[idx(xx, yy, zz)];
            d.resize(nz);
            detail::edt_1d(f, d, v, z);
            for (int zz = 0; zz < nz; ++zz) g[idx(xx, yy, zz)] = d[zz];
        }

    return g;
}

inline std::vector<double> squared_edt_to_foreground(const BinaryMask& mask) {
    return squared_edt(mask.nx, mask.ny, mask.nz,
                       [&](int x, int y, int z) { return mask.at(x, y, z) != 0; });
}

// Exact signed Euclidean distance transform in voxel units: negative inside
// (distance to nearest outside voxel), positive outside (distance to nearest
// inside voxel).
inline SignedDistanceField signed_distance_transform(const BinaryMask& mask) {
    mask.validate_binary();
    size_t fg = mask.count_foreground();
    if (fg == 0) throw EmptyMaskError("signed_distance_transform: mask is all background");
    if (fg == mask.size()) throw FullMaskError("signed_distance_transform: mask is all foreground");

    auto d_to_inside = squared_edt(mask.nx, mask.ny, mask.nz,
                                   [&](int x, int y, int z) { return mask.at(x, y, z) != 0; });
    auto d_to_outside = squared_edt(mask.nx, mask.ny, mask.nz,
                                    [&](int x, int y, int z) { return mask.at(x, y, z) == 0; });

    SignedDistanceField sdf;
    copy_grid_layout(sdf, mask);
    sdf.unit_mode = UnitMode::Voxel;
    for (size_t i = 0; i < mask.size(); ++i) {
        sdf.values[i] = mask.values[i] ? -float(std::sqrt(d_to_outside[i]))
                                       : +float(std::sqrt(d_to_inside[i]));
    }
    return sdf;
}

// Voxel inside iff value <= 0.
inline BinaryMask threshold_to_mask(const SignedDistanceField& sdf) {
    sdf.validate("SignedDistanceField");
    BinaryMask mask;
    copy_grid_layout(mask, sdf);
    for (size_t i = 0; i < sdf.values.size(); ++i)
        mask.values[i] = sdf.values[i] <= 0.0f ? 1 : 0;
    return mask;
}

// Symmetric Hausdorff distance between two foreground voxel sets, voxel units.
inline double hausdorff_distance(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_grid(b)) throw Error("hausdorff_distance: grids differ");
    if (a.count_foreground() == 0 || b.count_foreground() == 0)
        throw EmptyMaskError("hausdorff_distance: empty foreground");

    auto da = squared_edt_to_foreground(a);
    auto db = squared_edt_to_foreground(b);
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a.values[i] && db[i] > worst) worst = db[i];
        if (b.values[i] && da[i] > worst) worst = da[i];
    }
    return std::sqrt(worst);
}

}  // namespace segqa
