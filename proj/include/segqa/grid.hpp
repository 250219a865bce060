#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "segqa/errors.hpp"

namespace segqa {

// Regular 3D grid scalar field. Values are row-major with x fastest.
template <class T>
struct Field3 {
    int nx = 0, ny = 0, nz = 0;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel
    std::array<double, 3> origin{0.0, 0.0, 0.0};   // mm
    std::vector<T> values;

    Field3() = default;
    Field3(int nx_, int ny_, int nz_, T fill = T{})
        : nx(nx_), ny(ny_), nz(nz_), values(size_t(nx_) * ny_ * nz_, fill) {}

    size_t size() const { return size_t(nx) * ny * nz; }
    size_t index(int x, int y, int z) const { return (size_t(z) * ny + y) * nx + x; }
    T& at(int x, int y, int z) { return values[index(x, y, z)]; }
    const T& at(int x, int y, int z) const { return values[index(x, y, z)]; }

    bool same_grid(const Field3& o) const { return nx == o.nx && ny == o.ny && nz == o.nz; }

    void validate(const char* what) const {
        if (nx <= 0 || ny <= 0 || nz <= 0)
            throw Error(std::string(what) + ": dims must be positive");
        if (values.size() != size())
            throw Error(std::string(what) + ": values length != nx*ny*nz");
        for (double s : spacing)
            if (!(s > 0.0)) throw Error(std::string(what) + ": spacing must be > 0");
    }
};

using VoxelVolume = Field3<float>;

struct BinaryMask : Field3<uint8_t> {
    using Field3<uint8_t>::Field3;

    size_t count_foreground() const {
        size_t c = 0;
        for (auto v : values) c += (v != 0);
        return c;
    }
    void validate_binary() const {
        validate("BinaryMask");
        for (auto v : values)
            if (v != 0 && v != 1) throw Error("BinaryMask: values must be 0 or 1");
    }
};

enum class UnitMode : uint8_t { Voxel = 0, Mm = 1 };

struct SignedDistanceField : Field3<float> {
    using Field3<float>::Field3;
    UnitMode unit_mode = UnitMode::Voxel;
};

template <class T>
inline Field3<T> make_like_grid(const Field3<T>&) = delete;

template <class Dst, class Src>
inline void copy_grid_layout(Dst& dst, const Src& src) {
    dst.nx = src.nx;
    dst.ny = src.ny;
    dst.nz = src.nz;
    dst.spacing = src.spacing;
    dst.origin = src.origin;
    dst.values.resize(src.size());
}

// 8-neighbor trilinear blend at continuous grid coordinates. Out-of-range
// points clamp to the grid boundary.
template <class T>
inline double trilinear_sample(const Field3<T>& f, double x, double y, double z) {
    auto clampc = [](double v, int n) { return std::clamp(v, 0.0, double(n - 1)); };
    x = clampc(x, f.nx);
    y = clampc(y, f.ny);
    z = clampc(z, f.nz);

    int x0 = int(std::floor(x)), y0 = int(std::floor(y)), z0 = int(std::floor(z));
    x0 = std::min(x0, f.nx - 1);
    y0 = std::min(y0, f.ny - 1);
    z0 = std::min(z0, f.nz - 1);
    int x1 = std::min(x0 + 1, f.nx - 1);
    int y1 = std::min(y0 + 1, f.ny - 1);
    int z1 = std::min(z0 + 1, f.nz - 1);
    double fx = x - x0, fy = y - y0, fz = z - z0;

    double c000 = f.at(x0, y0, z0), c100 = f.at(x1, y0, z0);
    double c010 = f.at(x0, y1, z0), c110 = f.at(x1, y1, z0);
    double c001 = f.at(x0, y0, z1), c101 = f.at(x1, y0, z1);
    double c011 = f.at(x0, y1, z1), c111 = f.at(x1, y1, z1);

    double c00 = c000 * (1 - fx) + c100 * fx;
    double c10 = c010 * (1 - fx) + c110 * fx;
    double c01 = c001 * (1 - fx) + c101 * fx;
    double c11 = c011 * (1 - fx) + c111 * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

// size x size x size block sampled at unit grid offsets around center,
// x fastest within the block. size must be odd.
template <class T>
inline std::vector<float> resample_subvolume(const Field3<T>& f,
                                             std::array<double, 3> center,
                                             int size = 5) {
    if (size < 1 || size % 2 == 0) throw Error("resample_subvolume: size must be odd");
    int h = size / 2;
    std::vector<float> block(size_t(size) * size * size);
    size_t i = 0;
    for (int dz = -h; dz <= h; ++dz)
        for (int dy = -h; dy <= h; ++dy)
            for (int dx = -h; dx <= h; ++dx)
                block[i++] = float(
                    trilinear_sample(f, center[0] + dx, center[1] + dy, center[2] + dz));
    return block;
}

// Parameters of the structured additive field applied to a distance transform:
// a sum of Gaussian bumps with centers drawn near the zero level set.
struct NoiseSpec {
    int num_bumps = 0;
    std::array<double, 2> amplitude_range{0.0, 0.0};  // voxel units, sign included
    std::array<double, 2> sigma_range{1.0, 1.0};      // voxels
    uint64_t seed = 0;

    void validate() const {
        if (num_bumps < 0) throw Error("NoiseSpec: num_bumps must be >= 0");
        if (amplitude_range[0] > amplitude_range[1])
            throw Error("NoiseSpec: amplitude range must satisfy a_min <= a_max");
        if (!(sigma_range[0] > 0.0) || sigma_range[0] > sigma_range[1])
            throw Error("NoiseSpec: sigma range must satisfy 0 < sigma_min <= sigma_max");
    }
};

}  // namespace segqa
