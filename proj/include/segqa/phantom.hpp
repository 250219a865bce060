#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "segqa/errors.hpp"
#include "segqa/grid.hpp"
#include "segqa/rng.hpp"

namespace segqa {

enum class PhantomKind { Sphere, Torus, TubeLoop, BlendedBlobs };

inline std::string to_string(PhantomKind k) {
    switch (k) {
        case PhantomKind::Sphere: return "sphere";
        case PhantomKind::Torus: return "torus";
        case PhantomKind::TubeLoop: return "tube-loop";
        case PhantomKind::BlendedBlobs: return "blended-blobs";
    }
    return "sphere";
}

inline PhantomKind phantom_kind_from_string(const std::string& s) {
    if (s == "sphere") return PhantomKind::Sphere;
    if (s == "torus") return PhantomKind::Torus;
    if (s == "tube-loop") return PhantomKind::TubeLoop;
    if (s == "blended-blobs") return PhantomKind::BlendedBlobs;
    throw Error("unknown phantom kind: " + s);
}

// Desk-scale stand-in for scanned volumes: an analytic shape rasterized to a
// mask, plus an intensity volume derived from it (blur + additive noise) so
// the encoder has an image cue to learn from.
struct PhantomSpec {
    PhantomKind kind = PhantomKind::Sphere;
    int grid = 48;               // cubic grid extent
    double radius = 10.0;        // main radius, voxels
    double minor_radius = 4.0;   // tube/torus minor radius, blob spread
    int num_blobs = 4;
    double fg_level = 1.0;
    double bg_level = 0.0;
    double blur_sigma = 1.0;     // voxels
    double noise_sigma = 0.05;
    double spacing_mm = 0.02;
    uint64_t seed = 0;

    // outermost analytic extent from the grid center, voxels
    double bounding_radius() const {
        switch (kind) {
            case PhantomKind::Sphere: return radius;
            case PhantomKind::Torus: return radius + minor_radius;
            case PhantomKind::TubeLoop: return radius + minor_radius + 0.35 * radius;
            // blob level set 0.5 reaches ~1.7 sigma, sigma scale up to 1.3x
            case PhantomKind::BlendedBlobs: return radius + 2.2 * minor_radius;
        }
        return radius;
    }
};

namespace detail {

inline void gaussian_blur_inplace(std::vector<float>& v, int nx, int ny, int nz, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(size_t(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[size_t(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        ksum += kernel[size_t(i + radius)];
    }
    for (auto& k : kernel) k /= ksum;

    auto idx = [&](int x, int y, int z) { return (size_t(z) * ny + y) * nx + x; };
    std::vector<float> tmp(v.size());
    auto pass = [&](int axis) {
        const int n[3] = {nx, ny, nz};
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    int coord[3] = {x, y, z};
                    double acc = 0.0;
                    for (int o = -radius; o <= radius; ++o) {
                        int c[3] = {coord[0], coord[1], coord[2]};
                        c[axis] = std::clamp(c[axis] + o, 0, n[axis] - 1);
                        acc += kernel[size_t(o + radius)] * v[idx(c[0], c[1], c[2])];
                    }
                    tmp[idx(x, y, z)] = float(acc);
                }
        v.swap(tmp);
    };
    pass(0);
    pass(1);
    pass(2);
}

}  // namespace detail

inline std::pair<BinaryMask, VoxelVolume> make_phantom(const PhantomSpec& spec) {
    if (spec.grid < 8) throw Error("make_phantom: grid too small");
    const double c = (spec.grid - 1) / 2.0;
    if (c - spec.bounding_radius() < 3.0)
        throw ShapeOutOfBoundsError("make_phantom: shape does not fit the grid with a 3-voxel margin (" +
                                    to_string(spec.kind) + ", radius " + std::to_string(spec.radius) +
                                    ", grid " + std::to_string(spec.grid) + ")");

    BinaryMask mask(spec.grid, spec.grid, spec.grid);
    mask.spacing = {spec.spacing_mm, spec.spacing_mm, spec.spacing_mm};

    Rng rng(spec.seed);
    switch (spec.kind) {
        case PhantomKind::Sphere: {
            const double r2 = spec.radius * spec.radius;
            for (int z = 0; z < spec.grid; ++z)
                for (int y = 0; y < spec.grid; ++y)
                    for (int x = 0; x < spec.grid; ++x) {
                        double dx = x - c, dy = y - c, dz = z - c;
                        mask.at(x, y, z) = (dx * dx + dy * dy + dz * dz <= r2) ? 1 : 0;
                    }
            break;
        }
        case PhantomKind::Torus: {
            const double r2 = spec.minor_radius * spec.minor_radius;
            for (int z = 0; z < spec.grid; ++z)
                for (int y = 0; y < spec.grid; ++y)
                    for (int x = 0; x < spec.grid; ++x) {
                        double dx = x - c, dy = y - c, dz = z - c;
                        double q = std::sqrt(dx * dx + dy * dy) - spec.radius;
                        mask.at(x, y, z) = (q * q + dz * dz <= r2) ? 1 : 0;
                    }
            break;
        }
        case PhantomKind::TubeLoop: {
            // tube around a wobbled circle, rasterized by stamping spheres
            // along a dense sampling of the path
            const int samples = 1024;
            const double wobble = 0.35 * spec.radius;
            const double r = spec.minor_radius;
            const int ir = int(std::ceil(r)) + 1;
            for (int s = 0; s < samples; ++s) {
                double t = 2.0 * M_PI * s / samples;
                double px = c + spec.radius * std::cos(t);
                double py = c + spec.radius * std::sin(t);
                double pz = c + wobble * std::sin(3.0 * t);
                int x0 = std::max(0, int(px) - ir), x1 = std::min(spec.grid - 1, int(px) + ir);
                int y0 = std::max(0, int(py) - ir), y1 = std::min(spec.grid - 1, int(py) + ir);
                int z0 = std::max(0, int(pz) - ir), z1 = std::min(spec.grid - 1, int(pz) + ir);
                for (int z = z0; z <= z1; ++z)
                    for (int y = y0; y <= y1; ++y)
                        for (int x = x0; x <= x1; ++x) {
                            double dx = x - px, dy = y - py, dz = z - pz;
                            if (dx * dx + dy * dy + dz * dz <= r * r) mask.at(x, y, z) = 1;
                        }
            }
            break;
        }
        case PhantomKind::BlendedBlobs: {
            struct Blob {
                double x, y, z, s;
            };
            std::vector<Blob> blobs;
            for (int b = 0; b < spec.num_blobs; ++b) {
                double ang = rng.uniform(0, 2.0 * M_PI);
                double el = rng.uniform(-0.7, 0.7);
                double rad = rng.uniform(0.2, 1.0) * spec.radius;
                blobs.push_back({c + rad * std::cos(ang) * std::cos(el),
                                 c + rad * std::sin(ang) * std::cos(el), c + rad * std::sin(el),
                                 rng.uniform(0.7, 1.3) * spec.minor_radius});
            }
            for (int z = 0; z < spec.grid; ++z)
                for (int y = 0; y < spec.grid; ++y)
                    for (int x = 0; x < spec.grid; ++x) {
                        double field = 0.0;
                        for (const auto& b : blobs) {
                            double dx = x - b.x, dy = y - b.y, dz = z - b.z;
                            field += std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * b.s * b.s));
                        }
                        mask.at(x, y, z) = field >= 0.5 ? 1 : 0;
                    }
            break;
        }
    }

    VoxelVolume intensity;
    copy_grid_layout(intensity, mask);
    for (size_t i = 0; i < mask.size(); ++i) intensity.values[i] = mask.values[i] ? 1.0f : 0.0f;
    detail::gaussian_blur_inplace(intensity.values, spec.grid, spec.grid, spec.grid,
                                  spec.blur_sigma);
    for (auto& v : intensity.values) {
        double level = spec.bg_level + (spec.fg_level - spec.bg_level) * double(v);
        if (spec.noise_sigma > 0) level += spec.noise_sigma * rng.normal();
        v = float(level);
    }
    return {std::move(mask), std::move(intensity)};
}

}  // namespace segqa
