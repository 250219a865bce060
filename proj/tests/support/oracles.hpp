#pragma once

// Independent brute-force oracles used by the test suites. Everything here is
// deliberately naive and kept apart from the library implementations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "segqa/grid.hpp"
#include "segqa/mesh.hpp"
#include "segqa/rng.hpp"

namespace oracles {

// Exact squared distance from every voxel to the nearest source voxel,
// O(n^2) over all voxel pairs.
template <class SourcePred>
inline std::vector<int64_t> brute_squared_edt(int nx, int ny, int nz, SourcePred source) {
    struct P {
        int x, y, z;
    };
    std::vector<P> sources;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                if (source(x, y, z)) sources.push_back({x, y, z});

    std::vector<int64_t> out(size_t(nx) * ny * nz, std::numeric_limits<int64_t>::max());
    size_t i = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x, ++i) {
                int64_t best = std::numeric_limits<int64_t>::max();
                for (const auto& s : sources) {
                    int64_t dx = x - s.x, dy = y - s.y, dz = z - s.z;
                    int64_t d = dx * dx + dy * dy + dz * dz;
                    if (d < best) best = d;
                }
                out[i] = best;
            }
    return out;
}

inline double brute_hausdorff(const segqa::BinaryMask& a, const segqa::BinaryMask& b) {
    struct P {
        int x, y, z;
    };
    auto collect = [](const segqa::BinaryMask& m) {
        std::vector<P> pts;
        for (int z = 0; z < m.nz; ++z)
            for (int y = 0; y < m.ny; ++y)
                for (int x = 0; x < m.nx; ++x)
                    if (m.at(x, y, z)) pts.push_back({x, y, z});
        return pts;
    };
    auto pa = collect(a), pb = collect(b);
    auto directed = [](const std::vector<P>& from, const std::vector<P>& to) {
        double worst = 0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::max();
            for (const auto& q : to) {
                double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(pa, pb), directed(pb, pa));
}

// Digital ball rasterized directly from the center/radius definition.
inline segqa::BinaryMask digital_ball(int n, double cx, double cy, double cz, double r) {
    segqa::BinaryMask m(n, n, n);
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double dx = x - cx, dy = y - cy, dz = z - cz;
                m.at(x, y, z) = (dx * dx + dy * dy + dz * dz <= r * r) ? 1 : 0;
            }
    return m;
}

// Unit-sphere icosphere with `subdiv` midpoint subdivisions, scaled by radius.
inline segqa::TriMesh icosphere(int subdiv, double radius = 1.0) {
    using segqa::Vec3;
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : verts) {
        double n = segqa::norm(v);
        v = v * (1.0 / n);
    }
    std::vector<std::array<uint32_t, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int s = 0; s < subdiv; ++s) {
        std::map<std::pair<uint32_t, uint32_t>, uint32_t> midpoint;
        auto mid = [&](uint32_t a, uint32_t b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = (verts[a] + verts[b]) * 0.5;
            m = m * (1.0 / segqa::norm(m));
            uint32_t id = uint32_t(verts.size());
            verts.push_back(m);
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<uint32_t, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            uint32_t ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces.swap(next);
    }
    segqa::TriMesh mesh;
    mesh.vertices = verts;
    for (auto& v : mesh.vertices) v = v * radius;
    mesh.faces = faces;
    return mesh;
}

// Closest point on a triangle (Ericson, Real-Time Collision Detection).
inline double point_triangle_distance(const segqa::Vec3& p, const segqa::Vec3& a,
                                      const segqa::Vec3& b, const segqa::Vec3& c) {
    using segqa::Vec3;
    using segqa::dot;
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return segqa::norm(p - a);
    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return segqa::norm(p - b);
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double v = d1 / (d1 - d3);
        return segqa::norm(p - (a + ab * v));
    }
    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) return segqa::norm(p - c);
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        double w = d2 / (d2 - d6);
        return segqa::norm(p - (a + ac * w));
    }
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return segqa::norm(p - (b + (c - b) * w));
    }
    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    return segqa::norm(p - (a + ab * v + ac * w));
}

inline double point_mesh_distance(const segqa::Vec3& p, const segqa::TriMesh& mesh) {
    double best = std::numeric_limits<double>::max();
    for (const auto& f : mesh.faces)
        best = std::min(best, point_triangle_distance(p, mesh.vertices[f[0]],
                                                      mesh.vertices[f[1]], mesh.vertices[f[2]]));
    return best;
}

// Symmetric Hausdorff distance between surfaces, sampled at vertices and
// face centroids.
inline double sampled_hausdorff(const segqa::TriMesh& a, const segqa::TriMesh& b) {
    auto samples = [](const segqa::TriMesh& m) {
        std::vector<segqa::Vec3> pts = m.vertices;
        for (const auto& f : m.faces)
            pts.push_back((m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) * (1.0 / 3.0));
        return pts;
    };
    double worst = 0;
    for (const auto& p : samples(a)) worst = std::max(worst, point_mesh_distance(p, b));
    for (const auto& p : samples(b)) worst = std::max(worst, point_mesh_distance(p, a));
    return worst;
}

// Random binary mask guaranteed to contain both classes.
inline segqa::BinaryMask random_mask(segqa::Rng& rng, int max_dim = 16) {
    int nx = 2 + int(rng.uniform_index(uint64_t(max_dim - 1)));
    int ny = 2 + int(rng.uniform_index(uint64_t(max_dim - 1)));
    int nz = 2 + int(rng.uniform_index(uint64_t(max_dim - 1)));
    segqa::BinaryMask m(nx, ny, nz);
    double p = 0.05 + 0.9 * rng.uniform();
    for (auto& v : m.values) v = rng.uniform() < p ? 1 : 0;
    // force both classes
    m.values.front() = 0;
    m.values.back() = 1;
    return m;
}

}  // namespace oracles
