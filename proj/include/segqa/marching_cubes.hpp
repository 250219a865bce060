#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>

#include "segqa/detail/mc_tables.hpp"
#include "segqa/grid.hpp"
#include "segqa/mesh.hpp"

namespace segqa {

namespace detail {

// Corner layout of one cell, ring 0-3 at z, ring 4-7 at z+1.
inline constexpr int kMcCorner[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
};

inline constexpr int kMcEdgeCorners[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0},
    {4, 5}, {5, 6}, {6, 7}, {7, 4},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
};

// Each cell edge is an axis-aligned unit segment; canonical id = base grid
// point of the segment plus axis. Shared edges of neighboring cells map to
// the same id, which is what merges vertices into an indexed mesh.
inline constexpr int kMcEdgeBaseCorner[12] = {0, 1, 3, 0, 4, 5, 7, 4, 0, 1, 2, 3};
inline constexpr int kMcEdgeAxis[12] = {0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2};

}  // namespace detail

// Triangle mesh of the isolevel surface, vertices linearly interpolated along
// cell edges and merged across cells. Returns an empty mesh when the field
// has no sign change at the isolevel.
inline TriMesh marching_cubes(const SignedDistanceField& sdf, double isolevel = 0.0) {
    sdf.validate("SignedDistanceField");
    TriMesh mesh;
    if (sdf.nx < 2 || sdf.ny < 2 || sdf.nz < 2) return mesh;

    std::unordered_map<uint64_t, uint32_t> edge_vertex;
    edge_vertex.reserve(1024);

    auto edge_key = [&](int gx, int gy, int gz, int axis) {
        return (((uint64_t(gz) * sdf.ny + gy) * sdf.nx + gx) << 2) | uint64_t(axis);
    };

    double corner_val[8];
    uint32_t edge_ids[12];

    for (int z = 0; z + 1 < sdf.nz; ++z)
        for (int y = 0; y + 1 < sdf.ny; ++y)
            for (int x = 0; x + 1 < sdf.nx; ++x) {
                int cubeindex = 0;
                for (int c = 0; c < 8; ++c) {
                    corner_val[c] = sdf.at(x + detail::kMcCorner[c][0],
                                           y + detail::kMcCorner[c][1],
                                           z + detail::kMcCorner[c][2]);
                    if (corner_val[c] < isolevel) cubeindex |= (1 << c);
                }
                const uint16_t edges = detail::kMcEdgeTable[cubeindex];
                if (edges == 0) continue;

                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1u << e))) continue;
                    const int bc = detail::kMcEdgeBaseCorner[e];
                    const int axis = detail::kMcEdgeAxis[e];
                    const int gx = x + detail::kMcCorner[bc][0];
                    const int gy = y + detail::kMcCorner[bc][1];
                    const int gz = z + detail::kMcCorner[bc][2];
                    const uint64_t key = edge_key(gx, gy, gz, axis);
                    auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) {
                        edge_ids[e] = it->second;
                        continue;
                    }
                    const int ca = detail::kMcEdgeCorners[e][0];
                    const int cb = detail::kMcEdgeCorners[e][1];
                    const double va = corner_val[ca], vb = corner_val[cb];
                    double t = (vb != va) ? (isolevel - va) / (vb - va) : 0.5;
                    t = std::clamp(t, 0.0, 1.0);
                    Vec3 pa{double(x + detail::kMcCorner[ca][0]),
                            double(y + detail::kMcCorner[ca][1]),
                            double(z + detail::kMcCorner[ca][2])};
                    Vec3 pb{double(x + detail::kMcCorner[cb][0]),
                            double(y + detail::kMcCorner[cb][1]),
                            double(z + detail::kMcCorner[cb][2])};
                    Vec3 p = pa + (pb - pa) * t;
                    uint32_t id = uint32_t(mesh.vertices.size());
                    mesh.vertices.push_back(p);
                    edge_vertex.emplace(key, id);
                    edge_ids[e] = id;
                }

                const int8_t* tri = detail::kMcTriTable[cubeindex];
                for (int n = 0; tri[n] != -1; n += 3) {
                    // Table order is clockwise seen from the positive side of
                    // the field; swap to get outward-facing triangles.
                    uint32_t a = edge_ids[tri[n]];
                    uint32_t b = edge_ids[tri[n + 2]];
                    uint32_t c = edge_ids[tri[n + 1]];
                    if (a == b || b == c || a == c) continue;
                    mesh.faces.push_back({a, b, c});
                }
            }

    if (mesh.faces.empty()) {
        mesh.vertices.clear();
        return mesh;
    }
    return compact_mesh(mesh);
}

}  // namespace segqa
