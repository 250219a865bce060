#pragma once

#include <vector>

#include "segqa/errors.hpp"
#include "segqa/mesh.hpp"

namespace segqa {

namespace detail {

inline void uniform_laplacian_step(std::vector<Vec3>& pos,
                                   const std::vector<std::vector<uint32_t>>& adj,
                                   double factor) {
    std::vector<Vec3> next(pos.size());
    for (size_t i = 0; i < pos.size(); ++i) {
        if (adj[i].empty()) {
            next[i] = pos[i];
            continue;
        }
        Vec3 avg{0, 0, 0};
        for (uint32_t j : adj[i]) avg += pos[j];
        avg = avg * (1.0 / double(adj[i].size()));
        next[i] = pos[i] + (avg - pos[i]) * factor;
    }
    pos.swap(next);
}

}  // namespace detail

// Alternating lambda/mu uniform-Laplacian steps per iteration. Connectivity
// is unchanged; mu < 0 with |mu| > lambda counteracts the shrinkage of the
// lambda step.
inline TriMesh taubin_smooth(const TriMesh& mesh, double lambda, double mu, int iterations) {
    if (!(lambda > 0.0)) throw Error("taubin_smooth: lambda must be > 0");
    if (!(mu < 0.0)) throw Error("taubin_smooth: mu must be < 0");
    if (!(-mu > lambda)) throw Error("taubin_smooth: requires |mu| > lambda");
    if (iterations < 0) throw Error("taubin_smooth: iterations must be >= 0");

    TriMesh out = mesh;
    if (iterations == 0 || mesh.vertices.empty()) return out;
    auto adj = vertex_adjacency(mesh);
    for (int it = 0; it < iterations; ++it) {
        detail::uniform_laplacian_step(out.vertices, adj, lambda);
        detail::uniform_laplacian_step(out.vertices, adj, mu);
    }
    return out;
}

// Lambda-only smoothing (shrinking); kept for comparison against Taubin.
inline TriMesh laplacian_smooth(const TriMesh& mesh, double lambda, int iterations) {
    if (!(lambda > 0.0)) throw Error("laplacian_smooth: lambda must be > 0");
    if (iterations < 0) throw Error("laplacian_smooth: iterations must be >= 0");

    TriMesh out = mesh;
    if (iterations == 0 || mesh.vertices.empty()) return out;
    auto adj = vertex_adjacency(mesh);
    for (int it = 0; it < iterations; ++it)
        detail::uniform_laplacian_step(out.vertices, adj, lambda);
    return out;
}

}  // namespace segqa
