#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "segqa/errors.hpp"

namespace segqa {

struct Vec3 {
    double v[3] = {0, 0, 0};

    constexpr Vec3() = default;
    constexpr Vec3(double x, double y, double z) : v{x, y, z} {}

    double& operator[](size_t i) { return v[i]; }
    double operator[](size_t i) const { return v[i]; }
    bool operator==(const Vec3&) const = default;

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
    friend Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
    friend Vec3& operator+=(Vec3& a, const Vec3& b) { a[0] += b[0]; a[1] += b[1]; a[2] += b[2]; return a; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Triangle surface mesh in continuous grid coordinates. Faces are
// counter-clockwise viewed from outside (normals toward positive distance).
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<uint32_t, 3>> faces;

    size_t vertex_count() const { return vertices.size(); }
    size_t face_count() const { return faces.size(); }
    bool empty() const { return faces.empty(); }
};

// Vertex-node graph of a mesh: nodes are vertices, edges the unique
// undirected triangle sides, stored deduplicated with i < j.
struct MeshGraph {
    std::vector<Vec3> node_positions;
    std::vector<std::pair<uint32_t, uint32_t>> edges;

    size_t node_count() const { return node_positions.size(); }
    size_t edge_count() const { return edges.size(); }
};

struct VertexNormals {
    std::vector<Vec3> normals;
    int fallback_count = 0;  // vertices with a zero-area star, assigned (0,0,1)
};

// Throws on any violated mesh invariant: index range, degenerate faces,
// duplicate faces, non-finite positions.
inline void check_mesh(const TriMesh& mesh) {
    const uint32_t n = uint32_t(mesh.vertices.size());
    for (const auto& v : mesh.vertices)
        for (int i = 0; i < 3; ++i)
            if (!std::isfinite(v[i])) throw Error("mesh: non-finite vertex position");
    std::unordered_set<uint64_t> seen;
    seen.reserve(mesh.faces.size() * 2);
    for (const auto& f : mesh.faces) {
        if (f[0] >= n || f[1] >= n || f[2] >= n) throw Error("mesh: face index out of range");
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw Error("mesh: degenerate face");
        uint32_t a = f[0], b = f[1], c = f[2];
        uint32_t lo = std::min({a, b, c}), hi = std::max({a, b, c});
        uint32_t mid = uint32_t(uint64_t(a) + b + c - lo - hi);
        uint64_t key = (uint64_t(lo) << 42) ^ (uint64_t(mid) << 21) ^ hi;
        if (!seen.insert(key).second) throw Error("mesh: duplicate face");
    }
}

// Drops unreferenced vertices, preserving relative order.
inline TriMesh compact_mesh(const TriMesh& mesh) {
    std::vector<uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
    TriMesh out;
    out.faces.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces) {
        std::array<uint32_t, 3> nf;
        for (int i = 0; i < 3; ++i) {
            uint32_t v = f[i];
            if (remap[v] == UINT32_MAX) {
                remap[v] = uint32_t(out.vertices.size());
                out.vertices.push_back(mesh.vertices[v]);
            }
            nf[i] = remap[v];
        }
        out.faces.push_back(nf);
    }
    return out;
}

inline MeshGraph mesh_to_graph(const TriMesh& mesh) {
    MeshGraph g;
    g.node_positions = mesh.vertices;
    std::vector<uint64_t> keys;
    keys.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        for (int i = 0; i < 3; ++i) {
            uint32_t a = f[i], b = f[(i + 1) % 3];
            if (a == b) continue;
            uint32_t lo = std::min(a, b), hi = std::max(a, b);
            keys.push_back((uint64_t(lo) << 32) | hi);
        }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    g.edges.reserve(keys.size());
    for (uint64_t k : keys) g.edges.emplace_back(uint32_t(k >> 32), uint32_t(k & 0xffffffffu));
    return g;
}

// Area-weighted average of incident face normals, normalized to unit length.
inline VertexNormals vertex_normals(const TriMesh& mesh) {
    VertexNormals out;
    out.normals.assign(mesh.vertices.size(), Vec3{0, 0, 0});
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        Vec3 fn = cross(b - a, c - a);  // magnitude = 2 * area
        for (int i = 0; i < 3; ++i) out.normals[f[i]] += fn;
    }
    for (auto& nrm : out.normals) {
        double len = norm(nrm);
        if (len < 1e-12) {
            nrm = {0, 0, 1};
            ++out.fallback_count;
        } else {
            nrm = nrm * (1.0 / len);
        }
    }
    return out;
}

// Enclosed volume by the signed-tetrahedron sum; absolute value.
inline double mesh_volume(const TriMesh& mesh) {
    double v6 = 0.0;
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3& b = mesh.vertices[f[1]];
        const Vec3& c = mesh.vertices[f[2]];
        v6 += dot(a, cross(b, c));
    }
    return std::fabs(v6) / 6.0;
}

inline double mean_edge_length(const TriMesh& mesh) {
    MeshGraph g = mesh_to_graph(mesh);
    if (g.edges.empty()) return 0.0;
    double total = 0.0;
    for (auto [i, j] : g.edges) total += norm(mesh.vertices[i] - mesh.vertices[j]);
    return total / double(g.edges.size());
}

inline std::vector<std::vector<uint32_t>> vertex_adjacency(const TriMesh& mesh) {
    MeshGraph g = mesh_to_graph(mesh);
    std::vector<std::vector<uint32_t>> adj(mesh.vertices.size());
    for (auto [i, j] : g.edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    return adj;
}

}  // namespace segqa
