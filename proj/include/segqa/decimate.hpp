#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <unordered_set>
#include <vector>

#include "segqa/mesh.hpp"

namespace segqa {

namespace detail {

// Symmetric 4x4 plane quadric, upper triangle stored.
struct Quadric {
    double q[10] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    // layout: [0]=xx [1]=xy [2]=xz [3]=xw [4]=yy [5]=yz [6]=yw [7]=zz [8]=zw [9]=ww

    void add_plane(double a, double b, double c, double d) {
        q[0] += a * a; q[1] += a * b; q[2] += a * c; q[3] += a * d;
        q[4] += b * b; q[5] += b * c; q[6] += b * d;
        q[7] += c * c; q[8] += c * d;
        q[9] += d * d;
    }
    Quadric& operator+=(const Quadric& o) {
        for (int i = 0; i < 10; ++i) q[i] += o.q[i];
        return *this;
    }
    double eval(const Vec3& v) const {
        double x = v[0], y = v[1], z = v[2];
        return q[0] * x * x + 2 * q[1] * x * y + 2 * q[2] * x * z + 2 * q[3] * x +
               q[4] * y * y + 2 * q[5] * y * z + 2 * q[6] * y +
               q[7] * z * z + 2 * q[8] * z + q[9];
    }
    // Minimizer of the quadric; false when the 3x3 system is singular.
    bool optimal_point(Vec3& out) const {
        double m[3][3] = {{q[0], q[1], q[2]}, {q[1], q[4], q[5]}, {q[2], q[5], q[7]}};
        double rhs[3] = {-q[3], -q[6], -q[8]};
        double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (std::fabs(det) < 1e-10) return false;
        double inv = 1.0 / det;
        out[0] = inv * (rhs[0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                        m[0][1] * (rhs[1] * m[2][2] - m[1][2] * rhs[2]) +
                        m[0][2] * (rhs[1] * m[2][1] - m[1][1] * rhs[2]));
        out[1] = inv * (m[0][0] * (rhs[1] * m[2][2] - m[1][2] * rhs[2]) -
                        rhs[0] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                        m[0][2] * (m[1][0] * rhs[2] - rhs[1] * m[2][0]));
        out[2] = inv * (m[0][0] * (m[1][1] * rhs[2] - rhs[1] * m[2][1]) -
                        m[0][1] * (m[1][0] * rhs[2] - rhs[1] * m[2][0]) +
                        rhs[0] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]));
        return std::isfinite(out[0]) && std::isfinite(out[1]) && std::isfinite(out[2]);
    }
};

struct CollapseCandidate {
    double cost = 0.0;
    uint32_t u = 0, v = 0;  // u < v
    uint32_t version_u = 0, version_v = 0;
    Vec3 target{0, 0, 0};
};

struct CandidateOrder {
    bool operator()(const CollapseCandidate& a, const CollapseCandidate& b) const {
        if (a.cost != b.cost) return a.cost > b.cost;  // min-heap
        if (a.u != b.u) return a.u > b.u;
        return a.v > b.v;
    }
};

}  // namespace detail

// Iterative edge collapse ordered by quadric error. Stops at or below
// target_faces, or earlier when no valid collapse remains. Collapses that
// would create duplicate faces or flip a surviving face are rejected.
inline TriMesh quadric_decimate(const TriMesh& mesh, size_t target_faces) {
    if (target_faces < 4) throw Error("quadric_decimate: target_faces must be >= 4");
    if (mesh.face_count() <= target_faces) return mesh;

    const size_t nv = mesh.vertices.size();
    std::vector<Vec3> pos = mesh.vertices;
    std::vector<std::array<uint32_t, 3>> faces = mesh.faces;
    std::vector<bool> face_alive(faces.size(), true);
    std::vector<bool> vert_alive(nv, true);
    std::vector<uint32_t> version(nv, 0);
    std::vector<detail::Quadric> quadric(nv);
    std::vector<std::vector<uint32_t>> incident(nv);  // faces per vertex

    auto face_normal_area = [&](uint32_t fi, Vec3& n) {
        const auto& f = faces[fi];
        n = cross(pos[f[1]] - pos[f[0]], pos[f[2]] - pos[f[0]]);
        return norm(n);
    };

    for (uint32_t fi = 0; fi < faces.size(); ++fi) {
        const auto& f = faces[fi];
        for (int i = 0; i < 3; ++i) incident[f[i]].push_back(fi);
        Vec3 n;
        double a2 = face_normal_area(fi, n);
        if (a2 < 1e-14) continue;
        n = n * (1.0 / a2);
        double d = -dot(n, pos[f[0]]);
        for (int i = 0; i < 3; ++i) quadric[f[i]].add_plane(n[0], n[1], n[2], d);
    }

    std::priority_queue<detail::CollapseCandidate, std::vector<detail::CollapseCandidate>,
                        detail::CandidateOrder>
        heap;

    auto push_candidate = [&](uint32_t a, uint32_t b) {
        if (a == b) return;
        uint32_t u = std::min(a, b), v = std::max(a, b);
        detail::Quadric q = quadric[u];
        q += quadric[v];
        detail::CollapseCandidate c;
        c.u = u;
        c.v = v;
        c.version_u = version[u];
        c.version_v = version[v];
        if (!q.optimal_point(c.target)) c.target = (pos[u] + pos[v]) * 0.5;
        c.cost = q.eval(c.target);
        heap.push(c);
    };

    {
        MeshGraph g = mesh_to_graph(mesh);
        for (auto [i, j] : g.edges) push_candidate(i, j);
    }

    size_t alive_faces = faces.size();
    auto face_key = [&](uint32_t a, uint32_t b, uint32_t c) {
        uint32_t lo = std::min({a, b, c}), hi = std::max({a, b, c});
        uint32_t mid = uint32_t(uint64_t(a) + b + c - lo - hi);
        return (uint64_t(lo) << 42) ^ (uint64_t(mid) << 21) ^ uint64_t(hi);
    };

    while (alive_faces > target_faces && !heap.empty()) {
        detail::CollapseCandidate c = heap.top();
        heap.pop();
        uint32_t u = c.u, v = c.v;
        if (!vert_alive[u] || !vert_alive[v]) continue;
        if (version[u] != c.version_u || version[v] != c.version_v) continue;

        // Partition v's faces: shared faces vanish, the rest move to u.
        std::vector<uint32_t> shared, moving;
        bool adjacent = false;
        for (uint32_t fi : incident[v]) {
            if (!face_alive[fi]) continue;
            const auto& f = faces[fi];
            if (f[0] == u || f[1] == u || f[2] == u) {
                shared.push_back(fi);
                adjacent = true;
            } else {
                moving.push_back(fi);
            }
        }
        if (!adjacent) continue;  // edge no longer exists
        if (alive_faces - shared.size() < target_faces) continue;

        // Reject duplicates: a moved face must not coincide with a face of u.
        std::unordered_set<uint64_t> u_keys;
        for (uint32_t fi : incident[u]) {
            if (!face_alive[fi]) continue;
            const auto& f = faces[fi];
            u_keys.insert(face_key(f[0], f[1], f[2]));
        }
        bool reject = false;
        for (uint32_t fi : moving) {
            auto f = faces[fi];
            for (auto& idx : f)
                if (idx == v) idx = u;
            if (u_keys.count(face_key(f[0], f[1], f[2]))) {
                reject = true;
                break;
            }
        }
        if (reject) continue;

        // Reject normal flips among surviving faces of u and v.
        auto flips = [&](const std::vector<uint32_t>& fis) {
            for (uint32_t fi : fis) {
                if (!face_alive[fi]) continue;
                auto f = faces[fi];
                bool touches_v = (f[0] == v || f[1] == v || f[2] == v);
                bool touches_u = (f[0] == u || f[1] == u || f[2] == u);
                if (!touches_u && !touches_v) continue;
                Vec3 before;
                if (norm(before = cross(pos[f[1]] - pos[f[0]], pos[f[2]] - pos[f[0]])) < 1e-14)
                    continue;
                Vec3 p0 = pos[f[0]], p1 = pos[f[1]], p2 = pos[f[2]];
                for (int i = 0; i < 3; ++i) {
                    if (f[i] == u || f[i] == v) {
                        if (i == 0) p0 = c.target;
                        if (i == 1) p1 = c.target;
                        if (i == 2) p2 = c.target;
                    }
                }
                Vec3 after = cross(p1 - p0, p2 - p0);
                if (norm(after) < 1e-14 || dot(before, after) <= 0.0) return true;
            }
            return false;
        };
        std::vector<uint32_t> u_surviving;
        for (uint32_t fi : incident[u]) {
            if (!face_alive[fi]) continue;
            if (std::find(shared.begin(), shared.end(), fi) != shared.end()) continue;
            u_surviving.push_back(fi);
        }
        if (flips(moving) || flips(u_surviving)) continue;

        // Apply the collapse.
        for (uint32_t fi : shared) {
            face_alive[fi] = false;
            --alive_faces;
        }
        for (uint32_t fi : moving) {
            for (auto& idx : faces[fi])
                if (idx == v) idx = u;
            incident[u].push_back(fi);
        }
        pos[u] = c.target;
        quadric[u] += quadric[v];
        vert_alive[v] = false;
        incident[v].clear();
        ++version[u];
        ++version[v];

        // Refresh candidates around u.
        std::unordered_set<uint32_t> nbrs;
        for (uint32_t fi : incident[u]) {
            if (!face_alive[fi]) continue;
            for (uint32_t idx : faces[fi])
                if (idx != u) nbrs.insert(idx);
        }
        std::vector<uint32_t> sorted_nbrs(nbrs.begin(), nbrs.end());
        std::sort(sorted_nbrs.begin(), sorted_nbrs.end());
        for (uint32_t w : sorted_nbrs) push_candidate(u, w);
    }

    TriMesh out;
    out.vertices = pos;
    out.faces.reserve(alive_faces);
    for (uint32_t fi = 0; fi < faces.size(); ++fi)
        if (face_alive[fi]) out.faces.push_back(faces[fi]);
    return compact_mesh(out);
}

}  // namespace segqa
