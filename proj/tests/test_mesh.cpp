#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "segqa/decimate.hpp"
#include "segqa/marching_cubes.hpp"
#include "segqa/mesh.hpp"
#include "segqa/mesh_io.hpp"
#include "segqa/rng.hpp"
#include "segqa/smooth.hpp"
#include "support/oracles.hpp"

using namespace segqa;

namespace {

SignedDistanceField sphere_field(int n, double r) {
    SignedDistanceField f(n, n, n);
    double c = (n - 1) / 2.0;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double dx = x - c, dy = y - c, dz = z - c;
                f.at(x, y, z) = float(std::sqrt(dx * dx + dy * dy + dz * dz) - r);
            }
    return f;
}

std::map<std::pair<uint32_t, uint32_t>, int> edge_face_counts(const TriMesh& mesh) {
    std::map<std::pair<uint32_t, uint32_t>, int> counts;
    for (const auto& f : mesh.faces)
        for (int i = 0; i < 3; ++i) {
            uint32_t a = f[i], b = f[(i + 1) % 3];
            counts[std::minmax(a, b)]++;
        }
    return counts;
}

TriMesh tetrahedron() {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    return m;
}

}  // namespace

TEST_CASE("marching cubes sphere: topology, accuracy, orientation") {
    const int n = 32;
    const double r = 8.0;
    auto f = sphere_field(n, r);
    auto mesh = marching_cubes(f);
    REQUIRE(!mesh.empty());
    check_mesh(mesh);

    auto g = mesh_to_graph(mesh);
    REQUIRE(int64_t(mesh.vertex_count()) - int64_t(g.edge_count()) + int64_t(mesh.face_count()) == 2);

    // closed interior surface: every edge shared by exactly two faces
    for (const auto& [e, c] : edge_face_counts(mesh)) REQUIRE(c == 2);

    double c = (n - 1) / 2.0;
    for (const auto& v : mesh.vertices) {
        double d = std::sqrt((v[0] - c) * (v[0] - c) + (v[1] - c) * (v[1] - c) + (v[2] - c) * (v[2] - c));
        REQUIRE(std::fabs(d - r) < std::sqrt(3.0) / 2.0);
        // vertices sit on the isolevel
        REQUIRE(std::fabs(trilinear_sample(f, v[0], v[1], v[2])) < 1e-3);
    }

    // outward orientation: vertex normals point away from the center
    auto vn = vertex_normals(mesh);
    REQUIRE(vn.fallback_count == 0);
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        Vec3 radial = mesh.vertices[i] - Vec3{c, c, c};
        radial = radial * (1.0 / norm(radial));
        REQUIRE(dot(vn.normals[i], radial) > 0.9);
    }

    REQUIRE(mesh_volume(mesh) == Catch::Approx(4.0 / 3.0 * M_PI * r * r * r).epsilon(0.05));
}

TEST_CASE("marching cubes half-space gives a plane at the crossing") {
    SignedDistanceField f(8, 8, 12);
    for (int z = 0; z < f.nz; ++z)
        for (int y = 0; y < f.ny; ++y)
            for (int x = 0; x < f.nx; ++x) f.at(x, y, z) = float(z - 5.25);
    auto mesh = marching_cubes(f);
    REQUIRE(!mesh.empty());
    for (const auto& v : mesh.vertices) REQUIRE(v[2] == Catch::Approx(5.25).margin(1e-6));
}

TEST_CASE("marching cubes with no sign change returns an empty mesh") {
    SignedDistanceField f(6, 6, 6, 1.0f);
    auto mesh = marching_cubes(f);
    REQUIRE(mesh.empty());
    REQUIRE(mesh.vertex_count() == 0);
}

TEST_CASE("taubin smoothing: zero iterations is the identity") {
    auto mesh = oracles::icosphere(2, 5.0);
    auto out = taubin_smooth(mesh, 0.5, -0.53, 0);
    REQUIRE(out.vertices == mesh.vertices);
    REQUIRE(out.faces == mesh.faces);
}

TEST_CASE("taubin preserves volume, laplacian-only shrinks more") {
    auto mesh = oracles::icosphere(3, 5.0);  // 1280 faces
    REQUIRE(mesh.face_count() == 1280);
    double vol0 = mesh_volume(mesh);

    auto taubin = taubin_smooth(mesh, 0.5, -0.53, 10);
    double vol_taubin = mesh_volume(taubin);
    REQUIRE(std::fabs(vol_taubin - vol0) / vol0 < 0.05);
    REQUIRE(taubin.faces == mesh.faces);
    check_mesh(taubin);

    auto lap = laplacian_smooth(mesh, 0.5, 10);
    double vol_lap = mesh_volume(lap);
    REQUIRE(std::fabs(vol_lap - vol0) > std::fabs(vol_taubin - vol0));
    REQUIRE(vol_lap < vol0);  // pure laplacian shrinks
}

TEST_CASE("taubin rejects invalid parameter regimes") {
    auto mesh = tetrahedron();
    REQUIRE_THROWS_AS(taubin_smooth(mesh, -0.1, -0.5, 1), Error);
    REQUIRE_THROWS_AS(taubin_smooth(mesh, 0.5, 0.5, 1), Error);
    REQUIRE_THROWS_AS(taubin_smooth(mesh, 0.5, -0.4, 1), Error);
}

TEST_CASE("decimation reduces icosphere with bounded deviation") {
    auto mesh = oracles::icosphere(3, 8.0);
    REQUIRE(mesh.face_count() == 1280);
    double mean_edge = mean_edge_length(mesh);

    auto dec = quadric_decimate(mesh, 320);
    check_mesh(dec);
    REQUIRE(dec.face_count() <= 320);
    REQUIRE(dec.face_count() >= 4);
    REQUIRE(oracles::sampled_hausdorff(mesh, dec) < 2.0 * mean_edge);
}

TEST_CASE("decimation no-ops at or above current face count and is idempotent") {
    auto mesh = oracles::icosphere(2, 4.0);
    auto same = quadric_decimate(mesh, mesh.face_count());
    REQUIRE(same.faces == mesh.faces);
    REQUIRE(same.vertices == mesh.vertices);

    auto dec1 = quadric_decimate(mesh, 80);
    auto dec2 = quadric_decimate(dec1, 80);
    REQUIRE(dec2.faces == dec1.faces);
    REQUIRE(dec2.vertices == dec1.vertices);
    REQUIRE(dec1.face_count() <= mesh.face_count());
}

TEST_CASE("vertex normals: planar triangle and icosphere radial agreement") {
    TriMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    auto vn = vertex_normals(tri);
    for (const auto& nrm : vn.normals) {
        REQUIRE(nrm[0] == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(nrm[1] == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(nrm[2] == Catch::Approx(1.0).margin(1e-12));
    }

    auto sphere = oracles::icosphere(3, 2.0);
    auto sn = vertex_normals(sphere);
    REQUIRE(sn.fallback_count == 0);
    for (size_t i = 0; i < sphere.vertices.size(); ++i) {
        Vec3 radial = sphere.vertices[i] * (1.0 / norm(sphere.vertices[i]));
        REQUIRE(dot(sn.normals[i], radial) > 0.9);
        REQUIRE(norm(sn.normals[i]) == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("vertex normals fallback on isolated vertices") {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}};
    m.faces = {{0, 1, 2}};
    auto vn = vertex_normals(m);
    REQUIRE(vn.fallback_count == 1);
    REQUIRE(vn.normals[3] == Vec3{0, 0, 1});
}

TEST_CASE("mesh_to_graph basics") {
    TriMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    auto g = mesh_to_graph(tri);
    REQUIRE(g.node_count() == 3);
    REQUIRE(g.edge_count() == 3);

    auto tet = tetrahedron();
    auto gt = mesh_to_graph(tet);
    REQUIRE(gt.node_count() == 4);
    REQUIRE(gt.edge_count() == 6);  // K4

    for (auto [i, j] : gt.edges) {
        REQUIRE(i < j);
        REQUIRE(j < gt.node_count());
    }
}

TEST_CASE("closed manifold meshes satisfy 2E == 3F") {
    for (int subdiv : {1, 2, 3}) {
        auto sphere = oracles::icosphere(subdiv, 3.0);
        auto g = mesh_to_graph(sphere);
        REQUIRE(2 * g.edge_count() == 3 * sphere.face_count());
    }
    auto mc = marching_cubes(sphere_field(24, 6.0));
    auto g = mesh_to_graph(mc);
    REQUIRE(2 * g.edge_count() == 3 * mc.face_count());
}

TEST_CASE("graph extraction is permutation-stable") {
    auto mesh = oracles::icosphere(1, 1.0);
    auto g0 = mesh_to_graph(mesh);

    Rng rng(9);
    std::vector<uint32_t> perm(mesh.vertex_count());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = uint32_t(i);
    for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);

    TriMesh permuted;
    permuted.vertices.resize(mesh.vertex_count());
    for (size_t i = 0; i < mesh.vertex_count(); ++i) permuted.vertices[perm[i]] = mesh.vertices[i];
    for (auto f : mesh.faces) permuted.faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});

    auto g1 = mesh_to_graph(permuted);
    std::set<std::pair<uint32_t, uint32_t>> expected;
    for (auto [i, j] : g0.edges) expected.insert(std::minmax(perm[i], perm[j]));
    std::set<std::pair<uint32_t, uint32_t>> got(g1.edges.begin(), g1.edges.end());
    REQUIRE(got == expected);
}

TEST_CASE("ply round trip preserves faces and float positions") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "segqa_meshio_test";
    fs::create_directories(dir);
    auto path = (dir / "tet.ply").string();

    auto tet = tetrahedron();
    tet.vertices[1] = {1.25, -0.5, 3.75};
    write_mesh(tet, path);
    auto back = read_mesh(path);
    REQUIRE(back.faces == tet.faces);
    REQUIRE(back.vertices.size() == tet.vertices.size());
    for (size_t i = 0; i < tet.vertices.size(); ++i)
        for (int k = 0; k < 3; ++k)
            REQUIRE(float(back.vertices[i][k]) == float(tet.vertices[i][k]));

    fs::remove_all(dir);
}

TEST_CASE("ply with colors and scalars") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "segqa_meshio_test2";
    fs::create_directories(dir);
    auto path = (dir / "colored.ply").string();

    auto tet = tetrahedron();
    std::vector<float> scalars = {0.5f, -1.0f, 2.0f, 0.0f};
    std::vector<RgbColor> colors = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {0, 0, 0}};
    write_mesh(tet, path, &scalars, &colors);

    std::ifstream is(path);
    std::string header((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    REQUIRE(header.find("property uchar red") != std::string::npos);
    REQUIRE(header.find("property uchar green") != std::string::npos);
    REQUIRE(header.find("property uchar blue") != std::string::npos);
    REQUIRE(header.find("property float quality") != std::string::npos);

    std::vector<float> s2;
    std::vector<RgbColor> c2;
    auto back = read_mesh(path, &s2, &c2);
    REQUIRE(back.faces == tet.faces);
    REQUIRE(s2 == scalars);
    REQUIRE(c2 == colors);

    // length mismatch rejected
    std::vector<float> bad = {1.0f};
    REQUIRE_THROWS_AS(write_mesh(tet, path, &bad, nullptr), Error);

    fs::remove_all(dir);
}

TEST_CASE("truncated ply is a parse error with a line number") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "segqa_meshio_test3";
    fs::create_directories(dir);
    auto path = (dir / "trunc.ply").string();
    {
        std::ofstream os(path);
        os << "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
              "property float z\nelement face 4\nproperty list uchar int vertex_indices\n"
              "end_header\n0 0 0\n1 0 0\n";
    }
    try {
        read_mesh(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        REQUIRE(e.line_number >= 11);
    }
    fs::remove_all(dir);
}

TEST_CASE("obj export smoke") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "segqa_meshio_test4";
    fs::create_directories(dir);
    auto path = (dir / "tet.obj").string();
    write_obj(tetrahedron(), path);
    std::ifstream is(path);
    std::string first;
    std::getline(is, first);
    REQUIRE(first.substr(0, 2) == "v ");
    fs::remove_all(dir);
}

TEST_CASE("compact_mesh drops unreferenced vertices") {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {9, 9, 9}, {1, 0, 0}, {0, 1, 0}};
    m.faces = {{0, 2, 3}};
    auto c = compact_mesh(m);
    REQUIRE(c.vertex_count() == 3);
    REQUIRE(c.faces[0] == std::array<uint32_t, 3>{0, 1, 2});
    REQUIRE(c.vertices[1] == Vec3{1, 0, 0});
}

TEST_CASE("check_mesh catches invariant violations") {
    TriMesh bad_index;
    bad_index.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    bad_index.faces = {{0, 1, 7}};
    REQUIRE_THROWS_AS(check_mesh(bad_index), Error);

    TriMesh degen;
    degen.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    degen.faces = {{0, 1, 1}};
    REQUIRE_THROWS_AS(check_mesh(degen), Error);

    TriMesh dup;
    dup.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    dup.faces = {{0, 1, 2}, {1, 2, 0}};
    REQUIRE_THROWS_AS(check_mesh(dup), Error);
}
