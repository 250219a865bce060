#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "segqa/grid.hpp"
#include "segqa/noise.hpp"
#include "segqa/rng.hpp"
#include "segqa/sdt.hpp"
#include "segqa/volume_io.hpp"
#include "support/oracles.hpp"

using namespace segqa;

TEST_CASE("sdt of single center voxel matches all-pairs distances") {
    BinaryMask m(3, 3, 3);
    m.at(1, 1, 1) = 1;
    auto sdf = signed_distance_transform(m);

    // brute force over the 27 voxels
    auto d_in = oracles::brute_squared_edt(3, 3, 3, [&](int x, int y, int z) { return m.at(x, y, z) != 0; });
    auto d_out = oracles::brute_squared_edt(3, 3, 3, [&](int x, int y, int z) { return m.at(x, y, z) == 0; });
    for (int z = 0; z < 3; ++z)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) {
                size_t i = m.index(x, y, z);
                double expect = m.values[i] ? -std::sqrt(double(d_out[i])) : std::sqrt(double(d_in[i]));
                REQUIRE(sdf.values[i] == Catch::Approx(expect).margin(1e-6));
            }

    REQUIRE(sdf.at(1, 1, 1) == Catch::Approx(-1.0));
    REQUIRE(sdf.at(0, 1, 1) == Catch::Approx(1.0));
    REQUIRE(sdf.at(0, 0, 1) == Catch::Approx(std::sqrt(2.0)));
    REQUIRE(sdf.at(0, 0, 0) == Catch::Approx(std::sqrt(3.0)));
}

TEST_CASE("sdt squared distances equal brute force exactly on random masks") {
    Rng rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        auto m = oracles::random_mask(rng);
        auto fast_in = squared_edt(m.nx, m.ny, m.nz, [&](int x, int y, int z) { return m.at(x, y, z) != 0; });
        auto brute_in = oracles::brute_squared_edt(m.nx, m.ny, m.nz,
                                                   [&](int x, int y, int z) { return m.at(x, y, z) != 0; });
        for (size_t i = 0; i < fast_in.size(); ++i)
            REQUIRE(int64_t(fast_in[i]) == brute_in[i]);
    }
}

TEST_CASE("threshold round trip recovers the mask") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        auto m = oracles::random_mask(rng);
        auto back = threshold_to_mask(signed_distance_transform(m));
        REQUIRE(back.values == m.values);
    }
}

TEST_CASE("sdt sign coherence") {
    Rng rng(11);
    auto m = oracles::random_mask(rng);
    auto sdf = signed_distance_transform(m);
    for (size_t i = 0; i < m.size(); ++i) {
        if (sdf.values[i] < 0) REQUIRE(m.values[i] == 1);
        if (sdf.values[i] > 0) REQUIRE(m.values[i] == 0);
        REQUIRE(std::fabs(sdf.values[i]) <=
                std::sqrt(double(m.nx) * m.nx + double(m.ny) * m.ny + double(m.nz) * m.nz));
    }
}

TEST_CASE("sdt rejects empty and full masks") {
    BinaryMask empty(4, 4, 4);
    REQUIRE_THROWS_AS(signed_distance_transform(empty), EmptyMaskError);
    BinaryMask full(4, 4, 4, 1);
    REQUIRE_THROWS_AS(signed_distance_transform(full), FullMaskError);
}

TEST_CASE("threshold boundary inclusion") {
    SignedDistanceField f(3, 3, 3, 1.0f);
    auto m = threshold_to_mask(f);
    REQUIRE(m.count_foreground() == 0);

    f.at(2, 1, 0) = 0.0f;
    m = threshold_to_mask(f);
    REQUIRE(m.count_foreground() == 1);
    REQUIRE(m.at(2, 1, 0) == 1);
}

TEST_CASE("sdt of digital ball thresholds back to the ball") {
    auto ball = oracles::digital_ball(16, 7.5, 7.5, 7.5, 5.0);
    auto back = threshold_to_mask(signed_distance_transform(ball));
    REQUIRE(back.values == ball.values);
}

TEST_CASE("noise with zero bumps is the identity") {
    auto ball = oracles::digital_ball(12, 5.5, 5.5, 5.5, 3.0);
    auto sdf = signed_distance_transform(ball);
    NoiseSpec spec;
    spec.num_bumps = 0;
    spec.seed = 5;
    auto out = simulate_noise_field(sdf, spec);
    REQUIRE(out.values == sdf.values);
}

TEST_CASE("noise is deterministic given the seed") {
    auto ball = oracles::digital_ball(14, 6.5, 6.5, 6.5, 4.0);
    auto sdf = signed_distance_transform(ball);
    NoiseSpec spec;
    spec.num_bumps = 7;
    spec.amplitude_range = {-2.0, 2.0};
    spec.sigma_range = {1.0, 3.0};
    spec.seed = 99;
    auto a = simulate_noise_field(sdf, spec);
    auto b = simulate_noise_field(sdf, spec);
    REQUIRE(a.values == b.values);

    spec.seed = 100;
    auto c = simulate_noise_field(sdf, spec);
    REQUIRE(a.values != c.values);
}

TEST_CASE("single bump matches the closed form on the grid") {
    auto ball = oracles::digital_ball(16, 7.5, 7.5, 7.5, 5.0);
    auto sdf = signed_distance_transform(ball);
    NoiseSpec spec;
    spec.num_bumps = 1;
    spec.amplitude_range = {1.5, 1.5};
    spec.sigma_range = {2.0, 2.0};
    spec.seed = 3;
    std::vector<NoiseBump> bumps;
    auto out = simulate_noise_field(sdf, spec, &bumps);
    REQUIRE(bumps.size() == 1);
    const auto& bump = bumps[0];
    REQUIRE(bump.amplitude == Catch::Approx(1.5));
    REQUIRE(bump.sigma == Catch::Approx(2.0));

    // evaluate the closed-form bump on the grid
    double max_abs = 0.0;
    for (int z = 0; z < sdf.nz; ++z)
        for (int y = 0; y < sdf.ny; ++y)
            for (int x = 0; x < sdf.nx; ++x) {
                double dx = x - bump.center[0], dy = y - bump.center[1], dz = z - bump.center[2];
                double expect = bump.amplitude * std::exp(-(dx * dx + dy * dy + dz * dz) /
                                                          (2.0 * bump.sigma * bump.sigma));
                double got = double(out.at(x, y, z)) - double(sdf.at(x, y, z));
                REQUIRE(got == Catch::Approx(expect).margin(1e-5));
                max_abs = std::max(max_abs, std::fabs(got));
            }
    // peak reaches the amplitude at the voxel nearest the center
    REQUIRE(max_abs <= 1.5 + 1e-6);
    REQUIRE(max_abs >= 1.5 * std::exp(-3.0 / (8.0)) - 1e-6);

    // the center voxel lies in the band near the zero level set
    REQUIRE(std::fabs(trilinear_sample(sdf, bump.center[0], bump.center[1], bump.center[2])) <=
            3.0 * spec.sigma_range[1] + 1e-9);
}

TEST_CASE("hausdorff identical masks and two points") {
    auto ball = oracles::digital_ball(10, 4.5, 4.5, 4.5, 3.0);
    REQUIRE(hausdorff_distance(ball, ball) == 0.0);

    BinaryMask a(6, 4, 4), b(6, 4, 4);
    a.at(0, 0, 0) = 1;
    b.at(3, 0, 0) = 1;
    REQUIRE(hausdorff_distance(a, b) == Catch::Approx(3.0));
}

TEST_CASE("hausdorff matches brute force and is symmetric") {
    Rng rng(123);
    for (int trial = 0; trial < 10; ++trial) {
        auto a = oracles::random_mask(rng, 8);
        segqa::BinaryMask b(a.nx, a.ny, a.nz);
        for (auto& v : b.values) v = rng.uniform() < 0.4 ? 1 : 0;
        b.values.back() = 1;
        double ab = hausdorff_distance(a, b);
        double ba = hausdorff_distance(b, a);
        REQUIRE(ab == ba);
        REQUIRE(ab == Catch::Approx(oracles::brute_hausdorff(a, b)).margin(1e-9));
    }
}

TEST_CASE("hausdorff requires non-empty foregrounds") {
    BinaryMask a(4, 4, 4), b(4, 4, 4);
    b.at(1, 1, 1) = 1;
    REQUIRE_THROWS_AS(hausdorff_distance(a, b), EmptyMaskError);
}

TEST_CASE("trilinear sampling basics") {
    VoxelVolume v(4, 4, 4);
    Rng rng(17);
    for (auto& x : v.values) x = float(rng.uniform());

    // exact at integer coordinates
    REQUIRE(trilinear_sample(v, 2, 1, 3) == Catch::Approx(double(v.at(2, 1, 3))).epsilon(0));

    // midpoint of a single-axis segment is the average
    VoxelVolume w(2, 1, 1);
    w.values = {0.0f, 1.0f};
    REQUIRE(trilinear_sample(w, 0.5, 0, 0) == Catch::Approx(0.5));
}

TEST_CASE("trilinear equals 8-corner blend oracle") {
    VoxelVolume v(5, 6, 7);
    Rng rng(31);
    for (auto& x : v.values) x = float(rng.uniform(-2, 2));
    for (int trial = 0; trial < 200; ++trial) {
        double x = rng.uniform() * (v.nx - 1);
        double y = rng.uniform() * (v.ny - 1);
        double z = rng.uniform() * (v.nz - 1);
        int x0 = std::min(int(x), v.nx - 2), y0 = std::min(int(y), v.ny - 2), z0 = std::min(int(z), v.nz - 2);
        double fx = x - x0, fy = y - y0, fz = z - z0;
        double expect = 0.0;
        for (int dz = 0; dz <= 1; ++dz)
            for (int dy = 0; dy <= 1; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                    double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                    expect += wgt * v.at(x0 + dx, y0 + dy, z0 + dz);
                }
        REQUIRE(trilinear_sample(v, x, y, z) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("trilinear is exact on affine fields") {
    VoxelVolume v(6, 5, 4);
    const double a = 0.3, b = -1.2, c = 2.1, d = 0.7;
    for (int z = 0; z < v.nz; ++z)
        for (int y = 0; y < v.ny; ++y)
            for (int x = 0; x < v.nx; ++x) v.at(x, y, z) = float(a * x + b * y + c * z + d);
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        double x = rng.uniform() * (v.nx - 1);
        double y = rng.uniform() * (v.ny - 1);
        double z = rng.uniform() * (v.nz - 1);
        // float32 storage limits the match, not the interpolation itself
        REQUIRE(trilinear_sample(v, x, y, z) == Catch::Approx(a * x + b * y + c * z + d).margin(1e-5));
    }
}

TEST_CASE("trilinear clamps out-of-range points") {
    VoxelVolume v(3, 3, 3);
    for (size_t i = 0; i < v.values.size(); ++i) v.values[i] = float(i);
    REQUIRE(trilinear_sample(v, -5, -5, -5) == Catch::Approx(double(v.at(0, 0, 0))));
    REQUIRE(trilinear_sample(v, 99, 99, 99) == Catch::Approx(double(v.at(2, 2, 2))));
}

TEST_CASE("subvolume of a constant field is constant") {
    VoxelVolume v(9, 9, 9, 3.25f);
    auto block = resample_subvolume(v, {4.0, 4.0, 4.0}, 5);
    REQUIRE(block.size() == 125);
    for (float x : block) REQUIRE(x == 3.25f);
}

TEST_CASE("subvolume replicates the clamped border") {
    VoxelVolume v(4, 4, 4);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) v.at(x, y, z) = float(x);
    auto block = resample_subvolume(v, {0.0, 2.0, 2.0}, 5);
    // offsets -2 and -1 along x clamp to x=0
    REQUIRE(block[2 * 25 + 2 * 5 + 0] == 0.0f);
    REQUIRE(block[2 * 25 + 2 * 5 + 1] == 0.0f);
    REQUIRE(block[2 * 25 + 2 * 5 + 2] == 0.0f);
    REQUIRE(block[2 * 25 + 2 * 5 + 3] == 1.0f);
    REQUIRE(block[2 * 25 + 2 * 5 + 4] == 2.0f);
}

TEST_CASE("subvolume center equals trilinear sample") {
    VoxelVolume v(8, 8, 8);
    Rng rng(77);
    for (auto& x : v.values) x = float(rng.uniform());
    std::array<double, 3> c{3.3, 4.7, 2.1};
    auto block = resample_subvolume(v, c, 5);
    REQUIRE(double(block[2 * 25 + 2 * 5 + 2]) == Catch::Approx(trilinear_sample(v, c[0], c[1], c[2])).margin(1e-6));
}

TEST_CASE("volume file round trip") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "segqa_volio_test";
    fs::create_directories(dir);

    VoxelVolume v(5, 4, 3);
    v.spacing = {0.02, 0.02, 0.02};
    v.origin = {1.0, 2.0, 3.0};
    Rng rng(8);
    for (auto& x : v.values) x = float(rng.uniform(-10, 10));
    auto vpath = (dir / "vol.segv").string();
    write_volume(v, vpath);
    auto v2 = read_volume(vpath);
    REQUIRE(v2.nx == v.nx);
    REQUIRE(v2.values == v.values);
    REQUIRE(v2.spacing[0] == Catch::Approx(0.02));

    BinaryMask m(3, 3, 3);
    m.at(1, 1, 1) = 1;
    auto mpath = (dir / "mask.segv").string();
    write_mask(m, mpath);
    auto m2 = read_mask(mpath);
    REQUIRE(m2.values == m.values);

    // dtype mismatch is reported
    REQUIRE_THROWS_AS(read_volume(mpath), IoError);

    // truncated file is an error, not a crash
    {
        std::ofstream os(vpath, std::ios::binary | std::ios::trunc);
        os << "SEGV1";
    }
    REQUIRE_THROWS_AS(read_volume(vpath), IoError);

    fs::remove_all(dir);
}
