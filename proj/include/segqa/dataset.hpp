#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "segqa/decimate.hpp"
#include "segqa/errors.hpp"
#include "segqa/grid.hpp"
#include "segqa/marching_cubes.hpp"
#include "segqa/mesh.hpp"
#include "segqa/noise.hpp"
#include "segqa/phantom.hpp"
#include "segqa/rng.hpp"
#include "segqa/sdt.hpp"
#include "segqa/smooth.hpp"
#include "segqa/volume_io.hpp"

namespace segqa {

// ---- class binning ----

enum class SdClass : uint8_t { A = 0, B = 1, C = 2, D = 3, E = 4 };

// Signed-distance bins in mm: A below -0.16, B [-0.16, -0.1), C [-0.1, 0.1],
// D (0.1, 0.16], E above 0.16. Total and single-valued over the reals.
inline SdClass classify_sd(double sd_mm) {
    if (std::isnan(sd_mm)) throw Error("classify_sd: NaN input");
    if (sd_mm < -0.16) return SdClass::A;
    if (sd_mm < -0.1) return SdClass::B;
    if (sd_mm <= 0.1) return SdClass::C;
    if (sd_mm <= 0.16) return SdClass::D;
    return SdClass::E;
}

inline constexpr int kNumSdClasses = 5;
inline constexpr double kSdBinEdgesMm[4] = {-0.16, -0.1, 0.1, 0.16};

inline char sd_class_letter(SdClass c) { return char('A' + int(c)); }

// ---- masking for the masked-reconstruction pretext ----

// Zeroes floor(ratio * volume) voxels chosen uniformly without replacement.
// Returns the masked block and a 0/1 indicator of masked positions.
inline std::pair<std::vector<float>, std::vector<uint8_t>> mask_subvolume(
    const std::vector<float>& block, double ratio, uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0) throw Error("mask_subvolume: ratio must be in [0, 1]");
    std::vector<float> masked = block;
    std::vector<uint8_t> indicator(block.size(), 0);
    const size_t n_mask = size_t(ratio * double(block.size()));
    if (n_mask == 0) return {std::move(masked), std::move(indicator)};

    // partial Fisher-Yates over index array
    std::vector<uint32_t> order(block.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = uint32_t(i);
    Rng rng(seed);
    for (size_t i = 0; i < n_mask; ++i) {
        size_t j = i + size_t(rng.uniform_index(order.size() - i));
        std::swap(order[i], order[j]);
        masked[order[i]] = 0.0f;
        indicator[order[i]] = 1;
    }
    return {std::move(masked), std::move(indicator)};
}

// ---- samples ----

struct SampleMeta {
    int64_t id = 0;
    int phantom_id = 0;
    std::string phantom_kind;
    uint64_t perturb_seed = 0;
    double hausdorff = 0.0;
    int attempts = 0;
    double spacing_mm = 0.02;
};

struct Sample {
    MeshGraph graph;
    std::vector<std::array<uint32_t, 3>> faces;  // kept for surface export
    std::vector<float> subvolumes;               // node_count x s^3, x fastest
    std::vector<float> sd_labels;                // voxel units
    std::vector<float> normals;                  // node_count x 3
    std::vector<uint8_t> class_labels;
    int subvolume_size = 5;
    SampleMeta meta;

    size_t node_count() const { return graph.node_count(); }
};

// ---- perturbation with a Hausdorff gate ----

struct PerturbResult {
    BinaryMask perturbed_mask;
    SignedDistanceField x_true;
    SignedDistanceField x_perturbed;
    double hausdorff = 0.0;
    int attempts = 0;
    uint64_t used_seed = 0;
};

// X = SDT(true_mask); X' = X + noise; perturbed = threshold(X'). Noise is
// rejection-resampled with derived seeds until the Hausdorff distance between
// the true and perturbed masks falls inside [gate_lo, gate_hi].
inline PerturbResult perturb_segmentation(const BinaryMask& true_mask, const NoiseSpec& noise,
                                          double gate_lo, double gate_hi, int max_attempts = 50) {
    if (gate_lo < 0 || gate_hi < gate_lo) throw Error("perturb_segmentation: invalid gate");
    noise.validate();

    PerturbResult res;
    res.x_true = signed_distance_transform(true_mask);

    double closest = std::numeric_limits<double>::max();
    double closest_gap = std::numeric_limits<double>::max();
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        NoiseSpec attempt_noise = noise;
        attempt_noise.seed = derive_seed(noise.seed, uint64_t(attempt), 0x9e, 0);
        auto x_pert = simulate_noise_field(res.x_true, attempt_noise);
        auto mask = threshold_to_mask(x_pert);
        size_t fg = mask.count_foreground();
        if (fg == 0 || fg == mask.size()) continue;  // degenerate draw

        double hd = hausdorff_distance(true_mask, mask);
        double gap = hd < gate_lo ? gate_lo - hd : (hd > gate_hi ? hd - gate_hi : 0.0);
        if (gap < closest_gap) {
            closest_gap = gap;
            closest = hd;
        }
        if (gap == 0.0) {
            res.perturbed_mask = std::move(mask);
            res.x_perturbed = std::move(x_pert);
            res.hausdorff = hd;
            res.attempts = attempt + 1;
            res.used_seed = attempt_noise.seed;
            return res;
        }
    }
    throw GateUnsatisfiableError(
        "perturb_segmentation: no draw satisfied the Hausdorff gate [" + std::to_string(gate_lo) +
            ", " + std::to_string(gate_hi) + "] within " + std::to_string(max_attempts) +
            " attempts (closest achieved " +
            (closest == std::numeric_limits<double>::max() ? "none" : std::to_string(closest)) + ")",
        closest);
}

// ---- sample assembly ----

// Labels the perturbed mesh against the true SDT: per node, the interpolated
// true signed distance (voxel units), the class of its mm value, the local
// intensity subvolume, and the vertex normal.
inline Sample build_sample(const VoxelVolume& intensity, const SignedDistanceField& x_true,
                           const TriMesh& perturbed_mesh, int subvolume_size = 5) {
    if (perturbed_mesh.empty()) throw EmptyMeshError("build_sample: empty mesh");
    if (intensity.nx != x_true.nx || intensity.ny != x_true.ny || intensity.nz != x_true.nz)
        throw Error("build_sample: intensity and SDT grids differ");

    Sample s;
    s.subvolume_size = subvolume_size;
    s.graph = mesh_to_graph(perturbed_mesh);
    s.faces = perturbed_mesh.faces;
    s.meta.spacing_mm = x_true.spacing[0];

    const size_t n = s.graph.node_count();
    const size_t block = size_t(subvolume_size) * subvolume_size * subvolume_size;
    s.subvolumes.resize(n * block);
    s.sd_labels.resize(n);
    s.class_labels.resize(n);
    s.normals.resize(n * 3);

    auto vn = vertex_normals(perturbed_mesh);
    for (size_t i = 0; i < n; ++i) {
        const Vec3& p = s.graph.node_positions[i];
        float sd = float(trilinear_sample(x_true, p[0], p[1], p[2]));
        s.sd_labels[i] = sd;
        s.class_labels[i] = uint8_t(classify_sd(double(sd) * s.meta.spacing_mm));
        auto sub = resample_subvolume(intensity, {p[0], p[1], p[2]}, subvolume_size);
        std::copy(sub.begin(), sub.end(), s.subvolumes.begin() + int64_t(i * block));
        for (int c = 0; c < 3; ++c) s.normals[i * 3 + size_t(c)] = float(vn.normals[i][c]);
    }
    return s;
}

// ---- sample file I/O ----
// Layout: magic "SEGS1", u32 node/edge/face counts and subvolume size, then
// little-endian arrays: positions (3N f32), edges (2E u32), subvolumes
// (N s^3 f32), sd_labels (N f32), normals (3N f32), class labels (N u8),
// faces (3F u32).

inline void write_sample(const Sample& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    os.write("SEGS1", 5);
    w32(uint32_t(s.graph.node_count()));
    w32(uint32_t(s.graph.edge_count()));
    w32(uint32_t(s.faces.size()));
    w32(uint32_t(s.subvolume_size));

    std::vector<float> positions;
    positions.reserve(s.graph.node_count() * 3);
    for (const auto& p : s.graph.node_positions)
        for (int c = 0; c < 3; ++c) positions.push_back(float(p[c]));
    os.write(reinterpret_cast<const char*>(positions.data()),
             std::streamsize(positions.size() * 4));
    std::vector<uint32_t> edges;
    edges.reserve(s.graph.edge_count() * 2);
    for (auto [a, b] : s.graph.edges) {
        edges.push_back(a);
        edges.push_back(b);
    }
    os.write(reinterpret_cast<const char*>(edges.data()), std::streamsize(edges.size() * 4));
    os.write(reinterpret_cast<const char*>(s.subvolumes.data()),
             std::streamsize(s.subvolumes.size() * 4));
    os.write(reinterpret_cast<const char*>(s.sd_labels.data()),
             std::streamsize(s.sd_labels.size() * 4));
    os.write(reinterpret_cast<const char*>(s.normals.data()),
             std::streamsize(s.normals.size() * 4));
    os.write(reinterpret_cast<const char*>(s.class_labels.data()),
             std::streamsize(s.class_labels.size()));
    std::vector<uint32_t> faces;
    faces.reserve(s.faces.size() * 3);
    for (const auto& f : s.faces)
        for (uint32_t idx : f) faces.push_back(idx);
    os.write(reinterpret_cast<const char*>(faces.data()), std::streamsize(faces.size() * 4));
    if (!os) throw IoError("write failed: " + path);
}

inline Sample read_sample(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[5];
    is.read(magic, 5);
    if (is.gcount() != 5 || std::memcmp(magic, "SEGS1", 5) != 0)
        throw IoError("not a sample file: " + path);
    auto r32 = [&]() {
        uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        if (is.gcount() != 4) throw IoError("truncated sample header: " + path);
        return v;
    };
    const uint32_t n = r32(), e = r32(), f = r32(), sz = r32();
    Sample s;
    s.subvolume_size = int(sz);
    auto read_block = [&](void* dst, size_t bytes, const char* what) {
        is.read(static_cast<char*>(dst), std::streamsize(bytes));
        if (size_t(is.gcount()) != bytes)
            throw IoError("truncated sample payload (" + std::string(what) + "): " + path);
    };
    std::vector<float> positions(size_t(n) * 3);
    read_block(positions.data(), positions.size() * 4, "positions");
    s.graph.node_positions.resize(n);
    for (size_t i = 0; i < n; ++i)
        s.graph.node_positions[i] = {positions[i * 3], positions[i * 3 + 1], positions[i * 3 + 2]};
    std::vector<uint32_t> edges(size_t(e) * 2);
    read_block(edges.data(), edges.size() * 4, "edges");
    s.graph.edges.resize(e);
    for (size_t i = 0; i < e; ++i) s.graph.edges[i] = {edges[i * 2], edges[i * 2 + 1]};
    s.subvolumes.resize(size_t(n) * sz * sz * sz);
    read_block(s.subvolumes.data(), s.subvolumes.size() * 4, "subvolumes");
    s.sd_labels.resize(n);
    read_block(s.sd_labels.data(), s.sd_labels.size() * 4, "sd_labels");
    s.normals.resize(size_t(n) * 3);
    read_block(s.normals.data(), s.normals.size() * 4, "normals");
    s.class_labels.resize(n);
    read_block(s.class_labels.data(), s.class_labels.size(), "class_labels");
    std::vector<uint32_t> faces(size_t(f) * 3);
    read_block(faces.data(), faces.size() * 4, "faces");
    s.faces.resize(f);
    for (size_t i = 0; i < f; ++i) s.faces[i] = {faces[i * 3], faces[i * 3 + 1], faces[i * 3 + 2]};
    return s;
}

// ---- dataset generation ----

struct GenConfig {
    std::string out_dir;
    int n_phantoms = 8;
    int perturbations = 12;
    int grid = 40;
    double spacing_mm = 0.02;
    uint64_t seed = 0;

    int num_bumps = 12;
    double amplitude_lo = -8.0, amplitude_hi = 8.0;
    double sigma_lo = 2.0, sigma_hi = 5.0;
    double hd_gate_lo = 7.0, hd_gate_hi = 65.0;
    int max_gate_attempts = 50;

    double taubin_lambda = 0.5, taubin_mu = -0.53;
    int taubin_iterations = 10;
    double decimate_ratio = 0.25;
    int min_faces = 64;
    int subvolume_size = 5;

    double blur_sigma = 1.0;
    double intensity_noise_sigma = 0.05;

    nlohmann::json to_json() const {
        return {{"n_phantoms", n_phantoms},
                {"perturbations", perturbations},
                {"grid", grid},
                {"spacing_mm", spacing_mm},
                {"seed", seed},
                {"num_bumps", num_bumps},
                {"amplitude_lo", amplitude_lo},
                {"amplitude_hi", amplitude_hi},
                {"sigma_lo", sigma_lo},
                {"sigma_hi", sigma_hi},
                {"hd_gate_lo", hd_gate_lo},
                {"hd_gate_hi", hd_gate_hi},
                {"max_gate_attempts", max_gate_attempts},
                {"taubin_lambda", taubin_lambda},
                {"taubin_mu", taubin_mu},
                {"taubin_iterations", taubin_iterations},
                {"decimate_ratio", decimate_ratio},
                {"min_faces", min_faces},
                {"subvolume_size", subvolume_size},
                {"blur_sigma", blur_sigma},
                {"intensity_noise_sigma", intensity_noise_sigma}};
    }

    static GenConfig from_json(const nlohmann::json& j) {
        GenConfig c;
        c.n_phantoms = j.value("n_phantoms", c.n_phantoms);
        c.perturbations = j.value("perturbations", c.perturbations);
        c.grid = j.value("grid", c.grid);
        c.spacing_mm = j.value("spacing_mm", c.spacing_mm);
        c.seed = j.value("seed", c.seed);
        c.num_bumps = j.value("num_bumps", c.num_bumps);
        c.amplitude_lo = j.value("amplitude_lo", c.amplitude_lo);
        c.amplitude_hi = j.value("amplitude_hi", c.amplitude_hi);
        c.sigma_lo = j.value("sigma_lo", c.sigma_lo);
        c.sigma_hi = j.value("sigma_hi", c.sigma_hi);
        c.hd_gate_lo = j.value("hd_gate_lo", c.hd_gate_lo);
        c.hd_gate_hi = j.value("hd_gate_hi", c.hd_gate_hi);
        c.max_gate_attempts = j.value("max_gate_attempts", c.max_gate_attempts);
        c.taubin_lambda = j.value("taubin_lambda", c.taubin_lambda);
        c.taubin_mu = j.value("taubin_mu", c.taubin_mu);
        c.taubin_iterations = j.value("taubin_iterations", c.taubin_iterations);
        c.decimate_ratio = j.value("decimate_ratio", c.decimate_ratio);
        c.min_faces = j.value("min_faces", c.min_faces);
        c.subvolume_size = j.value("subvolume_size", c.subvolume_size);
        c.blur_sigma = j.value("blur_sigma", c.blur_sigma);
        c.intensity_noise_sigma = j.value("intensity_noise_sigma", c.intensity_noise_sigma);
        return c;
    }
};

inline PhantomSpec phantom_spec_for(const GenConfig& cfg, int phantom_id) {
    PhantomSpec spec;
    spec.kind = PhantomKind(phantom_id % 4);
    spec.grid = cfg.grid;
    spec.spacing_mm = cfg.spacing_mm;
    spec.blur_sigma = cfg.blur_sigma;
    spec.noise_sigma = cfg.intensity_noise_sigma;
    spec.seed = derive_seed(cfg.seed, uint64_t(phantom_id), 0x70, 0);
    Rng rng(derive_seed(cfg.seed, uint64_t(phantom_id), 0x71, 0));
    const double g = cfg.grid;
    switch (spec.kind) {
        case PhantomKind::Sphere:
            spec.radius = rng.uniform(0.24, 0.32) * g;
            break;
        case PhantomKind::Torus:
            spec.radius = rng.uniform(0.20, 0.25) * g;
            spec.minor_radius = rng.uniform(0.09, 0.12) * g;
            break;
        case PhantomKind::TubeLoop:
            spec.radius = rng.uniform(0.16, 0.20) * g;
            spec.minor_radius = rng.uniform(0.08, 0.11) * g;
            break;
        case PhantomKind::BlendedBlobs:
            spec.radius = rng.uniform(0.13, 0.17) * g;
            spec.minor_radius = rng.uniform(0.08, 0.11) * g;
            spec.num_blobs = 3 + int(rng.uniform_index(3));
            break;
    }
    return spec;
}

struct GenerateResult {
    int written = 0;
    int failed = 0;
    std::string manifest_path;
};

// Runs the full per-perturbation pipeline: SDT, structured noise with the
// Hausdorff gate, threshold, marching cubes, Taubin smoothing, quadric
// decimation, labeling. Per-sample failures are recorded in the manifest and
// the run continues.
inline GenerateResult generate_dataset(const GenConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.out_dir.empty()) throw Error("generate_dataset: out_dir required");
    fs::create_directories(fs::path(cfg.out_dir) / "samples");

    nlohmann::json manifest;
    manifest["format"] = "segqa-dataset-v1";
    manifest["config"] = cfg.to_json();
    manifest["samples"] = nlohmann::json::array();
    manifest["failures"] = nlohmann::json::array();

    GenerateResult result;
    int64_t next_id = 0;
    for (int p = 0; p < cfg.n_phantoms; ++p) {
        PhantomSpec pspec = phantom_spec_for(cfg, p);
        auto [mask, intensity] = make_phantom(pspec);
        auto x_true = signed_distance_transform(mask);
        x_true.spacing = {cfg.spacing_mm, cfg.spacing_mm, cfg.spacing_mm};

        for (int j = 0; j < cfg.perturbations; ++j) {
            const int64_t id = next_id++;
            try {
                NoiseSpec noise;
                noise.num_bumps = cfg.num_bumps;
                noise.amplitude_range = {cfg.amplitude_lo, cfg.amplitude_hi};
                noise.sigma_range = {cfg.sigma_lo, cfg.sigma_hi};
                noise.seed = derive_seed(cfg.seed, uint64_t(p), uint64_t(j), 0x42);

                auto pert = perturb_segmentation(mask, noise, cfg.hd_gate_lo, cfg.hd_gate_hi,
                                                 cfg.max_gate_attempts);
                auto mesh = marching_cubes(pert.x_perturbed);
                if (mesh.empty()) throw EmptyMeshError("no isosurface in perturbed field");
                mesh = taubin_smooth(mesh, cfg.taubin_lambda, cfg.taubin_mu,
                                     cfg.taubin_iterations);
                size_t target = std::max<size_t>(size_t(cfg.min_faces),
                                                 size_t(double(mesh.face_count()) * cfg.decimate_ratio));
                mesh = quadric_decimate(mesh, target);
                check_mesh(mesh);

                Sample sample = build_sample(intensity, x_true, mesh, cfg.subvolume_size);
                sample.meta.id = id;
                sample.meta.phantom_id = p;
                sample.meta.phantom_kind = to_string(pspec.kind);
                sample.meta.perturb_seed = pert.used_seed;
                sample.meta.hausdorff = pert.hausdorff;
                sample.meta.attempts = pert.attempts;
                sample.meta.spacing_mm = cfg.spacing_mm;

                char name[32];
                std::snprintf(name, sizeof(name), "%05lld.bin", (long long)id);
                std::string rel = std::string("samples/") + name;
                write_sample(sample, (fs::path(cfg.out_dir) / rel).string());

                std::vector<int64_t> class_hist(kNumSdClasses, 0);
                for (uint8_t c : sample.class_labels) ++class_hist[c];
                manifest["samples"].push_back({{"id", id},
                                               {"file", rel},
                                               {"phantom", p},
                                               {"kind", to_string(pspec.kind)},
                                               {"perturbation", j},
                                               {"perturb_seed", pert.used_seed},
                                               {"hausdorff", pert.hausdorff},
                                               {"attempts", pert.attempts},
                                               {"nodes", sample.graph.node_count()},
                                               {"edges", sample.graph.edge_count()},
                                               {"faces", sample.faces.size()},
                                               {"class_histogram", class_hist}});
                ++result.written;
            } catch (const Error& e) {
                manifest["failures"].push_back(
                    {{"id", id}, {"phantom", p}, {"perturbation", j}, {"error", e.what()}});
                ++result.failed;
            }
        }
    }

    result.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
    std::ofstream os(result.manifest_path);
    if (!os) throw IoError("cannot write manifest: " + result.manifest_path);
    os << manifest.dump(2) << "\n";
    return result;
}

inline nlohmann::json read_manifest(const std::string& dataset_dir) {
    namespace fs = std::filesystem;
    auto path = fs::path(dataset_dir) / "manifest.json";
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest: " + std::string(e.what()));
    }
}

// ---- splits ----

struct SplitResult {
    std::vector<int64_t> train, val, test;
};

// Whole-phantom grouping: all perturbations of one phantom land in the same
// split, so a model cannot memorize a surface seen in training. Groups are
// shuffled by seed, then each split is filled exactly with whole groups.
inline SplitResult split_dataset(const nlohmann::json& manifest,
                                 std::array<int64_t, 3> counts, uint64_t seed) {
    std::map<int, std::vector<int64_t>> groups;
    int64_t total = 0;
    for (const auto& s : manifest.at("samples")) {
        groups[int(s.at("phantom"))].push_back(int64_t(s.at("id")));
        ++total;
    }
    if (counts[0] + counts[1] + counts[2] > total)
        throw InsufficientSamplesError("split_dataset: requested " +
                                       std::to_string(counts[0] + counts[1] + counts[2]) +
                                       " samples, dataset has " + std::to_string(total));

    std::vector<std::vector<int64_t>> pool;
    for (auto& [pid, ids] : groups) pool.push_back(ids);
    Rng rng(seed);
    for (size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[rng.uniform_index(i)]);

    SplitResult out;
    std::vector<std::vector<int64_t>*> splits = {&out.train, &out.val, &out.test};
    std::vector<bool> used(pool.size(), false);
    for (int si = 0; si < 3; ++si) {
        int64_t need = counts[size_t(si)];
        while (need > 0) {
            bool advanced = false;
            for (size_t g = 0; g < pool.size(); ++g) {
                if (used[g] || int64_t(pool[g].size()) > need) continue;
                used[g] = true;
                need -= int64_t(pool[g].size());
                splits[size_t(si)]->insert(splits[size_t(si)]->end(), pool[g].begin(), pool[g].end());
                advanced = true;
                break;
            }
            if (!advanced)
                throw InsufficientSamplesError(
                    "split_dataset: cannot fill split " + std::to_string(si) +
                    " exactly with whole-phantom groups (remaining need " + std::to_string(need) +
                    ")");
        }
        std::sort(splits[size_t(si)]->begin(), splits[size_t(si)]->end());
    }
    return out;
}

}  // namespace segqa
