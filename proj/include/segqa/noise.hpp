#pragma once

#include <cmath>
#include <vector>

#include "segqa/grid.hpp"
#include "segqa/rng.hpp"

namespace segqa {

struct NoiseBump {
    std::array<double, 3> center;
    double amplitude = 0.0;
    double sigma = 1.0;
};

// Additive structured noise on a distance transform: num_bumps Gaussian bumps
// a * exp(-|p - c|^2 / (2 sigma^2)) with centers drawn inside the band
// |X| <= 3 sigma_max around the zero level set. Deterministic given the seed.
// bumps_out, when non-null, receives the drawn bump parameters.
inline SignedDistanceField simulate_noise_field(const SignedDistanceField& sdf,
                                                const NoiseSpec& spec,
                                                std::vector<NoiseBump>* bumps_out = nullptr) {
    sdf.validate("SignedDistanceField");
    spec.validate();
    if (bumps_out) bumps_out->clear();

    SignedDistanceField out = sdf;
    if (spec.num_bumps == 0) return out;

    Rng rng(spec.seed);
    const double band = 3.0 * spec.sigma_range[1];

    // Fallback center if rejection sampling finds no voxel in the band.
    size_t min_idx = 0;
    for (size_t i = 1; i < sdf.values.size(); ++i)
        if (std::fabs(sdf.values[i]) < std::fabs(sdf.values[min_idx])) min_idx = i;
    const double fz = double(min_idx / (size_t(sdf.nx) * sdf.ny));
    const double fy = double((min_idx / sdf.nx) % sdf.ny);
    const double fx = double(min_idx % sdf.nx);

    for (int k = 0; k < spec.num_bumps; ++k) {
        double cx = fx, cy = fy, cz = fz;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            double px = rng.uniform() * (sdf.nx - 1);
            double py = rng.uniform() * (sdf.ny - 1);
            double pz = rng.uniform() * (sdf.nz - 1);
            if (std::fabs(trilinear_sample(sdf, px, py, pz)) <= band) {
                cx = px;
                cy = py;
                cz = pz;
                break;
            }
        }
        double amp = rng.uniform(spec.amplitude_range[0], spec.amplitude_range[1]);
        double sigma = rng.uniform(spec.sigma_range[0], spec.sigma_range[1]);
        double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        if (bumps_out) bumps_out->push_back({{cx, cy, cz}, amp, sigma});

        for (int z = 0; z < sdf.nz; ++z) {
            double dz2 = (z - cz) * (z - cz);
            for (int y = 0; y < sdf.ny; ++y) {
                double dyz2 = dz2 + (y - cy) * (y - cy);
                float* row = &out.values[out.index(0, y, z)];
                for (int x = 0; x < sdf.nx; ++x) {
                    double d2 = dyz2 + (x - cx) * (x - cx);
                    row[x] += float(amp * std::exp(-d2 * inv2s2));
                }
            }
        }
    }
    return out;
}

}  // namespace segqa
