#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "segqa/dataset.hpp"
#include "segqa/mesh_io.hpp"

namespace segqa {

// Five-class palette running red -> blue across A..E.
inline constexpr RgbColor kSdClassPalette[kNumSdClasses] = {
    {215, 25, 28},    // A, strong in-segmentation error
    {253, 174, 97},   // B
    {255, 255, 191},  // C, near the surface
    {171, 217, 233},  // D
    {44, 123, 182},   // E, strong out-segmentation error
};

inline TriMesh sample_to_mesh(const Sample& s) {
    TriMesh mesh;
    mesh.vertices = s.graph.node_positions;
    mesh.faces = s.faces;
    return mesh;
}

// Class-colored surface. With ground truth supplied, misclassified nodes are
// painted black.
inline void export_colored_mesh(const Sample& s, const std::vector<uint8_t>& pred_classes,
                                const std::vector<uint8_t>* true_classes,
                                const std::string& path) {
    const size_t n = s.node_count();
    if (pred_classes.size() != n)
        throw Error("export_colored_mesh: prediction length != node count");
    if (true_classes && true_classes->size() != n)
        throw Error("export_colored_mesh: ground truth length != node count");

    std::vector<RgbColor> colors(n);
    std::vector<float> scalars(n);
    for (size_t i = 0; i < n; ++i) {
        uint8_t c = pred_classes[i];
        if (c >= kNumSdClasses) throw Error("export_colored_mesh: class out of range");
        colors[i] = kSdClassPalette[c];
        if (true_classes && (*true_classes)[i] != c) colors[i] = {0, 0, 0};
        scalars[i] = float(c);
    }
    write_mesh(sample_to_mesh(s), path, &scalars, &colors);
}

// Signed-distance-colored surface on a diverging blue-white-red ramp over
// [-sd_scale, +sd_scale] mm.
inline void export_sd_colored_mesh(const Sample& s, const std::vector<float>& sd_mm,
                                   double sd_scale, const std::string& path) {
    const size_t n = s.node_count();
    if (sd_mm.size() != n) throw Error("export_sd_colored_mesh: prediction length != node count");
    std::vector<RgbColor> colors(n);
    for (size_t i = 0; i < n; ++i) {
        double t = std::clamp(double(sd_mm[i]) / sd_scale, -1.0, 1.0);
        // -1 -> blue, 0 -> white, +1 -> red
        double r = t >= 0 ? 1.0 : 1.0 + t;
        double b = t <= 0 ? 1.0 : 1.0 - t;
        double g = 1.0 - std::fabs(t);
        colors[i] = {uint8_t(std::lround(255 * r)), uint8_t(std::lround(255 * g)),
                     uint8_t(std::lround(255 * b))};
    }
    std::vector<float> scalars(sd_mm);
    write_mesh(sample_to_mesh(s), path, &scalars, &colors);
}

}  // namespace segqa
