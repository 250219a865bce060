#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "segqa/errors.hpp"
#include "segqa/grid.hpp"

namespace segqa {

// Volume file format: magic "SEGV1", dtype code (0 = float32, 1 = uint8),
// dims as 3x u32, spacing and origin as 3x f32 each, then the voxel payload,
// little-endian, x fastest.
namespace detail {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
}

inline void read_bytes(std::istream& is, void* p, size_t n, const char* what) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    if (size_t(is.gcount()) != n) throw IoError(std::string("truncated read: ") + what);
}

template <class T>
inline void write_pod(std::ostream& os, T v) {
    write_bytes(os, &v, sizeof(T));
}

template <class T>
inline T read_pod(std::istream& is, const char* what) {
    T v;
    read_bytes(is, &v, sizeof(T), what);
    return v;
}

template <class Field>
inline void write_volume_header(std::ostream& os, const Field& f, uint8_t dtype) {
    write_bytes(os, "SEGV1", 5);
    write_pod<uint8_t>(os, dtype);
    write_pod<uint32_t>(os, uint32_t(f.nx));
    write_pod<uint32_t>(os, uint32_t(f.ny));
    write_pod<uint32_t>(os, uint32_t(f.nz));
    for (double s : f.spacing) write_pod<float>(os, float(s));
    for (double o : f.origin) write_pod<float>(os, float(o));
}

struct VolumeHeader {
    uint8_t dtype = 0;
    uint32_t nx = 0, ny = 0, nz = 0;
    float spacing[3] = {1, 1, 1};
    float origin[3] = {0, 0, 0};
};

inline VolumeHeader read_volume_header(std::istream& is) {
    char magic[5];
    read_bytes(is, magic, 5, "magic");
    if (std::memcmp(magic, "SEGV1", 5) != 0) throw IoError("bad magic, not a SEGV1 volume");
    VolumeHeader h;
    h.dtype = read_pod<uint8_t>(is, "dtype");
    h.nx = read_pod<uint32_t>(is, "dims");
    h.ny = read_pod<uint32_t>(is, "dims");
    h.nz = read_pod<uint32_t>(is, "dims");
    for (float& s : h.spacing) s = read_pod<float>(is, "spacing");
    for (float& o : h.origin) o = read_pod<float>(is, "origin");
    if (h.nx == 0 || h.ny == 0 || h.nz == 0) throw IoError("zero dimension in volume header");
    return h;
}

template <class Field>
inline void apply_header(Field& f, const VolumeHeader& h) {
    f.nx = int(h.nx);
    f.ny = int(h.ny);
    f.nz = int(h.nz);
    for (int i = 0; i < 3; ++i) {
        f.spacing[i] = h.spacing[i];
        f.origin[i] = h.origin[i];
    }
    f.values.resize(f.size());
}

}  // namespace detail

inline void write_volume(const VoxelVolume& vol, const std::string& path) {
    vol.validate("VoxelVolume");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    detail::write_volume_header(os, vol, 0);
    detail::write_bytes(os, vol.values.data(), vol.values.size() * sizeof(float));
    if (!os) throw IoError("write failed: " + path);
}

inline void write_mask(const BinaryMask& mask, const std::string& path) {
    mask.validate_binary();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    detail::write_volume_header(os, mask, 1);
    detail::write_bytes(os, mask.values.data(), mask.values.size());
    if (!os) throw IoError("write failed: " + path);
}

inline VoxelVolume read_volume(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    auto h = detail::read_volume_header(is);
    if (h.dtype != 0) throw IoError("expected float32 volume, got dtype " + std::to_string(h.dtype));
    VoxelVolume vol;
    detail::apply_header(vol, h);
    detail::read_bytes(is, vol.values.data(), vol.values.size() * sizeof(float), "voxels");
    return vol;
}

inline BinaryMask read_mask(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    auto h = detail::read_volume_header(is);
    if (h.dtype != 1) throw IoError("expected uint8 mask, got dtype " + std::to_string(h.dtype));
    BinaryMask mask;
    detail::apply_header(mask, h);
    detail::read_bytes(is, mask.values.data(), mask.values.size(), "voxels");
    return mask;
}

}  // namespace segqa
