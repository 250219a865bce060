#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "segqa/errors.hpp"
#include "segqa/mesh.hpp"

namespace segqa {

using RgbColor = std::array<uint8_t, 3>;

// ASCII PLY writer. Optional per-vertex scalar is written as a float
// "quality" property, optional colors as uchar red/green/blue.
inline void write_mesh(const TriMesh& mesh, const std::string& path,
                       const std::vector<float>* node_scalars = nullptr,
                       const std::vector<RgbColor>* node_colors = nullptr) {
    if (node_scalars && node_scalars->size() != mesh.vertices.size())
        throw Error("write_mesh: scalar array length != vertex count");
    if (node_colors && node_colors->size() != mesh.vertices.size())
        throw Error("write_mesh: color array length != vertex count");

    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);

    os << "ply\nformat ascii 1.0\n";
    os << "element vertex " << mesh.vertices.size() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (node_scalars) os << "property float quality\n";
    if (node_colors) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "element face " << mesh.faces.size() << "\n";
    os << "property list uchar int vertex_indices\n";
    os << "end_header\n";

    os.precision(9);
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const auto& v = mesh.vertices[i];
        os << float(v[0]) << " " << float(v[1]) << " " << float(v[2]);
        if (node_scalars) os << " " << (*node_scalars)[i];
        if (node_colors)
            os << " " << int((*node_colors)[i][0]) << " " << int((*node_colors)[i][1]) << " "
               << int((*node_colors)[i][2]);
        os << "\n";
    }
    for (const auto& f : mesh.faces) os << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
    if (!os) throw IoError("write failed: " + path);
}

// ASCII PLY reader for the subset this toolkit writes (plus tolerant property
// handling: unknown vertex properties are skipped). Throws ParseError with a
// line number on malformed input.
inline TriMesh read_mesh(const std::string& path,
                         std::vector<float>* node_scalars = nullptr,
                         std::vector<RgbColor>* node_colors = nullptr) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);

    int line_no = 0;
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(is, line)) throw ParseError(std::string("unexpected end of file, expected ") + what, line_no);
        ++line_no;
        return line;
    };

    if (next_line("ply magic") != "ply") throw ParseError("missing 'ply' magic", line_no);
    if (next_line("format") != "format ascii 1.0")
        throw ParseError("unsupported format, expected 'format ascii 1.0'", line_no);

    size_t n_vertices = 0, n_faces = 0;
    struct Prop {
        std::string name;
        bool is_uchar = false;
    };
    std::vector<Prop> vertex_props;
    enum { None, Vertex, Face } element = None;
    bool face_list_seen = false;

    while (true) {
        next_line("header line");
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "comment") continue;
        if (tok == "end_header") break;
        if (tok == "element") {
            std::string kind;
            size_t count = 0;
            if (!(ss >> kind >> count)) throw ParseError("malformed element line", line_no);
            if (kind == "vertex") {
                element = Vertex;
                n_vertices = count;
            } else if (kind == "face") {
                element = Face;
                n_faces = count;
            } else {
                element = None;
            }
            continue;
        }
        if (tok == "property") {
            std::string type;
            if (!(ss >> type)) throw ParseError("malformed property line", line_no);
            if (element == Vertex) {
                if (type == "list") throw ParseError("list property on vertices unsupported", line_no);
                std::string name;
                if (!(ss >> name)) throw ParseError("property missing name", line_no);
                vertex_props.push_back({name, type == "uchar" || type == "uint8"});
            } else if (element == Face) {
                if (type != "list") throw ParseError("expected list property on faces", line_no);
                face_list_seen = true;
            }
            continue;
        }
        throw ParseError("unknown header line: " + tok, line_no);
    }
    if (n_faces > 0 && !face_list_seen) throw ParseError("face element lacks a list property", line_no);

    int ix = -1, iy = -1, iz = -1, iq = -1, ir = -1, ig = -1, ib = -1;
    for (int i = 0; i < int(vertex_props.size()); ++i) {
        const auto& p = vertex_props[i].name;
        if (p == "x") ix = i;
        else if (p == "y") iy = i;
        else if (p == "z") iz = i;
        else if (p == "quality") iq = i;
        else if (p == "red") ir = i;
        else if (p == "green") ig = i;
        else if (p == "blue") ib = i;
    }
    if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z properties", line_no);

    TriMesh mesh;
    mesh.vertices.reserve(n_vertices);
    if (node_scalars) node_scalars->clear();
    if (node_colors) node_colors->clear();
    std::vector<double> fields(vertex_props.size());

    for (size_t i = 0; i < n_vertices; ++i) {
        next_line("vertex row");
        std::istringstream ss(line);
        for (size_t j = 0; j < vertex_props.size(); ++j)
            if (!(ss >> fields[j])) throw ParseError("short vertex row", line_no);
        mesh.vertices.push_back({fields[ix], fields[iy], fields[iz]});
        if (node_scalars && iq >= 0) node_scalars->push_back(float(fields[iq]));
        if (node_colors && ir >= 0 && ig >= 0 && ib >= 0)
            node_colors->push_back({uint8_t(fields[ir]), uint8_t(fields[ig]), uint8_t(fields[ib])});
    }

    mesh.faces.reserve(n_faces);
    for (size_t i = 0; i < n_faces; ++i) {
        next_line("face row");
        std::istringstream ss(line);
        int count = 0;
        if (!(ss >> count)) throw ParseError("short face row", line_no);
        if (count != 3) throw ParseError("only triangular faces supported", line_no);
        long long a, b, c;
        if (!(ss >> a >> b >> c)) throw ParseError("short face row", line_no);
        if (a < 0 || b < 0 || c < 0 || size_t(a) >= n_vertices || size_t(b) >= n_vertices ||
            size_t(c) >= n_vertices)
            throw ParseError("face index out of range", line_no);
        mesh.faces.push_back({uint32_t(a), uint32_t(b), uint32_t(c)});
    }
    return mesh;
}

// Minimal OBJ export: positions and faces only.
inline void write_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os.precision(9);
    for (const auto& v : mesh.vertices) os << "v " << v[0] << " " << v[1] << " " << v[2] << "\n";
    for (const auto& f : mesh.faces)
        os << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace segqa
