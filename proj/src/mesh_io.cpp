#include "increcon/core.hpp"
#include "increcon/meshing.hpp"

#include <fstream>
#include <sstream>

namespace increcon {

MeshFormat mesh_format_for_path(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".ply") return MeshFormat::Ply;
    if (ext == ".obj") return MeshFormat::Obj;
    fail("cannot infer mesh format from extension: ", path);
}

namespace {

void write_ply(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot write mesh: ", path);
    const bool with_normals = mesh.normals.size() == mesh.vertices.size() && !mesh.normals.empty();
    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << mesh.vertices.size() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (with_normals) os << "property float nx\nproperty float ny\nproperty float nz\n";
    os << "element face " << mesh.triangles.size() << "\n";
    os << "property list uchar int vertex_indices\nend_header\n";
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        os.write(reinterpret_cast<const char*>(mesh.vertices[i].data()), 12);
        if (with_normals) os.write(reinterpret_cast<const char*>(mesh.normals[i].data()), 12);
    }
    for (const auto& t : mesh.triangles) {
        const uint8_t n = 3;
        os.write(reinterpret_cast<const char*>(&n), 1);
        const int32_t idx[3] = {int32_t(t[0]), int32_t(t[1]), int32_t(t[2])};
        os.write(reinterpret_cast<const char*>(idx), 12);
    }
    if (!os) fail("write error: ", path);
}

void write_obj(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail("cannot write mesh: ", path);
    os.precision(9);
    for (const Vec3f& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles)
        os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!os) fail("write error: ", path);
}

TriangleMesh read_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open mesh: ", path);
    std::string line;
    if (!std::getline(is, line) || line != "ply") fail("malformed PLY header in ", path);

    size_t n_verts = 0, n_faces = 0;
    bool with_normals = false, binary_le = false;
    std::string element;
    int vertex_props = 0;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
            if (!binary_le) fail("unsupported PLY format '", fmt, "' in ", path);
        } else if (tok == "element") {
            std::string name;
            size_t count;
            ls >> name >> count;
            element = name;
            if (name == "vertex") n_verts = count;
            else if (name == "face") n_faces = count;
            else fail("unsupported PLY element '", name, "' in ", path);
        } else if (tok == "property" && element == "vertex") {
            std::string type, name;
            ls >> type >> name;
            if (type != "float") fail("unsupported vertex property type in ", path);
            ++vertex_props;
            if (name == "nx") with_normals = true;
        } else if (tok == "end_header") {
            break;
        } else if (tok != "comment" && tok != "property") {
            fail("malformed PLY header line '", line, "' in ", path);
        }
    }
    if (vertex_props != 3 && vertex_props != 6) fail("unsupported vertex layout in ", path);

    TriangleMesh mesh;
    mesh.vertices.resize(n_verts);
    if (with_normals) mesh.normals.resize(n_verts);
    for (size_t i = 0; i < n_verts; ++i) {
        is.read(reinterpret_cast<char*>(mesh.vertices[i].data()), 12);
        if (with_normals) is.read(reinterpret_cast<char*>(mesh.normals[i].data()), 12);
        if (!is) fail("truncated PLY vertex data in ", path);
    }
    mesh.triangles.resize(n_faces);
    for (size_t i = 0; i < n_faces; ++i) {
        uint8_t n;
        is.read(reinterpret_cast<char*>(&n), 1);
        if (!is || n != 3) fail("PLY face ", i, " is not a triangle in ", path);
        int32_t idx[3];
        is.read(reinterpret_cast<char*>(idx), 12);
        if (!is) fail("truncated PLY face data in ", path);
        for (int d = 0; d < 3; ++d) {
            if (idx[d] < 0 || size_t(idx[d]) >= n_verts)
                fail("PLY face index out of range in ", path);
            mesh.triangles[i][d] = uint32_t(idx[d]);
        }
    }
    return mesh;
}

TriangleMesh read_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open mesh: ", path);
    TriangleMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "v") {
            float x, y, z;
            if (!(ls >> x >> y >> z)) fail("malformed OBJ vertex at line ", line_no, " in ", path);
            mesh.vertices.emplace_back(x, y, z);
        } else if (tok == "f") {
            uint32_t idx[3];
            for (int d = 0; d < 3; ++d) {
                std::string ref;
                if (!(ls >> ref)) fail("malformed OBJ face at line ", line_no, " in ", path);
                // take the vertex index before any '/'
                const long v = std::stol(ref.substr(0, ref.find('/')));
                if (v < 1 || size_t(v) > mesh.vertices.size())
                    fail("OBJ face index out of range at line ", line_no, " in ", path);
                idx[d] = uint32_t(v - 1);  // OBJ is 1-based
            }
            mesh.triangles.push_back({idx[0], idx[1], idx[2]});
        }
        // other records (vn, vt, o, ...) are ignored
    }
    return mesh;
}

}  // namespace

void write_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format) {
    for (const auto& t : mesh.triangles)
        for (uint32_t i : t)
            if (i >= mesh.vertices.size()) fail("mesh has out-of-range index, refusing to write");
    if (format == MeshFormat::Ply) write_ply(mesh, path);
    else write_obj(mesh, path);
}

TriangleMesh read_mesh(const std::string& path) {
    return mesh_format_for_path(path) == MeshFormat::Ply ? read_ply(path) : read_obj(path);
}

}  // namespace increcon
