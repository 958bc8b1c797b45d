#include "increcon/meshing.hpp"

#include "mc_tables.hpp"

#include <atomic>
#include <cmath>
#include <unordered_map>

namespace increcon {

namespace {

using meshing_detail::kCornerOffsets;
using meshing_detail::kEdgeCorners;
using meshing_detail::kEdgeTable;
using meshing_detail::kTriTable;

// Edge identified by the lattice coord of its lower endpoint and its axis.
struct EdgeKey {
    VoxelCoord base;
    int axis;
    bool operator==(const EdgeKey&) const = default;
};
struct EdgeKeyHash {
    size_t operator()(const EdgeKey& e) const {
        return VoxelCoordHash{}(e.base) * 3 + size_t(e.axis);
    }
};

struct CubeResult {
    int n_tris = 0;
    int8_t edges[15];  // up to 5 triangles x 3 edge ids
    float vert_t[12];  // interpolation parameter per edge, lower->upper corner
    uint16_t emask = 0;
};

// Canonical interpolation along an edge, always oriented from the lattice-lower
// corner so shared edges produce bit-identical vertices.
inline float edge_t(float va, float vb, float iso) {
    const float d = vb - va;
    if (std::abs(d) < 1e-12f) return 0.5f;
    float t = (iso - va) / d;
    return std::min(1.0f, std::max(0.0f, t));
}

template <typename P, typename Valid, typename Value>
struct CornerField {
    const SparseVoxelGrid<P>& grid;
    Valid valid;
    Value value;

    bool corner(const VoxelCoord& c, float& out) const {
        auto it = grid.cells.find(c);
        if (it == grid.cells.end() || !valid(it->second)) return false;
        out = value(it->second);
        return true;
    }
};

template <typename Field>
bool process_cube(const Field& field, const VoxelCoord& base, float iso, CubeResult& res) {
    float val[8];
    for (int v = 0; v < 8; ++v) {
        const VoxelCoord c = base.offset(kCornerOffsets[v][0], kCornerOffsets[v][1],
                                         kCornerOffsets[v][2]);
        if (!field.corner(c, val[v])) return false;
    }
    int cube_index = 0;
    for (int v = 0; v < 8; ++v)
        if (val[v] < iso) cube_index |= 1 << v;
    const uint16_t emask = kEdgeTable[cube_index];
    if (emask == 0) return false;

    for (int e = 0; e < 12; ++e) {
        if (!(emask & (1u << e))) continue;
        int a = kEdgeCorners[e][0], b = kEdgeCorners[e][1];
        // orient lower lattice corner first
        const int* oa = kCornerOffsets[a];
        const int* ob = kCornerOffsets[b];
        bool swap = std::lexicographical_compare(ob, ob + 3, oa, oa + 3);
        if (swap) std::swap(a, b);
        res.vert_t[e] = edge_t(val[a], val[b], iso);
    }
    res.emask = emask;
    res.n_tris = 0;
    for (int t = 0; kTriTable[cube_index][t] != -1; t += 3) {
        res.edges[res.n_tris * 3 + 0] = kTriTable[cube_index][t];
        res.edges[res.n_tris * 3 + 1] = kTriTable[cube_index][t + 1];
        res.edges[res.n_tris * 3 + 2] = kTriTable[cube_index][t + 2];
        ++res.n_tris;
    }
    return res.n_tris > 0;
}

// Lower lattice endpoint + axis of a cube edge.
inline EdgeKey edge_key(const VoxelCoord& base, int e) {
    const int* oa = kCornerOffsets[kEdgeCorners[e][0]];
    const int* ob = kCornerOffsets[kEdgeCorners[e][1]];
    int lo[3], axis = 0;
    for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(oa[d], ob[d]);
        if (oa[d] != ob[d]) axis = d;
    }
    return {base.offset(lo[0], lo[1], lo[2]), axis};
}

template <typename P, typename Field>
TriangleMesh marching_cubes_impl(const SparseVoxelGrid<P>& grid, const Field& field, double iso,
                                 bool parallel) {
    const std::vector<VoxelCoord> bases = grid.sorted_coords();
    std::vector<CubeResult> results(bases.size());
    std::vector<uint8_t> active(bases.size(), 0);

    const float fiso = float(iso);
#pragma omp parallel for schedule(dynamic, 64) if (parallel)
    for (int64_t n = 0; n < int64_t(bases.size()); ++n)
        active[n] = process_cube(field, bases[n], fiso, results[n]) ? 1 : 0;

    // Serial merge in sorted-cube order keeps output independent of threading.
    TriangleMesh mesh;
    std::unordered_map<EdgeKey, uint32_t, EdgeKeyHash> edge_verts;
    const double vs = grid.voxel_size;
    for (size_t n = 0; n < bases.size(); ++n) {
        if (!active[n]) continue;
        const VoxelCoord& base = bases[n];
        const CubeResult& res = results[n];
        uint32_t cube_vert[12];
        for (int e = 0; e < 12; ++e) {
            if (!(res.emask & (1u << e))) continue;
            const EdgeKey key = edge_key(base, e);
            auto it = edge_verts.find(key);
            if (it != edge_verts.end()) {
                cube_vert[e] = it->second;
                continue;
            }
            Vec3 lo = grid.center(key.base);
            Vec3 pos = lo;
            pos[key.axis] += double(res.vert_t[e]) * vs;
            cube_vert[e] = uint32_t(mesh.vertices.size());
            mesh.vertices.push_back(pos.cast<float>());
            edge_verts.emplace(key, cube_vert[e]);
        }
        for (int t = 0; t < res.n_tris; ++t) {
            const uint32_t a = cube_vert[res.edges[t * 3 + 0]];
            const uint32_t b = cube_vert[res.edges[t * 3 + 1]];
            const uint32_t c = cube_vert[res.edges[t * 3 + 2]];
            if (a == b || b == c || a == c) continue;  // collapsed at a corner
            mesh.triangles.push_back({a, b, c});
        }
    }
    return mesh;
}

}  // namespace

TriangleMesh marching_cubes(const SparseVoxelGrid<TsdfVoxel>& grid, double iso, double theta) {
    CornerField field{grid, [theta](const TsdfVoxel& v) { return v.o >= float(theta); },
                      [](const TsdfVoxel& v) { return v.x; }};
    return marching_cubes_impl(grid, field, iso, true);
}

TriangleMesh marching_cubes(const SparseVoxelGrid<WeightedTsdfVoxel>& grid, double iso) {
    CornerField field{grid, [](const WeightedTsdfVoxel& v) { return v.weight > 0.0f; },
                      [](const WeightedTsdfVoxel& v) { return v.tsdf; }};
    return marching_cubes_impl(grid, field, iso, true);
}

TriangleMesh marching_cubes(const SparseVoxelGrid<GlobalTsdfCell>& grid, double iso, double theta) {
    CornerField field{grid, [theta](const GlobalTsdfCell& v) { return v.o >= float(theta); },
                      [](const GlobalTsdfCell& v) { return v.x; }};
    return marching_cubes_impl(grid, field, iso, true);
}

TriangleMesh ref::marching_cubes(const SparseVoxelGrid<TsdfVoxel>& grid, double iso, double theta) {
    CornerField field{grid, [theta](const TsdfVoxel& v) { return v.o >= float(theta); },
                      [](const TsdfVoxel& v) { return v.x; }};
    return marching_cubes_impl(grid, field, iso, false);
}

void compute_vertex_normals(TriangleMesh& mesh) {
    mesh.normals.assign(mesh.vertices.size(), Vec3f::Zero());
    for (const auto& t : mesh.triangles) {
        const Vec3f a = mesh.vertices[t[0]];
        const Vec3f n =
            (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
        for (int i = 0; i < 3; ++i) mesh.normals[t[i]] += n;
    }
    for (Vec3f& n : mesh.normals) {
        const float len = n.norm();
        if (len > 1e-20f) n /= len;
    }
}

// --- rasterization ---

namespace {

constexpr double kZNear = 1e-4;

struct CamTri {
    Vec3 v[3];
};

// Clips a camera-space triangle against z >= kZNear.
int clip_near(const CamTri& in, CamTri out[2]) {
    Vec3 poly[4];
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const Vec3& a = in.v[i];
        const Vec3& b = in.v[(i + 1) % 3];
        const bool a_in = a.z() >= kZNear, b_in = b.z() >= kZNear;
        if (a_in) poly[n++] = a;
        if (a_in != b_in) {
            const double t = (kZNear - a.z()) / (b.z() - a.z());
            poly[n++] = a + t * (b - a);
        }
    }
    if (n < 3) return 0;
    out[0] = {poly[0], poly[1], poly[2]};
    if (n == 3) return 1;
    out[1] = {poly[0], poly[2], poly[3]};
    return 2;
}

inline uint32_t depth_bits(float z) {
    uint32_t b;
    std::memcpy(&b, &z, 4);
    return b;  // positive floats order like their bit patterns
}
inline float depth_from_bits(uint32_t b) {
    float z;
    std::memcpy(&z, &b, 4);
    return z;
}

template <typename DepthMin>
void raster_triangle(const CamTri& tri, const Intrinsics& intr, DepthMin&& depth_min) {
    double sx[3], sy[3], invz[3];
    for (int i = 0; i < 3; ++i) {
        invz[i] = 1.0 / tri.v[i].z();
        sx[i] = intr.fx * tri.v[i].x() * invz[i] + intr.cx;
        sy[i] = intr.fy * tri.v[i].y() * invz[i] + intr.cy;
    }
    const double area =
        (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sy[1] - sy[0]) * (sx[2] - sx[0]);
    if (std::abs(area) < 1e-12) return;
    const double inv_area = 1.0 / area;

    int x0 = std::max(0, int(std::ceil(std::min({sx[0], sx[1], sx[2]}))));
    int x1 = std::min(intr.width - 1, int(std::floor(std::max({sx[0], sx[1], sx[2]}))));
    int y0 = std::max(0, int(std::ceil(std::min({sy[0], sy[1], sy[2]}))));
    int y1 = std::min(intr.height - 1, int(std::floor(std::max({sy[0], sy[1], sy[2]}))));

    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double px = double(x), py = double(y);
            const double w0 = ((sx[2] - sx[1]) * (py - sy[1]) - (sy[2] - sy[1]) * (px - sx[1])) *
                              inv_area;
            const double w1 = ((sx[0] - sx[2]) * (py - sy[2]) - (sy[0] - sy[2]) * (px - sx[2])) *
                              inv_area;
            const double w2 = 1.0 - w0 - w1;
            if (w0 < 0 || w1 < 0 || w2 < 0) continue;
            const double iz = w0 * invz[0] + w1 * invz[1] + w2 * invz[2];
            if (iz <= 0) continue;
            depth_min(x, y, float(1.0 / iz));
        }
    }
}

ImageF render_depth_impl(const TriangleMesh& mesh, const Pose& pose, const Intrinsics& intr,
                         bool parallel) {
    std::vector<std::atomic<uint32_t>> zbuf(size_t(intr.width) * intr.height);
    const uint32_t inf_bits = depth_bits(std::numeric_limits<float>::infinity());
    for (auto& z : zbuf) z.store(inf_bits, std::memory_order_relaxed);

    const Mat3 r_inv = pose.rotation.transpose();
    auto depth_min = [&](int x, int y, float z) {
        auto& cell = zbuf[size_t(y) * intr.width + x];
        const uint32_t bits = depth_bits(z);
        uint32_t cur = cell.load(std::memory_order_relaxed);
        while (bits < cur &&
               !cell.compare_exchange_weak(cur, bits, std::memory_order_relaxed)) {
        }
    };

#pragma omp parallel for schedule(dynamic, 256) if (parallel)
    for (int64_t t = 0; t < int64_t(mesh.triangles.size()); ++t) {
        CamTri tri;
        for (int i = 0; i < 3; ++i) {
            const Vec3 w = mesh.vertices[mesh.triangles[t][i]].cast<double>();
            tri.v[i] = r_inv * (w - pose.translation);
        }
        CamTri clipped[2];
        const int n = clip_near(tri, clipped);
        for (int c = 0; c < n; ++c) raster_triangle(clipped[c], intr, depth_min);
    }

    ImageF out(intr.width, intr.height, 0.0f);
    for (size_t i = 0; i < zbuf.size(); ++i) {
        const float z = depth_from_bits(zbuf[i].load(std::memory_order_relaxed));
        out.px[i] = std::isfinite(z) ? z : 0.0f;
    }
    return out;
}

}  // namespace

ImageF render_depth(const TriangleMesh& mesh, const Pose& pose, const Intrinsics& intr) {
    return render_depth_impl(mesh, pose, intr, true);
}

ImageF ref::render_depth(const TriangleMesh& mesh, const Pose& pose, const Intrinsics& intr) {
    return render_depth_impl(mesh, pose, intr, false);
}

}  // namespace increcon
