#pragma once

#include "increcon/core.hpp"
#include "increcon/geometry.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace increcon {

struct VoxelCoord {
    int32_t i = 0, j = 0, k = 0;

    bool operator==(const VoxelCoord&) const = default;
    auto operator<=>(const VoxelCoord&) const = default;
    VoxelCoord offset(int di, int dj, int dk) const { return {i + di, j + dj, k + dk}; }
};

struct VoxelCoordHash {
    size_t operator()(const VoxelCoord& c) const {
        // classic spatial hash primes
        return size_t(uint32_t(c.i) * 73856093u) ^ size_t(uint32_t(c.j) * 19349663u) ^
               size_t(uint32_t(c.k) * 83492791u);
    }
};

// Per-voxel occupancy score and normalized SDF (meters / lambda).
struct TsdfVoxel {
    float o = 0.0f;
    float x = 0.0f;
};

// Classical fusion payload.
struct WeightedTsdfVoxel {
    float tsdf = 0.0f;
    float weight = 0.0f;
};

// Global TSDF cell maintained by the pipeline: prediction plus the running
// weight used by linear fusion and the fragment counter of the last update.
struct GlobalTsdfCell {
    float o = 0.0f;
    float x = 0.0f;
    float weight = 0.0f;
    uint32_t updated_at = 0;
};

using FeatureVec = std::vector<float>;

inline double level_voxel_size(int level, double finest = 0.04) {
    return finest * double(1 << (3 - level));
}

template <typename P>
struct SparseVoxelGrid {
    int level = 3;
    double voxel_size = 0.04;
    Vec3 origin = Vec3::Zero();  // world position of voxel (0,0,0)'s min corner
    std::unordered_map<VoxelCoord, P, VoxelCoordHash> cells;

    SparseVoxelGrid() = default;
    SparseVoxelGrid(int lvl, double vs, const Vec3& org) : level(lvl), voxel_size(vs), origin(org) {}

    Vec3 center(const VoxelCoord& c) const {
        return origin + Vec3(c.i + 0.5, c.j + 0.5, c.k + 0.5) * voxel_size;
    }
    VoxelCoord coord_at(const Vec3& world) const {
        Vec3 g = (world - origin) / voxel_size;
        return {int32_t(std::floor(g.x())), int32_t(std::floor(g.y())), int32_t(std::floor(g.z()))};
    }
    size_t size() const { return cells.size(); }
    bool empty() const { return cells.empty(); }

    std::vector<VoxelCoord> sorted_coords() const {
        std::vector<VoxelCoord> out;
        out.reserve(cells.size());
        for (const auto& [c, p] : cells) out.push_back(c);
        std::sort(out.begin(), out.end());
        return out;
    }
};

// Grid on the pipeline's level-l lattice (voxel sizes 16/8/4 cm).
template <typename P>
SparseVoxelGrid<P> make_level_grid(int level, const Vec3& origin = Vec3::Zero(),
                                   double finest = 0.04) {
    if (level < 1 || level > 3) fail("level must be in {1,2,3}, got ", level);
    return SparseVoxelGrid<P>(level, level_voxel_size(level, finest), origin);
}

// Retains exactly the cells with occupancy >= theta.
SparseVoxelGrid<TsdfVoxel> sparsify(const SparseVoxelGrid<TsdfVoxel>& grid, double theta);

// Nearest-neighbor 2x upsampling: every cell spawns its 8 children carrying
// the parent payload; level increases, voxel size halves, origin preserved.
template <typename P>
SparseVoxelGrid<P> upsample2x(const SparseVoxelGrid<P>& grid) {
    if (grid.level >= 3) fail("upsample2x: already at finest level");
    SparseVoxelGrid<P> out(grid.level + 1, grid.voxel_size * 0.5, grid.origin);
    out.cells.reserve(grid.cells.size() * 8);
    for (const auto& [c, payload] : grid.cells)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int d = 0; d < 2; ++d)
                    out.cells.emplace(VoxelCoord{2 * c.i + a, 2 * c.j + b, 2 * c.k + d}, payload);
    return out;
}

// Sub-grid of cells whose centers lie inside fbv, re-anchored at
// fbv.min_corner. fbv must be aligned to the grid lattice.
template <typename P>
SparseVoxelGrid<P> extract_region(const SparseVoxelGrid<P>& global, const Fbv& fbv) {
    SparseVoxelGrid<P> local(global.level, global.voxel_size, fbv.min_corner);
    const Vec3 shift = (fbv.min_corner - global.origin) / global.voxel_size;
    const VoxelCoord off{int32_t(std::llround(shift.x())), int32_t(std::llround(shift.y())),
                         int32_t(std::llround(shift.z()))};
    for (const auto& [c, payload] : global.cells) {
        if (!fbv.contains(global.center(c))) continue;
        local.cells.emplace(VoxelCoord{c.i - off.i, c.j - off.j, c.k - off.k}, payload);
    }
    return local;
}

namespace detail {
inline VoxelCoord lattice_offset(const Vec3& from_origin, const Vec3& to_origin, double voxel_size) {
    const Vec3 d = (to_origin - from_origin) / voxel_size;
    const VoxelCoord off{int32_t(std::llround(d.x())), int32_t(std::llround(d.y())),
                         int32_t(std::llround(d.z()))};
    for (int a = 0; a < 3; ++a)
        if (std::abs(d[a] - std::round(d[a])) > 1e-6)
            fail("lattice misalignment: origin offset ", d[a], " voxels along axis ", a);
    return off;
}
}  // namespace detail

// Overwrites (or inserts) every local cell into the global grid.
template <typename P>
void replace_region(SparseVoxelGrid<P>& global, const SparseVoxelGrid<P>& local) {
    if (std::abs(global.voxel_size - local.voxel_size) > 1e-9)
        fail("replace_region: voxel size mismatch");
    const VoxelCoord off =
        detail::lattice_offset(global.origin, local.origin, global.voxel_size);
    for (const auto& [c, payload] : local.cells)
        global.cells[VoxelCoord{c.i + off.i, c.j + off.j, c.k + off.k}] = payload;
}

// --- SVXG volume serialization (binary, little-endian) ---
// header: magic "SVXG", version u32, level u32, voxel_size f32, origin 3xf32,
//         payload_kind u32, cell_count u64
// cells:  {i,j,k : i32; payload : f32 x payload_floats(kind)}, sorted by coord
// kinds:  1 = TsdfVoxel (o,x)  2 = WeightedTsdfVoxel (tsdf,weight)
//         3 = GlobalTsdfCell (o,x,weight,t)  0x1000+C = feature vector, C channels

inline constexpr uint32_t kPayloadTsdf = 1;
inline constexpr uint32_t kPayloadWeightedTsdf = 2;
inline constexpr uint32_t kPayloadGlobalTsdf = 3;
inline constexpr uint32_t kPayloadFeatureBase = 0x1000;

void save_volume(const std::string& path, const SparseVoxelGrid<TsdfVoxel>& grid);
void save_volume(const std::string& path, const SparseVoxelGrid<WeightedTsdfVoxel>& grid);
void save_volume(const std::string& path, const SparseVoxelGrid<GlobalTsdfCell>& grid);
void save_volume(const std::string& path, const SparseVoxelGrid<FeatureVec>& grid);

uint32_t peek_volume_kind(const std::string& path);
SparseVoxelGrid<TsdfVoxel> load_tsdf_volume(const std::string& path);
SparseVoxelGrid<WeightedTsdfVoxel> load_weighted_volume(const std::string& path);
SparseVoxelGrid<GlobalTsdfCell> load_global_volume(const std::string& path);
SparseVoxelGrid<FeatureVec> load_feature_volume(const std::string& path);

}  // namespace increcon
