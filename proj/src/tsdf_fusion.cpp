#include "increcon/tsdf_fusion.hpp"

#include <cmath>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace increcon::fusion {

namespace {

struct VoxelUpdate {
    float sample;
    bool valid;
};

inline VoxelUpdate sample_for_voxel(const Vec3& center, const ImageF& depth, const Mat3& r_inv,
                                    const Vec3& cam_t, const Intrinsics& intr, double lambda,
                                    double d_max) {
    const Vec3 p_cam = r_inv * (center - cam_t);
    const double z = p_cam.z();
    if (z <= 0 || z > d_max) return {0, false};
    const double u = intr.fx * p_cam.x() / z + intr.cx;
    const double v = intr.fy * p_cam.y() / z + intr.cy;
    const int ui = int(std::lround(u)), vi = int(std::lround(v));
    if (ui < 0 || ui >= intr.width || vi < 0 || vi >= intr.height) return {0, false};
    const double d = depth.at(ui, vi);
    if (d <= 0) return {0, false};
    const double sdf_raw = d - z;
    if (sdf_raw < -lambda) return {0, false};  // occluded beyond the band
    return {float(std::clamp(sdf_raw / lambda, -1.0, 1.0)), true};
}

void integrate_impl(SparseVoxelGrid<WeightedTsdfVoxel>& grid, const ImageF& depth,
                    const Pose& pose, const Intrinsics& intr, double lambda, double d_max,
                    float w_max, bool parallel) {
    if (depth.width != intr.width || depth.height != intr.height)
        fail("integrate_depth: depth image does not match intrinsics");
    const Mat3 r_inv = pose.rotation.transpose();

    // Snapshot of cell pointers: per-voxel updates are independent.
    std::vector<std::pair<const VoxelCoord*, WeightedTsdfVoxel*>> cells;
    cells.reserve(grid.cells.size());
    for (auto& [c, v] : grid.cells) cells.emplace_back(&c, &v);

#pragma omp parallel for schedule(static) if (parallel)
    for (int64_t n = 0; n < int64_t(cells.size()); ++n) {
        const VoxelUpdate upd = sample_for_voxel(grid.center(*cells[n].first), depth, r_inv,
                                                 pose.translation, intr, lambda, d_max);
        if (!upd.valid) continue;
        WeightedTsdfVoxel& v = *cells[n].second;
        v.tsdf = (v.tsdf * v.weight + upd.sample) / (v.weight + 1.0f);
        v.weight = std::min(v.weight + 1.0f, w_max);
    }
}

}  // namespace

void integrate_depth(SparseVoxelGrid<WeightedTsdfVoxel>& grid, const ImageF& depth,
                     const Pose& pose, const Intrinsics& intr, double lambda, double d_max,
                     float w_max) {
    integrate_impl(grid, depth, pose, intr, lambda, d_max, w_max, true);
}

void ref::integrate_depth(SparseVoxelGrid<WeightedTsdfVoxel>& grid, const ImageF& depth,
                          const Pose& pose, const Intrinsics& intr, double lambda, double d_max,
                          float w_max) {
    integrate_impl(grid, depth, pose, intr, lambda, d_max, w_max, false);
}

void allocate_band(SparseVoxelGrid<WeightedTsdfVoxel>& grid, const ImageF& depth,
                   const Pose& pose, const Intrinsics& intr, double lambda, double d_max) {
    const double vs = grid.voxel_size;
    using CoordSet = std::unordered_set<VoxelCoord, VoxelCoordHash>;

    int n_threads = 1;
#ifdef _OPENMP
    n_threads = omp_get_max_threads();
#endif
    std::vector<CoordSet> partial(n_threads);

#pragma omp parallel for schedule(dynamic, 8)
    for (int v = 0; v < intr.height; ++v) {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        CoordSet& coords = partial[tid];
        for (int u = 0; u < intr.width; ++u) {
            const double d = depth.at(u, v);
            if (d <= 0 || d > d_max) continue;
            const Vec3 dir_cam = intr.unproject(double(u), double(v), 1.0);
            const double z_lo = std::max(vs * 0.5, d - lambda - vs);
            const double z_hi = d + lambda;
            for (double z = z_lo; z <= z_hi; z += vs * 0.5) {
                const Vec3 p = pose.to_world(dir_cam * z);
                coords.insert(grid.coord_at(p));
            }
        }
    }
    for (const CoordSet& coords : partial)
        for (const VoxelCoord& c : coords) grid.cells.try_emplace(c, WeightedTsdfVoxel{});
}

SparseVoxelGrid<WeightedTsdfVoxel> fuse_sequence(const std::vector<Frame>& frames, double lambda,
                                                 double d_max, double voxel_size, float w_max) {
    if (frames.empty()) fail("fuse_sequence: empty frame list");
    SparseVoxelGrid<WeightedTsdfVoxel> grid(3, voxel_size, Vec3::Zero());
    for (const Frame& f : frames)
        allocate_band(grid, f.image, f.pose, f.intrinsics, lambda, d_max);
    for (const Frame& f : frames)
        integrate_depth(grid, f.image, f.pose, f.intrinsics, lambda, d_max, w_max);
    return grid;
}

}  // namespace increcon::fusion
