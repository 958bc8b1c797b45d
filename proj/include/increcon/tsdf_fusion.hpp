#pragma once

#include "increcon/geometry.hpp"
#include "increcon/image.hpp"
#include "increcon/voxel_grid.hpp"

#include <vector>

namespace increcon::fusion {

inline constexpr float kDefaultWMax = 255.0f;

// Projective running-average TSDF update of every allocated voxel against one
// depth image: sdf_raw = d - z, updates skipped behind the surface beyond the
// truncation band (sdf_raw < -lambda).
void integrate_depth(SparseVoxelGrid<WeightedTsdfVoxel>& grid, const ImageF& depth,
                     const Pose& pose, const Intrinsics& intr, double lambda, double d_max,
                     float w_max = kDefaultWMax);

// Allocates voxels along each depth ray within the truncation band plus one
// voxel of free space in front.
void allocate_band(SparseVoxelGrid<WeightedTsdfVoxel>& grid, const ImageF& depth,
                   const Pose& pose, const Intrinsics& intr, double lambda, double d_max);

// Allocation from all frames first, then per-frame integration, so the result
// is invariant to frame order (until w_max saturates).
SparseVoxelGrid<WeightedTsdfVoxel> fuse_sequence(const std::vector<Frame>& frames, double lambda,
                                                 double d_max, double voxel_size,
                                                 float w_max = kDefaultWMax);

namespace ref {
void integrate_depth(SparseVoxelGrid<WeightedTsdfVoxel>& grid, const ImageF& depth,
                     const Pose& pose, const Intrinsics& intr, double lambda, double d_max,
                     float w_max = kDefaultWMax);
}

}  // namespace increcon::fusion
