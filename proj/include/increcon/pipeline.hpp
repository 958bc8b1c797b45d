#pragma once

#include "increcon/config.hpp"
#include "increcon/features.hpp"
#include "increcon/model.hpp"
#include "increcon/voxel_grid.hpp"

#include <array>
#include <functional>
#include <span>

namespace increcon::pipe {

using SdfFn = std::function<double(const Vec3&)>;

// Wall-clock per stage for one fragment (milliseconds).
struct FragmentTiming {
    double image_encode_ms = 0;
    std::array<double, 3> unproj_ms{};
    std::array<double, 3> sparse_conv_ms{};
    std::array<double, 3> gru_ms{};  // fusion + MLP + sparsify
    double meshing_ms = 0;
    double total_ms = 0;
    int key_frames = 0;
};

struct ReconState {
    std::array<SparseVoxelGrid<FeatureVec>, 3> hidden;  // global hidden state per level
    SparseVoxelGrid<GlobalTsdfCell> global_tsdf;        // level 3
    uint32_t fragment_count = 0;
};

ReconState make_state(const PipelineConfig& cfg);

feat::LatticeSpec fragment_lattice(const Fbv& fbv, int level, const PipelineConfig& cfg);
std::vector<VoxelCoord> dense_fbv_coords(const Fbv& fbv, int level, const PipelineConfig& cfg);

// Coarse-to-fine reconstruction of one fragment: per level, unproject image
// features, extract geometric features with the sparse-conv stack (levels 2-3
// concatenate the upsampled previous-level (o,x)), fuse per the configured
// method/area, predict (o,x) with the MLP and sparsify. The level-3 result is
// integrated into the global TSDF volume; the sparsified local volume is
// returned.
SparseVoxelGrid<TsdfVoxel> reconstruct_fragment(const Fragment& fragment, ReconState& state,
                                                const ModelWeights& model,
                                                const PipelineConfig& cfg,
                                                FragmentTiming* timing = nullptr);

// Replacement semantics for Gru/Average fusion; LinearTsdf applies the
// running weighted average per voxel instead.
void integrate_global(const SparseVoxelGrid<TsdfVoxel>& local, ReconState& state,
                      const PipelineConfig& cfg);

// Dense GT volume over the FBV lattice: occ = 1 iff |sdf| < lambda,
// x = clamp(sdf/lambda, -1, 1).
SparseVoxelGrid<TsdfVoxel> ground_truth_volume(const SdfFn& sdf, const Fbv& fbv, int level,
                                               const PipelineConfig& cfg);

// Loss surfaces over matched voxel arrays (see nn::occupancy_loss / nn::sdf_loss).
double occupancy_loss(std::span<const float> pred_o, std::span<const float> gt_o);
double sdf_loss(std::span<const float> pred_x, std::span<const float> gt_x,
                std::span<const uint8_t> gt_occupied);

// Plain gradient descent on occupancy + SDF loss summed over all levels and
// fragments. Candidate sets during training are guided by ground-truth
// occupancy; the stub backbone stays frozen. Returns the per-step total loss.
std::vector<double> train_toy(const std::vector<Fragment>& fragments, const SdfFn& sdf,
                              ModelWeights& model, const PipelineConfig& cfg, int steps,
                              double lr);

}  // namespace increcon::pipe
