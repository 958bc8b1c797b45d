#pragma once

#include "increcon/geometry.hpp"
#include "increcon/model.hpp"
#include "increcon/voxel_grid.hpp"

#include <array>
#include <vector>

namespace increcon::feat {

// Channel-last 2-D feature map.
struct FeatureMap {
    int width = 0, height = 0, channels = 0;
    int stride = 1;  // spatial stride relative to the input image
    std::vector<float> data;

    float* at(int x, int y) { return data.data() + (size_t(y) * width + x) * channels; }
    const float* at(int x, int y) const {
        return data.data() + (size_t(y) * width + x) * channels;
    }
};

struct FeaturePyramid {
    std::array<FeatureMap, 3> levels;  // index 0..2 = level 1..3

    const FeatureMap& level(int l) const { return levels[l - 1]; }
};

// Deterministic stub backbone: avgpool to the level-3 stride, then a conv
// chain tapped at each level (conv0 -> level 3, conv1 -> level 2,
// conv2 -> level 1), ReLU after every conv. Same input, same weights =>
// bit-identical output.
FeaturePyramid extract_features(const ImageF& image, const ModelWeights& model);

struct LatticeSpec {
    int level = 1;
    double voxel_size = 0.16;
    Vec3 origin = Vec3::Zero();
};

// Back-projects each candidate voxel into every view; visible contributions
// (projection inside the image, camera depth in (0, d_max]) are averaged,
// the final channel stores the contributor count. Voxels no view sees are
// omitted.
SparseVoxelGrid<FeatureVec> build_feature_volume(const Fragment& fragment,
                                                 const std::vector<FeaturePyramid>& pyramids,
                                                 int level,
                                                 const std::vector<VoxelCoord>& candidates,
                                                 const LatticeSpec& lattice, double d_max);

namespace ref {
SparseVoxelGrid<FeatureVec> build_feature_volume(const Fragment& fragment,
                                                 const std::vector<FeaturePyramid>& pyramids,
                                                 int level,
                                                 const std::vector<VoxelCoord>& candidates,
                                                 const LatticeSpec& lattice, double d_max);
}

}  // namespace increcon::feat
