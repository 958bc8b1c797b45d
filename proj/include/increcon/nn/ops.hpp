#pragma once

#include "increcon/voxel_grid.hpp"

#include <span>
#include <vector>

namespace increcon::nn {

// Coordinate set with the precomputed 27-neighbor gather table used by the
// submanifold convolution (output sites = input sites). Offset o enumerates
// (di,dj,dk) in {-1,0,1}^3 row-major, so the mirrored offset is 26-o.
struct CoordMap {
    std::vector<VoxelCoord> coords;  // sorted
    std::unordered_map<VoxelCoord, int32_t, VoxelCoordHash> index;
    std::vector<int32_t> nbr;  // rows x 27, -1 where the neighbor is absent

    static CoordMap build(std::vector<VoxelCoord> sorted_coords);
    int rows() const { return int(coords.size()); }
    const int32_t* neighbors(int row) const { return nbr.data() + size_t(row) * 27; }
};

// Dense rows x channels feature storage over a CoordMap's rows.
template <typename T>
struct Block {
    int rows = 0;
    int channels = 0;
    std::vector<T> d;

    static Block zeros(int r, int c) { return {r, c, std::vector<T>(size_t(r) * c, T(0))}; }
    T* row(int r) { return d.data() + size_t(r) * channels; }
    const T* row(int r) const { return d.data() + size_t(r) * channels; }
};

// 3x3x3 submanifold sparse convolution weights; kernel laid out as
// [3][3][3][cin][cout] row-major, matching the weight-file tensor shape.
template <typename T>
struct SparseConvWeights {
    int cin = 0, cout = 0;
    std::vector<T> kernel;  // 27 * cin * cout
    std::vector<T> bias;    // cout

    static SparseConvWeights zeros(int cin, int cout) {
        return {cin, cout, std::vector<T>(size_t(27) * cin * cout, T(0)),
                std::vector<T>(size_t(cout), T(0))};
    }
    void validate() const;
};

template <typename T>
struct GruWeights {
    SparseConvWeights<T> w_z, w_r, w_h;  // cin = hidden + geo, cout = hidden
    void validate() const;
};

template <typename T>
struct MlpWeights {
    struct Layer {
        int in = 0, out = 0;
        std::vector<T> weight;  // [in][out] row-major
        std::vector<T> bias;    // [out]
    };
    std::vector<Layer> layers;  // hidden layers ReLU; final layer emits (logit, raw)
    void validate() const;
};

// --- convolution kernels (parallel over rows; deterministic) ---

template <typename T>
void conv_forward(const CoordMap& map, const Block<T>& in, const SparseConvWeights<T>& w,
                  Block<T>& out);
template <typename T>
void conv_backward_input(const CoordMap& map, const SparseConvWeights<T>& w,
                         const Block<T>& dout, Block<T>& din);
template <typename T>
void conv_backward_params(const CoordMap& map, const Block<T>& in, const Block<T>& dout,
                          SparseConvWeights<T>& dw);

template <typename T>
void relu_forward(const Block<T>& in, Block<T>& out);
template <typename T>
void relu_backward(const Block<T>& pre, const Block<T>& dout, Block<T>& din);

// --- GRU cell over one coordinate set ---

template <typename T>
struct GruCache {
    Block<T> cat;     // [h_prev, g]
    Block<T> cat2;    // [r . h_prev, g]
    Block<T> z, r, htilde;
};

// h_out = (1-z).h_prev + z.htilde per the update equations; h_prev rows
// missing from the caller's hidden state must be zero-filled beforehand.
template <typename T>
void gru_forward(const CoordMap& map, const Block<T>& g, const Block<T>& h_prev,
                 const GruWeights<T>& w, Block<T>& h_out, GruCache<T>* cache = nullptr);
template <typename T>
void gru_backward(const CoordMap& map, const Block<T>& h_prev, const GruWeights<T>& w,
                  const GruCache<T>& cache, const Block<T>& dh, Block<T>& dg,
                  Block<T>& dh_prev, GruWeights<T>& dw);

// --- per-voxel MLP head ---

template <typename T>
struct MlpCache {
    std::vector<Block<T>> pre;   // pre-activation per layer
    std::vector<Block<T>> act;   // inputs to each layer (act[0] = network input)
    Block<T> out;                // (o, x) after sigmoid/tanh
};

// out has 2 channels per row: o = sigmoid(logit), x = tanh(raw).
template <typename T>
void mlp_forward_batch(const Block<T>& in, const MlpWeights<T>& w, Block<T>& out,
                       MlpCache<T>* cache = nullptr);
template <typename T>
void mlp_backward_batch(const MlpWeights<T>& w, const MlpCache<T>& cache, const Block<T>& dout,
                        Block<T>& din, MlpWeights<T>& dw);

// --- losses ---

// Mean binary cross-entropy; probabilities clamped to [1e-7, 1-1e-7].
// Accumulated in double regardless of T.
template <typename T>
double occupancy_loss(std::span<const T> pred_o, std::span<const T> gt_o);
template <typename T>
void occupancy_loss_backward(std::span<const T> pred_o, std::span<const T> gt_o, T upstream,
                             std::span<T> dpred);

// Mean |T(pred)-T(gt)| with T(x) = sign(x)*ln(1+|x|), over gt-occupied voxels.
template <typename T>
double sdf_loss(std::span<const T> pred_x, std::span<const T> gt_x,
                std::span<const uint8_t> gt_occupied);
template <typename T>
void sdf_loss_backward(std::span<const T> pred_x, std::span<const T> gt_x,
                       std::span<const uint8_t> gt_occupied, T upstream, std::span<T> dpred);

template <typename T>
T log_transform(T x) {
    using std::abs;
    using std::log;
    return x >= T(0) ? log(T(1) + x) : -log(T(1) - x);
}

// --- grid-level wrappers ---

SparseVoxelGrid<FeatureVec> sparse_conv3d(const SparseVoxelGrid<FeatureVec>& input,
                                          const SparseConvWeights<float>& w);
SparseVoxelGrid<FeatureVec> gru_cell(const SparseVoxelGrid<FeatureVec>& g,
                                     const SparseVoxelGrid<FeatureVec>& h_prev,
                                     const GruWeights<float>& w);
TsdfVoxel mlp_forward(std::span<const float> features, const MlpWeights<float>& w);

// Conversion between grid payloads and packed blocks (rows follow map.coords).
Block<float> grid_to_block(const SparseVoxelGrid<FeatureVec>& grid, const CoordMap& map);
SparseVoxelGrid<FeatureVec> block_to_grid(const Block<float>& block, const CoordMap& map,
                                          int level, double voxel_size, const Vec3& origin);

namespace ref {
// Serial reference: per-voxel hash lookups, no gather tables.
SparseVoxelGrid<FeatureVec> sparse_conv3d(const SparseVoxelGrid<FeatureVec>& input,
                                          const SparseConvWeights<float>& w);
}

}  // namespace increcon::nn
