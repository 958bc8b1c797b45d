#pragma once

#include "increcon/nn/ops.hpp"
#include "increcon/nn/tensor.hpp"

#include <array>

namespace increcon {

// 3x3 image convolution weights, kernel [3][3][cin][cout] row-major.
struct Conv2dWeights {
    int cin = 0, cout = 0;
    std::vector<float> kernel;
    std::vector<float> bias;
};

struct ModelConfig {
    std::array<int, 3> feat_channels{24, 32, 48};  // image feature channels, level 1..3
    std::array<int, 3> geo_channels{24, 32, 48};   // geometric/hidden channels, level 1..3
    std::array<int, 3> strides{16, 8, 4};          // backbone strides, level 1..3
    int geo_conv_layers = 2;
    int mlp_hidden = 32;
    int mlp_hidden_layers = 1;

    // geo-conv input: feature channels + visibility weight, plus the upsampled
    // (o,x) pair concatenated at levels 2 and 3
    int geo_in_channels(int level) const {
        return feat_channels[level - 1] + 1 + (level > 1 ? 2 : 0);
    }
    void validate() const;
};

struct LevelWeights {
    std::vector<nn::SparseConvWeights<float>> geo_convs;
    nn::GruWeights<float> gru;
    nn::MlpWeights<float> mlp;
};

struct ModelWeights {
    ModelConfig config;
    std::array<Conv2dWeights, 3> stub;  // conv0: 1->C3, conv1: C3->C2, conv2: C2->C1
    std::array<LevelWeights, 3> levels;

    LevelWeights& level(int l) { return levels[l - 1]; }
    const LevelWeights& level(int l) const { return levels[l - 1]; }
};

// Seeded uniform init (fan-in scaled), zero biases.
ModelWeights init_model(const ModelConfig& cfg, uint64_t seed);

// Conversion to/from the canonical named-tensor set: stub.conv{k}.*,
// level{l}.geo_conv{i}.*, level{l}.gru.W_{z,r,h}.*, level{l}.mlp.layer{j}.*.
nn::WeightSet pack_model(const ModelWeights& model);
ModelWeights unpack_model(const nn::WeightSet& set);

void save_model(const ModelWeights& model, const std::string& path);
ModelWeights load_model(const std::string& path);

}  // namespace increcon
