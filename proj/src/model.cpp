#include "increcon/model.hpp"

#include <random>

namespace increcon {

void ModelConfig::validate() const {
    for (int l = 0; l < 3; ++l) {
        if (feat_channels[l] < 1 || geo_channels[l] < 1) fail("channel counts must be positive");
        if (strides[l] < 1) fail("strides must be positive");
    }
    if (strides[0] % strides[1] != 0 || strides[1] % strides[2] != 0)
        fail("backbone strides must halve between levels (e.g. 16,8,4)");
    if (geo_conv_layers < 1) fail("need at least one geometric conv layer");
    if (mlp_hidden < 1 || mlp_hidden_layers < 0) fail("invalid MLP configuration");
}

namespace {

void fill_fan_in(std::mt19937_64& rng, std::vector<float>& v, int fan_in) {
    const float a = 1.0f / std::sqrt(float(fan_in));
    std::uniform_real_distribution<float> dist(-a, a);
    for (float& x : v) x = dist(rng);
}

Conv2dWeights init_conv2d(std::mt19937_64& rng, int cin, int cout) {
    Conv2dWeights w{cin, cout, std::vector<float>(size_t(9) * cin * cout),
                    std::vector<float>(cout, 0.0f)};
    fill_fan_in(rng, w.kernel, 9 * cin);
    return w;
}

nn::SparseConvWeights<float> init_conv3d(std::mt19937_64& rng, int cin, int cout) {
    auto w = nn::SparseConvWeights<float>::zeros(cin, cout);
    fill_fan_in(rng, w.kernel, 27 * cin);
    return w;
}

nn::MlpWeights<float> init_mlp(std::mt19937_64& rng, int in, int hidden, int hidden_layers) {
    nn::MlpWeights<float> mlp;
    int cur = in;
    for (int l = 0; l < hidden_layers; ++l) {
        nn::MlpWeights<float>::Layer L{cur, hidden,
                                       std::vector<float>(size_t(cur) * hidden),
                                       std::vector<float>(hidden, 0.0f)};
        fill_fan_in(rng, L.weight, cur);
        mlp.layers.push_back(std::move(L));
        cur = hidden;
    }
    nn::MlpWeights<float>::Layer out{cur, 2, std::vector<float>(size_t(cur) * 2),
                                     std::vector<float>(2, 0.0f)};
    fill_fan_in(rng, out.weight, cur);
    mlp.layers.push_back(std::move(out));
    return mlp;
}

}  // namespace

ModelWeights init_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ModelWeights m;
    m.config = cfg;
    m.stub[0] = init_conv2d(rng, 1, cfg.feat_channels[2]);
    m.stub[1] = init_conv2d(rng, cfg.feat_channels[2], cfg.feat_channels[1]);
    m.stub[2] = init_conv2d(rng, cfg.feat_channels[1], cfg.feat_channels[0]);
    for (int l = 1; l <= 3; ++l) {
        LevelWeights& lv = m.level(l);
        int cur = cfg.geo_in_channels(l);
        for (int i = 0; i < cfg.geo_conv_layers; ++i) {
            lv.geo_convs.push_back(init_conv3d(rng, cur, cfg.geo_channels[l - 1]));
            cur = cfg.geo_channels[l - 1];
        }
        const int ch = cfg.geo_channels[l - 1];
        lv.gru = {init_conv3d(rng, 2 * ch, ch), init_conv3d(rng, 2 * ch, ch),
                  init_conv3d(rng, 2 * ch, ch)};
        lv.mlp = init_mlp(rng, ch, cfg.mlp_hidden, cfg.mlp_hidden_layers);
    }
    return m;
}

namespace {

nn::Tensor conv2d_kernel_tensor(const Conv2dWeights& w) {
    return {{3, 3, uint32_t(w.cin), uint32_t(w.cout)}, w.kernel};
}
nn::Tensor conv3d_kernel_tensor(const nn::SparseConvWeights<float>& w) {
    return {{3, 3, 3, uint32_t(w.cin), uint32_t(w.cout)}, w.kernel};
}

void pack_conv3d(nn::WeightSet& set, const std::string& prefix,
                 const nn::SparseConvWeights<float>& w) {
    set[prefix + ".kernel"] = conv3d_kernel_tensor(w);
    set[prefix + ".bias"] = {{uint32_t(w.cout)}, w.bias};
}

nn::SparseConvWeights<float> unpack_conv3d(const nn::WeightSet& set, const std::string& prefix) {
    const nn::Tensor& k = nn::require_tensor(set, prefix + ".kernel");
    if (k.dims.size() != 5 || k.dims[0] != 3 || k.dims[1] != 3 || k.dims[2] != 3)
        fail("tensor '", prefix, ".kernel' must have shape [3,3,3,cin,cout]");
    nn::SparseConvWeights<float> w;
    w.cin = int(k.dims[3]);
    w.cout = int(k.dims[4]);
    w.kernel = k.data;
    w.bias = nn::require_tensor(set, prefix + ".bias", {uint32_t(w.cout)}).data;
    return w;
}

Conv2dWeights unpack_conv2d(const nn::WeightSet& set, const std::string& prefix) {
    const nn::Tensor& k = nn::require_tensor(set, prefix + ".kernel");
    if (k.dims.size() != 4 || k.dims[0] != 3 || k.dims[1] != 3)
        fail("tensor '", prefix, ".kernel' must have shape [3,3,cin,cout]");
    Conv2dWeights w;
    w.cin = int(k.dims[2]);
    w.cout = int(k.dims[3]);
    w.kernel = k.data;
    w.bias = nn::require_tensor(set, prefix + ".bias", {uint32_t(w.cout)}).data;
    return w;
}

}  // namespace

nn::WeightSet pack_model(const ModelWeights& m) {
    nn::WeightSet set;
    for (int k = 0; k < 3; ++k) {
        set[cat("stub.conv", k, ".kernel")] = conv2d_kernel_tensor(m.stub[k]);
        set[cat("stub.conv", k, ".bias")] = {{uint32_t(m.stub[k].cout)}, m.stub[k].bias};
    }
    for (int l = 1; l <= 3; ++l) {
        const LevelWeights& lv = m.level(l);
        for (size_t i = 0; i < lv.geo_convs.size(); ++i)
            pack_conv3d(set, cat("level", l, ".geo_conv", i), lv.geo_convs[i]);
        pack_conv3d(set, cat("level", l, ".gru.W_z"), lv.gru.w_z);
        pack_conv3d(set, cat("level", l, ".gru.W_r"), lv.gru.w_r);
        pack_conv3d(set, cat("level", l, ".gru.W_h"), lv.gru.w_h);
        for (size_t j = 0; j < lv.mlp.layers.size(); ++j) {
            const auto& L = lv.mlp.layers[j];
            set[cat("level", l, ".mlp.layer", j, ".weight")] = {
                {uint32_t(L.in), uint32_t(L.out)}, L.weight};
            set[cat("level", l, ".mlp.layer", j, ".bias")] = {{uint32_t(L.out)}, L.bias};
        }
    }
    return set;
}

ModelWeights unpack_model(const nn::WeightSet& set) {
    ModelWeights m;
    for (int k = 0; k < 3; ++k) m.stub[k] = unpack_conv2d(set, cat("stub.conv", k));
    if (m.stub[0].cin != 1) fail("stub.conv0 must take a single input channel");
    m.config.feat_channels = {m.stub[2].cout, m.stub[1].cout, m.stub[0].cout};

    for (int l = 1; l <= 3; ++l) {
        LevelWeights& lv = m.level(l);
        for (size_t i = 0;; ++i) {
            if (!set.contains(cat("level", l, ".geo_conv", i, ".kernel"))) break;
            lv.geo_convs.push_back(unpack_conv3d(set, cat("level", l, ".geo_conv", i)));
        }
        if (lv.geo_convs.empty()) fail("missing required tensor 'level", l, ".geo_conv0.kernel'");
        lv.gru = {unpack_conv3d(set, cat("level", l, ".gru.W_z")),
                  unpack_conv3d(set, cat("level", l, ".gru.W_r")),
                  unpack_conv3d(set, cat("level", l, ".gru.W_h"))};
        lv.gru.validate();
        for (size_t j = 0;; ++j) {
            if (!set.contains(cat("level", l, ".mlp.layer", j, ".weight"))) break;
            const nn::Tensor& wt = nn::require_tensor(set, cat("level", l, ".mlp.layer", j, ".weight"));
            if (wt.dims.size() != 2) fail("mlp weight tensors must be rank 2");
            nn::MlpWeights<float>::Layer L;
            L.in = int(wt.dims[0]);
            L.out = int(wt.dims[1]);
            L.weight = wt.data;
            L.bias = nn::require_tensor(set, cat("level", l, ".mlp.layer", j, ".bias"),
                                        {uint32_t(L.out)})
                         .data;
            lv.mlp.layers.push_back(std::move(L));
        }
        if (lv.mlp.layers.empty()) fail("missing required tensor 'level", l, ".mlp.layer0.weight'");
        lv.mlp.validate();

        m.config.geo_channels[l - 1] = lv.geo_convs.back().cout;
        if (m.config.geo_in_channels(l) != lv.geo_convs.front().cin)
            fail("level ", l, " geo_conv0 input channels (", lv.geo_convs.front().cin,
                 ") do not match the backbone feature channels");
        if (l == 1) {
            m.config.geo_conv_layers = int(lv.geo_convs.size());
            m.config.mlp_hidden_layers = int(lv.mlp.layers.size()) - 1;
            m.config.mlp_hidden =
                lv.mlp.layers.size() > 1 ? lv.mlp.layers.front().out : m.config.mlp_hidden;
        }
    }
    return m;
}

void save_model(const ModelWeights& model, const std::string& path) {
    save_weights(pack_model(model), path);
}

ModelWeights load_model(const std::string& path) {
    return unpack_model(nn::load_weights(path));
}

}  // namespace increcon
