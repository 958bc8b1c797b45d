#include "increcon/nn/grad_check.hpp"

#include "increcon/nn/ops.hpp"

#include <functional>
#include <random>

namespace increcon::nn {

namespace {

struct ParamView {
    double* values;
    const double* analytic;
    size_t n;
};

// Central-difference sweep over every listed coordinate.
double sweep(const std::function<double()>& f, const std::vector<ParamView>& params, double h) {
    double max_rel = 0.0;
    for (const ParamView& pv : params) {
        for (size_t i = 0; i < pv.n; ++i) {
            const double saved = pv.values[i];
            pv.values[i] = saved + h;
            const double lp = f();
            pv.values[i] = saved - h;
            const double lm = f();
            pv.values[i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = pv.analytic[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

std::vector<VoxelCoord> random_coords(std::mt19937_64& rng, int n) {
    std::vector<VoxelCoord> coords;
    std::bernoulli_distribution keep(0.5);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if (keep(rng)) coords.push_back({i, j, k});
    if (coords.empty()) coords.push_back({0, 0, 0});
    return coords;
}

void fill_uniform(std::mt19937_64& rng, std::vector<double>& v, double scale) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& x : v) x = dist(rng);
}

double dot(const Block<double>& a, const Block<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.d.size(); ++i) s += a.d[i] * b.d[i];
    return s;
}

double check_conv(uint64_t seed, double h) {
    std::mt19937_64 rng(seed);
    const int cin = 3, cout = 2;
    const CoordMap map = CoordMap::build([&] {
        auto c = random_coords(rng, 4);
        std::sort(c.begin(), c.end());
        return c;
    }());

    Block<double> in = Block<double>::zeros(map.rows(), cin);
    fill_uniform(rng, in.d, 1.0);
    auto w = SparseConvWeights<double>::zeros(cin, cout);
    fill_uniform(rng, w.kernel, 0.5);
    fill_uniform(rng, w.bias, 0.5);
    Block<double> u = Block<double>::zeros(map.rows(), cout);  // random scalar projection
    fill_uniform(rng, u.d, 1.0);

    auto objective = [&] {
        Block<double> out;
        conv_forward(map, in, w, out);
        return dot(out, u);
    };

    Block<double> din;
    SparseConvWeights<double> dw;
    conv_backward_input(map, w, u, din);
    conv_backward_params(map, in, u, dw);

    return sweep(objective,
                 {{in.d.data(), din.d.data(), in.d.size()},
                  {w.kernel.data(), dw.kernel.data(), w.kernel.size()},
                  {w.bias.data(), dw.bias.data(), w.bias.size()}},
                 h);
}

double check_gru(uint64_t seed, double h) {
    std::mt19937_64 rng(seed);
    const int ch = 4, cg = 4;
    const CoordMap map = CoordMap::build([&] {
        auto c = random_coords(rng, 3);
        std::sort(c.begin(), c.end());
        return c;
    }());

    Block<double> g = Block<double>::zeros(map.rows(), cg);
    Block<double> hp = Block<double>::zeros(map.rows(), ch);
    fill_uniform(rng, g.d, 1.0);
    fill_uniform(rng, hp.d, 1.0);
    GruWeights<double> w{SparseConvWeights<double>::zeros(ch + cg, ch),
                         SparseConvWeights<double>::zeros(ch + cg, ch),
                         SparseConvWeights<double>::zeros(ch + cg, ch)};
    for (auto* cw : {&w.w_z, &w.w_r, &w.w_h}) {
        fill_uniform(rng, cw->kernel, 0.3);
        fill_uniform(rng, cw->bias, 0.3);
    }
    Block<double> u = Block<double>::zeros(map.rows(), ch);
    fill_uniform(rng, u.d, 1.0);

    auto objective = [&] {
        Block<double> h_out;
        gru_forward(map, g, hp, w, h_out);
        return dot(h_out, u);
    };

    GruCache<double> cache;
    Block<double> h_out;
    gru_forward(map, g, hp, w, h_out, &cache);
    Block<double> dg, dhp;
    GruWeights<double> dw;
    gru_backward(map, hp, w, cache, u, dg, dhp, dw);

    std::vector<ParamView> params{{g.d.data(), dg.d.data(), g.d.size()},
                                  {hp.d.data(), dhp.d.data(), hp.d.size()}};
    const std::pair<SparseConvWeights<double>*, SparseConvWeights<double>*> gates[] = {
        {&w.w_z, &dw.w_z}, {&w.w_r, &dw.w_r}, {&w.w_h, &dw.w_h}};
    for (auto [cw, dcw] : gates) {
        params.push_back({cw->kernel.data(), dcw->kernel.data(), cw->kernel.size()});
        params.push_back({cw->bias.data(), dcw->bias.data(), cw->bias.size()});
    }
    return sweep(objective, params, h);
}

double check_mlp(uint64_t seed, double h) {
    std::mt19937_64 rng(seed);
    const int rows = 8, in_dim = 8, hidden = 8;
    MlpWeights<double> w;
    w.layers.push_back({in_dim, hidden, std::vector<double>(size_t(in_dim) * hidden),
                        std::vector<double>(hidden)});
    w.layers.push_back(
        {hidden, 2, std::vector<double>(size_t(hidden) * 2), std::vector<double>(2)});
    for (auto& L : w.layers) {
        fill_uniform(rng, L.weight, 0.5);
        fill_uniform(rng, L.bias, 0.5);
    }
    Block<double> in = Block<double>::zeros(rows, in_dim);
    fill_uniform(rng, in.d, 1.0);
    Block<double> u = Block<double>::zeros(rows, 2);
    fill_uniform(rng, u.d, 1.0);

    auto objective = [&] {
        Block<double> out;
        mlp_forward_batch(in, w, out);
        return dot(out, u);
    };

    MlpCache<double> cache;
    Block<double> out;
    mlp_forward_batch(in, w, out, &cache);
    Block<double> din;
    MlpWeights<double> dw;
    mlp_backward_batch(w, cache, u, din, dw);

    std::vector<ParamView> params{{in.d.data(), din.d.data(), in.d.size()}};
    for (size_t l = 0; l < w.layers.size(); ++l) {
        params.push_back({w.layers[l].weight.data(), dw.layers[l].weight.data(),
                          w.layers[l].weight.size()});
        params.push_back(
            {w.layers[l].bias.data(), dw.layers[l].bias.data(), w.layers[l].bias.size()});
    }
    return sweep(objective, params, h);
}

double check_occ_loss(uint64_t seed, double h) {
    std::mt19937_64 rng(seed);
    const int n = 32;
    std::vector<double> pred(n), gt(n), dpred(n);
    std::uniform_real_distribution<double> pd(0.05, 0.95);
    std::bernoulli_distribution gd(0.5);
    for (int i = 0; i < n; ++i) {
        pred[i] = pd(rng);
        gt[i] = gd(rng) ? 1.0 : 0.0;
    }
    auto objective = [&] {
        return occupancy_loss<double>(pred, std::span<const double>(gt));
    };
    occupancy_loss_backward<double>(pred, std::span<const double>(gt), 1.0, dpred);
    return sweep(objective, {{pred.data(), dpred.data(), pred.size()}}, h);
}

double check_sdf_loss(uint64_t seed, double h) {
    std::mt19937_64 rng(seed);
    const int n = 32;
    std::vector<double> pred(n), gt(n), dpred(n);
    std::vector<uint8_t> mask(n);
    std::uniform_real_distribution<double> xd(-1.0, 1.0);
    std::bernoulli_distribution md(0.7);
    for (int i = 0; i < n; ++i) {
        // keep clear of the |x|=0 kink and of pred==gt where |.| is not smooth
        do {
            pred[i] = xd(rng);
            gt[i] = xd(rng);
        } while (std::abs(pred[i]) < 1e-2 || std::abs(pred[i] - gt[i]) < 1e-2);
        mask[i] = md(rng) ? 1 : 0;
    }
    mask[0] = 1;
    auto objective = [&] {
        return sdf_loss<double>(pred, std::span<const double>(gt),
                                std::span<const uint8_t>(mask));
    };
    sdf_loss_backward<double>(pred, std::span<const double>(gt), std::span<const uint8_t>(mask),
                              1.0, dpred);
    return sweep(objective, {{pred.data(), dpred.data(), pred.size()}}, h);
}

}  // namespace

double grad_check(GradOp op, uint64_t seed, double h) {
    switch (op) {
        case GradOp::SparseConv: return check_conv(seed, h);
        case GradOp::Mlp: return check_mlp(seed, h);
        case GradOp::Gru: return check_gru(seed, h);
        case GradOp::OccupancyLoss: return check_occ_loss(seed, h);
        case GradOp::SdfLoss: return check_sdf_loss(seed, h);
    }
    fail("unknown grad-check op");
}

const char* grad_op_name(GradOp op) {
    switch (op) {
        case GradOp::SparseConv: return "sparse_conv3d";
        case GradOp::Mlp: return "mlp_forward";
        case GradOp::Gru: return "gru_cell";
        case GradOp::OccupancyLoss: return "occupancy_loss";
        case GradOp::SdfLoss: return "sdf_loss";
    }
    return "?";
}

}  // namespace increcon::nn
