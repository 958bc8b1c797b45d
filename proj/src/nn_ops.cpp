#include "increcon/nn/ops.hpp"

#include <cmath>

namespace increcon::nn {

namespace {
constexpr double kBceEps = 1e-7;

inline void offset_of(int o, int& di, int& dj, int& dk) {
    di = o / 9 - 1;
    dj = (o / 3) % 3 - 1;
    dk = o % 3 - 1;
}
}  // namespace

CoordMap CoordMap::build(std::vector<VoxelCoord> sorted_coords) {
    CoordMap map;
    map.coords = std::move(sorted_coords);
    map.index.reserve(map.coords.size());
    for (size_t r = 0; r < map.coords.size(); ++r) map.index.emplace(map.coords[r], int32_t(r));
    map.nbr.assign(map.coords.size() * 27, -1);

#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < int64_t(map.coords.size()); ++r) {
        const VoxelCoord c = map.coords[r];
        int32_t* row = map.nbr.data() + r * 27;
        for (int o = 0; o < 27; ++o) {
            int di, dj, dk;
            offset_of(o, di, dj, dk);
            auto it = map.index.find(c.offset(di, dj, dk));
            if (it != map.index.end()) row[o] = it->second;
        }
    }
    return map;
}

template <typename T>
void SparseConvWeights<T>::validate() const {
    if (kernel.size() != size_t(27) * cin * cout) fail("sparse conv kernel size mismatch");
    if (bias.size() != size_t(cout)) fail("sparse conv bias size mismatch");
}

template <typename T>
void GruWeights<T>::validate() const {
    w_z.validate();
    w_r.validate();
    w_h.validate();
    if (w_z.cin != w_r.cin || w_z.cin != w_h.cin || w_z.cout != w_r.cout ||
        w_z.cout != w_h.cout)
        fail("GRU gate convolutions must share channel counts");
}

template <typename T>
void MlpWeights<T>::validate() const {
    if (layers.empty()) fail("MLP has no layers");
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (L.weight.size() != size_t(L.in) * L.out || L.bias.size() != size_t(L.out))
            fail("MLP layer ", l, " weight/bias size mismatch");
        if (l + 1 < layers.size() && layers[l + 1].in != L.out)
            fail("MLP layer dimensions do not chain at layer ", l + 1);
    }
    if (layers.back().out != 2) fail("MLP final layer must emit 2 values (logit, raw sdf)");
}

// --- convolution ---

template <typename T>
void conv_forward(const CoordMap& map, const Block<T>& in, const SparseConvWeights<T>& w,
                  Block<T>& out) {
    w.validate();
    if (in.channels != w.cin)
        fail("sparse conv channel mismatch: input has ", in.channels, ", weights expect ", w.cin);
    if (in.rows != map.rows()) fail("sparse conv input rows do not match coordinate set");
    out = Block<T>::zeros(map.rows(), w.cout);

    // accumulate in double so the float path stays close to the dense oracle
#pragma omp parallel
    {
        std::vector<double> acc(w.cout);
#pragma omp for schedule(static)
        for (int64_t r = 0; r < int64_t(map.rows()); ++r) {
            for (int co = 0; co < w.cout; ++co) acc[co] = double(w.bias[co]);
            const int32_t* nbrs = map.neighbors(int(r));
            for (int o = 0; o < 27; ++o) {
                const int32_t n = nbrs[o];
                if (n < 0) continue;
                const T* in_row = in.row(n);
                const T* k = w.kernel.data() + size_t(o) * w.cin * w.cout;
                for (int ci = 0; ci < w.cin; ++ci) {
                    const T v = in_row[ci];
                    if (v == T(0)) continue;
                    const T* kc = k + size_t(ci) * w.cout;
                    for (int co = 0; co < w.cout; ++co) acc[co] += double(kc[co]) * double(v);
                }
            }
            T* out_row = out.row(int(r));
            for (int co = 0; co < w.cout; ++co) out_row[co] = T(acc[co]);
        }
    }
}

template <typename T>
void conv_backward_input(const CoordMap& map, const SparseConvWeights<T>& w,
                         const Block<T>& dout, Block<T>& din) {
    din = Block<T>::zeros(map.rows(), w.cin);
    // din[r] collects dout from mirrored offsets: nbr(r,o)=s <=> nbr(s,26-o)=r.
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < int64_t(map.rows()); ++r) {
        T* din_row = din.row(int(r));
        const int32_t* nbrs = map.neighbors(int(r));
        for (int o = 0; o < 27; ++o) {
            const int32_t n = nbrs[o];
            if (n < 0) continue;
            const T* dout_row = dout.row(n);
            const T* k = w.kernel.data() + size_t(26 - o) * w.cin * w.cout;
            for (int ci = 0; ci < w.cin; ++ci) {
                T acc = T(0);
                const T* kc = k + size_t(ci) * w.cout;
                for (int co = 0; co < w.cout; ++co) acc += kc[co] * dout_row[co];
                din_row[ci] += acc;
            }
        }
    }
}

template <typename T>
void conv_backward_params(const CoordMap& map, const Block<T>& in, const Block<T>& dout,
                          SparseConvWeights<T>& dw) {
    dw = SparseConvWeights<T>::zeros(in.channels, dout.channels);
    const int cin = in.channels, cout = dout.channels;
    // Fixed (offset, ci) tasks with serial row sums keep gradients independent
    // of the thread count.
#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < 27; ++o) {
        for (int ci = 0; ci < cin; ++ci) {
            T* dk = dw.kernel.data() + (size_t(o) * cin + ci) * cout;
            for (int r = 0; r < map.rows(); ++r) {
                const int32_t n = map.neighbors(r)[o];
                if (n < 0) continue;
                const T v = in.row(n)[ci];
                if (v == T(0)) continue;
                const T* dout_row = dout.row(r);
                for (int co = 0; co < cout; ++co) dk[co] += v * dout_row[co];
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
        T acc = T(0);
        for (int r = 0; r < map.rows(); ++r) acc += dout.row(r)[co];
        dw.bias[co] = acc;
    }
}

template <typename T>
void relu_forward(const Block<T>& in, Block<T>& out) {
    out = in;
    for (T& v : out.d) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward(const Block<T>& pre, const Block<T>& dout, Block<T>& din) {
    din = Block<T>::zeros(pre.rows, pre.channels);
    for (size_t i = 0; i < pre.d.size(); ++i) din.d[i] = pre.d[i] > T(0) ? dout.d[i] : T(0);
}

// --- GRU ---

namespace {

template <typename T>
Block<T> concat(const Block<T>& a, const Block<T>& b) {
    Block<T> out = Block<T>::zeros(a.rows, a.channels + b.channels);
    for (int r = 0; r < a.rows; ++r) {
        T* dst = out.row(r);
        const T* pa = a.row(r);
        const T* pb = b.row(r);
        for (int c = 0; c < a.channels; ++c) dst[c] = pa[c];
        for (int c = 0; c < b.channels; ++c) dst[a.channels + c] = pb[c];
    }
    return out;
}

template <typename T>
void sigmoid_inplace(Block<T>& b) {
    for (T& v : b.d) v = T(1) / (T(1) + std::exp(-v));
}
template <typename T>
void tanh_inplace(Block<T>& b) {
    for (T& v : b.d) v = std::tanh(v);
}

}  // namespace

template <typename T>
void gru_forward(const CoordMap& map, const Block<T>& g, const Block<T>& h_prev,
                 const GruWeights<T>& w, Block<T>& h_out, GruCache<T>* cache) {
    w.validate();
    const int ch = h_prev.channels, cg = g.channels;
    if (w.w_z.cin != ch + cg)
        fail("gru channel mismatch: gates expect cin ", w.w_z.cin, ", got hidden ", ch, " + geo ",
             cg);
    if (w.w_z.cout != ch) fail("gru channel mismatch: gate output ", w.w_z.cout, " != hidden ", ch);
    if (g.rows != map.rows() || h_prev.rows != map.rows())
        fail("gru blocks do not match coordinate set");

    GruCache<T> local;
    GruCache<T>& c = cache ? *cache : local;
    c.cat = concat(h_prev, g);
    conv_forward(map, c.cat, w.w_z, c.z);
    sigmoid_inplace(c.z);
    conv_forward(map, c.cat, w.w_r, c.r);
    sigmoid_inplace(c.r);

    Block<T> rh = Block<T>::zeros(map.rows(), ch);
    for (size_t i = 0; i < rh.d.size(); ++i)
        rh.d[i] = c.r.d[i] * h_prev.d[i];
    c.cat2 = concat(rh, g);
    conv_forward(map, c.cat2, w.w_h, c.htilde);
    tanh_inplace(c.htilde);

    h_out = Block<T>::zeros(map.rows(), ch);
    for (size_t i = 0; i < h_out.d.size(); ++i)
        h_out.d[i] = (T(1) - c.z.d[i]) * h_prev.d[i] + c.z.d[i] * c.htilde.d[i];
}

template <typename T>
void gru_backward(const CoordMap& map, const Block<T>& h_prev, const GruWeights<T>& w,
                  const GruCache<T>& c, const Block<T>& dh, Block<T>& dg, Block<T>& dh_prev,
                  GruWeights<T>& dw) {
    const int ch = h_prev.channels;
    const int cg = c.cat.channels - ch;
    const size_t nh = size_t(map.rows()) * ch;

    Block<T> dz = Block<T>::zeros(map.rows(), ch);
    Block<T> dhtilde = Block<T>::zeros(map.rows(), ch);
    dh_prev = Block<T>::zeros(map.rows(), ch);
    for (size_t i = 0; i < nh; ++i) {
        dhtilde.d[i] = dh.d[i] * c.z.d[i];
        dz.d[i] = dh.d[i] * (c.htilde.d[i] - h_prev.d[i]);
        dh_prev.d[i] = dh.d[i] * (T(1) - c.z.d[i]);
    }

    // tanh branch through W_h
    Block<T> da_h = Block<T>::zeros(map.rows(), ch);
    for (size_t i = 0; i < nh; ++i)
        da_h.d[i] = dhtilde.d[i] * (T(1) - c.htilde.d[i] * c.htilde.d[i]);
    Block<T> dcat2;
    conv_backward_input(map, w.w_h, da_h, dcat2);
    conv_backward_params(map, c.cat2, da_h, dw.w_h);

    dg = Block<T>::zeros(map.rows(), cg);
    Block<T> dr = Block<T>::zeros(map.rows(), ch);
    for (int r = 0; r < map.rows(); ++r) {
        const T* src = dcat2.row(r);
        T* drr = dr.row(r);
        T* dhp = dh_prev.row(r);
        const T* hp = h_prev.row(r);
        const T* rr = c.r.row(r);
        for (int i = 0; i < ch; ++i) {
            drr[i] = src[i] * hp[i];
            dhp[i] += src[i] * rr[i];
        }
        T* dgr = dg.row(r);
        for (int i = 0; i < cg; ++i) dgr[i] += src[ch + i];
    }

    // sigmoid branches through W_z and W_r
    Block<T> da_z = Block<T>::zeros(map.rows(), ch);
    Block<T> da_r = Block<T>::zeros(map.rows(), ch);
    for (size_t i = 0; i < nh; ++i) {
        da_z.d[i] = dz.d[i] * c.z.d[i] * (T(1) - c.z.d[i]);
        da_r.d[i] = dr.d[i] * c.r.d[i] * (T(1) - c.r.d[i]);
    }
    Block<T> dcat_z, dcat_r;
    conv_backward_input(map, w.w_z, da_z, dcat_z);
    conv_backward_params(map, c.cat, da_z, dw.w_z);
    conv_backward_input(map, w.w_r, da_r, dcat_r);
    conv_backward_params(map, c.cat, da_r, dw.w_r);

    for (int r = 0; r < map.rows(); ++r) {
        const T* sz = dcat_z.row(r);
        const T* sr = dcat_r.row(r);
        T* dhp = dh_prev.row(r);
        T* dgr = dg.row(r);
        for (int i = 0; i < ch; ++i) dhp[i] += sz[i] + sr[i];
        for (int i = 0; i < cg; ++i) dgr[i] += sz[ch + i] + sr[ch + i];
    }
}

// --- MLP ---

template <typename T>
void mlp_forward_batch(const Block<T>& in, const MlpWeights<T>& w, Block<T>& out,
                       MlpCache<T>* cache) {
    w.validate();
    if (in.channels != w.layers.front().in)
        fail("mlp dimension mismatch: input has ", in.channels, " features, expected ",
             w.layers.front().in);

    MlpCache<T> local;
    MlpCache<T>& c = cache ? *cache : local;
    c.pre.resize(w.layers.size());
    c.act.resize(w.layers.size());
    c.act[0] = in;

    for (size_t l = 0; l < w.layers.size(); ++l) {
        const auto& L = w.layers[l];
        Block<T>& pre = c.pre[l];
        pre = Block<T>::zeros(in.rows, L.out);
        const Block<T>& x = c.act[l];
#pragma omp parallel for schedule(static) if (in.rows > 256)
        for (int64_t r = 0; r < int64_t(in.rows); ++r) {
            const T* xr = x.row(int(r));
            T* pr = pre.row(int(r));
            for (int j = 0; j < L.out; ++j) pr[j] = L.bias[j];
            for (int i = 0; i < L.in; ++i) {
                const T v = xr[i];
                if (v == T(0)) continue;
                const T* wr = L.weight.data() + size_t(i) * L.out;
                for (int j = 0; j < L.out; ++j) pr[j] += wr[j] * v;
            }
        }
        if (l + 1 < w.layers.size()) relu_forward(pre, c.act[l + 1]);
    }

    out = Block<T>::zeros(in.rows, 2);
    const Block<T>& last = c.pre.back();
    for (int r = 0; r < in.rows; ++r) {
        out.row(r)[0] = T(1) / (T(1) + std::exp(-last.row(r)[0]));
        out.row(r)[1] = std::tanh(last.row(r)[1]);
    }
    if (cache) c.out = out;
}

template <typename T>
void mlp_backward_batch(const MlpWeights<T>& w, const MlpCache<T>& c, const Block<T>& dout,
                        Block<T>& din, MlpWeights<T>& dw) {
    const int rows = dout.rows;
    dw.layers.resize(w.layers.size());

    Block<T> dpre = Block<T>::zeros(rows, 2);
    for (int r = 0; r < rows; ++r) {
        const T o = c.out.row(r)[0];
        const T x = c.out.row(r)[1];
        dpre.row(r)[0] = dout.row(r)[0] * o * (T(1) - o);
        dpre.row(r)[1] = dout.row(r)[1] * (T(1) - x * x);
    }

    for (int l = int(w.layers.size()) - 1; l >= 0; --l) {
        const auto& L = w.layers[l];
        auto& dL = dw.layers[l];
        dL.in = L.in;
        dL.out = L.out;
        dL.weight.assign(L.weight.size(), T(0));
        dL.bias.assign(L.bias.size(), T(0));

        const Block<T>& x = c.act[l];
#pragma omp parallel for schedule(static) if (L.in > 16)
        for (int i = 0; i < L.in; ++i) {
            T* dwr = dL.weight.data() + size_t(i) * L.out;
            for (int r = 0; r < rows; ++r) {
                const T v = x.row(r)[i];
                if (v == T(0)) continue;
                const T* dp = dpre.row(r);
                for (int j = 0; j < L.out; ++j) dwr[j] += v * dp[j];
            }
        }
        for (int r = 0; r < rows; ++r)
            for (int j = 0; j < L.out; ++j) dL.bias[j] += dpre.row(r)[j];

        Block<T> dx = Block<T>::zeros(rows, L.in);
#pragma omp parallel for schedule(static) if (rows > 256)
        for (int64_t r = 0; r < int64_t(rows); ++r) {
            const T* dp = dpre.row(int(r));
            T* dxr = dx.row(int(r));
            for (int i = 0; i < L.in; ++i) {
                const T* wr = L.weight.data() + size_t(i) * L.out;
                T acc = T(0);
                for (int j = 0; j < L.out; ++j) acc += wr[j] * dp[j];
                dxr[i] = acc;
            }
        }
        if (l > 0) {
            relu_backward(c.pre[l - 1], dx, dpre);
        } else {
            din = std::move(dx);
        }
    }
}

// --- losses ---

template <typename T>
double occupancy_loss(std::span<const T> pred_o, std::span<const T> gt_o) {
    if (pred_o.size() != gt_o.size()) fail("occupancy_loss: voxel-set size mismatch");
    if (pred_o.empty()) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < pred_o.size(); ++i) {
        const double p = std::clamp(double(pred_o[i]), kBceEps, 1.0 - kBceEps);
        const double g = double(gt_o[i]);
        sum += -(g * std::log(p) + (1.0 - g) * std::log(1.0 - p));
    }
    return sum / double(pred_o.size());
}

template <typename T>
void occupancy_loss_backward(std::span<const T> pred_o, std::span<const T> gt_o, T upstream,
                             std::span<T> dpred) {
    if (pred_o.size() != gt_o.size() || dpred.size() != pred_o.size())
        fail("occupancy_loss_backward: size mismatch");
    const T scale = upstream / T(pred_o.size());
    for (size_t i = 0; i < pred_o.size(); ++i) {
        if (pred_o[i] <= T(kBceEps) || pred_o[i] >= T(1) - T(kBceEps)) {
            dpred[i] = T(0);  // clamped region
            continue;
        }
        dpred[i] = scale * (-gt_o[i] / pred_o[i] + (T(1) - gt_o[i]) / (T(1) - pred_o[i]));
    }
}

template <typename T>
double sdf_loss(std::span<const T> pred_x, std::span<const T> gt_x,
                std::span<const uint8_t> gt_occupied) {
    if (pred_x.size() != gt_x.size() || gt_occupied.size() != pred_x.size())
        fail("sdf_loss: voxel-set size mismatch");
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < pred_x.size(); ++i) {
        if (!gt_occupied[i]) continue;
        sum += std::abs(log_transform(double(pred_x[i])) - log_transform(double(gt_x[i])));
        ++n;
    }
    return n == 0 ? 0.0 : sum / double(n);
}

template <typename T>
void sdf_loss_backward(std::span<const T> pred_x, std::span<const T> gt_x,
                       std::span<const uint8_t> gt_occupied, T upstream, std::span<T> dpred) {
    if (pred_x.size() != gt_x.size() || gt_occupied.size() != pred_x.size() ||
        dpred.size() != pred_x.size())
        fail("sdf_loss_backward: size mismatch");
    size_t n = 0;
    for (size_t i = 0; i < pred_x.size(); ++i) n += gt_occupied[i] ? 1 : 0;
    for (size_t i = 0; i < pred_x.size(); ++i) {
        dpred[i] = T(0);
        if (!gt_occupied[i] || n == 0) continue;
        const T diff = log_transform(pred_x[i]) - log_transform(gt_x[i]);
        const T sgn = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
        dpred[i] = upstream * sgn / ((T(1) + std::abs(pred_x[i])) * T(n));
    }
}

// --- grid wrappers ---

Block<float> grid_to_block(const SparseVoxelGrid<FeatureVec>& grid, const CoordMap& map) {
    int channels = -1;
    for (const auto& [c, f] : grid.cells) {
        if (channels < 0) channels = int(f.size());
        else if (int(f.size()) != channels) fail("feature grid has inconsistent channel counts");
    }
    if (channels < 0) channels = 0;
    Block<float> block = Block<float>::zeros(map.rows(), channels);
    for (int r = 0; r < map.rows(); ++r) {
        auto it = grid.cells.find(map.coords[r]);
        if (it == grid.cells.end()) continue;
        std::copy(it->second.begin(), it->second.end(), block.row(r));
    }
    return block;
}

SparseVoxelGrid<FeatureVec> block_to_grid(const Block<float>& block, const CoordMap& map,
                                          int level, double voxel_size, const Vec3& origin) {
    SparseVoxelGrid<FeatureVec> grid(level, voxel_size, origin);
    grid.cells.reserve(map.rows());
    for (int r = 0; r < map.rows(); ++r)
        grid.cells.emplace(map.coords[r],
                           FeatureVec(block.row(r), block.row(r) + block.channels));
    return grid;
}

SparseVoxelGrid<FeatureVec> sparse_conv3d(const SparseVoxelGrid<FeatureVec>& input,
                                          const SparseConvWeights<float>& w) {
    const CoordMap map = CoordMap::build(input.sorted_coords());
    const Block<float> in = grid_to_block(input, map);
    if (!input.cells.empty() && in.channels != w.cin)
        fail("sparse_conv3d channel mismatch: input has ", in.channels, ", weights expect ",
             w.cin);
    Block<float> out;
    Block<float> in_fixed = in;
    if (input.cells.empty()) in_fixed.channels = w.cin;
    conv_forward(map, in_fixed, w, out);
    return block_to_grid(out, map, input.level, input.voxel_size, input.origin);
}

SparseVoxelGrid<FeatureVec> ref::sparse_conv3d(const SparseVoxelGrid<FeatureVec>& input,
                                               const SparseConvWeights<float>& w) {
    w.validate();
    SparseVoxelGrid<FeatureVec> out(input.level, input.voxel_size, input.origin);
    for (const auto& [c, feat] : input.cells) {
        if (int(feat.size()) != w.cin)
            fail("sparse_conv3d channel mismatch: input has ", feat.size(), ", weights expect ",
                 w.cin);
        std::vector<double> acc(w.bias.begin(), w.bias.end());
        for (int o = 0; o < 27; ++o) {
            int di, dj, dk;
            offset_of(o, di, dj, dk);
            auto it = input.cells.find(c.offset(di, dj, dk));
            if (it == input.cells.end()) continue;
            const float* k = w.kernel.data() + size_t(o) * w.cin * w.cout;
            for (int ci = 0; ci < w.cin; ++ci) {
                const float v = it->second[ci];
                if (v == 0.0f) continue;
                const float* kc = k + size_t(ci) * w.cout;
                for (int co = 0; co < w.cout; ++co) acc[co] += double(kc[co]) * double(v);
            }
        }
        FeatureVec out_feat(w.cout);
        for (int co = 0; co < w.cout; ++co) out_feat[co] = float(acc[co]);
        out.cells.emplace(c, std::move(out_feat));
    }
    return out;
}

SparseVoxelGrid<FeatureVec> gru_cell(const SparseVoxelGrid<FeatureVec>& g,
                                     const SparseVoxelGrid<FeatureVec>& h_prev,
                                     const GruWeights<float>& w) {
    w.validate();
    const int ch = w.w_z.cout;
    const CoordMap map = CoordMap::build(g.sorted_coords());
    const Block<float> gb = grid_to_block(g, map);

    Block<float> hb = Block<float>::zeros(map.rows(), ch);
    if (!h_prev.cells.empty()) {
        if (std::abs(h_prev.voxel_size - g.voxel_size) > 1e-9)
            fail("gru_cell: G and H_prev voxel sizes differ");
        const VoxelCoord off =
            detail::lattice_offset(h_prev.origin, g.origin, g.voxel_size);
        for (int r = 0; r < map.rows(); ++r) {
            const VoxelCoord c = map.coords[r];
            auto it = h_prev.cells.find({c.i + off.i, c.j + off.j, c.k + off.k});
            if (it == h_prev.cells.end()) continue;  // never-seen voxels start at zero
            if (int(it->second.size()) != ch) fail("gru_cell: hidden channel mismatch");
            std::copy(it->second.begin(), it->second.end(), hb.row(r));
        }
    }

    Block<float> gb_fixed = gb;
    if (g.cells.empty()) gb_fixed.channels = w.w_z.cin - ch;
    Block<float> h_out;
    gru_forward(map, gb_fixed, hb, w, h_out);
    return block_to_grid(h_out, map, g.level, g.voxel_size, g.origin);
}

TsdfVoxel mlp_forward(std::span<const float> features, const MlpWeights<float>& w) {
    Block<float> in{1, int(features.size()), std::vector<float>(features.begin(), features.end())};
    Block<float> out;
    mlp_forward_batch(in, w, out);
    return {out.d[0], out.d[1]};
}

// explicit instantiations: float for the pipeline, double for grad checks
#define INSTANTIATE(T)                                                                      \
    template struct SparseConvWeights<T>;                                                   \
    template struct GruWeights<T>;                                                          \
    template struct MlpWeights<T>;                                                          \
    template void conv_forward<T>(const CoordMap&, const Block<T>&,                         \
                                  const SparseConvWeights<T>&, Block<T>&);                  \
    template void conv_backward_input<T>(const CoordMap&, const SparseConvWeights<T>&,      \
                                         const Block<T>&, Block<T>&);                       \
    template void conv_backward_params<T>(const CoordMap&, const Block<T>&, const Block<T>&, \
                                          SparseConvWeights<T>&);                           \
    template void relu_forward<T>(const Block<T>&, Block<T>&);                              \
    template void relu_backward<T>(const Block<T>&, const Block<T>&, Block<T>&);            \
    template void gru_forward<T>(const CoordMap&, const Block<T>&, const Block<T>&,         \
                                 const GruWeights<T>&, Block<T>&, GruCache<T>*);            \
    template void gru_backward<T>(const CoordMap&, const Block<T>&, const GruWeights<T>&,   \
                                  const GruCache<T>&, const Block<T>&, Block<T>&,           \
                                  Block<T>&, GruWeights<T>&);                               \
    template void mlp_forward_batch<T>(const Block<T>&, const MlpWeights<T>&, Block<T>&,    \
                                       MlpCache<T>*);                                       \
    template void mlp_backward_batch<T>(const MlpWeights<T>&, const MlpCache<T>&,           \
                                        const Block<T>&, Block<T>&, MlpWeights<T>&);        \
    template double occupancy_loss<T>(std::span<const T>, std::span<const T>);              \
    template void occupancy_loss_backward<T>(std::span<const T>, std::span<const T>, T,     \
                                             std::span<T>);                                 \
    template double sdf_loss<T>(std::span<const T>, std::span<const T>,                     \
                                std::span<const uint8_t>);                                  \
    template void sdf_loss_backward<T>(std::span<const T>, std::span<const T>,              \
                                       std::span<const uint8_t>, T, std::span<T>);

INSTANTIATE(float)
INSTANTIATE(double)
#undef INSTANTIATE

}  // namespace increcon::nn
