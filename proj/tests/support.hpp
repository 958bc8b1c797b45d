#pragma once

// Shared test fixtures and independent oracles. Oracles here are deliberately
// written against dense arrays / brute force, not the library's sparse
// engine.

#include "increcon/geometry.hpp"
#include "increcon/nn/ops.hpp"
#include "increcon/synth.hpp"
#include "increcon/voxel_grid.hpp"

#include <random>

namespace testsupport {

using namespace increcon;

inline Intrinsics test_intrinsics(int w = 320, int h = 240, double fov_deg = 60.0) {
    Intrinsics intr;
    intr.width = w;
    intr.height = h;
    intr.fx = intr.fy = (w * 0.5) / std::tan(deg_to_rad(fov_deg) * 0.5);
    intr.cx = w * 0.5;
    intr.cy = h * 0.5;
    return intr;
}

inline Pose pose_rz(double deg, const Vec3& t = Vec3::Zero()) {
    const double a = deg_to_rad(deg);
    Mat3 r;
    r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return {r, t};
}

inline Pose random_pose(std::mt19937_64& rng, double t_scale = 1.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return {q.toRotationMatrix(), Vec3(n(rng), n(rng), n(rng)) * t_scale};
}

inline SparseVoxelGrid<FeatureVec> random_feature_grid(int side, int channels, uint64_t seed,
                                                       double density = 0.5) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(density);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    SparseVoxelGrid<FeatureVec> grid(3, 0.04, Vec3::Zero());
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            for (int k = 0; k < side; ++k) {
                if (!keep(rng)) continue;
                FeatureVec f(channels);
                for (float& x : f) x = dist(rng);
                grid.cells.emplace(VoxelCoord{i, j, k}, std::move(f));
            }
    if (grid.cells.empty()) grid.cells.emplace(VoxelCoord{0, 0, 0}, FeatureVec(channels, 0.5f));
    return grid;
}

inline nn::SparseConvWeights<float> random_conv_weights(int cin, int cout, uint64_t seed,
                                                        float scale = 0.5f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-scale, scale);
    auto w = nn::SparseConvWeights<float>::zeros(cin, cout);
    for (float& x : w.kernel) x = dist(rng);
    for (float& x : w.bias) x = dist(rng);
    return w;
}

// Dense 3-D convolution oracle: materializes the grid into a dense cube and
// convolves with plain nested loops, restricted to occupied sites.
inline SparseVoxelGrid<FeatureVec> dense_conv_oracle(const SparseVoxelGrid<FeatureVec>& input,
                                                     const nn::SparseConvWeights<float>& w) {
    VoxelCoord lo{INT32_MAX, INT32_MAX, INT32_MAX}, hi{INT32_MIN, INT32_MIN, INT32_MIN};
    for (const auto& [c, f] : input.cells) {
        lo = {std::min(lo.i, c.i), std::min(lo.j, c.j), std::min(lo.k, c.k)};
        hi = {std::max(hi.i, c.i), std::max(hi.j, c.j), std::max(hi.k, c.k)};
    }
    const int ni = hi.i - lo.i + 3, nj = hi.j - lo.j + 3, nk = hi.k - lo.k + 3;  // 1-cell pad
    auto flat = [&](int i, int j, int k) { return (size_t(i) * nj + j) * nk + k; };
    std::vector<uint8_t> occ(size_t(ni) * nj * nk, 0);
    std::vector<double> dense(size_t(ni) * nj * nk * w.cin, 0.0);
    for (const auto& [c, f] : input.cells) {
        const size_t cell = flat(c.i - lo.i + 1, c.j - lo.j + 1, c.k - lo.k + 1);
        occ[cell] = 1;
        for (int ci = 0; ci < w.cin; ++ci) dense[cell * w.cin + ci] = f[ci];
    }

    SparseVoxelGrid<FeatureVec> out(input.level, input.voxel_size, input.origin);
    for (const auto& [c, f] : input.cells) {
        const int bi = c.i - lo.i + 1, bj = c.j - lo.j + 1, bk = c.k - lo.k + 1;
        FeatureVec result(w.cout);
        for (int co = 0; co < w.cout; ++co) {
            double acc = w.bias[co];
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int dk = -1; dk <= 1; ++dk) {
                        const size_t cell = flat(bi + di, bj + dj, bk + dk);
                        if (!occ[cell]) continue;
                        const int o = ((di + 1) * 3 + (dj + 1)) * 3 + (dk + 1);
                        for (int ci = 0; ci < w.cin; ++ci)
                            acc += double(w.kernel[(size_t(o) * w.cin + ci) * w.cout + co]) *
                                   dense[cell * w.cin + ci];
                    }
            result[co] = float(acc);
        }
        out.cells.emplace(c, std::move(result));
    }
    return out;
}

// Straight-line reimplementation of the four GRU update equations with its
// own per-voxel hash-lookup convolution; independent of the nn engine.
inline SparseVoxelGrid<FeatureVec> naive_gru(const SparseVoxelGrid<FeatureVec>& g,
                                             const SparseVoxelGrid<FeatureVec>& h_prev,
                                             const nn::GruWeights<float>& w) {
    const int ch = w.w_z.cout;
    const int cg = w.w_z.cin - ch;

    // concatenated [h_prev, g] field over g's coordinates (missing hidden = 0)
    SparseVoxelGrid<FeatureVec> cat(g.level, g.voxel_size, g.origin);
    for (const auto& [c, gf] : g.cells) {
        FeatureVec v(ch + cg, 0.0f);
        auto it = h_prev.cells.find(c);
        if (it != h_prev.cells.end())
            std::copy(it->second.begin(), it->second.end(), v.begin());
        std::copy(gf.begin(), gf.end(), v.begin() + ch);
        cat.cells.emplace(c, std::move(v));
    }

    auto conv_at = [](const SparseVoxelGrid<FeatureVec>& field,
                      const nn::SparseConvWeights<float>& cw, const VoxelCoord& at) {
        std::vector<double> acc(cw.bias.begin(), cw.bias.end());
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    auto it = field.cells.find(at.offset(di, dj, dk));
                    if (it == field.cells.end()) continue;
                    const int o = ((di + 1) * 3 + (dj + 1)) * 3 + (dk + 1);
                    for (int ci = 0; ci < cw.cin; ++ci)
                        for (int co = 0; co < cw.cout; ++co)
                            acc[co] += double(cw.kernel[(size_t(o) * cw.cin + ci) * cw.cout + co]) *
                                       double(it->second[ci]);
                }
        FeatureVec out(cw.cout);
        for (int co = 0; co < cw.cout; ++co) out[co] = float(acc[co]);
        return out;
    };

    // z and r gates over the whole coordinate set first
    SparseVoxelGrid<FeatureVec> cat2(g.level, g.voxel_size, g.origin);
    std::unordered_map<VoxelCoord, FeatureVec, VoxelCoordHash> z_map;
    for (const auto& [c, v] : cat.cells) {
        FeatureVec z = conv_at(cat, w.w_z, c);
        FeatureVec r = conv_at(cat, w.w_r, c);
        for (float& x : z) x = 1.0f / (1.0f + std::exp(-x));
        for (float& x : r) x = 1.0f / (1.0f + std::exp(-x));
        FeatureVec rv(ch + cg);
        for (int i = 0; i < ch; ++i) rv[i] = r[i] * v[i];  // r . h_prev
        for (int i = 0; i < cg; ++i) rv[ch + i] = v[ch + i];
        cat2.cells.emplace(c, std::move(rv));
        z_map.emplace(c, std::move(z));
    }

    SparseVoxelGrid<FeatureVec> h_out(g.level, g.voxel_size, g.origin);
    for (const auto& [c, v] : cat.cells) {
        FeatureVec htilde = conv_at(cat2, w.w_h, c);
        for (float& x : htilde) x = std::tanh(x);
        const FeatureVec& z = z_map.at(c);
        FeatureVec h(ch);
        for (int i = 0; i < ch; ++i)
            h[i] = (1.0f - z[i]) * v[i] + z[i] * htilde[i];  // v[0..ch) = h_prev
        h_out.cells.emplace(c, std::move(h));
    }
    return h_out;
}

inline double max_grid_diff(const SparseVoxelGrid<FeatureVec>& a,
                            const SparseVoxelGrid<FeatureVec>& b) {
    if (a.cells.size() != b.cells.size()) return 1e30;
    double mx = 0;
    for (const auto& [c, f] : a.cells) {
        auto it = b.cells.find(c);
        if (it == b.cells.end() || it->second.size() != f.size()) return 1e30;
        for (size_t i = 0; i < f.size(); ++i)
            mx = std::max(mx, std::abs(double(f[i]) - double(it->second[i])));
    }
    return mx;
}

inline synth::SceneSpec sphere_scene(double radius = 0.5) {
    synth::SceneSpec spec;
    spec.primitives.push_back(synth::SpherePrim{Vec3::Zero(), radius});
    spec.bounds_min = Vec3::Constant(-radius - 0.3);
    spec.bounds_max = Vec3::Constant(radius + 0.3);
    return spec;
}

// Closed room (four wall slabs + floor + ceiling) with a sphere and a box
// inside; bounds clip GT meshing to the interior.
inline synth::SceneSpec room_scene(double half_xy = 1.6, double half_z = 1.1,
                                   double wall = 0.2) {
    synth::SceneSpec spec;
    spec.primitives.push_back(synth::SlabPrim{{1, 0, 0}, half_xy, half_xy + wall});
    spec.primitives.push_back(synth::SlabPrim{{-1, 0, 0}, half_xy, half_xy + wall});
    spec.primitives.push_back(synth::SlabPrim{{0, 1, 0}, half_xy, half_xy + wall});
    spec.primitives.push_back(synth::SlabPrim{{0, -1, 0}, half_xy, half_xy + wall});
    spec.primitives.push_back(synth::SlabPrim{{0, 0, 1}, half_z, half_z + wall});
    spec.primitives.push_back(synth::SlabPrim{{0, 0, -1}, half_z, half_z + wall});
    spec.primitives.push_back(synth::SpherePrim{{0.55, 0.2, -half_z + 0.45}, 0.35});
    spec.primitives.push_back(synth::BoxPrim{{-0.7, -0.5, -half_z + 0.3}, {0.3, 0.25, 0.3}});
    spec.bounds_min = Vec3(-half_xy - 0.02, -half_xy - 0.02, -half_z - 0.02);
    spec.bounds_max = Vec3(half_xy + 0.02, half_xy + 0.02, half_z + 0.02);
    return spec;
}

inline std::vector<Frame> render_frames(const synth::SceneSpec& spec,
                                        const std::vector<Pose>& poses, const Intrinsics& intr,
                                        double d_max = 3.0) {
    std::vector<Frame> frames;
    frames.reserve(poses.size());
    for (size_t i = 0; i < poses.size(); ++i) {
        Frame f;
        f.index = int(i);
        f.pose = poses[i];
        f.intrinsics = intr;
        f.image = synth::render_gt_depth(spec, poses[i], intr, d_max);
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace testsupport
