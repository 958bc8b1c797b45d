#include "selftest_checks.hpp"

#include "increcon/meshing.hpp"
#include "increcon/nn/grad_check.hpp"
#include "increcon/nn/ops.hpp"

#include <cmath>
#include <random>

namespace increcon::selftest {

namespace {

// Brute-force dense 3-D convolution over a cube, restricted to occupied cells.
double conv_vs_dense_oracle(uint64_t seed, int side) {
    std::mt19937_64 rng(seed);
    const int cin = 3, cout = 2;
    std::bernoulli_distribution keep(0.5);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);

    std::vector<uint8_t> occ(size_t(side) * side * side);
    std::vector<float> dense(occ.size() * cin, 0.0f);
    SparseVoxelGrid<FeatureVec> grid(3, 0.04, Vec3::Zero());
    auto flat = [side](int i, int j, int k) { return (size_t(i) * side + j) * side + k; };
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            for (int k = 0; k < side; ++k) {
                if (!keep(rng)) continue;
                occ[flat(i, j, k)] = 1;
                FeatureVec f(cin);
                for (int c = 0; c < cin; ++c) {
                    f[c] = dist(rng);
                    dense[flat(i, j, k) * cin + c] = f[c];
                }
                grid.cells.emplace(VoxelCoord{i, j, k}, std::move(f));
            }
    if (grid.cells.empty()) return 0.0;

    auto w = nn::SparseConvWeights<float>::zeros(cin, cout);
    for (float& x : w.kernel) x = dist(rng);
    for (float& x : w.bias) x = dist(rng);

    const SparseVoxelGrid<FeatureVec> out = nn::sparse_conv3d(grid, w);

    double max_diff = 0.0;
    for (const auto& [c, feat] : out.cells) {
        for (int co = 0; co < cout; ++co) {
            double acc = w.bias[co];
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int dk = -1; dk <= 1; ++dk) {
                        const int ni = c.i + di, nj = c.j + dj, nk = c.k + dk;
                        if (ni < 0 || nj < 0 || nk < 0 || ni >= side || nj >= side || nk >= side)
                            continue;
                        if (!occ[flat(ni, nj, nk)]) continue;
                        const int o = ((di + 1) * 3 + (dj + 1)) * 3 + (dk + 1);
                        for (int ci = 0; ci < cin; ++ci)
                            acc += double(w.kernel[(size_t(o) * cin + ci) * cout + co]) *
                                   double(dense[flat(ni, nj, nk) * cin + ci]);
                    }
            max_diff = std::max(max_diff, std::abs(acc - double(feat[co])));
        }
    }
    return max_diff;
}

// Sphere TSDF sampled on the 4 cm lattice; returns (mean, max) radial error.
std::pair<double, double> sphere_mesh_error(double radius, double voxel, double lambda) {
    SparseVoxelGrid<TsdfVoxel> grid(3, voxel, Vec3::Constant(-radius - 4 * lambda));
    const int n = int(std::ceil(2.0 * (radius + 4 * lambda) / voxel));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const VoxelCoord c{i, j, k};
                const double sdf = grid.center(c).norm() - radius;
                grid.cells.emplace(c,
                                   TsdfVoxel{1.0f, float(std::clamp(sdf / lambda, -1.0, 1.0))});
            }
    const TriangleMesh mesh = marching_cubes(grid, 0.0, 0.5);
    if (mesh.vertices.empty()) return {1e9, 1e9};
    double sum = 0, mx = 0;
    for (const Vec3f& v : mesh.vertices) {
        const double err = std::abs(double(v.norm()) - radius);
        sum += err;
        mx = std::max(mx, err);
    }
    return {sum / double(mesh.vertices.size()), mx};
}

}  // namespace

std::vector<CheckResult> run_selftest() {
    std::vector<CheckResult> results;

    const std::pair<nn::GradOp, double> grad_ops[] = {
        {nn::GradOp::SparseConv, 1e-4}, {nn::GradOp::Mlp, 1e-4},
        {nn::GradOp::Gru, 1e-4},        {nn::GradOp::OccupancyLoss, 1e-4},
        {nn::GradOp::SdfLoss, 1e-4},
    };
    for (auto [op, bound] : grad_ops) {
        double worst = 0;
        for (uint64_t seed = 1; seed <= 5; ++seed)
            worst = std::max(worst, nn::grad_check(op, seed));
        results.push_back({std::string("grad_check.") + nn::grad_op_name(op), worst < bound,
                           worst, bound, "max relative error over 5 seeds"});
    }

    double worst_conv = 0;
    for (uint64_t seed = 1; seed <= 5; ++seed)
        worst_conv = std::max(worst_conv, conv_vs_dense_oracle(seed, 6));
    results.push_back({"sparse_conv.dense_oracle", worst_conv < 1e-6, worst_conv, 1e-6,
                       "max abs diff vs dense convolution, 6^3 instances"});

    const auto [mean_err, max_err] = sphere_mesh_error(0.5, 0.04, 0.12);
    results.push_back({"marching_cubes.sphere_mean", mean_err < 0.02, mean_err, 0.02,
                       "mean |radius error| (m)"});
    results.push_back(
        {"marching_cubes.sphere_max", max_err < 0.04, max_err, 0.04, "max |radius error| (m)"});

    return results;
}

}  // namespace increcon::selftest
