#include "increcon/features.hpp"

#include <algorithm>
#include <cmath>

namespace increcon::feat {

namespace {

FeatureMap avg_pool(const FeatureMap& in, int factor) {
    FeatureMap out;
    out.width = in.width / factor;
    out.height = in.height / factor;
    out.channels = in.channels;
    out.stride = in.stride * factor;
    out.data.assign(size_t(out.width) * out.height * out.channels, 0.0f);
    const float inv = 1.0f / float(factor * factor);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            float* dst = out.at(x, y);
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) {
                    const float* src = in.at(x * factor + dx, y * factor + dy);
                    for (int c = 0; c < in.channels; ++c) dst[c] += src[c];
                }
            for (int c = 0; c < in.channels; ++c) dst[c] *= inv;
        }
    }
    return out;
}

// 3x3 convolution with replicate padding (keeps constant inputs constant),
// followed by ReLU.
FeatureMap conv3x3_relu(const FeatureMap& in, const Conv2dWeights& w) {
    if (in.channels != w.cin) fail("stub conv channel mismatch");
    FeatureMap out;
    out.width = in.width;
    out.height = in.height;
    out.channels = w.cout;
    out.stride = in.stride;
    out.data.assign(size_t(out.width) * out.height * out.channels, 0.0f);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            float* dst = out.at(x, y);
            for (int c = 0; c < w.cout; ++c) dst[c] = w.bias[c];
            for (int ky = -1; ky <= 1; ++ky) {
                const int sy = std::clamp(y + ky, 0, in.height - 1);
                for (int kx = -1; kx <= 1; ++kx) {
                    const int sx = std::clamp(x + kx, 0, in.width - 1);
                    const float* src = in.at(sx, sy);
                    const float* k = w.kernel.data() +
                                     ((size_t(ky + 1) * 3 + (kx + 1)) * w.cin) * w.cout;
                    for (int ci = 0; ci < w.cin; ++ci)
                        for (int co = 0; co < w.cout; ++co)
                            dst[co] += k[size_t(ci) * w.cout + co] * src[ci];
                }
            }
            for (int c = 0; c < w.cout; ++c) dst[c] = std::max(0.0f, dst[c]);
        }
    }
    return out;
}

inline void bilinear_sample(const FeatureMap& map, double mx, double my, float* out) {
    // border-clamped bilinear lookup in map cells
    mx = std::clamp(mx, 0.0, double(map.width - 1));
    my = std::clamp(my, 0.0, double(map.height - 1));
    const int x0 = int(mx), y0 = int(my);
    const int x1 = std::min(x0 + 1, map.width - 1);
    const int y1 = std::min(y0 + 1, map.height - 1);
    const float fx = float(mx - x0), fy = float(my - y0);
    const float* p00 = map.at(x0, y0);
    const float* p10 = map.at(x1, y0);
    const float* p01 = map.at(x0, y1);
    const float* p11 = map.at(x1, y1);
    for (int c = 0; c < map.channels; ++c) {
        const float top = p00[c] + (p10[c] - p00[c]) * fx;
        const float bot = p01[c] + (p11[c] - p01[c]) * fx;
        out[c] = top + (bot - top) * fy;
    }
}

SparseVoxelGrid<FeatureVec> build_feature_volume_impl(
    const Fragment& fragment, const std::vector<FeaturePyramid>& pyramids, int level,
    const std::vector<VoxelCoord>& candidates, const LatticeSpec& lattice, double d_max,
    bool parallel) {
    if (pyramids.size() != fragment.frames.size())
        fail("build_feature_volume: one pyramid per frame required");
    const size_t n_views = fragment.frames.size();
    if (n_views == 0) fail("build_feature_volume: empty fragment");
    const int channels = pyramids[0].level(level).channels;

    SparseVoxelGrid<FeatureVec> out(lattice.level, lattice.voxel_size, lattice.origin);
    std::vector<FeatureVec> results(candidates.size());

    std::vector<Mat3> r_inv(n_views);
    for (size_t v = 0; v < n_views; ++v)
        r_inv[v] = fragment.frames[v].pose.rotation.transpose();

#pragma omp parallel for schedule(dynamic, 256) if (parallel)
    for (int64_t n = 0; n < int64_t(candidates.size()); ++n) {
        const Vec3 center = out.center(candidates[n]);
        FeatureVec acc(channels, 0.0f);
        std::vector<float> sample(channels);
        int count = 0;
        for (size_t v = 0; v < n_views; ++v) {
            const Frame& fr = fragment.frames[v];
            const Vec3 p_cam = r_inv[v] * (center - fr.pose.translation);
            const double z = p_cam.z();
            if (z <= 0 || z > d_max) continue;
            const Eigen::Vector2d px = fr.intrinsics.project(p_cam);
            if (!fr.intrinsics.in_image(px.x(), px.y())) continue;
            const FeatureMap& map = pyramids[v].level(level);
            // align pixel centers with feature-map cell centers
            const double mx = (px.x() + 0.5) / map.stride - 0.5;
            const double my = (px.y() + 0.5) / map.stride - 0.5;
            bilinear_sample(map, mx, my, sample.data());
            for (int c = 0; c < channels; ++c) acc[c] += sample[c];
            ++count;
        }
        if (count == 0) continue;
        const float inv = 1.0f / float(count);
        for (int c = 0; c < channels; ++c) acc[c] *= inv;
        acc.push_back(float(count));  // visibility weight channel
        results[n] = std::move(acc);
    }

    for (size_t n = 0; n < candidates.size(); ++n)
        if (!results[n].empty()) out.cells.emplace(candidates[n], std::move(results[n]));
    return out;
}

}  // namespace

FeaturePyramid extract_features(const ImageF& image, const ModelWeights& model) {
    const auto& strides = model.config.strides;
    FeatureMap input;
    input.width = image.width;
    input.height = image.height;
    input.channels = 1;
    input.stride = 1;
    input.data.assign(image.px.begin(), image.px.end());

    FeaturePyramid pyr;
    FeatureMap pooled = avg_pool(input, strides[2]);
    pyr.levels[2] = conv3x3_relu(pooled, model.stub[0]);  // level 3
    pooled = avg_pool(pyr.levels[2], strides[1] / strides[2]);
    pyr.levels[1] = conv3x3_relu(pooled, model.stub[1]);  // level 2
    pooled = avg_pool(pyr.levels[1], strides[0] / strides[1]);
    pyr.levels[0] = conv3x3_relu(pooled, model.stub[2]);  // level 1
    return pyr;
}

SparseVoxelGrid<FeatureVec> build_feature_volume(const Fragment& fragment,
                                                 const std::vector<FeaturePyramid>& pyramids,
                                                 int level,
                                                 const std::vector<VoxelCoord>& candidates,
                                                 const LatticeSpec& lattice, double d_max) {
    return build_feature_volume_impl(fragment, pyramids, level, candidates, lattice, d_max, true);
}

SparseVoxelGrid<FeatureVec> ref::build_feature_volume(
    const Fragment& fragment, const std::vector<FeaturePyramid>& pyramids, int level,
    const std::vector<VoxelCoord>& candidates, const LatticeSpec& lattice, double d_max) {
    return build_feature_volume_impl(fragment, pyramids, level, candidates, lattice, d_max, false);
}

}  // namespace increcon::feat
