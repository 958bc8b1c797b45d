#include "increcon/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

namespace increcon::pipe {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline int32_t floor_half(int32_t v) { return v >= 0 ? v / 2 : (v - 1) / 2; }

VoxelCoord hidden_offset(const feat::LatticeSpec& lat, const SparseVoxelGrid<FeatureVec>& hidden) {
    return detail::lattice_offset(hidden.origin, lat.origin, lat.voxel_size);
}

// Gathers the per-level hidden state (and Average-fusion counts) at the
// current coordinate set; never-seen voxels are zero.
void gather_hidden(const SparseVoxelGrid<FeatureVec>& hidden, const nn::CoordMap& map,
                   const VoxelCoord& off, int ch, bool with_count, nn::Block<float>& h_out,
                   std::vector<float>* counts) {
    h_out = nn::Block<float>::zeros(map.rows(), ch);
    if (counts) counts->assign(map.rows(), 0.0f);
    if (hidden.cells.empty()) return;
    for (int r = 0; r < map.rows(); ++r) {
        const VoxelCoord c = map.coords[r];
        auto it = hidden.cells.find({c.i + off.i, c.j + off.j, c.k + off.k});
        if (it == hidden.cells.end()) continue;
        const FeatureVec& v = it->second;
        if (int(v.size()) != ch + (with_count ? 1 : 0)) fail("hidden state channel mismatch");
        std::copy(v.begin(), v.begin() + ch, h_out.row(r));
        if (counts) (*counts)[r] = v[ch];
    }
}

void scatter_hidden(SparseVoxelGrid<FeatureVec>& hidden, const nn::CoordMap& map,
                    const VoxelCoord& off, const nn::Block<float>& h,
                    const std::vector<float>* counts, const std::vector<int>& rows) {
    for (int r : rows) {
        const VoxelCoord c = map.coords[r];
        FeatureVec v(h.row(r), h.row(r) + h.channels);
        if (counts) v.push_back((*counts)[r]);
        hidden.cells[{c.i + off.i, c.j + off.j, c.k + off.k}] = std::move(v);
    }
}

std::vector<int> all_rows(int n) {
    std::vector<int> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

// Forward pass of the geometric conv stack (ReLU between layers, linear last).
struct ConvStackCache {
    std::vector<nn::Block<float>> act;  // inputs to each layer
    std::vector<nn::Block<float>> pre;  // conv outputs before activation
};

nn::Block<float> conv_stack_forward(const nn::CoordMap& map, const nn::Block<float>& in,
                                    const std::vector<nn::SparseConvWeights<float>>& convs,
                                    ConvStackCache* cache) {
    ConvStackCache local;
    ConvStackCache& c = cache ? *cache : local;
    c.act.resize(convs.size());
    c.pre.resize(convs.size());
    c.act[0] = in;
    for (size_t i = 0; i < convs.size(); ++i) {
        nn::conv_forward(map, c.act[i], convs[i], c.pre[i]);
        if (i + 1 < convs.size()) nn::relu_forward(c.pre[i], c.act[i + 1]);
    }
    return c.pre.back();
}

void conv_stack_backward(const nn::CoordMap& map,
                         const std::vector<nn::SparseConvWeights<float>>& convs,
                         const ConvStackCache& cache, const nn::Block<float>& dout,
                         std::vector<nn::SparseConvWeights<float>>& grads) {
    grads.resize(convs.size());
    nn::Block<float> delta = dout;
    for (int i = int(convs.size()) - 1; i >= 0; --i) {
        nn::conv_backward_params(map, cache.act[i], delta, grads[i]);
        if (i == 0) break;
        nn::Block<float> dact;
        nn::conv_backward_input(map, convs[i], delta, dact);
        nn::relu_backward(cache.pre[i - 1], dact, delta);
    }
}

}  // namespace

ReconState make_state(const PipelineConfig& cfg) {
    ReconState st;
    for (int l = 1; l <= 3; ++l)
        st.hidden[l - 1] = SparseVoxelGrid<FeatureVec>(l, cfg.level_size(l), Vec3::Zero());
    st.global_tsdf = SparseVoxelGrid<GlobalTsdfCell>(3, cfg.voxel_size, Vec3::Zero());
    return st;
}

feat::LatticeSpec fragment_lattice(const Fbv& fbv, int level, const PipelineConfig& cfg) {
    return {level, cfg.level_size(level), fbv.min_corner};
}

std::vector<VoxelCoord> dense_fbv_coords(const Fbv& fbv, int level, const PipelineConfig& cfg) {
    const double vs = cfg.level_size(level);
    const int n = int(std::llround(fbv.side_length / vs));
    std::vector<VoxelCoord> coords;
    coords.reserve(size_t(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) coords.push_back({i, j, k});
    return coords;
}

SparseVoxelGrid<TsdfVoxel> ground_truth_volume(const SdfFn& sdf, const Fbv& fbv, int level,
                                               const PipelineConfig& cfg) {
    const feat::LatticeSpec lat = fragment_lattice(fbv, level, cfg);
    SparseVoxelGrid<TsdfVoxel> gt(level, lat.voxel_size, lat.origin);
    const std::vector<VoxelCoord> coords = dense_fbv_coords(fbv, level, cfg);
    std::vector<TsdfVoxel> vals(coords.size());
#pragma omp parallel for schedule(static)
    for (int64_t n = 0; n < int64_t(coords.size()); ++n) {
        const double d = sdf(gt.center(coords[n]));
        vals[n].o = std::abs(d) < cfg.lambda ? 1.0f : 0.0f;
        vals[n].x = float(std::clamp(d / cfg.lambda, -1.0, 1.0));
    }
    gt.cells.reserve(coords.size());
    for (size_t n = 0; n < coords.size(); ++n) gt.cells.emplace(coords[n], vals[n]);
    return gt;
}

double occupancy_loss(std::span<const float> pred_o, std::span<const float> gt_o) {
    return double(nn::occupancy_loss(pred_o, gt_o));
}

double sdf_loss(std::span<const float> pred_x, std::span<const float> gt_x,
                std::span<const uint8_t> gt_occupied) {
    return double(nn::sdf_loss(pred_x, gt_x, gt_occupied));
}

void integrate_global(const SparseVoxelGrid<TsdfVoxel>& local, ReconState& state,
                      const PipelineConfig& cfg) {
    if (local.level != 3) fail("integrate_global: local volume must be level 3");
    auto& global = state.global_tsdf;
    if (std::abs(global.voxel_size - local.voxel_size) > 1e-9)
        fail("integrate_global: voxel size mismatch");
    const VoxelCoord off = detail::lattice_offset(global.origin, local.origin, local.voxel_size);
    const uint32_t t = state.fragment_count;
    for (const auto& [c, v] : local.cells) {
        GlobalTsdfCell& g = global.cells[{c.i + off.i, c.j + off.j, c.k + off.k}];
        if (cfg.fusion_method == FusionMethod::LinearTsdf) {
            g.x = (g.x * g.weight + v.x) / (g.weight + 1.0f);
            g.o = (g.o * g.weight + v.o) / (g.weight + 1.0f);
            g.weight = std::min(g.weight + 1.0f, cfg.w_max);
        } else {
            g.x = v.x;
            g.o = v.o;
            g.weight = 1.0f;
        }
        g.updated_at = t;
    }
}

SparseVoxelGrid<TsdfVoxel> reconstruct_fragment(const Fragment& fragment, ReconState& state,
                                                const ModelWeights& model,
                                                const PipelineConfig& cfg,
                                                FragmentTiming* timing) {
    const double t_start = now_ms();
    FragmentTiming local_timing;
    FragmentTiming& tm = timing ? *timing : local_timing;
    tm.key_frames = int(fragment.frames.size());

    auto empty_result = [&]() {
        state.fragment_count++;
        tm.total_ms += now_ms() - t_start;
        return SparseVoxelGrid<TsdfVoxel>(3, cfg.voxel_size, fragment.fbv.min_corner);
    };

    double t0 = now_ms();
    std::vector<feat::FeaturePyramid> pyramids;
    pyramids.reserve(fragment.frames.size());
    for (const Frame& f : fragment.frames)
        pyramids.push_back(feat::extract_features(f.image, model));
    tm.image_encode_ms += now_ms() - t0;

    std::vector<VoxelCoord> candidates = dense_fbv_coords(fragment.fbv, 1, cfg);
    SparseVoxelGrid<TsdfVoxel> prev_up;  // upsampled previous-level predictions
    SparseVoxelGrid<TsdfVoxel> result(3, cfg.voxel_size, fragment.fbv.min_corner);

    for (int l = 1; l <= 3; ++l) {
        const feat::LatticeSpec lat = fragment_lattice(fragment.fbv, l, cfg);

        t0 = now_ms();
        const SparseVoxelGrid<FeatureVec> fvol =
            feat::build_feature_volume(fragment, pyramids, l, candidates, lat, cfg.d_max);
        tm.unproj_ms[l - 1] += now_ms() - t0;
        if (fvol.cells.empty()) return empty_result();

        const nn::CoordMap map = nn::CoordMap::build(fvol.sorted_coords());
        nn::Block<float> in = nn::grid_to_block(fvol, map);
        if (l > 1) {
            // concatenate the upsampled (o,x) from the previous level
            nn::Block<float> with_prev = nn::Block<float>::zeros(map.rows(), in.channels + 2);
            for (int r = 0; r < map.rows(); ++r) {
                float* dst = with_prev.row(r);
                std::copy(in.row(r), in.row(r) + in.channels, dst);
                const TsdfVoxel& pv = prev_up.cells.at(map.coords[r]);
                dst[in.channels] = pv.o;
                dst[in.channels + 1] = pv.x;
            }
            in = std::move(with_prev);
        }

        t0 = now_ms();
        const nn::Block<float> geo =
            conv_stack_forward(map, in, model.level(l).geo_convs, nullptr);
        tm.sparse_conv_ms[l - 1] += now_ms() - t0;

        t0 = now_ms();
        const int ch = model.config.geo_channels[l - 1];
        const VoxelCoord hoff = hidden_offset(lat, state.hidden[l - 1]);
        nn::Block<float> fused;
        std::vector<float> counts;
        if (cfg.fusion_method == FusionMethod::Gru) {
            nn::Block<float> h_prev;
            gather_hidden(state.hidden[l - 1], map, hoff, ch, false, h_prev, nullptr);
            nn::gru_forward(map, geo, h_prev, model.level(l).gru, fused);
        } else if (cfg.fusion_method == FusionMethod::Average) {
            nn::Block<float> h_prev;
            gather_hidden(state.hidden[l - 1], map, hoff, ch, true, h_prev, &counts);
            fused = nn::Block<float>::zeros(map.rows(), ch);
            for (int r = 0; r < map.rows(); ++r) {
                const float cnt = counts[r];
                for (int c = 0; c < ch; ++c)
                    fused.row(r)[c] = (h_prev.row(r)[c] * cnt + geo.row(r)[c]) / (cnt + 1.0f);
                counts[r] = cnt + 1.0f;
            }
        } else {
            fused = geo;  // LinearTsdf: no feature fusion
        }

        nn::Block<float> out;
        nn::mlp_forward_batch(fused, model.level(l).mlp, out);

        std::vector<int> survivors;
        for (int r = 0; r < map.rows(); ++r)
            if (out.row(r)[0] >= float(cfg.theta)) survivors.push_back(r);

        if (cfg.fusion_method != FusionMethod::LinearTsdf) {
            const std::vector<int> domain =
                cfg.fusion_area == FusionArea::Fbv ? all_rows(map.rows()) : survivors;
            scatter_hidden(state.hidden[l - 1], map, hoff, fused,
                           cfg.fusion_method == FusionMethod::Average ? &counts : nullptr,
                           domain);
        }

        SparseVoxelGrid<TsdfVoxel> level_out(l, lat.voxel_size, lat.origin);
        for (int r : survivors)
            level_out.cells.emplace(map.coords[r], TsdfVoxel{out.row(r)[0], out.row(r)[1]});
        tm.gru_ms[l - 1] += now_ms() - t0;

        if (level_out.cells.empty()) return empty_result();

        if (l < 3) {
            prev_up = upsample2x(level_out);
            candidates = prev_up.sorted_coords();
        } else {
            result = std::move(level_out);
        }
    }

    integrate_global(result, state, cfg);
    state.fragment_count++;
    tm.total_ms += now_ms() - t_start;
    return result;
}

// --- toy training ---

namespace {

struct TrainLevel {
    feat::LatticeSpec lat;
    nn::CoordMap map;
    nn::Block<float> feat_block;        // C_l+1 channels, fixed across steps
    std::vector<int32_t> parent_row;    // row into the previous level's map (l>1)
    std::vector<float> gt_occ, gt_x;
    std::vector<uint8_t> gt_mask;
    std::vector<int> gt_survivors;      // rows with gt occupancy (training guidance)
};

struct TrainFragment {
    const Fragment* frag = nullptr;
    std::array<TrainLevel, 3> levels;
    int depth = 0;  // number of usable levels
};

struct LevelGrads {
    std::vector<nn::SparseConvWeights<float>> geo;
    nn::GruWeights<float> gru;
    nn::MlpWeights<float> mlp;
};

void add_scaled(std::vector<float>& dst, const std::vector<float>& src, float s) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] * s;
}

LevelGrads zero_grads_like(const LevelWeights& w) {
    LevelGrads g;
    for (const auto& cw : w.geo_convs)
        g.geo.push_back(nn::SparseConvWeights<float>::zeros(cw.cin, cw.cout));
    g.gru = {nn::SparseConvWeights<float>::zeros(w.gru.w_z.cin, w.gru.w_z.cout),
             nn::SparseConvWeights<float>::zeros(w.gru.w_r.cin, w.gru.w_r.cout),
             nn::SparseConvWeights<float>::zeros(w.gru.w_h.cin, w.gru.w_h.cout)};
    for (const auto& L : w.mlp.layers)
        g.mlp.layers.push_back({L.in, L.out, std::vector<float>(L.weight.size(), 0.0f),
                                std::vector<float>(L.bias.size(), 0.0f)});
    return g;
}

void sgd_step(LevelWeights& w, const LevelGrads& g, float lr) {
    for (size_t i = 0; i < w.geo_convs.size(); ++i) {
        add_scaled(w.geo_convs[i].kernel, g.geo[i].kernel, -lr);
        add_scaled(w.geo_convs[i].bias, g.geo[i].bias, -lr);
    }
    const std::pair<nn::SparseConvWeights<float>*, const nn::SparseConvWeights<float>*> gates[] =
        {{&w.gru.w_z, &g.gru.w_z}, {&w.gru.w_r, &g.gru.w_r}, {&w.gru.w_h, &g.gru.w_h}};
    for (auto [wp, gp] : gates) {
        add_scaled(wp->kernel, gp->kernel, -lr);
        add_scaled(wp->bias, gp->bias, -lr);
    }
    for (size_t j = 0; j < w.mlp.layers.size(); ++j) {
        add_scaled(w.mlp.layers[j].weight, g.mlp.layers[j].weight, -lr);
        add_scaled(w.mlp.layers[j].bias, g.mlp.layers[j].bias, -lr);
    }
}

TrainFragment prepare_fragment(const Fragment& frag, const SdfFn& sdf, const ModelWeights& model,
                               const PipelineConfig& cfg) {
    TrainFragment tf;
    tf.frag = &frag;
    std::vector<feat::FeaturePyramid> pyramids;
    for (const Frame& f : frag.frames) pyramids.push_back(feat::extract_features(f.image, model));

    std::vector<VoxelCoord> candidates = dense_fbv_coords(frag.fbv, 1, cfg);
    for (int l = 1; l <= 3; ++l) {
        TrainLevel& tl = tf.levels[l - 1];
        tl.lat = fragment_lattice(frag.fbv, l, cfg);
        const SparseVoxelGrid<FeatureVec> fvol =
            feat::build_feature_volume(frag, pyramids, l, candidates, tl.lat, cfg.d_max);
        if (fvol.cells.empty()) break;
        tl.map = nn::CoordMap::build(fvol.sorted_coords());
        tl.feat_block = nn::grid_to_block(fvol, tl.map);

        SparseVoxelGrid<TsdfVoxel> probe(l, tl.lat.voxel_size, tl.lat.origin);
        tl.gt_occ.resize(tl.map.rows());
        tl.gt_x.resize(tl.map.rows());
        tl.gt_mask.resize(tl.map.rows());
        for (int r = 0; r < tl.map.rows(); ++r) {
            const double d = sdf(probe.center(tl.map.coords[r]));
            const bool occ = std::abs(d) < cfg.lambda;
            tl.gt_occ[r] = occ ? 1.0f : 0.0f;
            tl.gt_x[r] = float(std::clamp(d / cfg.lambda, -1.0, 1.0));
            tl.gt_mask[r] = occ ? 1 : 0;
            if (occ) tl.gt_survivors.push_back(r);
        }
        if (l > 1) {
            const TrainLevel& prev = tf.levels[l - 2];
            tl.parent_row.resize(tl.map.rows());
            for (int r = 0; r < tl.map.rows(); ++r) {
                const VoxelCoord c = tl.map.coords[r];
                const VoxelCoord pc{floor_half(c.i), floor_half(c.j), floor_half(c.k)};
                auto it = prev.map.index.find(pc);
                tl.parent_row[r] = it == prev.map.index.end() ? -1 : it->second;
            }
        }
        tf.depth = l;
        if (tl.gt_survivors.empty()) break;
        // next level candidates: children of GT-occupied voxels
        SparseVoxelGrid<TsdfVoxel> surv(l, tl.lat.voxel_size, tl.lat.origin);
        for (int r : tl.gt_survivors) surv.cells.emplace(tl.map.coords[r], TsdfVoxel{1.0f, 0.0f});
        if (l < 3) candidates = upsample2x(surv).sorted_coords();
    }
    return tf;
}

}  // namespace

std::vector<double> train_toy(const std::vector<Fragment>& fragments, const SdfFn& sdf,
                              ModelWeights& model, const PipelineConfig& cfg, int steps,
                              double lr) {
    if (fragments.empty()) fail("train_toy: no fragments");
    std::vector<TrainFragment> prepared;
    for (const Fragment& f : fragments) {
        TrainFragment tf = prepare_fragment(f, sdf, model, cfg);
        if (tf.depth == 0) {
            std::cerr << "train_toy: fragment " << f.fragment_index
                      << " sees no voxels, skipping\n";
            continue;
        }
        prepared.push_back(std::move(tf));
    }
    if (prepared.empty()) fail("train_toy: no usable fragments");

    std::vector<double> history;
    history.reserve(steps);

    for (int step = 0; step < steps; ++step) {
        std::array<LevelGrads, 3> grads{zero_grads_like(model.levels[0]),
                                        zero_grads_like(model.levels[1]),
                                        zero_grads_like(model.levels[2])};
        double total_loss = 0.0;

        // fresh hidden state each step (weights moved since the last one)
        ReconState state = make_state(cfg);

        for (const TrainFragment& tf : prepared) {
            nn::Block<float> prev_out;  // previous level predictions (detached)
            for (int l = 1; l <= tf.depth; ++l) {
                const TrainLevel& tl = tf.levels[l - 1];
                const LevelWeights& lw = model.level(l);
                const int rows = tl.map.rows();
                const int ch = model.config.geo_channels[l - 1];

                nn::Block<float> in = tl.feat_block;
                if (l > 1) {
                    nn::Block<float> with_prev =
                        nn::Block<float>::zeros(rows, in.channels + 2);
                    for (int r = 0; r < rows; ++r) {
                        float* dst = with_prev.row(r);
                        std::copy(in.row(r), in.row(r) + in.channels, dst);
                        const int32_t pr = tl.parent_row[r];
                        dst[in.channels] = pr >= 0 ? prev_out.row(pr)[0] : 0.0f;
                        dst[in.channels + 1] = pr >= 0 ? prev_out.row(pr)[1] : 0.0f;
                    }
                    in = std::move(with_prev);
                }

                ConvStackCache conv_cache;
                const nn::Block<float> geo =
                    conv_stack_forward(tl.map, in, lw.geo_convs, &conv_cache);

                const VoxelCoord hoff = hidden_offset(tl.lat, state.hidden[l - 1]);
                nn::Block<float> fused, h_prev;
                nn::GruCache<float> gru_cache;
                std::vector<float> counts;
                if (cfg.fusion_method == FusionMethod::Gru) {
                    gather_hidden(state.hidden[l - 1], tl.map, hoff, ch, false, h_prev, nullptr);
                    nn::gru_forward(tl.map, geo, h_prev, lw.gru, fused, &gru_cache);
                } else if (cfg.fusion_method == FusionMethod::Average) {
                    gather_hidden(state.hidden[l - 1], tl.map, hoff, ch, true, h_prev, &counts);
                    fused = nn::Block<float>::zeros(rows, ch);
                    for (int r = 0; r < rows; ++r) {
                        const float cnt = counts[r];
                        for (int c = 0; c < ch; ++c)
                            fused.row(r)[c] =
                                (h_prev.row(r)[c] * cnt + geo.row(r)[c]) / (cnt + 1.0f);
                        counts[r] = cnt + 1.0f;
                    }
                } else {
                    fused = geo;
                }

                nn::MlpCache<float> mlp_cache;
                nn::Block<float> out;
                nn::mlp_forward_batch(fused, lw.mlp, out, &mlp_cache);

                // losses over this level's evaluated voxels
                std::vector<float> pred_o(rows), pred_x(rows);
                for (int r = 0; r < rows; ++r) {
                    pred_o[r] = out.row(r)[0];
                    pred_x[r] = out.row(r)[1];
                }
                total_loss += double(nn::occupancy_loss<float>(pred_o, tl.gt_occ));
                total_loss += double(nn::sdf_loss<float>(pred_x, tl.gt_x, tl.gt_mask));

                // backward
                std::vector<float> do_(rows), dx(rows);
                nn::occupancy_loss_backward<float>(pred_o, tl.gt_occ, 1.0f, do_);
                nn::sdf_loss_backward<float>(pred_x, tl.gt_x, tl.gt_mask, 1.0f, dx);
                nn::Block<float> dout = nn::Block<float>::zeros(rows, 2);
                for (int r = 0; r < rows; ++r) {
                    dout.row(r)[0] = do_[r];
                    dout.row(r)[1] = dx[r];
                }

                nn::Block<float> dfused;
                nn::MlpWeights<float> dmlp;
                nn::mlp_backward_batch(lw.mlp, mlp_cache, dout, dfused, dmlp);
                for (size_t j = 0; j < dmlp.layers.size(); ++j) {
                    add_scaled(grads[l - 1].mlp.layers[j].weight, dmlp.layers[j].weight, 1.0f);
                    add_scaled(grads[l - 1].mlp.layers[j].bias, dmlp.layers[j].bias, 1.0f);
                }

                nn::Block<float> dgeo;
                if (cfg.fusion_method == FusionMethod::Gru) {
                    nn::Block<float> dh_prev;  // detached across fragments
                    nn::GruWeights<float> dgru;
                    nn::gru_backward(tl.map, h_prev, lw.gru, gru_cache, dfused, dgeo, dh_prev,
                                     dgru);
                    const std::pair<nn::SparseConvWeights<float>*,
                                    const nn::SparseConvWeights<float>*>
                        gates[] = {{&grads[l - 1].gru.w_z, &dgru.w_z},
                                   {&grads[l - 1].gru.w_r, &dgru.w_r},
                                   {&grads[l - 1].gru.w_h, &dgru.w_h}};
                    for (auto [gp, dp] : gates) {
                        add_scaled(gp->kernel, dp->kernel, 1.0f);
                        add_scaled(gp->bias, dp->bias, 1.0f);
                    }
                } else if (cfg.fusion_method == FusionMethod::Average) {
                    dgeo = nn::Block<float>::zeros(rows, ch);
                    for (int r = 0; r < rows; ++r)
                        for (int c = 0; c < ch; ++c)
                            dgeo.row(r)[c] = dfused.row(r)[c] / counts[r];  // counts already +1
                } else {
                    dgeo = dfused;
                }

                std::vector<nn::SparseConvWeights<float>> dconvs;
                conv_stack_backward(tl.map, lw.geo_convs, conv_cache, dgeo, dconvs);
                for (size_t i = 0; i < dconvs.size(); ++i) {
                    add_scaled(grads[l - 1].geo[i].kernel, dconvs[i].kernel, 1.0f);
                    add_scaled(grads[l - 1].geo[i].bias, dconvs[i].bias, 1.0f);
                }

                // hidden write-back (training guidance uses GT survivors for OCC)
                if (cfg.fusion_method != FusionMethod::LinearTsdf) {
                    const std::vector<int> domain = cfg.fusion_area == FusionArea::Fbv
                                                        ? all_rows(rows)
                                                        : tl.gt_survivors;
                    scatter_hidden(state.hidden[l - 1], tl.map, hoff, fused,
                                   cfg.fusion_method == FusionMethod::Average ? &counts
                                                                              : nullptr,
                                   domain);
                }

                prev_out = std::move(out);
            }
            state.fragment_count++;
        }

        if (!std::isfinite(total_loss))
            fail("train_toy: loss diverged to non-finite at step ", step);
        history.push_back(total_loss);

        for (int l = 1; l <= 3; ++l) sgd_step(model.level(l), grads[l - 1], float(lr));
    }
    return history;
}

}  // namespace increcon::pipe
