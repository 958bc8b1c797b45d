#include "increcon/bench.hpp"

#include "increcon/dataset.hpp"
#include "increcon/meshing.hpp"

#include <json.hpp>

#include <chrono>
#include <random>
#include <sstream>

namespace increcon::bench {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

using Field = double pipe::FragmentTiming::*;

const std::vector<Field>& scalar_fields() {
    static const std::vector<Field> fields = {
        &pipe::FragmentTiming::image_encode_ms,
        &pipe::FragmentTiming::meshing_ms,
        &pipe::FragmentTiming::total_ms,
    };
    return fields;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto q = [&](double f) {
        const double pos = f * double(v.size() - 1);
        const size_t i = size_t(pos);
        const double frac = pos - double(i);
        return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
    };
    return q(0.75) - q(0.25);
}

template <typename Get>
void reduce_field(const std::vector<pipe::FragmentTiming>& runs, Get&& get, double& med,
                  double& iqr) {
    std::vector<double> vals;
    vals.reserve(runs.size());
    for (const auto& r : runs) vals.push_back(get(r));
    med = median_of(vals);
    iqr = iqr_of(vals);
}

}  // namespace

StageSummary run_benchmark(const std::vector<Frame>& frames, const ModelWeights& model,
                           const PipelineConfig& cfg, int repeats) {
    if (repeats < 1) fail("run_benchmark: repeats must be >= 1");
    const std::vector<Fragment> fragments = assemble_fragments(frames, cfg.assembly());
    if (fragments.empty()) fail("run_benchmark: sequence yields no fragments");

    int key_frames = 0;
    for (const auto& f : fragments) key_frames += int(f.frames.size());

    std::vector<pipe::FragmentTiming> runs;
    runs.reserve(repeats);
    for (int rep = 0; rep < repeats; ++rep) {
        pipe::ReconState state = pipe::make_state(cfg);
        pipe::FragmentTiming sum;
        sum.key_frames = key_frames;
        for (const Fragment& frag : fragments)
            pipe::reconstruct_fragment(frag, state, model, cfg, &sum);
        const double t0 = now_ms();
        const TriangleMesh mesh = marching_cubes(state.global_tsdf, 0.0, cfg.theta);
        (void)mesh;
        sum.meshing_ms = now_ms() - t0;
        sum.total_ms += sum.meshing_ms;

        // report per key frame, matching the paper's protocol of dividing
        // fragment time by the number of key frames in it
        const double inv = 1.0 / double(key_frames);
        sum.image_encode_ms *= inv;
        sum.meshing_ms *= inv;
        sum.total_ms *= inv;
        for (int l = 0; l < 3; ++l) {
            sum.unproj_ms[l] *= inv;
            sum.sparse_conv_ms[l] *= inv;
            sum.gru_ms[l] *= inv;
        }
        runs.push_back(sum);
    }

    StageSummary s;
    s.repeats = repeats;
    s.key_frames = key_frames;
    s.fragments = int(fragments.size());
    s.has_iqr = repeats > 1;
    s.median.key_frames = key_frames;
    for (Field f : scalar_fields())
        reduce_field(runs, [f](const auto& r) { return r.*f; }, s.median.*f, s.iqr.*f);
    for (int l = 0; l < 3; ++l) {
        reduce_field(runs, [l](const auto& r) { return r.unproj_ms[l]; }, s.median.unproj_ms[l],
                     s.iqr.unproj_ms[l]);
        reduce_field(runs, [l](const auto& r) { return r.sparse_conv_ms[l]; },
                     s.median.sparse_conv_ms[l], s.iqr.sparse_conv_ms[l]);
        reduce_field(runs, [l](const auto& r) { return r.gru_ms[l]; }, s.median.gru_ms[l],
                     s.iqr.gru_ms[l]);
    }
    s.ms_per_keyframe = s.median.total_ms;
    return s;
}

std::vector<SweepPoint> sparse_conv_sweep(const std::vector<int64_t>& voxel_counts, int channels,
                                          int repeats, uint64_t seed) {
    std::vector<SweepPoint> points;
    for (int64_t target : voxel_counts) {
        std::mt19937_64 rng(seed);
        // half-density occupancy inside a cube sized for the target count
        const int side = std::max(2, int(std::ceil(std::cbrt(double(target) * 2.0))));
        std::bernoulli_distribution keep(0.5);
        std::vector<VoxelCoord> coords;
        for (int i = 0; i < side && int64_t(coords.size()) < target; ++i)
            for (int j = 0; j < side && int64_t(coords.size()) < target; ++j)
                for (int k = 0; k < side && int64_t(coords.size()) < target; ++k)
                    if (keep(rng)) coords.push_back({i, j, k});
        std::sort(coords.begin(), coords.end());
        const nn::CoordMap map = nn::CoordMap::build(std::move(coords));

        auto w = nn::SparseConvWeights<float>::zeros(channels, channels);
        std::uniform_real_distribution<float> dist(-0.1f, 0.1f);
        for (float& x : w.kernel) x = dist(rng);
        nn::Block<float> in = nn::Block<float>::zeros(map.rows(), channels);
        for (float& x : in.d) x = dist(rng);

        std::vector<double> times;
        nn::Block<float> out;
        conv_forward(map, in, w, out);  // warm-up
        for (int rep = 0; rep < repeats; ++rep) {
            const double t0 = now_ms();
            conv_forward(map, in, w, out);
            times.push_back(now_ms() - t0);
        }
        points.push_back({map.rows(), median_of(times)});
    }
    return points;
}

namespace {
nlohmann::json timing_json(const pipe::FragmentTiming& t) {
    nlohmann::json levels = nlohmann::json::array();
    for (int l = 0; l < 3; ++l)
        levels.push_back({{"level", l + 1},
                          {"unproj_ms", t.unproj_ms[l]},
                          {"sparse_conv_ms", t.sparse_conv_ms[l]},
                          {"gru_ms", t.gru_ms[l]}});
    return {{"image_encoder_ms", t.image_encode_ms},
            {"levels", levels},
            {"meshing_ms", t.meshing_ms},
            {"total_ms", t.total_ms}};
}
}  // namespace

std::string summary_to_json(const StageSummary& s, const std::vector<SweepPoint>& sweep) {
    nlohmann::json j;
    j["per_keyframe"] = timing_json(s.median);
    if (s.has_iqr) j["iqr"] = timing_json(s.iqr);
    j["repeats"] = s.repeats;
    j["key_frames"] = s.key_frames;
    j["fragments"] = s.fragments;
    j["ms_per_keyframe"] = s.ms_per_keyframe;
    if (!sweep.empty()) {
        j["sparse_conv_sweep"] = nlohmann::json::array();
        for (const auto& p : sweep)
            j["sparse_conv_sweep"].push_back({{"voxels", p.voxels}, {"median_ms", p.median_ms}});
    }
    return j.dump(2);
}

std::string summary_to_csv(const StageSummary& s, const std::vector<SweepPoint>& sweep) {
    std::ostringstream os;
    os.precision(6);
    os << "stage,level1,level2,level3\n";
    os << "unproj";
    for (int l = 0; l < 3; ++l) os << ',' << s.median.unproj_ms[l];
    os << "\nsparse_conv";
    for (int l = 0; l < 3; ++l) os << ',' << s.median.sparse_conv_ms[l];
    os << "\ngru";
    for (int l = 0; l < 3; ++l) os << ',' << s.median.gru_ms[l];
    os << "\n\nimage_encoder_ms," << s.median.image_encode_ms << "\n";
    os << "meshing_ms," << s.median.meshing_ms << "\n";
    os << "total_ms," << s.median.total_ms << "\n";
    os << "key_frames," << s.key_frames << "\n";
    os << "ms_per_keyframe," << s.ms_per_keyframe << "\n";
    if (!sweep.empty()) {
        os << "\nvoxels,median_ms\n";
        for (const auto& p : sweep) os << p.voxels << ',' << p.median_ms << '\n';
    }
    return os.str();
}

}  // namespace increcon::bench
