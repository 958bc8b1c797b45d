#pragma once

#include "increcon/model.hpp"
#include "increcon/pipeline.hpp"

#include <string>
#include <vector>

namespace increcon::bench {

// Per-key-frame stage timings in the paper's report shape: image encoder,
// per-level unprojection / sparse conv / GRU columns, plus meshing.
struct StageSummary {
    pipe::FragmentTiming median;       // per key frame, median over repeats
    pipe::FragmentTiming iqr;          // interquartile range, repeats > 1 only
    bool has_iqr = false;
    int repeats = 1;
    int key_frames = 0;
    int fragments = 0;
    double ms_per_keyframe = 0;        // median total / key frames
};

StageSummary run_benchmark(const std::vector<Frame>& frames, const ModelWeights& model,
                           const PipelineConfig& cfg, int repeats);

struct SweepPoint {
    int64_t voxels = 0;
    double median_ms = 0;
};

// Times conv_forward over synthetic occupancy sets of increasing size.
std::vector<SweepPoint> sparse_conv_sweep(const std::vector<int64_t>& voxel_counts, int channels,
                                          int repeats, uint64_t seed);

std::string summary_to_json(const StageSummary& s, const std::vector<SweepPoint>& sweep);
std::string summary_to_csv(const StageSummary& s, const std::vector<SweepPoint>& sweep);

}  // namespace increcon::bench
