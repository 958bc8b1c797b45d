#pragma once

#include "increcon/geometry.hpp"

#include <map>
#include <string>
#include <vector>

namespace increcon {

// Trajectory file: one pose per line, `index tx ty tz qx qy qz qw`.
// `#` starts a comment; blank lines are skipped.
std::map<int, Pose> load_trajectory(const std::string& path);
void save_trajectory(const std::string& path, const std::vector<Pose>& poses);

// Intrinsics file: single line `fx fy cx cy width height`.
Intrinsics load_intrinsics(const std::string& path);
void save_intrinsics(const std::string& path, const Intrinsics& intr);

// Loads a posed image sequence. Images are `<image_dir>/%06d.png` 16-bit depth
// PNGs matched to trajectory entries by index.
std::vector<Frame> ingest_sequence(const std::string& trajectory_path,
                                   const std::string& intrinsics_path,
                                   const std::string& image_dir,
                                   double depth_scale = 1000.0);

struct FragmentAssemblyConfig {
    int n_views = 9;
    double t_max = 0.1;
    double r_max_deg = 15.0;
    double d_max = 3.0;
    double coarse_voxel_size = 0.16;
    KeyframeMode mode = KeyframeMode::Conjunction;
};

// Selects key frames against the last selected key frame (the first frame is
// always a key frame), groups them into non-overlapping windows of n_views and
// attaches each window's FBV. A trailing window of >= 2 key frames is emitted
// as a final short fragment.
std::vector<Fragment> assemble_fragments(const std::vector<Frame>& frames,
                                         const FragmentAssemblyConfig& cfg);

}  // namespace increcon
