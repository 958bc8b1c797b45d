#include "increcon/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace increcon {

std::map<int, Pose> load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open trajectory: ", path);
    std::map<int, Pose> poses;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int index;
        double tx, ty, tz, qx, qy, qz, qw;
        if (!(ls >> index >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
            fail("malformed trajectory line ", line_no, " in ", path);
        try {
            poses[index] = Pose::from_quaternion(qx, qy, qz, qw, {tx, ty, tz});
        } catch (const std::exception& e) {
            fail("trajectory line ", line_no, ": ", e.what());
        }
    }
    return poses;
}

void save_trajectory(const std::string& path, const std::vector<Pose>& poses) {
    std::ofstream out(path);
    if (!out) fail("cannot write trajectory: ", path);
    out.precision(12);
    for (size_t i = 0; i < poses.size(); ++i) {
        Eigen::Quaterniond q(poses[i].rotation);
        q.normalize();
        const Vec3& t = poses[i].translation;
        out << i << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' ' << q.y()
            << ' ' << q.z() << ' ' << q.w() << '\n';
    }
}

Intrinsics load_intrinsics(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open intrinsics: ", path);
    Intrinsics intr;
    if (!(in >> intr.fx >> intr.fy >> intr.cx >> intr.cy >> intr.width >> intr.height))
        fail("malformed intrinsics file: ", path);
    intr.validate();
    return intr;
}

void save_intrinsics(const std::string& path, const Intrinsics& intr) {
    std::ofstream out(path);
    if (!out) fail("cannot write intrinsics: ", path);
    out.precision(12);
    out << intr.fx << ' ' << intr.fy << ' ' << intr.cx << ' ' << intr.cy << ' ' << intr.width
        << ' ' << intr.height << '\n';
}

std::vector<Frame> ingest_sequence(const std::string& trajectory_path,
                                   const std::string& intrinsics_path,
                                   const std::string& image_dir, double depth_scale) {
    const std::map<int, Pose> poses = load_trajectory(trajectory_path);
    const Intrinsics intr = load_intrinsics(intrinsics_path);

    std::vector<std::pair<int, fs::path>> images;
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        try {
            images.emplace_back(std::stoi(entry.path().stem().string()), entry.path());
        } catch (const std::exception&) {
            fail("image filename is not an index: ", entry.path().string());
        }
    }
    std::sort(images.begin(), images.end());

    std::vector<Frame> frames;
    frames.reserve(images.size());
    for (const auto& [index, path] : images) {
        auto it = poses.find(index);
        if (it == poses.end()) fail("missing pose for image index ", index);
        Frame f;
        f.index = index;
        f.pose = it->second;
        f.intrinsics = intr;
        f.image = read_depth_png(path.string(), depth_scale);
        if (f.image.width != intr.width || f.image.height != intr.height)
            fail("image ", index, " dimensions ", f.image.width, "x", f.image.height,
                 " do not match intrinsics ", intr.width, "x", intr.height);
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<Fragment> assemble_fragments(const std::vector<Frame>& frames,
                                         const FragmentAssemblyConfig& cfg) {
    if (cfg.n_views < 2) fail("assemble_fragments: n_views must be >= 2");
    std::vector<Frame> keyframes;
    for (const Frame& f : frames) {
        if (keyframes.empty()) {
            keyframes.push_back(f);  // the first frame anchors selection
            continue;
        }
        if (select_keyframe(keyframes.back().pose, f.pose, cfg.t_max, cfg.r_max_deg, cfg.mode))
            keyframes.push_back(f);
    }
    if (keyframes.size() < 2) {
        std::cerr << "assemble_fragments: fewer than 2 key frames selected, no fragments\n";
        return {};
    }

    std::vector<Fragment> fragments;
    for (size_t begin = 0; begin < keyframes.size(); begin += cfg.n_views) {
        const size_t end = std::min(begin + size_t(cfg.n_views), keyframes.size());
        if (end - begin < 2) break;  // a trailing single key frame is dropped
        Fragment frag;
        frag.frames.assign(keyframes.begin() + begin, keyframes.begin() + end);
        frag.fbv = compute_fbv(frag.frames, cfg.d_max, cfg.coarse_voxel_size);
        frag.fragment_index = int(fragments.size());
        fragments.push_back(std::move(frag));
    }
    return fragments;
}

}  // namespace increcon
