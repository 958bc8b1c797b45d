#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "increcon/dataset.hpp"

#include <filesystem>
#include <fstream>

using namespace increcon;
using namespace testsupport;
namespace fs = std::filesystem;

TEST_CASE("relative_motion identity and pure translation") {
    Pose a, b;
    auto m = relative_motion(a, b);
    CHECK(m.translation_m == doctest::Approx(0.0));
    CHECK(m.rotation_deg == doctest::Approx(0.0));

    b.translation = Vec3(0.3, 0, 0);
    m = relative_motion(a, b);
    CHECK(m.translation_m == doctest::Approx(0.3));
    CHECK(m.rotation_deg == doctest::Approx(0.0));
}

TEST_CASE("relative_motion 90 degree rotation about z") {
    const Pose a;
    const Pose b = pose_rz(90.0);
    const auto m = relative_motion(a, b);
    CHECK(m.translation_m == doctest::Approx(0.0));
    CHECK(m.rotation_deg == doctest::Approx(90.0).epsilon(1e-9));
}

TEST_CASE("relative_motion is symmetric in its arguments") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 100; ++i) {
        const Pose a = random_pose(rng);
        const Pose b = random_pose(rng);
        const auto ab = relative_motion(a, b);
        const auto ba = relative_motion(b, a);
        CHECK(ab.translation_m == doctest::Approx(ba.translation_m).epsilon(1e-9));
        CHECK(ab.rotation_deg == doctest::Approx(ba.rotation_deg).epsilon(1e-9));
    }
}

TEST_CASE("select_keyframe thresholds and modes") {
    const Pose base;
    const Pose both = pose_rz(20.0, Vec3(0.15, 0, 0));
    const Pose neither = pose_rz(5.0, Vec3(0.05, 0, 0));
    const Pose only_t = pose_rz(5.0, Vec3(0.15, 0, 0));

    CHECK(select_keyframe(base, both, 0.1, 15.0, KeyframeMode::Conjunction));
    CHECK_FALSE(select_keyframe(base, neither, 0.1, 15.0, KeyframeMode::Conjunction));
    CHECK_FALSE(select_keyframe(base, neither, 0.1, 15.0, KeyframeMode::Disjunction));
    CHECK_FALSE(select_keyframe(base, only_t, 0.1, 15.0, KeyframeMode::Conjunction));
    CHECK(select_keyframe(base, only_t, 0.1, 15.0, KeyframeMode::Disjunction));
}

TEST_CASE("select_keyframe is monotone in motion magnitude") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> td(0.0, 0.3);
    std::uniform_real_distribution<double> rd(0.0, 40.0);
    for (int i = 0; i < 200; ++i) {
        const double t1 = td(rng), r1 = rd(rng);
        const double t2 = t1 + td(rng), r2 = r1 + rd(rng);  // strictly not smaller
        for (auto mode : {KeyframeMode::Conjunction, KeyframeMode::Disjunction}) {
            const bool small = select_keyframe(Pose{}, pose_rz(r1, Vec3(t1, 0, 0)), 0.1, 15.0, mode);
            const bool big = select_keyframe(Pose{}, pose_rz(r2, Vec3(t2, 0, 0)), 0.1, 15.0, mode);
            if (small) CHECK(big);
        }
    }
}

namespace {
Frame frame_at(const Pose& pose, const Intrinsics& intr, int index = 0) {
    Frame f;
    f.index = index;
    f.pose = pose;
    f.intrinsics = intr;
    f.image = ImageF(intr.width, intr.height, 1.0f);
    return f;
}
}  // namespace

TEST_CASE("compute_fbv single 90-degree camera snaps to 6.08 cube") {
    const Intrinsics intr = test_intrinsics(480, 480, 90.0);
    const Frame f = frame_at(Pose{}, intr);
    const Fbv fbv = compute_fbv(std::span(&f, 1), 3.0, 0.16);
    CHECK(fbv.side_length == doctest::Approx(6.08).epsilon(1e-9));
    // contains the raw frustum AABB corners
    for (double x : {-3.0, 3.0})
        for (double y : {-3.0, 3.0})
            for (double z : {0.0, 3.0}) {
                CHECK(Vec3(x, y, z).x() >= fbv.min_corner.x() - 1e-9);
                CHECK(x <= fbv.min_corner.x() + fbv.side_length + 1e-9);
                CHECK(y >= fbv.min_corner.y() - 1e-9);
                CHECK(y <= fbv.min_corner.y() + fbv.side_length + 1e-9);
                CHECK(z >= fbv.min_corner.z() - 1e-9);
                CHECK(z <= fbv.min_corner.z() + fbv.side_length + 1e-9);
            }
    // snapped to the coarse lattice
    for (int d = 0; d < 3; ++d) {
        const double q = fbv.min_corner[d] / 0.16;
        CHECK(std::abs(q - std::round(q)) < 1e-9);
    }
    CHECK(std::abs(fbv.side_length / 0.16 - std::round(fbv.side_length / 0.16)) < 1e-9);
}

TEST_CASE("compute_fbv union properties") {
    const Intrinsics intr = test_intrinsics();
    const Frame f0 = frame_at(Pose{}, intr, 0);
    const Frame dup[2] = {f0, f0};
    const Fbv one = compute_fbv(std::span(&f0, 1), 3.0, 0.16);
    const Fbv two = compute_fbv(std::span(dup, 2), 3.0, 0.16);
    CHECK(one.side_length == doctest::Approx(two.side_length));
    CHECK((one.min_corner - two.min_corner).norm() == doctest::Approx(0.0));

    const Frame shifted[2] = {f0, frame_at(Pose{Mat3::Identity(), Vec3(1, 0, 0)}, intr, 1)};
    const Fbv grown = compute_fbv(std::span(shifted, 2), 3.0, 0.16);
    CHECK(grown.side_length >= one.side_length - 1e-12);
}

TEST_CASE("compute_fbv contains all frustum corners for random poses") {
    std::mt19937_64 rng(99);
    const Intrinsics intr = test_intrinsics();
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Frame> frames;
        for (int i = 0; i < 3; ++i) frames.push_back(frame_at(random_pose(rng, 2.0), intr, i));
        const Fbv fbv = compute_fbv(frames, 3.0, 0.16);
        for (const Frame& f : frames)
            for (const Vec3& p : frustum_corners(f.pose, f.intrinsics, 3.0))
                for (int d = 0; d < 3; ++d) {
                    CHECK(p[d] >= fbv.min_corner[d] - 1e-9);
                    CHECK(p[d] <= fbv.min_corner[d] + fbv.side_length + 1e-9);
                }
    }
}

TEST_CASE("pose validation") {
    Pose p;
    CHECK_NOTHROW(p.validate());
    p.rotation(0, 0) = 1.5;
    CHECK_THROWS(p.validate());

    CHECK_THROWS_WITH_AS(Pose::from_quaternion(0.8, 0, 0, 0.8, Vec3::Zero()),
                         doctest::Contains("deviates"), std::runtime_error);
    // within 1e-3 tolerance: accepted and renormalized
    const Pose q = Pose::from_quaternion(0, 0, 0, 1.0005, Vec3::Zero());
    CHECK(q.orthonormality_error() < 1e-9);
}

TEST_CASE("intrinsics validation") {
    Intrinsics intr = test_intrinsics();
    CHECK_NOTHROW(intr.validate());
    intr.fx = -1;
    CHECK_THROWS(intr.validate());
    intr = test_intrinsics();
    intr.cx = intr.width;
    CHECK_THROWS(intr.validate());
}

// --- dataset files ---

TEST_CASE("trajectory and intrinsics round trip, depth decode") {
    const fs::path dir = fs::temp_directory_path() / "increcon_test_dataset";
    fs::create_directories(dir / "depth");

    {
        std::ofstream tr(dir / "trajectory.txt");
        tr << "# comment line\n";
        tr << "0 0 0 0 0 0 0 1\n";
        tr << "1 0.5 0 0 0 0 0 1\n";
        tr << "2 1.0 0 0 0 0 0.3826834 0.9238795\n";  // 45 deg about z
    }
    {
        std::ofstream in(dir / "intrinsics.txt");
        in << "160 160 80 60 160 120\n";
    }
    for (int i = 0; i < 3; ++i) {
        ImageF depth(160, 120, 0.0f);
        depth.at(5, 5) = 2.0f;  // raw value 2000 at scale 1000
        char name[16];
        std::snprintf(name, sizeof(name), "%06d.png", i);
        write_depth_png((dir / "depth" / name).string(), depth);
    }

    const auto frames = ingest_sequence((dir / "trajectory.txt").string(),
                                        (dir / "intrinsics.txt").string(),
                                        (dir / "depth").string());
    REQUIRE(frames.size() == 3);
    CHECK(frames[0].index == 0);
    CHECK(frames[2].index == 2);
    // identity quaternion -> identity rotation
    CHECK((frames[0].pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    // 16-bit depth 2000 / 1000 = 2.0 m
    CHECK(frames[1].image.at(5, 5) == doctest::Approx(2.0));
    CHECK(frames[1].image.at(0, 0) == 0.0f);

    fs::remove_all(dir);
}

TEST_CASE("ingest errors name the offender") {
    const fs::path dir = fs::temp_directory_path() / "increcon_test_badset";
    fs::create_directories(dir / "depth");
    {
        std::ofstream tr(dir / "trajectory.txt");
        tr << "0 0 0 0 0 0 0 1\n";
    }
    {
        std::ofstream in(dir / "intrinsics.txt");
        in << "160 160 80 60 160 120\n";
    }
    write_depth_png((dir / "depth" / "000003.png").string(), ImageF(160, 120, 1.0f));

    CHECK_THROWS_WITH_AS(ingest_sequence((dir / "trajectory.txt").string(),
                                         (dir / "intrinsics.txt").string(),
                                         (dir / "depth").string()),
                         doctest::Contains("missing pose for image index 3"), std::runtime_error);

    {
        std::ofstream tr(dir / "trajectory.txt");
        tr << "0 0 0 0 0 0 0 1\n";
        tr << "1 garbage\n";
    }
    CHECK_THROWS_WITH_AS(load_trajectory((dir / "trajectory.txt").string()),
                         doctest::Contains("line 2"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("assemble_fragments windows and trailing fragment") {
    const Intrinsics intr = test_intrinsics();
    FragmentAssemblyConfig cfg;
    cfg.n_views = 4;
    cfg.t_max = 0.1;
    cfg.r_max_deg = 15.0;
    cfg.mode = KeyframeMode::Disjunction;

    // static camera: only frame 0 selected, no fragment
    std::vector<Frame> still(10, frame_at(Pose{}, intr));
    CHECK(assemble_fragments(still, cfg).empty());

    // every frame moves 0.2 m: all are key frames
    std::vector<Frame> moving;
    for (int i = 0; i < 10; ++i)
        moving.push_back(frame_at(Pose{Mat3::Identity(), Vec3(0.2 * i, 0, 0)}, intr, i));
    const auto frags = assemble_fragments(moving, cfg);
    REQUIRE(frags.size() == 3);  // 4 + 4 + trailing 2
    CHECK(frags[0].frames.size() == 4);
    CHECK(frags[1].frames.size() == 4);
    CHECK(frags[2].frames.size() == 2);

    // strictly increasing, disjoint frame indices
    int last = -1;
    for (const auto& frag : frags)
        for (const auto& f : frag.frames) {
            CHECK(f.index > last);
            last = f.index;
        }

    // exactly N qualifying key frames -> one fragment
    std::vector<Frame> exact(moving.begin(), moving.begin() + 4);
    CHECK(assemble_fragments(exact, cfg).size() == 1);
}

TEST_CASE("assemble_fragments selects every k-th frame of a scripted orbit") {
    // 100-frame orbit where every 5th frame takes the large step
    auto spec = sphere_scene();
    synth::TrajectoryParams params;
    params.n_frames = 100;
    params.radius = 2.0;
    params.key_stride = 5;
    params.minor_scale = 0.02;
    const auto poses = synth::scripted_trajectory(spec, params);

    FragmentAssemblyConfig cfg;
    cfg.n_views = 9;
    cfg.mode = KeyframeMode::Disjunction;
    const Intrinsics intr = test_intrinsics();
    std::vector<Frame> frames;
    for (size_t i = 0; i < poses.size(); ++i) frames.push_back(frame_at(poses[i], intr, int(i)));

    const auto frags = assemble_fragments(frames, cfg);
    REQUIRE(!frags.empty());
    // fragment 0 = first frame plus the next 8 large steps (multiples of 5)
    CHECK(frags[0].frames[0].index == 0);
    for (size_t j = 1; j < frags[0].frames.size(); ++j)
        CHECK(frags[0].frames[j].index % 5 == 0);
    CHECK(frags[0].frames.size() == 9);
}
