#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <filesystem>
#include <map>

using namespace increcon;
using namespace testsupport;
namespace fs = std::filesystem;

TEST_CASE("primitive and scene SDF values") {
    synth::SceneSpec spec;
    spec.primitives.push_back(synth::SpherePrim{Vec3::Zero(), 0.5});
    CHECK(synth::scene_sdf(spec, {1, 0, 0}) == doctest::Approx(0.5));
    CHECK(synth::scene_sdf(spec, {0, 0, 0}) == doctest::Approx(-0.5));

    spec.primitives.push_back(synth::SpherePrim{Vec3(2, 0, 0), 0.25});
    // union takes the min of the two
    const Vec3 p(1.4, 0, 0);
    const double d1 = (p - Vec3::Zero()).norm() - 0.5;
    const double d2 = (p - Vec3(2, 0, 0)).norm() - 0.25;
    CHECK(synth::scene_sdf(spec, p) == doctest::Approx(std::min(d1, d2)));

    const synth::BoxPrim box{{0, 0, 0}, {1, 2, 3}};
    CHECK(synth::primitive_sdf(box, {2, 0, 0}) == doctest::Approx(1.0));
    CHECK(synth::primitive_sdf(box, {0, 0, 0}) == doctest::Approx(-1.0));

    const synth::SlabPrim slab{{0, 0, 1}, 2.0, 2.2};
    CHECK(synth::primitive_sdf(slab, {0, 0, 1.0}) == doctest::Approx(1.0));
    CHECK(synth::primitive_sdf(slab, {5, -3, 2.1}) == doctest::Approx(-0.1));
}

TEST_CASE("scene SDF is 1-Lipschitz on random point pairs") {
    const auto spec = room_scene();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-2.5, 2.5);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 p(d(rng), d(rng), d(rng));
        const Vec3 q(d(rng), d(rng), d(rng));
        const double lhs = std::abs(synth::scene_sdf(spec, p) - synth::scene_sdf(spec, q));
        CHECK(lhs <= (p - q).norm() + 1e-9);
    }
}

TEST_CASE("sphere-traced depth of an axial slab records z-depth") {
    synth::SceneSpec spec;
    spec.primitives.push_back(synth::SlabPrim{{0, 0, 1}, 2.0, 2.2});
    const Intrinsics intr = test_intrinsics(160, 120, 60.0);
    const ImageF depth = synth::render_gt_depth(spec, Pose{}, intr, 3.0);
    CHECK(depth.at(80, 60) == doctest::Approx(2.0).epsilon(1e-3));
    // off-axis pixel still records camera z, not ray length
    CHECK(depth.at(20, 20) == doctest::Approx(2.0).epsilon(1e-3));

    // camera facing away: nothing hit
    const Pose away = Pose::look_at(Vec3::Zero(), Vec3(0, 0, -1));
    const ImageF miss = synth::render_gt_depth(spec, away, intr, 3.0);
    CHECK(miss.at(80, 60) == 0.0f);
}

TEST_CASE("sphere-traced depth matches analytic ray-sphere intersection") {
    auto spec = sphere_scene(0.5);
    const Intrinsics intr = test_intrinsics(80, 60, 60.0);
    const Pose pose = Pose::look_at(Vec3(0, -2, 0), Vec3::Zero());
    const ImageF depth = synth::render_gt_depth(spec, pose, intr, 3.0);
    double max_err = 0;
    int hits = 0;
    for (int v = 0; v < intr.height; ++v)
        for (int u = 0; u < intr.width; ++u) {
            // analytic intersection of the pixel ray with the sphere
            const Vec3 dir = (pose.rotation * intr.unproject(u, v, 1.0)).normalized();
            const Vec3 oc = pose.translation;
            const double b = 2.0 * oc.dot(dir);
            const double c = oc.squaredNorm() - 0.25;
            const double disc = b * b - 4 * c;
            const double measured = depth.at(u, v);
            if (disc < 0) {
                CHECK(measured == 0.0f);
                continue;
            }
            const double t = (-b - std::sqrt(disc)) / 2.0;
            const double z = (pose.rotation.transpose() * (t * dir)).z();
            if (measured > 0) {
                ++hits;
                max_err = std::max(max_err, std::abs(measured - z));
            }
        }
    CHECK(hits > 100);
    CHECK(max_err < 1e-3);
}

TEST_CASE("gt_mesh accuracy against analytic primitives") {
    SUBCASE("sphere at 2 cm") {
        const auto spec = sphere_scene(0.5);
        const TriangleMesh mesh = synth::gt_mesh(spec, 0.02);
        REQUIRE(!mesh.triangles.empty());
        double sum = 0;
        for (const Vec3f& v : mesh.vertices) sum += std::abs(v.cast<double>().norm() - 0.5);
        CHECK(sum / double(mesh.vertices.size()) < 0.01);
    }
    SUBCASE("box surface distance") {
        synth::SceneSpec spec;
        const synth::BoxPrim box{{0, 0, 0}, {0.3, 0.4, 0.5}};
        spec.primitives.push_back(box);
        spec.bounds_min = Vec3(-0.8, -0.8, -0.8);
        spec.bounds_max = Vec3(0.8, 0.8, 0.8);
        const double vs = 0.04;
        const TriangleMesh mesh = synth::gt_mesh(spec, vs);
        REQUIRE(!mesh.triangles.empty());
        double sum = 0;
        for (const Vec3f& v : mesh.vertices)
            sum += std::abs(synth::primitive_sdf(box, v.cast<double>()));
        CHECK(sum / double(mesh.vertices.size()) < vs / 2);
    }
    SUBCASE("bounds that miss the surface give an empty mesh") {
        auto spec = sphere_scene(0.5);
        spec.bounds_min = Vec3(2, 2, 2);
        spec.bounds_max = Vec3(3, 3, 3);
        CHECK(synth::gt_mesh(spec, 0.05).triangles.empty());
    }
}

TEST_CASE("gt sphere mesh is closed (every edge shared by two triangles)") {
    const auto spec = sphere_scene(0.4);
    const TriangleMesh mesh = synth::gt_mesh(spec, 0.04);
    REQUIRE(!mesh.triangles.empty());
    std::map<std::pair<uint32_t, uint32_t>, int> edges;
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            uint32_t a = t[e], b = t[(e + 1) % 3];
            if (a > b) std::swap(a, b);
            edges[{a, b}]++;
        }
    for (const auto& [e, count] : edges) CHECK(count == 2);
}

TEST_CASE("orbit trajectory geometry") {
    const auto spec = sphere_scene();
    synth::TrajectoryParams params;
    params.n_frames = 4;
    params.radius = 2.0;
    const auto poses = synth::scripted_trajectory(spec, params);
    REQUIRE(poses.size() == 4);
    const Vec3 centroid = synth::scene_centroid(spec);
    for (const Pose& p : poses) {
        CHECK((p.translation - centroid).norm() == doctest::Approx(2.0));
        // camera +z axis points at the centroid
        const Vec3 look = p.rotation.col(2);
        const Vec3 expect = (centroid - p.translation).normalized();
        CHECK((look - expect).norm() < 1e-9);
        CHECK_NOTHROW(p.validate());
    }
    // four poses at 90-degree spacing
    CHECK((poses[0].translation - centroid).dot(poses[1].translation - centroid) ==
          doctest::Approx(0.0).epsilon(1e-9));

    params.n_frames = 1;
    CHECK(synth::scripted_trajectory(spec, params).size() == 1);

    params.kind = synth::TrajectoryKind::ScanLine;
    params.n_frames = 5;
    const auto scan = synth::scripted_trajectory(spec, params);
    CHECK(scan.size() == 5);
    for (const Pose& p : scan) CHECK_NOTHROW(p.validate());
}

TEST_CASE("scene JSON round trip and schema errors") {
    const fs::path dir = fs::temp_directory_path() / "increcon_test_scene";
    fs::create_directories(dir);
    const std::string path = (dir / "scene.json").string();

    const auto spec = room_scene();
    synth::save_scene(spec, path);
    const auto loaded = synth::load_scene(path);
    CHECK(loaded.primitives.size() == spec.primitives.size());
    CHECK((loaded.bounds_min - spec.bounds_min).norm() < 1e-12);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-2, 2);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p(d(rng), d(rng), d(rng));
        CHECK(synth::scene_sdf(loaded, p) == doctest::Approx(synth::scene_sdf(spec, p)));
    }

    {
        std::ofstream os(path);
        os << "{\"primitives\": [{\"type\": \"cone\"}]}";
    }
    CHECK_THROWS(synth::load_scene(path));
    CHECK_THROWS_WITH_AS(synth::load_scene((dir / "nope.json").string()),
                         doctest::Contains("spec not found"), std::runtime_error);
    fs::remove_all(dir);
}
