#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <filesystem>
#include <fstream>

using namespace increcon;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {
SparseVoxelGrid<TsdfVoxel> tsdf_grid_with(std::initializer_list<std::pair<VoxelCoord, TsdfVoxel>> cells,
                                          int level = 1) {
    auto g = make_level_grid<TsdfVoxel>(level);
    for (const auto& [c, v] : cells) g.cells.emplace(c, v);
    return g;
}
}  // namespace

TEST_CASE("level voxel sizes are 16/8/4 cm") {
    CHECK(level_voxel_size(1) == doctest::Approx(0.16));
    CHECK(level_voxel_size(2) == doctest::Approx(0.08));
    CHECK(level_voxel_size(3) == doctest::Approx(0.04));
    CHECK_THROWS(make_level_grid<TsdfVoxel>(0));
}

TEST_CASE("sparsify keeps cells with o >= theta") {
    auto g = tsdf_grid_with({{{0, 0, 0}, {0.7f, 0.1f}},
                             {{1, 0, 0}, {0.4f, 0.2f}},
                             {{2, 0, 0}, {0.5f, 0.3f}}});
    const auto s = sparsify(g, 0.5);
    CHECK(s.cells.size() == 2);
    CHECK(s.cells.count({0, 0, 0}) == 1);
    CHECK(s.cells.count({2, 0, 0}) == 1);  // equality kept

    auto all1 = tsdf_grid_with({{{0, 0, 0}, {1.0f, 0}}, {{5, 5, 5}, {1.0f, 0}}});
    CHECK(sparsify(all1, 0.5).cells.size() == 2);
    auto all0 = tsdf_grid_with({{{0, 0, 0}, {0.0f, 0}}});
    CHECK(sparsify(all0, 0.5).cells.empty());
    CHECK_THROWS(sparsify(g, 0.0));
}

TEST_CASE("sparsify is idempotent") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    auto g = make_level_grid<TsdfVoxel>(2);
    for (int i = 0; i < 100; ++i)
        g.cells.emplace(VoxelCoord{i % 10, (i / 10) % 10, i / 100}, TsdfVoxel{dist(rng), 0});
    const auto once = sparsify(g, 0.5);
    const auto twice = sparsify(once, 0.5);
    CHECK(once.cells.size() == twice.cells.size());
    for (const auto& [c, v] : once.cells) CHECK(twice.cells.count(c) == 1);
}

TEST_CASE("upsample2x spawns exactly the 8 children") {
    auto g = tsdf_grid_with({{{1, 0, 0}, {0.9f, 0.25f}}});
    const auto up = upsample2x(g);
    CHECK(up.level == 2);
    CHECK(up.voxel_size == doctest::Approx(0.08));
    CHECK(up.cells.size() == 8);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                auto it = up.cells.find({2 + a, b, c});
                REQUIRE(it != up.cells.end());
                CHECK(it->second.o == 0.9f);
                CHECK(it->second.x == 0.25f);
            }

    CHECK(upsample2x(make_level_grid<TsdfVoxel>(1)).cells.empty());

    auto five = tsdf_grid_with({{{0, 0, 0}, {1, 0}},
                                {{3, 1, 0}, {1, 0}},
                                {{-2, 0, 5}, {1, 0}},
                                {{7, 7, 7}, {1, 0}},
                                {{1, 2, 3}, {1, 0}}});
    CHECK(upsample2x(five).cells.size() == 40);

    auto finest = make_level_grid<TsdfVoxel>(3);
    CHECK_THROWS(upsample2x(finest));
}

TEST_CASE("extract_region filters by center and re-anchors") {
    auto g = make_level_grid<TsdfVoxel>(3);  // 4 cm
    g.cells.emplace(VoxelCoord{0, 0, 0}, TsdfVoxel{1, 0.1f});
    g.cells.emplace(VoxelCoord{1, 0, 0}, TsdfVoxel{1, 0.2f});
    g.cells.emplace(VoxelCoord{10, 0, 0}, TsdfVoxel{1, 0.3f});

    Fbv fbv{Vec3::Zero(), 0.08};  // covers coords 0 and 1 in x
    const auto local = extract_region(g, fbv);
    CHECK(local.cells.size() == 2);

    Fbv far_away{Vec3(5, 5, 5), 0.16};
    CHECK(extract_region(g, far_away).cells.empty());

    Fbv everything{Vec3::Constant(-0.16), 0.8};
    const auto shifted = extract_region(g, everything);
    CHECK(shifted.cells.size() == 3);
    CHECK(shifted.cells.count({4, 4, 4}) == 1);  // (0,0,0) shifted by +4 voxels
}

TEST_CASE("replace_region overwrites and inserts") {
    auto global = make_level_grid<TsdfVoxel>(3);
    auto local = make_level_grid<TsdfVoxel>(3, Vec3(0.08, 0, 0));
    local.cells.emplace(VoxelCoord{0, 0, 0}, TsdfVoxel{1, 0.5f});
    local.cells.emplace(VoxelCoord{1, 0, 0}, TsdfVoxel{1, 0.6f});

    replace_region(global, local);
    CHECK(global.cells.size() == 2);
    CHECK(global.cells.at({2, 0, 0}).x == 0.5f);

    replace_region(global, local);  // idempotent
    CHECK(global.cells.size() == 2);

    global.cells[{2, 0, 0}] = {1, -0.9f};
    replace_region(global, local);
    CHECK(global.cells.at({2, 0, 0}).x == 0.5f);  // local wins

    auto misaligned = make_level_grid<TsdfVoxel>(3, Vec3(0.02, 0, 0));
    misaligned.cells.emplace(VoxelCoord{0, 0, 0}, TsdfVoxel{1, 0});
    CHECK_THROWS_WITH_AS(replace_region(global, misaligned), doctest::Contains("misalignment"),
                         std::runtime_error);
}

TEST_CASE("extract then replace into empty global is the identity") {
    std::mt19937_64 rng(11);
    auto global = make_level_grid<TsdfVoxel>(3);
    std::uniform_int_distribution<int> coord(-8, 8);
    std::uniform_real_distribution<float> val(-1.0f, 1.0f);
    for (int i = 0; i < 60; ++i)
        global.cells[{coord(rng), coord(rng), coord(rng)}] = {1.0f, val(rng)};
    const Fbv fbv{Vec3(-0.16, -0.16, -0.16), 0.32};

    const auto local = extract_region(global, fbv);
    auto fresh = make_level_grid<TsdfVoxel>(3);
    replace_region(fresh, local);
    const auto local2 = extract_region(fresh, fbv);
    CHECK(local2.cells.size() == local.cells.size());
    for (const auto& [c, v] : local.cells) {
        auto it = local2.cells.find(c);
        REQUIRE(it != local2.cells.end());
        CHECK(it->second.x == v.x);
    }
}

TEST_CASE("world-position round trip up to 2^20") {
    auto g = make_level_grid<TsdfVoxel>(3, Vec3(0.16, -0.32, 0.0));
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int32_t> coord(-(1 << 20), 1 << 20);
    for (int i = 0; i < 1000; ++i) {
        const VoxelCoord c{coord(rng), coord(rng), coord(rng)};
        CHECK(g.coord_at(g.center(c)) == c);
    }
}

TEST_CASE("SVXG serialization round trips") {
    const fs::path dir = fs::temp_directory_path() / "increcon_test_svxg";
    fs::create_directories(dir);
    const std::string path = (dir / "vol.svxg").string();

    SUBCASE("tsdf payload") {
        auto g = tsdf_grid_with({{{1, 2, 3}, {0.75f, -0.25f}}, {{-4, 0, 9}, {0.25f, 1.0f}}}, 2);
        g.origin = Vec3(0.16, 0, -0.32);
        save_volume(path, g);
        CHECK(peek_volume_kind(path) == kPayloadTsdf);
        const auto r = load_tsdf_volume(path);
        CHECK(r.level == 2);
        CHECK(r.voxel_size == doctest::Approx(0.08));
        CHECK((r.origin - g.origin).norm() < 1e-6);
        REQUIRE(r.cells.size() == 2);
        CHECK(r.cells.at({1, 2, 3}).o == 0.75f);
        CHECK(r.cells.at({-4, 0, 9}).x == 1.0f);
    }

    SUBCASE("weighted payload") {
        SparseVoxelGrid<WeightedTsdfVoxel> g(3, 0.04, Vec3::Zero());
        g.cells.emplace(VoxelCoord{0, 0, 0}, WeightedTsdfVoxel{0.5f, 3.0f});
        save_volume(path, g);
        const auto r = load_weighted_volume(path);
        CHECK(r.cells.at({0, 0, 0}).weight == 3.0f);
        CHECK_THROWS(load_tsdf_volume(path));  // kind mismatch
    }

    SUBCASE("feature payload with channel count in the kind") {
        SparseVoxelGrid<FeatureVec> g(1, 0.16, Vec3::Zero());
        g.cells.emplace(VoxelCoord{2, 2, 2}, FeatureVec{1.0f, 2.0f, 3.0f});
        save_volume(path, g);
        CHECK(peek_volume_kind(path) == kPayloadFeatureBase + 3);
        const auto r = load_feature_volume(path);
        CHECK(r.cells.at({2, 2, 2}) == FeatureVec{1.0f, 2.0f, 3.0f});
    }

    SUBCASE("bad magic and truncation") {
        {
            std::ofstream os(path, std::ios::binary);
            os << "NOPE garbage";
        }
        CHECK_THROWS_WITH_AS(load_tsdf_volume(path), doctest::Contains("magic"),
                             std::runtime_error);

        auto g = tsdf_grid_with({{{0, 0, 0}, {1.0f, 0.0f}}});
        save_volume(path, g);
        const auto full = fs::file_size(path);
        fs::resize_file(path, full - 4);
        CHECK_THROWS_WITH_AS(load_tsdf_volume(path), doctest::Contains("truncated"),
                             std::runtime_error);
    }

    fs::remove_all(dir);
}
