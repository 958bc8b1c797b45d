#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// End-to-end exercises of the installed CLI binary (path via INCRECON_BIN).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* env = std::getenv("INCRECON_BIN");
    REQUIRE_MESSAGE(env != nullptr, "INCRECON_BIN must point at the increcon binary");
    return env;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "increcon_cli_e2e") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli end-to-end: synth, fuse, reconstruct, eval, determinism") {
    TempDir tmp;
    const fs::path scene = tmp.path / "scene.json";
    {
        std::ofstream os(scene);
        os << R"({"seed": 1,
                  "bounds": {"min": [-0.8,-0.8,-0.8], "max": [0.8,0.8,0.8]},
                  "primitives": [{"type": "sphere", "center": [0,0,0], "radius": 0.45}]})";
    }
    const fs::path config = tmp.path / "pipeline.cfg";
    {
        std::ofstream os(config);
        os << "feat_channels=4,4,6\ngeo_channels=4,4,6\nmlp_hidden=8\nn_views=3\n";
        os << "keyframe_mode=disjunction\n";
    }
    const std::string data = (tmp.path / "data").string();

    // spec not found -> nonzero exit
    CHECK(run("synth --scene " + (tmp.path / "missing.json").string() + " --out " + data) != 0);

    CHECK(run("synth --scene " + scene.string() + " --out " + data +
              " --frames 8 --radius 1.3 --width 160 --height-px 120 --fov-deg 45"
              " --gt-voxel 0.03") == 0);
    CHECK(fs::exists(data + "/trajectory.txt"));
    CHECK(fs::exists(data + "/intrinsics.txt"));
    CHECK(fs::exists(data + "/gt_mesh.ply"));
    CHECK(fs::exists(data + "/manifest.json"));
    CHECK(fs::exists(data + "/depth/000007.png"));

    // refuse to overwrite a non-empty output dir without --force
    CHECK(run("synth --scene " + scene.string() + " --out " + data + " --frames 8") != 0);
    CHECK(run("--force synth --scene " + scene.string() + " --out " + data +
              " --frames 8 --radius 1.3 --width 160 --height-px 120 --fov-deg 45"
              " --gt-voxel 0.03") == 0);

    // classical fusion baseline
    const std::string fused = (tmp.path / "fused.ply").string();
    CHECK(run("fuse-depth --data " + data + " --out " + fused) == 0);
    CHECK(fs::exists(fused));

    // eval the fused mesh against GT
    const std::string report = (tmp.path / "report.json").string();
    CHECK(run("eval --pred " + fused + " --gt " + data + "/gt_mesh.ply --data " + data +
              " --interval 4 --samples 20000 --report " + report) == 0);
    CHECK(slurp(report).find("fscore") != std::string::npos);

    // learned-pipeline reconstruct with seeded random weights, twice: identical bytes
    const std::string mesh_a = (tmp.path / "a.ply").string();
    const std::string mesh_b = (tmp.path / "b.ply").string();
    const std::string common = " reconstruct --data " + data + " --final-mesh-only";
    CHECK(run("--config " + config.string() + " --seed 7" + common + " --out " + mesh_a) == 0);
    CHECK(run("--config " + config.string() + " --seed 7" + common + " --out " + mesh_b) == 0);
    CHECK(slurp(mesh_a) == slurp(mesh_b));

    // ablation toggles are accepted
    CHECK(run("--config " + config.string() + " --seed 7 --force" + common +
              " --fusion avg --area occ --out " + mesh_b) == 0);
    CHECK(run("--config " + config.string() + " --seed 7 --force" + common +
              " --baseline tsdf --out " + mesh_b) == 0);

    // bench emits reports
    const std::string bench_base = (tmp.path / "bench").string();
    CHECK(run("--config " + config.string() + " bench --data " + data +
              " --repeats 2 --out " + bench_base) == 0);
    CHECK(slurp(bench_base + ".json").find("sparse_conv_ms") != std::string::npos);
    CHECK(slurp(bench_base + ".csv").find("ms_per_keyframe") != std::string::npos);

    // eval with a missing gt mesh fails
    CHECK(run("eval --pred " + fused + " --gt " + (tmp.path / "nope.ply").string() +
              " --data " + data + " --report " + (tmp.path / "r2.json").string()) != 0);
}
