#include "increcon/bench.hpp"
#include "increcon/config.hpp"
#include "increcon/dataset.hpp"
#include "increcon/meshing.hpp"
#include "increcon/metrics.hpp"
#include "increcon/pipeline.hpp"
#include "increcon/synth.hpp"
#include "increcon/tsdf_fusion.hpp"

#include "selftest_checks.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace increcon;

namespace {

constexpr const char* kVersion = "increcon 0.1.0";

struct GlobalOpts {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    bool json_output = false;
    bool force = false;
};

PipelineConfig effective_config(const GlobalOpts& g) {
    PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
    if (g.seed_given) cfg.seed = g.seed;
    return cfg;
}

void apply_threads(const GlobalOpts& g) {
#ifdef _OPENMP
    if (g.threads > 0) omp_set_num_threads(g.threads);
#endif
}

void check_output(const std::string& path, bool force) {
    if (fs::exists(path) && !force)
        fail("output exists, pass --force to overwrite: ", path);
}

void write_manifest(const std::string& dir, const std::string& command,
                    const PipelineConfig& cfg, const json& inputs, const json& outputs,
                    uint64_t seed) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["config"] = config_to_text(cfg);
    fs::create_directories(dir);
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << m.dump(2) << '\n';
}

std::vector<Frame> ingest_dir(const std::string& data_dir) {
    return ingest_sequence((fs::path(data_dir) / "trajectory.txt").string(),
                           (fs::path(data_dir) / "intrinsics.txt").string(),
                           (fs::path(data_dir) / "depth").string());
}

// --- synth ---

struct SynthArgs {
    std::string scene_path, out_dir;
    int n_frames = 60;
    std::string trajectory = "orbit";
    double radius = 1.0, height = 0.0, wobble = 0.0, minor_scale = 0.05;
    int key_stride = 1;
    double fov_deg = 60.0, gt_voxel = 0.02, noise_sigma = 0.0;
    int width = 640, height_px = 480;
};

int cmd_synth(const GlobalOpts& g, const SynthArgs& a) {
    const PipelineConfig cfg = effective_config(g);
    if (!fs::exists(a.scene_path)) fail("spec not found: ", a.scene_path);
    if (fs::exists(a.out_dir) && !fs::is_empty(a.out_dir) && !g.force)
        fail("output directory is not empty, pass --force: ", a.out_dir);

    synth::SceneSpec spec = synth::load_scene(a.scene_path);
    if (g.seed_given) spec.seed = g.seed;

    synth::TrajectoryParams traj;
    traj.kind = a.trajectory == "orbit" ? synth::TrajectoryKind::Orbit
                                        : synth::TrajectoryKind::ScanLine;
    if (a.trajectory != "orbit" && a.trajectory != "scan-line")
        fail("unknown trajectory kind '", a.trajectory, "' (orbit|scan-line)");
    traj.n_frames = a.n_frames;
    traj.radius = a.radius;
    traj.height = a.height;
    traj.height_wobble = a.wobble;
    traj.key_stride = a.key_stride;
    traj.minor_scale = a.minor_scale;

    Intrinsics intr;
    intr.width = a.width;
    intr.height = a.height_px;
    intr.fx = intr.fy = (a.width * 0.5) / std::tan(deg_to_rad(a.fov_deg) * 0.5);
    intr.cx = a.width * 0.5;
    intr.cy = a.height_px * 0.5;
    intr.validate();

    const synth::DatasetPaths paths =
        synth::write_dataset(spec, traj, intr, cfg.d_max, a.out_dir, a.gt_voxel, a.noise_sigma);

    write_manifest(a.out_dir, "synth", cfg, {{"scene", a.scene_path}},
                   {{"trajectory", paths.trajectory},
                    {"intrinsics", paths.intrinsics},
                    {"image_dir", paths.image_dir},
                    {"gt_mesh", paths.gt_mesh}},
                   spec.seed);
    std::cout << "wrote " << a.n_frames << " frames + GT mesh to " << a.out_dir << "\n";
    return 0;
}

// --- reconstruct / fuse-depth ---

struct ReconArgs {
    std::string data_dir, weights_path, out_mesh, out_volume, out_stats;
    std::string fusion, area, baseline;
    int views = 0;
    bool final_mesh_only = false;
};

int run_baseline_fusion(const GlobalOpts& g, const ReconArgs& a, const PipelineConfig& cfg) {
    const std::vector<Frame> frames = ingest_dir(a.data_dir);
    const auto grid = fusion::fuse_sequence(frames, cfg.lambda, cfg.d_max, cfg.voxel_size,
                                            cfg.w_max);
    const TriangleMesh mesh = marching_cubes(grid);
    write_mesh(mesh, a.out_mesh, mesh_format_for_path(a.out_mesh));
    if (!a.out_volume.empty()) {
        check_output(a.out_volume, g.force);
        save_volume(a.out_volume, grid);
    }
    write_manifest(fs::path(a.out_mesh).parent_path().string(), "fuse-depth", cfg,
                   {{"data", a.data_dir}}, {{"mesh", a.out_mesh}}, cfg.seed);
    std::cout << "fused " << frames.size() << " depth frames into " << grid.cells.size()
              << " voxels, mesh: " << mesh.triangles.size() << " triangles\n";
    return 0;
}

int cmd_reconstruct(const GlobalOpts& g, const ReconArgs& a) {
    PipelineConfig cfg = effective_config(g);
    if (!a.fusion.empty()) cfg.fusion_method = fusion_method_from_string(a.fusion);
    if (!a.area.empty()) cfg.fusion_area = fusion_area_from_string(a.area);
    if (a.views > 0) cfg.n_views = a.views;
    cfg.validate();
    check_output(a.out_mesh, g.force);

    if (!a.baseline.empty()) {
        if (a.baseline != "tsdf") fail("unknown baseline '", a.baseline, "' (expected tsdf)");
        return run_baseline_fusion(g, a, cfg);
    }

    ModelWeights model;
    if (!a.weights_path.empty()) {
        model = load_model(a.weights_path);
        model.config.strides = cfg.model.strides;
        cfg.model = model.config;
    } else {
        model = init_model(cfg.model, cfg.seed);
    }

    const std::vector<Frame> frames = ingest_dir(a.data_dir);
    const std::vector<Fragment> fragments = assemble_fragments(frames, cfg.assembly());

    pipe::ReconState state = pipe::make_state(cfg);
    json frag_stats = json::array();
    for (const Fragment& frag : fragments) {
        const auto local = pipe::reconstruct_fragment(frag, state, model, cfg);
        frag_stats.push_back({{"fragment", frag.fragment_index},
                              {"key_frames", frag.frames.size()},
                              {"voxels", local.cells.size()},
                              {"global_voxels", state.global_tsdf.cells.size()}});
        if (!a.final_mesh_only) {
            const TriangleMesh m = marching_cubes(state.global_tsdf, 0.0, cfg.theta);
            frag_stats.back()["triangles"] = m.triangles.size();
        }
        std::cout << "fragment " << frag.fragment_index << ": " << local.cells.size()
                  << " voxels, global " << state.global_tsdf.cells.size() << "\n";
    }
    if (fragments.empty())
        std::cerr << "warning: no fragments assembled, writing an empty mesh\n";

    const TriangleMesh mesh = marching_cubes(state.global_tsdf, 0.0, cfg.theta);
    write_mesh(mesh, a.out_mesh, mesh_format_for_path(a.out_mesh));
    if (!a.out_volume.empty()) {
        check_output(a.out_volume, g.force);
        save_volume(a.out_volume, state.global_tsdf);
    }
    if (!a.out_stats.empty()) {
        std::ofstream os(a.out_stats);
        os << json{{"fragments", frag_stats}, {"triangles", mesh.triangles.size()}}.dump(2)
           << '\n';
    }
    write_manifest(fs::path(a.out_mesh).parent_path().string(), "reconstruct", cfg,
                   {{"data", a.data_dir}, {"weights", a.weights_path}}, {{"mesh", a.out_mesh}},
                   cfg.seed);
    std::cout << "reconstructed " << fragments.size() << " fragments -> "
              << mesh.triangles.size() << " triangles\n";
    return 0;
}

// --- eval ---

struct EvalArgs {
    std::string pred_mesh, gt_mesh, data_dir, report_path, csv_path;
    int interval = 10;
    double tau = 0.05;
    int samples = 200000;
};

int cmd_eval(const GlobalOpts& g, const EvalArgs& a) {
    const PipelineConfig cfg = effective_config(g);
    const TriangleMesh pred = read_mesh(a.pred_mesh);
    const TriangleMesh gt = read_mesh(a.gt_mesh);
    const std::vector<Frame> frames = ingest_dir(a.data_dir);

    const metrics::SequenceReport rep =
        metrics::eval_sequence(pred, gt, frames, a.interval, a.tau, a.samples, cfg.seed);

    const json meta = {{"pred", a.pred_mesh}, {"gt", a.gt_mesh}, {"data", a.data_dir},
                       {"version", kVersion}};
    const std::string report = metrics::report_to_json(rep, config_to_text(cfg), meta.dump());
    if (!a.report_path.empty()) {
        check_output(a.report_path, g.force);
        std::ofstream os(a.report_path);
        os << report << '\n';
    }
    if (!a.csv_path.empty()) {
        check_output(a.csv_path, g.force);
        std::ofstream os(a.csv_path);
        os << metrics::report_to_csv(rep);
    }
    if (g.json_output || a.report_path.empty()) std::cout << report << "\n";
    std::cout << "fscore " << rep.geometry.fscore << " (prec " << rep.geometry.prec << ", recall "
              << rep.geometry.recall << "), abs_rel " << rep.mean_2d.abs_rel << "\n";
    return 0;
}

// --- bench ---

struct BenchArgs {
    std::string data_dir, weights_path, out_base;
    int repeats = 3;
    std::vector<int64_t> sweep_voxels;
    int sweep_channels = 16;
};

int cmd_bench(const GlobalOpts& g, const BenchArgs& a) {
    PipelineConfig cfg = effective_config(g);
    ModelWeights model;
    if (!a.weights_path.empty()) {
        model = load_model(a.weights_path);
        model.config.strides = cfg.model.strides;
        cfg.model = model.config;
    } else {
        model = init_model(cfg.model, cfg.seed);
    }
    const std::vector<Frame> frames = ingest_dir(a.data_dir);
    const bench::StageSummary summary = bench::run_benchmark(frames, model, cfg, a.repeats);
    const std::vector<bench::SweepPoint> sweep =
        a.sweep_voxels.empty()
            ? std::vector<bench::SweepPoint>{}
            : bench::sparse_conv_sweep(a.sweep_voxels, a.sweep_channels, std::max(a.repeats, 3),
                                       cfg.seed);

    const std::string js = bench::summary_to_json(summary, sweep);
    const std::string csv = bench::summary_to_csv(summary, sweep);
    if (!a.out_base.empty()) {
        std::ofstream(a.out_base + ".json") << js << '\n';
        std::ofstream(a.out_base + ".csv") << csv;
    }
    std::cout << (g.json_output ? js : csv) << "\n";
    return 0;
}

// --- selftest ---

int cmd_selftest(const GlobalOpts& g) {
    const auto results = selftest::run_selftest();
    bool all_ok = true;
    if (g.json_output) {
        json j = json::array();
        for (const auto& r : results) {
            j.push_back({{"name", r.name},
                         {"passed", r.passed},
                         {"value", r.value},
                         {"threshold", r.threshold},
                         {"detail", r.detail}});
            all_ok = all_ok && r.passed;
        }
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& r : results) {
            std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << "  value=" << r.value
                      << " threshold=" << r.threshold << "  (" << r.detail << ")\n";
            all_ok = all_ok && r.passed;
        }
    }
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"incremental sparse-TSDF reconstruction toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "pipeline config file (key=value)");
    auto* seed_opt = app.add_option("--seed", g.seed, "seed for all stochastic paths");
    app.add_option("--threads", g.threads, "OpenMP thread count (0 = default)");
    app.add_flag("--json", g.json_output, "machine-readable output");
    app.add_flag("--force", g.force, "overwrite existing outputs");

    SynthArgs sa;
    auto* synth_cmd = app.add_subcommand("synth", "render a synthetic dataset from a scene spec");
    synth_cmd->add_option("--scene", sa.scene_path, "scene spec JSON")->required();
    synth_cmd->add_option("--out", sa.out_dir, "output directory")->required();
    synth_cmd->add_option("--frames", sa.n_frames, "number of frames");
    synth_cmd->add_option("--trajectory", sa.trajectory, "orbit|scan-line");
    synth_cmd->add_option("--radius", sa.radius, "trajectory radius (m)");
    synth_cmd->add_option("--height", sa.height, "camera height offset (m)");
    synth_cmd->add_option("--wobble", sa.wobble, "orbit height wobble (m)");
    synth_cmd->add_option("--key-stride", sa.key_stride, "frames per large motion step");
    synth_cmd->add_option("--minor-scale", sa.minor_scale, "small-step fraction");
    synth_cmd->add_option("--fov-deg", sa.fov_deg, "horizontal field of view");
    synth_cmd->add_option("--width", sa.width, "image width (px)");
    synth_cmd->add_option("--height-px", sa.height_px, "image height (px)");
    synth_cmd->add_option("--gt-voxel", sa.gt_voxel, "GT mesh sampling voxel (m)");
    synth_cmd->add_option("--noise-sigma", sa.noise_sigma, "depth noise sigma (m)");

    ReconArgs ra;
    auto* rec_cmd = app.add_subcommand("reconstruct", "run the fragment reconstruction pipeline");
    rec_cmd->add_option("--data", ra.data_dir, "dataset directory")->required();
    rec_cmd->add_option("--weights", ra.weights_path, "weight file (seeded random if omitted)");
    rec_cmd->add_option("--out", ra.out_mesh, "output mesh (.ply/.obj)")->required();
    rec_cmd->add_option("--volume", ra.out_volume, "also write the global volume (.svxg)");
    rec_cmd->add_option("--stats", ra.out_stats, "per-fragment stats JSON");
    rec_cmd->add_option("--fusion", ra.fusion, "gru|avg|linear");
    rec_cmd->add_option("--area", ra.area, "occ|fbv");
    rec_cmd->add_option("--views", ra.views, "key frames per fragment");
    rec_cmd->add_option("--baseline", ra.baseline, "route to classical fusion (tsdf)");
    rec_cmd->add_flag("--final-mesh-only", ra.final_mesh_only,
                      "skip per-fragment marching cubes");

    ReconArgs fa;
    auto* fuse_cmd = app.add_subcommand("fuse-depth", "classical running-average TSDF fusion");
    fuse_cmd->add_option("--data", fa.data_dir, "dataset directory")->required();
    fuse_cmd->add_option("--out", fa.out_mesh, "output mesh (.ply/.obj)")->required();
    fuse_cmd->add_option("--volume", fa.out_volume, "also write the volume (.svxg)");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a reconstruction against ground truth");
    eval_cmd->add_option("--pred", ea.pred_mesh, "predicted mesh")->required();
    eval_cmd->add_option("--gt", ea.gt_mesh, "ground-truth mesh")->required();
    eval_cmd->add_option("--data", ea.data_dir, "dataset directory (poses + depth)")->required();
    eval_cmd->add_option("--interval", ea.interval, "evaluate every n-th frame");
    eval_cmd->add_option("--tau", ea.tau, "distance threshold (m)");
    eval_cmd->add_option("--samples", ea.samples, "surface samples per mesh");
    eval_cmd->add_option("--report", ea.report_path, "write report JSON here");
    eval_cmd->add_option("--csv", ea.csv_path, "write CSV here");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "per-stage timing harness");
    bench_cmd->add_option("--data", ba.data_dir, "dataset directory")->required();
    bench_cmd->add_option("--weights", ba.weights_path, "weight file");
    bench_cmd->add_option("--repeats", ba.repeats, "timing repeats");
    bench_cmd->add_option("--sweep-voxels", ba.sweep_voxels,
                          "sparse-conv sweep sizes (voxel counts)");
    bench_cmd->add_option("--sweep-channels", ba.sweep_channels, "sweep channel count");
    bench_cmd->add_option("--out", ba.out_base, "report base path (.json/.csv appended)");

    auto* selftest_cmd = app.add_subcommand("selftest", "run built-in numerical checks");

    CLI11_PARSE(app, argc, argv);
    g.seed_given = seed_opt->count() > 0;
    apply_threads(g);

    try {
        if (*synth_cmd) return cmd_synth(g, sa);
        if (*rec_cmd) return cmd_reconstruct(g, ra);
        if (*fuse_cmd) {
            const PipelineConfig cfg = effective_config(g);
            check_output(fa.out_mesh, g.force);
            return run_baseline_fusion(g, fa, cfg);
        }
        if (*eval_cmd) return cmd_eval(g, ea);
        if (*bench_cmd) return cmd_bench(g, ba);
        if (*selftest_cmd) return cmd_selftest(g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
