#include "increcon/synth.hpp"

#include "increcon/dataset.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;

namespace increcon::synth {

void SceneSpec::validate() const {
    if (primitives.empty()) fail("scene has no primitives");
    for (const Primitive& prim : primitives) {
        if (const auto* s = std::get_if<SpherePrim>(&prim)) {
            if (!(s->radius > 0)) fail("sphere radius must be positive");
        } else if (const auto* b = std::get_if<BoxPrim>(&prim)) {
            if (!(b->half_extents.minCoeff() > 0)) fail("box half extents must be positive");
        } else if (const auto* sl = std::get_if<SlabPrim>(&prim)) {
            if (!(sl->offset_max > sl->offset_min)) fail("slab offsets must satisfy min < max");
            if (sl->normal.norm() < 1e-9) fail("slab normal must be nonzero");
        }
    }
    if (!((bounds_max - bounds_min).minCoeff() > 0)) fail("scene bounds are empty");
}

namespace {

Vec3 get_vec3(const json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) fail("scene field '", key, "' must be a 3-array");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

SceneSpec load_scene(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("spec not found: ", path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail("invalid scene JSON in ", path, ": ", e.what());
    }
    SceneSpec spec;
    try {
        spec.seed = j.value("seed", uint64_t(0));
        if (j.contains("bounds")) {
            spec.bounds_min = get_vec3(j["bounds"], "min");
            spec.bounds_max = get_vec3(j["bounds"], "max");
        }
        for (const json& p : j.at("primitives")) {
            const std::string type = p.at("type").get<std::string>();
            if (type == "sphere") {
                SpherePrim s;
                s.center = get_vec3(p, "center");
                s.radius = p.at("radius").get<double>();
                spec.primitives.push_back(s);
            } else if (type == "box") {
                BoxPrim b;
                b.center = get_vec3(p, "center");
                b.half_extents = get_vec3(p, "half_extents");
                if (p.contains("rotation")) {
                    const auto& q = p["rotation"];
                    b.rotation = Eigen::Quaterniond(q.at(3).get<double>(), q.at(0).get<double>(),
                                                    q.at(1).get<double>(), q.at(2).get<double>())
                                     .normalized();
                }
                spec.primitives.push_back(b);
            } else if (type == "slab") {
                SlabPrim s;
                s.normal = get_vec3(p, "normal").normalized();
                s.offset_min = p.at("offset_min").get<double>();
                s.offset_max = p.at("offset_max").get<double>();
                spec.primitives.push_back(s);
            } else {
                fail("unknown primitive type '", type, "' in ", path);
            }
        }
    } catch (const json::exception& e) {
        fail("invalid scene schema in ", path, ": ", e.what());
    }
    spec.validate();
    return spec;
}

void save_scene(const SceneSpec& spec, const std::string& path) {
    json j;
    j["seed"] = spec.seed;
    j["bounds"] = {{"min", vec3_json(spec.bounds_min)}, {"max", vec3_json(spec.bounds_max)}};
    j["primitives"] = json::array();
    for (const Primitive& prim : spec.primitives) {
        json p;
        if (const auto* s = std::get_if<SpherePrim>(&prim)) {
            p = {{"type", "sphere"}, {"center", vec3_json(s->center)}, {"radius", s->radius}};
        } else if (const auto* b = std::get_if<BoxPrim>(&prim)) {
            p = {{"type", "box"},
                 {"center", vec3_json(b->center)},
                 {"half_extents", vec3_json(b->half_extents)},
                 {"rotation",
                  json::array({b->rotation.x(), b->rotation.y(), b->rotation.z(), b->rotation.w()})}};
        } else if (const auto* sl = std::get_if<SlabPrim>(&prim)) {
            p = {{"type", "slab"},
                 {"normal", vec3_json(sl->normal)},
                 {"offset_min", sl->offset_min},
                 {"offset_max", sl->offset_max}};
        }
        j["primitives"].push_back(p);
    }
    std::ofstream os(path);
    if (!os) fail("cannot write scene: ", path);
    os << j.dump(2) << '\n';
}

double primitive_sdf(const Primitive& prim, const Vec3& p) {
    if (const auto* s = std::get_if<SpherePrim>(&prim)) {
        return (p - s->center).norm() - s->radius;
    }
    if (const auto* b = std::get_if<BoxPrim>(&prim)) {
        const Vec3 local = b->rotation.conjugate() * (p - b->center);
        const Vec3 q = local.cwiseAbs() - b->half_extents;
        const double outside = q.cwiseMax(0.0).norm();
        const double inside = std::min(q.maxCoeff(), 0.0);
        return outside + inside;
    }
    const auto& sl = std::get<SlabPrim>(prim);
    const double d = sl.normal.dot(p);
    const double mid = 0.5 * (sl.offset_min + sl.offset_max);
    const double half = 0.5 * (sl.offset_max - sl.offset_min);
    return std::abs(d - mid) - half;
}

double scene_sdf(const SceneSpec& spec, const Vec3& p) {
    double best = std::numeric_limits<double>::max();
    for (const Primitive& prim : spec.primitives) best = std::min(best, primitive_sdf(prim, p));
    return best;
}

ImageF render_gt_depth(const SceneSpec& spec, const Pose& pose, const Intrinsics& intr,
                       double d_max, double noise_sigma, uint64_t noise_seed) {
    constexpr double kHitTol = 1e-4;
    constexpr int kMaxSteps = 512;
    ImageF depth(intr.width, intr.height, 0.0f);

#pragma omp parallel for schedule(dynamic, 8)
    for (int v = 0; v < intr.height; ++v) {
        for (int u = 0; u < intr.width; ++u) {
            const Vec3 dir_cam = intr.unproject(double(u), double(v), 1.0);
            const double ray_per_z = dir_cam.norm();  // ray length per unit of camera z
            const Vec3 dir = (pose.rotation * dir_cam).normalized();
            const double t_max = d_max * ray_per_z;
            auto sdf_at = [&](double t) {
                return scene_sdf(spec, pose.translation + t * dir);
            };

            double t = 0.0;
            double hit_t = -1.0;
            for (int step = 0; step < kMaxSteps && t <= t_max; ++step) {
                const double d = sdf_at(t);
                if (d < kHitTol) {
                    hit_t = t;
                    break;
                }
                t += d;
            }
            if (hit_t < 0) continue;

            // The march stops short at grazing incidence. Walk in small fixed
            // steps until the SDF changes sign, then bisect the crossing.
            double t_out = hit_t, t_in = -1.0;
            if (sdf_at(hit_t) <= 0) {
                t_in = hit_t;
                t_out = std::max(0.0, hit_t - kHitTol);
            } else {
                const double micro = 2e-4;
                double tc = hit_t;
                for (int k = 0; k < 200 && tc <= t_max; ++k) {
                    const double tn = tc + micro;
                    if (sdf_at(tn) <= 0) {
                        t_out = tc;
                        t_in = tn;
                        break;
                    }
                    tc = tn;
                }
            }
            if (t_in < 0) continue;  // sliver thinner than the micro step: miss
            for (int k = 0; k < 40; ++k) {
                const double mid = 0.5 * (t_out + t_in);
                (sdf_at(mid) > 0 ? t_out : t_in) = mid;
            }
            const double z = 0.5 * (t_out + t_in) / ray_per_z;
            if (z > 0 && z <= d_max) depth.at(u, v) = float(z);
        }
    }

    if (noise_sigma > 0) {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (float& z : depth.px)
            if (z > 0) z = float(std::max(1e-3, double(z) + noise(rng)));
    }
    return depth;
}

TriangleMesh gt_mesh(const SceneSpec& spec, double voxel_size, double lambda) {
    SparseVoxelGrid<TsdfVoxel> grid(3, voxel_size, spec.bounds_min);
    const Vec3 span = spec.bounds_max - spec.bounds_min;
    const int ni = int(std::ceil(span.x() / voxel_size));
    const int nj = int(std::ceil(span.y() / voxel_size));
    const int nk = int(std::ceil(span.z() / voxel_size));

    std::vector<std::pair<VoxelCoord, TsdfVoxel>> cells(size_t(ni) * nj * nk);
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < ni; ++i) {
        for (int j = 0; j < nj; ++j) {
            for (int k = 0; k < nk; ++k) {
                const VoxelCoord c{i, j, k};
                const double sdf = scene_sdf(spec, grid.center(c));
                const float x = float(std::clamp(sdf / lambda, -1.0, 1.0));
                cells[(size_t(i) * nj + j) * nk + k] = {c, TsdfVoxel{1.0f, x}};
            }
        }
    }
    grid.cells.reserve(cells.size());
    for (const auto& [c, v] : cells) grid.cells.emplace(c, v);
    return marching_cubes(grid, 0.0, 0.5);
}

Vec3 scene_centroid(const SceneSpec& spec) {
    // centroid of primitive reference points, slabs excluded (no finite center)
    Vec3 sum = Vec3::Zero();
    int n = 0;
    for (const Primitive& prim : spec.primitives) {
        if (const auto* s = std::get_if<SpherePrim>(&prim)) {
            sum += s->center;
            ++n;
        } else if (const auto* b = std::get_if<BoxPrim>(&prim)) {
            sum += b->center;
            ++n;
        }
    }
    if (n == 0) return 0.5 * (spec.bounds_min + spec.bounds_max);
    return sum / double(n);
}

std::vector<Pose> scripted_trajectory(const SceneSpec& spec, const TrajectoryParams& params) {
    if (params.n_frames < 1) fail("scripted_trajectory: n_frames must be >= 1");
    const Vec3 centroid = scene_centroid(spec);
    std::vector<Pose> poses;
    poses.reserve(params.n_frames);

    if (params.kind == TrajectoryKind::Orbit) {
        // Major steps advance the orbit angle; minor steps (between key
        // strides) move a small fraction so they stay below the key-frame
        // thresholds by construction.
        const int majors = (params.n_frames + params.key_stride - 1) / params.key_stride;
        const double major_step = 2.0 * kPi / std::max(1, majors);
        double angle = 0.0;
        for (int i = 0; i < params.n_frames; ++i) {
            if (i > 0) {
                const bool major = params.key_stride <= 1 || (i % params.key_stride) == 0;
                angle += major ? major_step : major_step * params.minor_scale;
            }
            const double h = params.height +
                             params.height_wobble * std::sin(2.0 * angle);
            const Vec3 eye = centroid + Vec3(params.radius * std::cos(angle),
                                             params.radius * std::sin(angle), h);
            poses.push_back(Pose::look_at(eye, centroid));
        }
    } else {
        const double step = 2.0 * params.radius / std::max(1, params.n_frames - 1);
        for (int i = 0; i < params.n_frames; ++i) {
            const Vec3 eye = centroid + Vec3(-params.radius + step * i, -params.radius, params.height);
            poses.push_back(Pose::look_at(eye, eye + Vec3(0, 1, 0)));
        }
    }
    return poses;
}

DatasetPaths write_dataset(const SceneSpec& spec, const TrajectoryParams& traj,
                           const Intrinsics& intr, double d_max, const std::string& out_dir,
                           double gt_voxel, double noise_sigma) {
    fs::create_directories(fs::path(out_dir) / "depth");
    DatasetPaths paths;
    paths.trajectory = (fs::path(out_dir) / "trajectory.txt").string();
    paths.intrinsics = (fs::path(out_dir) / "intrinsics.txt").string();
    paths.image_dir = (fs::path(out_dir) / "depth").string();
    paths.gt_mesh = (fs::path(out_dir) / "gt_mesh.ply").string();

    const std::vector<Pose> poses = scripted_trajectory(spec, traj);
    save_trajectory(paths.trajectory, poses);
    save_intrinsics(paths.intrinsics, intr);
    char name[32];
    for (size_t i = 0; i < poses.size(); ++i) {
        const ImageF depth =
            render_gt_depth(spec, poses[i], intr, d_max, noise_sigma, spec.seed + i);
        std::snprintf(name, sizeof(name), "%06zu.png", i);
        write_depth_png((fs::path(paths.image_dir) / name).string(), depth);
    }
    write_mesh(gt_mesh(spec, gt_voxel), paths.gt_mesh, MeshFormat::Ply);
    save_scene(spec, (fs::path(out_dir) / "scene.json").string());
    return paths;
}

}  // namespace increcon::synth
