#pragma once

#include "increcon/geometry.hpp"
#include "increcon/meshing.hpp"

#include <string>
#include <variant>
#include <vector>

namespace increcon::synth {

// Solid primitives; the scene is their union (SDF = min).
struct SpherePrim {
    Vec3 center = Vec3::Zero();
    double radius = 0.5;
};
struct BoxPrim {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3(0.5, 0.5, 0.5);
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
};
// Solid between two parallel planes: normal.dot(p) in [offset_min, offset_max].
struct SlabPrim {
    Vec3 normal = Vec3(0, 0, 1);
    double offset_min = -0.1;
    double offset_max = 0.0;
};

using Primitive = std::variant<SpherePrim, BoxPrim, SlabPrim>;

struct SceneSpec {
    std::vector<Primitive> primitives;
    Vec3 bounds_min = Vec3(-2, -2, -2);  // sampling region for GT meshing
    Vec3 bounds_max = Vec3(2, 2, 2);
    uint64_t seed = 0;

    void validate() const;
};

SceneSpec load_scene(const std::string& path);
void save_scene(const SceneSpec& spec, const std::string& path);

double primitive_sdf(const Primitive& prim, const Vec3& p);
// Union of solids; negative inside.
double scene_sdf(const SceneSpec& spec, const Vec3& p);

// Sphere-traced depth render; records camera-frame z, 0 on miss.
// Optional zero-mean Gaussian noise with the given sigma (seeded).
ImageF render_gt_depth(const SceneSpec& spec, const Pose& pose, const Intrinsics& intr,
                       double d_max, double noise_sigma = 0.0, uint64_t noise_seed = 0);

// Marching cubes over a dense sampling of the scene SDF (clamped to
// +-lambda) inside the spec bounds.
TriangleMesh gt_mesh(const SceneSpec& spec, double voxel_size, double lambda = 0.12);

enum class TrajectoryKind { Orbit, ScanLine };

struct TrajectoryParams {
    TrajectoryKind kind = TrajectoryKind::Orbit;
    int n_frames = 60;
    double radius = 1.0;       // orbit radius / scan-line length scale
    double height = 0.0;       // camera height offset from scene centroid
    double height_wobble = 0.0;  // sinusoidal height variation over the orbit
    int key_stride = 1;        // every key_stride-th step takes the large motion
    double minor_scale = 0.05; // fraction of the large step used between key steps
};

Vec3 scene_centroid(const SceneSpec& spec);
std::vector<Pose> scripted_trajectory(const SceneSpec& spec, const TrajectoryParams& params);

// Renders and writes a complete dataset (trajectory, intrinsics, depth PNGs,
// GT mesh) consumable by ingest_sequence.
struct DatasetPaths {
    std::string trajectory;
    std::string intrinsics;
    std::string image_dir;
    std::string gt_mesh;
};
DatasetPaths write_dataset(const SceneSpec& spec, const TrajectoryParams& traj,
                           const Intrinsics& intr, double d_max, const std::string& out_dir,
                           double gt_voxel = 0.02, double noise_sigma = 0.0);

}  // namespace increcon::synth
