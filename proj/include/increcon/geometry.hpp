#pragma once

#include "increcon/core.hpp"
#include "increcon/image.hpp"

#include <span>
#include <vector>

namespace increcon {

struct Intrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;

    // Pixel (u,v) at camera depth z -> camera-frame point. Pixel centers sit
    // at integer coordinates.
    Vec3 unproject(double u, double v, double z) const {
        return {(u - cx) / fx * z, (v - cy) / fy * z, z};
    }
    // Camera-frame point -> pixel coordinates (caller checks z > 0).
    Eigen::Vector2d project(const Vec3& p_cam) const {
        return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
    }
    bool in_image(double u, double v) const {
        return u >= 0.0 && u < double(width) && v >= 0.0 && v < double(height);
    }
};

// Rigid transform mapping camera-frame points to world frame.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose from_quaternion(double qx, double qy, double qz, double qw, const Vec3& t);
    static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 0, 1));

    Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
    Vec3 to_camera(const Vec3& p_world) const {
        return rotation.transpose() * (p_world - translation);
    }
    Pose inverse() const {
        return {rotation.transpose(), -(rotation.transpose() * translation)};
    }
    // ||R^T R - I||_inf, used by the orthonormality invariant.
    double orthonormality_error() const;
    void validate() const;
};

struct Frame {
    int index = 0;
    Pose pose;
    Intrinsics intrinsics;
    ImageF image;  // grayscale feature input or depth in meters
};

// Cubic fragment bounding volume. min_corner and side_length are snapped to
// multiples of the coarsest-level voxel size.
struct Fbv {
    Vec3 min_corner = Vec3::Zero();
    double side_length = 0;

    bool contains(const Vec3& p) const {
        for (int d = 0; d < 3; ++d)
            if (p[d] < min_corner[d] || p[d] >= min_corner[d] + side_length) return false;
        return true;
    }
};

struct Fragment {
    std::vector<Frame> frames;
    Fbv fbv;
    int fragment_index = 0;
};

struct RelativeMotion {
    double translation_m = 0;
    double rotation_deg = 0;
};

// Translation norm and axis-angle rotation magnitude of a^-1 * b.
RelativeMotion relative_motion(const Pose& a, const Pose& b);

enum class KeyframeMode { Conjunction, Disjunction };

bool select_keyframe(const Pose& last_keyframe, const Pose& candidate, double t_max,
                     double r_max_deg, KeyframeMode mode = KeyframeMode::Conjunction);

// Frustum corners of one view: the camera center (near plane at depth 0,
// collapsed) plus the four image-corner rays at depth d_max.
std::vector<Vec3> frustum_corners(const Pose& pose, const Intrinsics& intr, double d_max);

// Axis-aligned cube enclosing all frustum corners of the given frames,
// snapped outward to the coarse voxel lattice.
Fbv compute_fbv(std::span<const Frame> frames, double d_max, double coarse_voxel_size);

}  // namespace increcon
