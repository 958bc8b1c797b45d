#include "increcon/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace increcon {

void Intrinsics::validate() const {
    if (!(fx > 0) || !(fy > 0)) fail("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) fail("intrinsics: image dimensions must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
        fail("intrinsics: principal point outside image");
}

Pose Pose::from_quaternion(double qx, double qy, double qz, double qw, const Vec3& t) {
    Eigen::Quaterniond q(qw, qx, qy, qz);
    const double n = q.norm();
    if (std::abs(n - 1.0) > 1e-3) fail("quaternion norm ", n, " deviates from 1 beyond 1e-3");
    q.normalize();
    return {q.toRotationMatrix(), t};
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    Vec3 z = (target - eye).normalized();  // camera +z looks at target
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-9) x = z.cross(Vec3(0, 1, 0));
    x.normalize();
    Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {r, eye};
}

double Pose::orthonormality_error() const {
    Mat3 e = rotation.transpose() * rotation - Mat3::Identity();
    return e.cwiseAbs().maxCoeff();
}

void Pose::validate() const {
    if (orthonormality_error() >= 1e-6) fail("pose rotation is not orthonormal");
    if (rotation.determinant() < 0) fail("pose rotation has negative determinant");
}

RelativeMotion relative_motion(const Pose& a, const Pose& b) {
    const Mat3 r_rel = a.rotation.transpose() * b.rotation;
    const Vec3 t_rel = a.rotation.transpose() * (b.translation - a.translation);
    double c = (r_rel.trace() - 1.0) * 0.5;
    c = std::clamp(c, -1.0, 1.0);
    return {t_rel.norm(), rad_to_deg(std::acos(c))};
}

bool select_keyframe(const Pose& last_keyframe, const Pose& candidate, double t_max,
                     double r_max_deg, KeyframeMode mode) {
    const RelativeMotion m = relative_motion(last_keyframe, candidate);
    const bool t_ok = m.translation_m > t_max;
    const bool r_ok = m.rotation_deg > r_max_deg;
    return mode == KeyframeMode::Conjunction ? (t_ok && r_ok) : (t_ok || r_ok);
}

std::vector<Vec3> frustum_corners(const Pose& pose, const Intrinsics& intr, double d_max) {
    std::vector<Vec3> pts;
    pts.reserve(8);
    // Near plane at depth 0: all four corners collapse onto the camera center.
    for (int i = 0; i < 4; ++i) pts.push_back(pose.translation);
    const double us[2] = {0.0, double(intr.width)};
    const double vs[2] = {0.0, double(intr.height)};
    for (double u : us)
        for (double v : vs) pts.push_back(pose.to_world(intr.unproject(u, v, d_max)));
    return pts;
}

Fbv compute_fbv(std::span<const Frame> frames, double d_max, double coarse_voxel_size) {
    if (frames.empty()) fail("compute_fbv: empty frame list");
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const Frame& f : frames) {
        for (const Vec3& p : frustum_corners(f.pose, f.intrinsics, d_max)) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }
    const Vec3 center = 0.5 * (lo + hi);
    const double extent = (hi - lo).maxCoeff();
    const double vs = coarse_voxel_size;

    double side = std::ceil(extent / vs - 1e-9) * vs;
    Vec3 mn;
    for (int d = 0; d < 3; ++d) mn[d] = std::floor((center[d] - side * 0.5) / vs + 1e-9) * vs;
    // Snapping the min corner down can leave the top short of the raw AABB.
    for (bool grew = true; grew;) {
        grew = false;
        for (int d = 0; d < 3; ++d)
            if (mn[d] + side < hi[d]) {
                side += vs;
                grew = true;
                break;
            }
    }
    return {mn, side};
}

}  // namespace increcon
