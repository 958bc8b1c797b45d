#pragma once

#include "increcon/geometry.hpp"
#include "increcon/image.hpp"
#include "increcon/voxel_grid.hpp"

#include <array>
#include <string>
#include <vector>

namespace increcon {

struct TriangleMesh {
    std::vector<Vec3f> vertices;  // meters, world frame
    std::vector<std::array<uint32_t, 3>> triangles;
    std::vector<Vec3f> normals;  // optional, per vertex

    bool empty() const { return triangles.empty(); }
};

// Zero iso-surface over cubes of 8 mutually occupied voxel centers. Cubes with
// any missing corner are skipped; TsdfVoxel/GlobalTsdfCell corners with
// o < theta and WeightedTsdfVoxel corners with weight <= 0 count as missing.
TriangleMesh marching_cubes(const SparseVoxelGrid<TsdfVoxel>& grid, double iso = 0.0,
                            double theta = 0.5);
TriangleMesh marching_cubes(const SparseVoxelGrid<WeightedTsdfVoxel>& grid, double iso = 0.0);
TriangleMesh marching_cubes(const SparseVoxelGrid<GlobalTsdfCell>& grid, double iso = 0.0,
                            double theta = 0.5);

void compute_vertex_normals(TriangleMesh& mesh);

// Rasterizes the mesh into a camera-frame z buffer (meters, 0 = no hit).
// Back-face culling disabled; triangles are clipped at a small near plane.
ImageF render_depth(const TriangleMesh& mesh, const Pose& pose, const Intrinsics& intr);

enum class MeshFormat { Ply, Obj };

MeshFormat mesh_format_for_path(const std::string& path);
void write_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format);
TriangleMesh read_mesh(const std::string& path);

namespace ref {
// Serial reference implementations kept for testing the OpenMP kernels.
TriangleMesh marching_cubes(const SparseVoxelGrid<TsdfVoxel>& grid, double iso = 0.0,
                            double theta = 0.5);
ImageF render_depth(const TriangleMesh& mesh, const Pose& pose, const Intrinsics& intr);
}  // namespace ref

}  // namespace increcon
