#pragma once

#include "increcon/geometry.hpp"
#include "increcon/image.hpp"
#include "increcon/meshing.hpp"

#include <optional>
#include <string>
#include <vector>

namespace increcon::metrics {

struct Metrics3D {
    double acc = 0;     // mean pred-sample -> gt distance (m)
    double comp = 0;    // mean gt-sample -> pred distance (m)
    double prec = 0;    // fraction of pred samples within tau
    double recall = 0;  // fraction of gt samples within tau
    double fscore = 0;  // harmonic mean
    double tau = 0.05;
};

struct Metrics2D {
    double abs_rel = 0;
    double abs_diff = 0;
    double sq_rel = 0;
    double rmse = 0;
    double rmse_log = 0;
    double sc_inv = 0;
    double delta_125 = 0;  // fraction with max(p/g, g/p) < 1.25
    double comp = 0;       // fraction of gt-valid pixels with a prediction
};

double fscore_from(double prec, double recall);

// Area-uniform point samples (seeded, deterministic).
std::vector<Vec3> sample_mesh_points(const TriangleMesh& mesh, int n_samples, uint64_t seed);

Metrics3D eval_3d(const TriangleMesh& pred, const TriangleMesh& gt, double tau = 0.05,
                  int n_samples = 200000, uint64_t seed = 0);

Metrics2D eval_2d(const ImageF& pred_depth, const ImageF& gt_depth, double min_depth = 1e-3);

struct SequenceReport {
    Metrics3D geometry;
    std::vector<std::pair<int, Metrics2D>> per_frame;  // (frame index, metrics)
    Metrics2D mean_2d;
    int interval = 10;
};

// Renders the reconstructed mesh at every interval-th frame pose (at least
// frame 0), evaluates 2-D depth metrics against the frames' depth images and
// 3-D geometry metrics once.
SequenceReport eval_sequence(const TriangleMesh& recon, const TriangleMesh& gt_mesh,
                             const std::vector<Frame>& frames, int interval = 10,
                             double tau = 0.05, int n_samples = 200000, uint64_t seed = 0);

std::string report_to_json(const SequenceReport& report, const std::string& config_echo,
                           const std::string& meta);
std::string report_to_csv(const SequenceReport& report);

namespace ref {
// Brute-force nearest-neighbor distances, kept as the spatial-index oracle.
std::vector<double> nn_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to);
}

}  // namespace increcon::metrics
