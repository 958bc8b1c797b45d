#include "increcon/metrics.hpp"

#include "increcon/voxel_grid.hpp"

#include <json.hpp>

#include <cmath>
#include <random>
#include <sstream>

namespace increcon::metrics {

double fscore_from(double prec, double recall) {
    return prec + recall > 0 ? 2.0 * prec * recall / (prec + recall) : 0.0;
}

std::vector<Vec3> sample_mesh_points(const TriangleMesh& mesh, int n_samples, uint64_t seed) {
    if (mesh.triangles.empty()) fail("cannot sample an empty mesh");
    std::vector<double> cum(mesh.triangles.size());
    double total = 0;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const Vec3 a = mesh.vertices[mesh.triangles[t][0]].cast<double>();
        const Vec3 b = mesh.vertices[mesh.triangles[t][1]].cast<double>();
        const Vec3 c = mesh.vertices[mesh.triangles[t][2]].cast<double>();
        total += 0.5 * (b - a).cross(c - a).norm();
        cum[t] = total;
    }
    if (total <= 0) fail("mesh has zero surface area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec3> points;
    points.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const double pick = uni(rng) * total;
        const size_t t = std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin();
        const auto& tri = mesh.triangles[std::min(t, mesh.triangles.size() - 1)];
        double u = uni(rng), v = uni(rng);
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3 a = mesh.vertices[tri[0]].cast<double>();
        const Vec3 b = mesh.vertices[tri[1]].cast<double>();
        const Vec3 c = mesh.vertices[tri[2]].cast<double>();
        points.push_back(a + u * (b - a) + v * (c - a));
    }
    return points;
}

namespace {

// Uniform-grid index for exact nearest-neighbor queries: rings are scanned
// outward until no farther bin can beat the best distance (a bin at Chebyshev
// distance q holds points at Euclidean distance >= (q-1)*cell).
class PointIndex {
  public:
    PointIndex(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell) {
        bins_.reserve(points.size());
        for (size_t i = 0; i < points.size(); ++i) {
            const VoxelCoord c = cell_of(points[i]);
            bins_[c].push_back(int(i));
            lo_.i = std::min(lo_.i, c.i);
            lo_.j = std::min(lo_.j, c.j);
            lo_.k = std::min(lo_.k, c.k);
            hi_.i = std::max(hi_.i, c.i);
            hi_.j = std::max(hi_.j, c.j);
            hi_.k = std::max(hi_.k, c.k);
        }
    }

    double nearest_distance(const Vec3& p) const {
        const VoxelCoord c0 = cell_of(p);
        const int ring_limit =
            std::max({std::abs(c0.i - lo_.i), std::abs(hi_.i - c0.i), std::abs(c0.j - lo_.j),
                      std::abs(hi_.j - c0.j), std::abs(c0.k - lo_.k), std::abs(hi_.k - c0.k)});
        double best_sq = std::numeric_limits<double>::max();
        for (int ring = 0; ring <= ring_limit; ++ring) {
            scan_ring(p, c0, ring, best_sq);
            const double reach = double(ring) * cell_;
            if (best_sq <= reach * reach) break;
        }
        return std::sqrt(best_sq);
    }

  private:
    void scan_ring(const Vec3& p, const VoxelCoord& c0, int ring, double& best_sq) const {
        for (int di = -ring; di <= ring; ++di) {
            for (int dj = -ring; dj <= ring; ++dj) {
                for (int dk = -ring; dk <= ring; ++dk) {
                    if (std::max({std::abs(di), std::abs(dj), std::abs(dk)}) != ring) continue;
                    auto it = bins_.find({c0.i + di, c0.j + dj, c0.k + dk});
                    if (it == bins_.end()) continue;
                    for (int idx : it->second)
                        best_sq = std::min(best_sq, (points_[idx] - p).squaredNorm());
                }
            }
        }
    }

    VoxelCoord cell_of(const Vec3& p) const {
        return {int32_t(std::floor(p.x() / cell_)), int32_t(std::floor(p.y() / cell_)),
                int32_t(std::floor(p.z() / cell_))};
    }

    const std::vector<Vec3>& points_;
    double cell_;
    VoxelCoord lo_{INT32_MAX, INT32_MAX, INT32_MAX};
    VoxelCoord hi_{INT32_MIN, INT32_MIN, INT32_MIN};
    std::unordered_map<VoxelCoord, std::vector<int>, VoxelCoordHash> bins_;
};

std::vector<double> indexed_nn_distances(const std::vector<Vec3>& from,
                                         const std::vector<Vec3>& to, double cell) {
    PointIndex index(to, cell);
    std::vector<double> dist(from.size());
#pragma omp parallel for schedule(dynamic, 512)
    for (int64_t i = 0; i < int64_t(from.size()); ++i)
        dist[i] = index.nearest_distance(from[i]);
    return dist;
}

}  // namespace

std::vector<double> ref::nn_distances(const std::vector<Vec3>& from,
                                      const std::vector<Vec3>& to) {
    std::vector<double> dist(from.size());
    for (size_t i = 0; i < from.size(); ++i) {
        double best = std::numeric_limits<double>::max();
        for (const Vec3& q : to) best = std::min(best, (from[i] - q).squaredNorm());
        dist[i] = std::sqrt(best);
    }
    return dist;
}

Metrics3D eval_3d(const TriangleMesh& pred, const TriangleMesh& gt, double tau, int n_samples,
                  uint64_t seed) {
    if (pred.triangles.empty()) fail("eval_3d: predicted mesh is empty");
    if (gt.triangles.empty()) fail("eval_3d: ground-truth mesh is empty");

    const std::vector<Vec3> pred_pts = sample_mesh_points(pred, n_samples, seed);
    const std::vector<Vec3> gt_pts = sample_mesh_points(gt, n_samples, seed);

    const double cell = std::max(tau, 1e-3);
    const std::vector<double> d_pred = indexed_nn_distances(pred_pts, gt_pts, cell);
    const std::vector<double> d_gt = indexed_nn_distances(gt_pts, pred_pts, cell);

    Metrics3D m;
    m.tau = tau;
    double acc = 0, comp = 0;
    int64_t within_pred = 0, within_gt = 0;
    for (double d : d_pred) {
        acc += d;
        within_pred += d < tau ? 1 : 0;
    }
    for (double d : d_gt) {
        comp += d;
        within_gt += d < tau ? 1 : 0;
    }
    m.acc = acc / double(d_pred.size());
    m.comp = comp / double(d_gt.size());
    m.prec = double(within_pred) / double(d_pred.size());
    m.recall = double(within_gt) / double(d_gt.size());
    m.fscore = fscore_from(m.prec, m.recall);
    return m;
}

Metrics2D eval_2d(const ImageF& pred, const ImageF& gt, double min_depth) {
    if (pred.width != gt.width || pred.height != gt.height)
        fail("eval_2d: image dimensions differ");

    Metrics2D m;
    int64_t n = 0, n_delta = 0, gt_valid = 0, covered = 0;
    double abs_rel = 0, abs_diff = 0, sq_rel = 0, sq = 0, sq_log = 0, dlog_sum = 0;
    for (size_t i = 0; i < gt.px.size(); ++i) {
        const double g = gt.px[i];
        const double p = pred.px[i];
        if (g <= min_depth) continue;
        ++gt_valid;
        if (p <= 0) continue;
        ++covered;
        ++n;
        const double diff = p - g;
        abs_rel += std::abs(diff) / g;
        abs_diff += std::abs(diff);
        sq_rel += diff * diff / g;
        sq += diff * diff;
        const double dl = std::log(p) - std::log(g);
        sq_log += dl * dl;
        dlog_sum += dl;
        if (std::max(p / g, g / p) < 1.25) ++n_delta;
    }
    if (n == 0) fail("eval_2d: no valid pixels");
    m.abs_rel = abs_rel / n;
    m.abs_diff = abs_diff / n;
    m.sq_rel = sq_rel / n;
    m.rmse = std::sqrt(sq / n);
    m.rmse_log = std::sqrt(sq_log / n);
    const double mean_dl = dlog_sum / n;
    m.sc_inv = std::sqrt(std::max(0.0, sq_log / n - mean_dl * mean_dl));
    m.delta_125 = double(n_delta) / n;
    m.comp = gt_valid > 0 ? double(covered) / double(gt_valid) : 0.0;
    return m;
}

SequenceReport eval_sequence(const TriangleMesh& recon, const TriangleMesh& gt_mesh,
                             const std::vector<Frame>& frames, int interval, double tau,
                             int n_samples, uint64_t seed) {
    if (frames.empty()) fail("eval_sequence: no frames");
    if (interval < 1) fail("eval_sequence: interval must be >= 1");
    SequenceReport rep;
    rep.interval = interval;
    rep.geometry = eval_3d(recon, gt_mesh, tau, n_samples, seed);

    Metrics2D sum;
    for (size_t i = 0; i < frames.size(); i += size_t(interval)) {
        const Frame& f = frames[i];
        const ImageF rendered = render_depth(recon, f.pose, f.intrinsics);
        const Metrics2D m = eval_2d(rendered, f.image);
        rep.per_frame.emplace_back(f.index, m);
        sum.abs_rel += m.abs_rel;
        sum.abs_diff += m.abs_diff;
        sum.sq_rel += m.sq_rel;
        sum.rmse += m.rmse;
        sum.rmse_log += m.rmse_log;
        sum.sc_inv += m.sc_inv;
        sum.delta_125 += m.delta_125;
        sum.comp += m.comp;
    }
    const double k = double(rep.per_frame.size());
    rep.mean_2d = {sum.abs_rel / k, sum.abs_diff / k, sum.sq_rel / k,    sum.rmse / k,
                   sum.rmse_log / k, sum.sc_inv / k,  sum.delta_125 / k, sum.comp / k};
    return rep;
}

namespace {
nlohmann::json metrics2d_json(const Metrics2D& m) {
    return {{"abs_rel", m.abs_rel},     {"abs_diff", m.abs_diff}, {"sq_rel", m.sq_rel},
            {"rmse", m.rmse},           {"rmse_log", m.rmse_log}, {"sc_inv", m.sc_inv},
            {"delta_125", m.delta_125}, {"comp", m.comp}};
}
}  // namespace

std::string report_to_json(const SequenceReport& rep, const std::string& config_echo,
                           const std::string& meta) {
    nlohmann::json j;
    j["geometry_3d"] = {{"acc", rep.geometry.acc},       {"comp", rep.geometry.comp},
                        {"prec", rep.geometry.prec},     {"recall", rep.geometry.recall},
                        {"fscore", rep.geometry.fscore}, {"tau", rep.geometry.tau}};
    j["depth_2d_mean"] = metrics2d_json(rep.mean_2d);
    j["interval"] = rep.interval;
    j["per_frame"] = nlohmann::json::array();
    for (const auto& [idx, m] : rep.per_frame) {
        nlohmann::json f = metrics2d_json(m);
        f["frame"] = idx;
        j["per_frame"].push_back(f);
    }
    j["config"] = config_echo;
    if (!meta.empty()) j["meta"] = nlohmann::json::parse(meta, nullptr, false);
    return j.dump(2);
}

std::string report_to_csv(const SequenceReport& rep) {
    std::ostringstream os;
    os << "frame,abs_rel,abs_diff,sq_rel,rmse,rmse_log,sc_inv,delta_125,comp\n";
    os.precision(9);
    for (const auto& [idx, m] : rep.per_frame)
        os << idx << ',' << m.abs_rel << ',' << m.abs_diff << ',' << m.sq_rel << ',' << m.rmse
           << ',' << m.rmse_log << ',' << m.sc_inv << ',' << m.delta_125 << ',' << m.comp << '\n';
    const Metrics2D& m = rep.mean_2d;
    os << "mean," << m.abs_rel << ',' << m.abs_diff << ',' << m.sq_rel << ',' << m.rmse << ','
       << m.rmse_log << ',' << m.sc_inv << ',' << m.delta_125 << ',' << m.comp << '\n';
    os << "\nacc,comp,prec,recall,fscore,tau\n";
    os << rep.geometry.acc << ',' << rep.geometry.comp << ',' << rep.geometry.prec << ','
       << rep.geometry.recall << ',' << rep.geometry.fscore << ',' << rep.geometry.tau << '\n';
    return os.str();
}

}  // namespace increcon::metrics
