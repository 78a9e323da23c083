#pragma once

#include <optional>
#include <string>
#include <vector>

#include "colight/image.hpp"
#include "colight/meshing.hpp"
#include "colight/renderer.hpp"

namespace colight {

/// Axis-aligned BVH over mesh triangles; exact nearest-triangle distance and
/// first-hit ray queries.
class MeshBvh {
public:
    explicit MeshBvh(const TriangleMesh& mesh);

    double distance(const Vec3& p) const;
    Vec3 closest_point(const Vec3& p) const;

    struct Hit {
        double t;
        int triangle;
    };
    /// First intersection along x(s) = origin + dir * s, s > 0.
    std::optional<Hit> raycast(const Vec3& origin, const Vec3& dir) const;

    const TriangleMesh& mesh() const { return mesh_; }

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;
        int first = 0, count = 0;  // leaf triangle range
    };
    int build(std::vector<int>& ids, int begin, int end);
    TriangleMesh mesh_;
    std::vector<Node> nodes_;
    std::vector<int> order_;
};

/// Uniform-by-area point samples on a mesh surface.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, int n, Rng& rng,
                                 const std::vector<uint8_t>* face_mask = nullptr);

/// Faces seen from at least one view, found by casting every view pixel's ray.
std::vector<uint8_t> visible_faces(const TriangleMesh& mesh, const std::vector<CaptureView>& views);

struct SurfaceDistanceResult {
    double mean = 0;
    double median = 0;
    size_t pairs = 0;
    double standard_error = 0;
};

/// Symmetric expected surface-to-surface distance: D = 0.5 E[d(x1,S2) +
/// d(x2,S1)] over uniform surface samples. Sampling stops when the standard
/// error of the mean drops to `tolerance` (checked every 4096 pairs) or at
/// one million pairs. The median pools both directions' point distances.
/// When views are given, sampling and distances are restricted to faces
/// visible from them. Result is symmetric in (s1, s2) by construction: each
/// direction's sample stream is keyed by that mesh's content.
SurfaceDistanceResult surface_distance(const TriangleMesh& s1, const TriangleMesh& s2,
                                       const std::vector<CaptureView>* views = nullptr,
                                       double tolerance = 1e-5, uint64_t seed = 0);

struct MeanMedian {
    double mean = 0;
    double median = 0;
};

/// Per-pixel angular error in degrees between unit-normal rasters.
MeanMedian normal_error(const HdrImage& pred, const HdrImage& gt, const std::vector<uint8_t>& valid);

/// |d_pred - d_gt| in units of object_length/1000.
MeanMedian depth_error(const ScalarImage& pred, const ScalarImage& gt,
                       const std::vector<uint8_t>& valid, double object_length);

/// PSNR (dB, capped at 100) and mean SSIM (11x11 Gaussian window, sigma 1.5,
/// C1=0.01^2, C2=0.03^2) over [0,1]-clipped images, averaged across channels.
std::pair<double, double> psnr_ssim(const HdrImage& pred, const HdrImage& gt);

double psnr(const HdrImage& pred, const HdrImage& gt);
double ssim(const HdrImage& pred, const HdrImage& gt);

struct MetricReport {
    double distance_mean_ratio = 0, distance_median_ratio = 0;  // 1e-3 object lengths
    double distance_mean_m = 0, distance_median_m = 0;
    double normal_mean_deg = 0, normal_median_deg = 0;
    double depth_mean_ratio = 0, depth_median_ratio = 0;
    double psnr_db = 0;
    double ssim_value = 0;
    double object_length_m = 0;

    std::string to_json() const;
    std::string to_table() const;
};

}  // namespace colight
