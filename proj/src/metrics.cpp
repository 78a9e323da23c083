#include "colight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "colight/errors.hpp"
#include "colight/parallel.hpp"
#include "json.hpp"

namespace colight {

namespace {

// Exact point-to-triangle distance (Ericson's region decomposition).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return a;
    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return b;
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) return c;
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

double aabb_dist2(const Vec3& lo, const Vec3& hi, const Vec3& p) {
    double d2 = 0;
    for (int i = 0; i < 3; ++i) {
        double v = p[i] < lo[i] ? lo[i] - p[i] : (p[i] > hi[i] ? p[i] - hi[i] : 0.0);
        d2 += v * v;
    }
    return d2;
}

uint64_t mesh_content_key(const TriangleMesh& mesh) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* data, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    if (!mesh.vertices.empty()) mix(mesh.vertices.data(), mesh.vertices.size() * sizeof(Vec3));
    if (!mesh.triangles.empty())
        mix(mesh.triangles.data(), mesh.triangles.size() * sizeof(mesh.triangles[0]));
    return h;
}

}  // namespace

MeshBvh::MeshBvh(const TriangleMesh& mesh) : mesh_(mesh) {
    if (mesh_.triangles.empty()) throw InvalidInput("BVH over empty mesh");
    order_.resize(mesh_.triangles.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(mesh_.triangles.size() * 2);
    build(order_, 0, (int)order_.size());
}

int MeshBvh::build(std::vector<int>& ids, int begin, int end) {
    Node node;
    node.lo = {1e300, 1e300, 1e300};
    node.hi = {-1e300, -1e300, -1e300};
    for (int i = begin; i < end; ++i) {
        for (int c = 0; c < 3; ++c) {
            const Vec3& v = mesh_.vertices[mesh_.triangles[ids[i]][c]];
            node.lo = min(node.lo, v);
            node.hi = max(node.hi, v);
        }
    }
    int idx = (int)nodes_.size();
    nodes_.push_back(node);
    if (end - begin <= 4) {
        nodes_[idx].first = begin;
        nodes_[idx].count = end - begin;
        return idx;
    }
    Vec3 extent = node.hi - node.lo;
    int axis = extent.x > extent.y ? (extent.x > extent.z ? 0 : 2) : (extent.y > extent.z ? 1 : 2);
    int mid = (begin + end) / 2;
    std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end, [&](int a, int b) {
        auto centroid = [&](int t) {
            const auto& tr = mesh_.triangles[t];
            return (mesh_.vertices[tr[0]][axis] + mesh_.vertices[tr[1]][axis] +
                    mesh_.vertices[tr[2]][axis]);
        };
        return centroid(a) < centroid(b);
    });
    int left = build(ids, begin, mid);
    int right = build(ids, mid, end);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
}

Vec3 MeshBvh::closest_point(const Vec3& p) const {
    double best2 = 1e300;
    Vec3 best{};
    // Explicit stack, nearer child first.
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        int ni = stack[--top];
        const Node& n = nodes_[ni];
        if (aabb_dist2(n.lo, n.hi, p) >= best2) continue;
        if (n.count > 0) {
            for (int i = 0; i < n.count; ++i) {
                const auto& t = mesh_.triangles[order_[n.first + i]];
                Vec3 q = closest_on_triangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                             mesh_.vertices[t[2]]);
                double d2 = norm2(q - p);
                if (d2 < best2) {
                    best2 = d2;
                    best = q;
                }
            }
            continue;
        }
        double dl = aabb_dist2(nodes_[n.left].lo, nodes_[n.left].hi, p);
        double dr = aabb_dist2(nodes_[n.right].lo, nodes_[n.right].hi, p);
        if (dl < dr) {
            if (dr < best2) stack[top++] = n.right;
            if (dl < best2) stack[top++] = n.left;
        } else {
            if (dl < best2) stack[top++] = n.left;
            if (dr < best2) stack[top++] = n.right;
        }
    }
    return best;
}

double MeshBvh::distance(const Vec3& p) const { return norm(closest_point(p) - p); }

namespace {

// Moller-Trumbore.
std::optional<double> ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b,
                                   const Vec3& c) {
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 pv = cross(d, e2);
    double det = dot(e1, pv);
    if (std::fabs(det) < 1e-14) return std::nullopt;
    double inv = 1.0 / det;
    Vec3 tv = o - a;
    double u = dot(tv, pv) * inv;
    if (u < 0 || u > 1) return std::nullopt;
    Vec3 qv = cross(tv, e1);
    double v = dot(d, qv) * inv;
    if (v < 0 || u + v > 1) return std::nullopt;
    double t = dot(e2, qv) * inv;
    if (t <= 1e-12) return std::nullopt;
    return t;
}

bool aabb_ray(const Vec3& lo, const Vec3& hi, const Vec3& o, const Vec3& inv_d, double tmax) {
    double t0 = 0, t1 = tmax;
    for (int i = 0; i < 3; ++i) {
        double ta = (lo[i] - o[i]) * inv_d[i];
        double tb = (hi[i] - o[i]) * inv_d[i];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::fmax(t0, ta);
        t1 = std::fmin(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

std::optional<MeshBvh::Hit> MeshBvh::raycast(const Vec3& origin, const Vec3& dir) const {
    Vec3 inv{1.0 / (dir.x == 0 ? 1e-300 : dir.x), 1.0 / (dir.y == 0 ? 1e-300 : dir.y),
             1.0 / (dir.z == 0 ? 1e-300 : dir.z)};
    std::optional<Hit> best;
    double tmax = 1e300;
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        if (!aabb_ray(n.lo, n.hi, origin, inv, tmax)) continue;
        if (n.count > 0) {
            for (int i = 0; i < n.count; ++i) {
                int tid = order_[n.first + i];
                const auto& t = mesh_.triangles[tid];
                auto hit = ray_triangle(origin, dir, mesh_.vertices[t[0]], mesh_.vertices[t[1]],
                                        mesh_.vertices[t[2]]);
                if (hit && *hit < tmax) {
                    tmax = *hit;
                    best = Hit{*hit, tid};
                }
            }
            continue;
        }
        stack[top++] = n.left;
        stack[top++] = n.right;
    }
    return best;
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, int n, Rng& rng,
                                 const std::vector<uint8_t>* face_mask) {
    std::vector<double> cumulative;
    std::vector<int> faces;
    cumulative.reserve(mesh.triangles.size());
    double total = 0;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        if (face_mask && !(*face_mask)[t]) continue;
        const auto& tr = mesh.triangles[t];
        double area = 0.5 * norm(cross(mesh.vertices[tr[1]] - mesh.vertices[tr[0]],
                                       mesh.vertices[tr[2]] - mesh.vertices[tr[0]]));
        total += area;
        cumulative.push_back(total);
        faces.push_back((int)t);
    }
    if (total <= 0) throw InvalidInput("mesh has no sampleable area");
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform() * total;
        size_t k = std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
        if (k >= faces.size()) k = faces.size() - 1;
        const auto& tr = mesh.triangles[faces[k]];
        double r1 = std::sqrt(rng.uniform());
        double r2 = rng.uniform();
        double w0 = 1 - r1, w1 = r1 * (1 - r2), w2 = r1 * r2;
        pts.push_back(mesh.vertices[tr[0]] * w0 + mesh.vertices[tr[1]] * w1 +
                      mesh.vertices[tr[2]] * w2);
    }
    return pts;
}

std::vector<uint8_t> visible_faces(const TriangleMesh& mesh, const std::vector<CaptureView>& views) {
    MeshBvh bvh(mesh);
    std::vector<uint8_t> visible(mesh.triangles.size(), 0);
    for (const CaptureView& view : views) {
        const int w = view.intrinsics.width, h = view.intrinsics.height;
        std::vector<uint8_t> local(mesh.triangles.size(), 0);
        parallel_for(size_t(w) * h, [&](size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i) {
                Ray ray = ray_for_pixel(view, double(i % w), double(i / w));
                auto hit = bvh.raycast(ray.origin, -ray.v);
                if (hit) local[hit->triangle] = 1;
            }
        });
        for (size_t t = 0; t < visible.size(); ++t) visible[t] |= local[t];
    }
    return visible;
}

SurfaceDistanceResult surface_distance(const TriangleMesh& s1, const TriangleMesh& s2,
                                       const std::vector<CaptureView>* views, double tolerance,
                                       uint64_t seed) {
    if (s1.triangles.empty() || s2.triangles.empty())
        throw InvalidInput("surface_distance: empty mesh");

    std::vector<uint8_t> vis1, vis2;
    const std::vector<uint8_t>*mask1 = nullptr, *mask2 = nullptr;
    if (views && !views->empty()) {
        vis1 = visible_faces(s1, *views);
        vis2 = visible_faces(s2, *views);
        mask1 = &vis1;
        mask2 = &vis2;
    }
    MeshBvh bvh1(s1), bvh2(s2);

    // Per-direction sample streams are keyed by the source mesh's content,
    // which makes D(S1,S2) and D(S2,S1) bitwise identical.
    Rng rng1 = Rng::stream(seed, {0x73646973ULL, mesh_content_key(s1)});
    Rng rng2 = Rng::stream(seed, {0x73646973ULL, mesh_content_key(s2)});

    const size_t max_pairs = 1000000;
    const size_t chunk = 4096;
    std::vector<double> pooled;  // both directions' point distances, for the median
    pooled.reserve(2 * chunk);
    double sum = 0, sum2 = 0;  // over the pair statistic y = (d1 + d2) / 2
    size_t n = 0;
    double se = 0;
    while (n < max_pairs) {
        size_t m = std::min(chunk, max_pairs - n);
        std::vector<Vec3> p1 = sample_surface(s1, (int)m, rng1, mask1);
        std::vector<Vec3> p2 = sample_surface(s2, (int)m, rng2, mask2);
        std::vector<double> d1(m), d2(m);
        parallel_for(m, [&](size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i) {
                d1[i] = bvh2.distance(p1[i]);
                d2[i] = bvh1.distance(p2[i]);
            }
        });
        for (size_t i = 0; i < m; ++i) {
            double y = 0.5 * (d1[i] + d2[i]);
            sum += y;
            sum2 += y * y;
            pooled.push_back(d1[i]);
            pooled.push_back(d2[i]);
        }
        n += m;
        double mean = sum / double(n);
        double var = std::fmax(0.0, sum2 / double(n) - mean * mean);
        se = std::sqrt(var / double(n));
        if (se <= tolerance) break;
    }

    SurfaceDistanceResult out;
    out.pairs = n;
    out.mean = sum / double(n);
    out.standard_error = se;
    std::nth_element(pooled.begin(), pooled.begin() + pooled.size() / 2, pooled.end());
    out.median = pooled[pooled.size() / 2];
    return out;
}

MeanMedian normal_error(const HdrImage& pred, const HdrImage& gt, const std::vector<uint8_t>& valid) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw InvalidInput("normal_error: dimensions differ");
    std::vector<double> angles;
    angles.reserve(pred.pixel_count());
    for (size_t i = 0; i < pred.pixel_count(); ++i) {
        if (i < valid.size() && !valid[i]) continue;
        Rgb a = pred.at_index(i), b = gt.at_index(i);
        double d = a.r * b.r + a.g * b.g + a.b * b.b;
        angles.push_back(std::acos(clamp(d, -1.0, 1.0)) * 180.0 / M_PI);
    }
    MeanMedian out;
    if (angles.empty()) return out;
    out.mean = std::accumulate(angles.begin(), angles.end(), 0.0) / double(angles.size());
    std::nth_element(angles.begin(), angles.begin() + angles.size() / 2, angles.end());
    out.median = angles[angles.size() / 2];
    return out;
}

MeanMedian depth_error(const ScalarImage& pred, const ScalarImage& gt,
                       const std::vector<uint8_t>& valid, double object_length) {
    if (pred.size() != gt.size()) throw InvalidInput("depth_error: dimensions differ");
    if (!(object_length > 0)) throw InvalidInput("depth_error: object length must be > 0");
    double unit = object_length / 1000.0;
    std::vector<double> errs;
    errs.reserve(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        if (i < valid.size() && !valid[i]) continue;
        errs.push_back(std::fabs(pred[i] - gt[i]) / unit);
    }
    MeanMedian out;
    if (errs.empty()) return out;
    out.mean = std::accumulate(errs.begin(), errs.end(), 0.0) / double(errs.size());
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    out.median = errs[errs.size() / 2];
    return out;
}

namespace {

double clamp01(double v) { return clamp(v, 0.0, 1.0); }

}  // namespace

double psnr(const HdrImage& pred, const HdrImage& gt) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw InvalidInput("psnr: dimensions differ");
    double mse = 0;
    size_t n = pred.pixel_count() * 3;
    for (size_t i = 0; i < pred.pixel_count(); ++i) {
        Rgb a = pred.at_index(i), b = gt.at_index(i);
        for (int c = 0; c < 3; ++c) {
            double d = clamp01(a[c]) - clamp01(b[c]);
            mse += d * d;
        }
    }
    mse /= double(n);
    if (mse <= 1e-10) return 100.0;
    return std::fmin(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const HdrImage& pred, const HdrImage& gt) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw InvalidInput("ssim: dimensions differ");
    const int w = pred.width(), h = pred.height();
    const int radius = 5;  // 11x11 window
    if (w < 11 || h < 11) throw InvalidInput("ssim needs at least 11x11 images");
    double weights[11][11];
    double wsum = 0;
    const double sigma = 1.5;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            double g = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            weights[dy + radius][dx + radius] = g;
            wsum += g;
        }
    for (auto& row : weights)
        for (double& v : row) v /= wsum;

    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0;
    size_t count = 0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int y = radius; y < h - radius; ++y) {
            for (int x = radius; x < w - radius; ++x) {
                double mu1 = 0, mu2 = 0, s11 = 0, s22 = 0, s12 = 0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx) {
                        double wgt = weights[dy + radius][dx + radius];
                        double a = clamp01(pred.at(x + dx, y + dy)[ch]);
                        double b = clamp01(gt.at(x + dx, y + dy)[ch]);
                        mu1 += wgt * a;
                        mu2 += wgt * b;
                        s11 += wgt * a * a;
                        s22 += wgt * b * b;
                        s12 += wgt * a * b;
                    }
                double var1 = s11 - mu1 * mu1, var2 = s22 - mu2 * mu2, cov = s12 - mu1 * mu2;
                double v = ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) /
                           ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
                total += v;
                ++count;
            }
        }
    }
    return total / double(count);
}

std::pair<double, double> psnr_ssim(const HdrImage& pred, const HdrImage& gt) {
    return {psnr(pred, gt), ssim(pred, gt)};
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["distance"] = {{"mean_ratio_1e-3L", distance_mean_ratio},
                     {"median_ratio_1e-3L", distance_median_ratio},
                     {"mean_m", distance_mean_m},
                     {"median_m", distance_median_m}};
    j["normal_deg"] = {{"mean", normal_mean_deg}, {"median", normal_median_deg}};
    j["depth"] = {{"mean_ratio_1e-3L", depth_mean_ratio}, {"median_ratio_1e-3L", depth_median_ratio}};
    j["psnr_db"] = psnr_db;
    j["ssim"] = ssim_value;
    j["object_length_m"] = object_length_m;
    return j.dump(2);
}

std::string MetricReport::to_table() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "metric          |    mean |  median\n"
                  "----------------+---------+--------\n"
                  "distance (1e-3L)| %7.2f | %7.2f\n"
                  "depth    (1e-3L)| %7.2f | %7.2f\n"
                  "normal   (deg)  | %7.2f | %7.2f\n"
                  "psnr     (dB)   | %7.2f |       -\n"
                  "ssim            | %7.4f |       -\n",
                  distance_mean_ratio, distance_median_ratio, depth_mean_ratio, depth_median_ratio,
                  normal_mean_deg, normal_median_deg, psnr_db, ssim_value);
    return buf;
}

}  // namespace colight
