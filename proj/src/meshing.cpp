#include "colight/meshing.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "colight/errors.hpp"
#include "colight/parallel.hpp"
#include "json.hpp"

namespace colight {

extern const int8_t kMcEdgeCorners[12][2];
extern const int8_t kMcTriTable[256][16];

double TriangleMesh::surface_area() const {
    double area = 0;
    for (const auto& t : triangles) {
        Vec3 a = vertices[t[0]], b = vertices[t[1]], c = vertices[t[2]];
        area += 0.5 * norm(cross(b - a, c - a));
    }
    return area;
}

double TriangleMesh::signed_volume() const {
    double vol = 0;
    for (const auto& t : triangles) {
        Vec3 a = vertices[t[0]], b = vertices[t[1]], c = vertices[t[2]];
        vol += dot(a, cross(b, c)) / 6.0;
    }
    return vol;
}

void TriangleMesh::bounding_box(Vec3& lo, Vec3& hi) const {
    lo = {1e300, 1e300, 1e300};
    hi = {-1e300, -1e300, -1e300};
    for (const Vec3& v : vertices) {
        lo = min(lo, v);
        hi = max(hi, v);
    }
}

double TriangleMesh::bbox_diagonal() const {
    if (vertices.empty()) return 0;
    Vec3 lo, hi;
    bounding_box(lo, hi);
    return norm(hi - lo);
}

void TriangleMesh::cleanup() {
    std::vector<std::array<int, 3>> kept;
    kept.reserve(triangles.size());
    int n = (int)vertices.size();
    for (const auto& t : triangles) {
        if (t[0] < 0 || t[1] < 0 || t[2] < 0 || t[0] >= n || t[1] >= n || t[2] >= n) continue;
        Vec3 a = vertices[t[0]], b = vertices[t[1]], c = vertices[t[2]];
        if (0.5 * norm(cross(b - a, c - a)) <= 1e-12) continue;
        kept.push_back(t);
    }
    triangles = std::move(kept);
}

TriangleMesh marching_cubes_field(const std::function<double(const Vec3&)>& fn, const Vec3& lo,
                                  const Vec3& hi, int resolution) {
    if (resolution < 2) throw InvalidInput("marching cubes needs at least 2 cells per axis");
    const int nc = resolution;          // cells per axis
    const int np = nc + 1;              // sample points per axis
    Vec3 step = (hi - lo) / double(nc);

    std::vector<double> field(size_t(np) * np * np);
    parallel_for(size_t(np) * np * np, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            int x = int(i % np), y = int((i / np) % np), z = int(i / (size_t(np) * np));
            field[i] = fn(lo + Vec3{x * step.x, y * step.y, z * step.z});
        }
    });
    auto value = [&](int x, int y, int z) { return field[(size_t(z) * np + y) * np + x]; };
    auto point = [&](int x, int y, int z) {
        return lo + Vec3{x * step.x, y * step.y, z * step.z};
    };

    // Corner offsets matching the table convention: 0..3 on the bottom (z)
    // face counter-clockwise, 4..7 above them.
    static const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                      {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

    TriangleMesh mesh;
    // Global edge key -> vertex index. An edge is identified by its lower
    // sample point and the axis toward the other point.
    std::unordered_map<uint64_t, int> edge_vertex;
    auto point_id = [&](int x, int y, int z) { return (uint64_t(z) * np + y) * np + x; };

    auto edge_vertex_index = [&](int cx, int cy, int cz, int edge) {
        const int8_t* corners = kMcEdgeCorners[edge];
        int a[3] = {cx + kCorner[corners[0]][0], cy + kCorner[corners[0]][1], cz + kCorner[corners[0]][2]};
        int b[3] = {cx + kCorner[corners[1]][0], cy + kCorner[corners[1]][1], cz + kCorner[corners[1]][2]};
        // Canonicalize so the key does not depend on corner order.
        bool swap = std::tie(b[0], b[1], b[2]) < std::tie(a[0], a[1], a[2]);
        int* p0 = swap ? b : a;
        int* p1 = swap ? a : b;
        int axis = p1[0] != p0[0] ? 0 : (p1[1] != p0[1] ? 1 : 2);
        uint64_t key = point_id(p0[0], p0[1], p0[2]) * 3 + axis;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        double v0 = value(p0[0], p0[1], p0[2]);
        double v1 = value(p1[0], p1[1], p1[2]);
        double denom = v0 - v1;
        double t = std::fabs(denom) < 1e-30 ? 0.5 : clamp(v0 / denom, 0.0, 1.0);
        Vec3 pa = point(p0[0], p0[1], p0[2]);
        Vec3 pb = point(p1[0], p1[1], p1[2]);
        int idx = (int)mesh.vertices.size();
        mesh.vertices.push_back(pa + (pb - pa) * t);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    for (int cz = 0; cz < nc; ++cz) {
        for (int cy = 0; cy < nc; ++cy) {
            for (int cx = 0; cx < nc; ++cx) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    double v = value(cx + kCorner[c][0], cy + kCorner[c][1], cz + kCorner[c][2]);
                    if (v < 0) cube |= 1 << c;
                }
                const int8_t* tri = kMcTriTable[cube];
                for (int i = 0; tri[i] != -1; i += 3) {
                    int v0 = edge_vertex_index(cx, cy, cz, tri[i]);
                    int v1 = edge_vertex_index(cx, cy, cz, tri[i + 1]);
                    int v2 = edge_vertex_index(cx, cy, cz, tri[i + 2]);
                    mesh.triangles.push_back({v0, v1, v2});
                }
            }
        }
    }
    mesh.cleanup();
    return mesh;
}

namespace {

void roi_cube(const SdfScene& scene, Vec3& lo, Vec3& hi) {
    const Roi& roi = scene.roi();
    Vec3 r{roi.radius, roi.radius, roi.radius};
    lo = roi.center - r;
    hi = roi.center + r;
}

}  // namespace

TriangleMesh marching_cubes(const SdfScene& scene, int resolution) {
    if (resolution < 16) throw InvalidInput("scene marching cubes expects resolution >= 16");
    Vec3 lo, hi;
    roi_cube(scene, lo, hi);
    TriangleMesh mesh =
        marching_cubes_field([&](const Vec3& p) { return scene.sdf(p); }, lo, hi, resolution);
    // The table convention orients triangles inward for sdf<0 interiors;
    // flip to outward normals.
    double vol = mesh.signed_volume();
    if (vol < 0)
        for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
    return mesh;
}

double marching_cubes_cell_size(const SdfScene& scene, int resolution) {
    return 2.0 * scene.roi().radius / resolution;
}

// ---- Quadric-error simplification ----

namespace {

// Symmetric 4x4 quadric, 10 unique coefficients.
struct Quadric {
    double m[10] = {0};

    static Quadric from_plane(double a, double b, double c, double d) {
        Quadric q;
        q.m[0] = a * a; q.m[1] = a * b; q.m[2] = a * c; q.m[3] = a * d;
        q.m[4] = b * b; q.m[5] = b * c; q.m[6] = b * d;
        q.m[7] = c * c; q.m[8] = c * d;
        q.m[9] = d * d;
        return q;
    }
    Quadric& operator+=(const Quadric& o) {
        for (int i = 0; i < 10; ++i) m[i] += o.m[i];
        return *this;
    }
    double eval(const Vec3& v) const {
        return m[0] * v.x * v.x + 2 * m[1] * v.x * v.y + 2 * m[2] * v.x * v.z + 2 * m[3] * v.x +
               m[4] * v.y * v.y + 2 * m[5] * v.y * v.z + 2 * m[6] * v.y +
               m[7] * v.z * v.z + 2 * m[8] * v.z + m[9];
    }
    // Minimizer of the quadratic form, if the 3x3 block is well conditioned.
    bool optimal_point(Vec3& out) const {
        double a00 = m[0], a01 = m[1], a02 = m[2];
        double a11 = m[4], a12 = m[5], a22 = m[7];
        double b0 = -m[3], b1 = -m[6], b2 = -m[8];
        double det = a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02) +
                     a02 * (a01 * a12 - a11 * a02);
        double scale = std::fabs(a00) + std::fabs(a11) + std::fabs(a22);
        if (std::fabs(det) < 1e-10 * scale * scale * scale) return false;
        double inv = 1.0 / det;
        out.x = inv * (b0 * (a11 * a22 - a12 * a12) - a01 * (b1 * a22 - a12 * b2) +
                       a02 * (b1 * a12 - a11 * b2));
        out.y = inv * (a00 * (b1 * a22 - a12 * b2) - b0 * (a01 * a22 - a02 * a12) +
                       a02 * (a01 * b2 - b1 * a02));
        out.z = inv * (a00 * (a11 * b2 - b1 * a12) - a01 * (a01 * b2 - b1 * a02) +
                       b0 * (a01 * a12 - a11 * a02));
        return out.x == out.x && std::isfinite(out.x) && std::isfinite(out.y) && std::isfinite(out.z);
    }
};

struct HeapEntry {
    double cost;
    int v0, v1;
    uint64_t version;
    bool operator<(const HeapEntry& o) const { return cost > o.cost; }  // min-heap
};

}  // namespace

TriangleMesh simplify(const TriangleMesh& input, int target_triangle_count) {
    if ((int)input.triangles.size() <= target_triangle_count) return input;

    std::vector<Vec3> verts = input.vertices;
    std::vector<std::array<int, 3>> tris = input.triangles;
    std::vector<bool> tri_dead(tris.size(), false);
    std::vector<bool> vert_dead(verts.size(), false);
    std::vector<std::vector<int>> vert_tris(verts.size());
    for (size_t t = 0; t < tris.size(); ++t)
        for (int c = 0; c < 3; ++c) vert_tris[tris[t][c]].push_back((int)t);

    std::vector<Quadric> quadrics(verts.size());
    auto face_plane = [&](int t, double& a, double& b, double& c, double& d) {
        Vec3 p0 = verts[tris[t][0]], p1 = verts[tris[t][1]], p2 = verts[tris[t][2]];
        Vec3 n = cross(p1 - p0, p2 - p0);
        double len = norm(n);
        if (len < 1e-30) return false;
        n = n / len;
        a = n.x; b = n.y; c = n.z; d = -dot(n, p0);
        return true;
    };
    for (size_t t = 0; t < tris.size(); ++t) {
        double a, b, c, d;
        if (!face_plane((int)t, a, b, c, d)) continue;
        Quadric q = Quadric::from_plane(a, b, c, d);
        for (int cidx = 0; cidx < 3; ++cidx) quadrics[tris[t][cidx]] += q;
    }

    // Boundary edges get a perpendicular constraint plane with a heavy weight.
    {
        std::map<std::pair<int, int>, std::pair<int, int>> edge_count;  // edge -> (count, tri)
        for (size_t t = 0; t < tris.size(); ++t) {
            for (int c = 0; c < 3; ++c) {
                int u = tris[t][c], v = tris[t][(c + 1) % 3];
                auto key = std::minmax(u, v);
                auto& e = edge_count[{key.first, key.second}];
                e.first += 1;
                e.second = (int)t;
            }
        }
        for (auto& [key, cnt] : edge_count) {
            if (cnt.first != 1) continue;
            int u = key.first, v = key.second;
            double a, b, c, d;
            if (!face_plane(cnt.second, a, b, c, d)) continue;
            Vec3 edge = verts[v] - verts[u];
            Vec3 n = cross(edge, Vec3{a, b, c});
            double len = norm(n);
            if (len < 1e-30) continue;
            n = n / len;
            Quadric q = Quadric::from_plane(n.x, n.y, n.z, -dot(n, verts[u]));
            for (int i = 0; i < 10; ++i) q.m[i] *= 1e3;
            quadrics[u] += q;
            quadrics[v] += q;
        }
    }

    std::vector<uint64_t> version(verts.size(), 0);
    std::priority_queue<HeapEntry> heap;

    auto evaluate_candidate = [&](int v0, int v1, Vec3& pos) {
        Quadric q = quadrics[v0];
        q += quadrics[v1];
        Vec3 best;
        if (!q.optimal_point(best)) {
            Vec3 mid = (verts[v0] + verts[v1]) * 0.5;
            double c0 = q.eval(verts[v0]), c1 = q.eval(verts[v1]), cm = q.eval(mid);
            best = c0 < c1 ? (c0 < cm ? verts[v0] : mid) : (c1 < cm ? verts[v1] : mid);
        }
        pos = best;
        return q.eval(best);
    };

    auto push_edge = [&](int v0, int v1) {
        if (v0 == v1 || vert_dead[v0] || vert_dead[v1]) return;
        if (v0 > v1) std::swap(v0, v1);
        Vec3 pos;
        double cost = evaluate_candidate(v0, v1, pos);
        heap.push({cost, v0, v1, version[v0] + version[v1]});
    };

    {
        std::set<std::pair<int, int>> edges;
        for (auto& t : tris)
            for (int c = 0; c < 3; ++c) {
                auto mm = std::minmax(t[c], t[(c + 1) % 3]);
                edges.insert({mm.first, mm.second});
            }
        for (auto& [u, v] : edges) push_edge(u, v);
    }

    int alive = (int)tris.size();
    auto tri_has = [&](int t, int v) {
        return tris[t][0] == v || tris[t][1] == v || tris[t][2] == v;
    };

    while (alive > target_triangle_count && !heap.empty()) {
        HeapEntry e = heap.top();
        heap.pop();
        if (vert_dead[e.v0] || vert_dead[e.v1]) continue;
        if (e.version != version[e.v0] + version[e.v1]) continue;

        Vec3 pos;
        evaluate_candidate(e.v0, e.v1, pos);

        // Reject collapses that flip surviving faces.
        bool valid = true;
        for (int t : vert_tris[e.v0]) {
            if (tri_dead[t] || tri_has(t, e.v1)) continue;
            Vec3 p[3], q[3];
            for (int c = 0; c < 3; ++c) {
                p[c] = verts[tris[t][c]];
                q[c] = tris[t][c] == e.v0 ? pos : p[c];
            }
            Vec3 n0 = cross(p[1] - p[0], p[2] - p[0]);
            Vec3 n1 = cross(q[1] - q[0], q[2] - q[0]);
            if (dot(n0, n1) <= 0 || norm(n1) < 1e-14) {
                valid = false;
                break;
            }
        }
        if (valid)
            for (int t : vert_tris[e.v1]) {
                if (tri_dead[t] || tri_has(t, e.v0)) continue;
                Vec3 p[3], q[3];
                for (int c = 0; c < 3; ++c) {
                    p[c] = verts[tris[t][c]];
                    q[c] = tris[t][c] == e.v1 ? pos : p[c];
                }
                Vec3 n0 = cross(p[1] - p[0], p[2] - p[0]);
                Vec3 n1 = cross(q[1] - q[0], q[2] - q[0]);
                if (dot(n0, n1) <= 0 || norm(n1) < 1e-14) {
                    valid = false;
                    break;
                }
            }
        if (!valid) continue;

        // Collapse v1 into v0 at the optimal position.
        verts[e.v0] = pos;
        quadrics[e.v0] += quadrics[e.v1];
        vert_dead[e.v1] = true;
        version[e.v0] += 1;
        version[e.v1] += 1;

        for (int t : vert_tris[e.v1]) {
            if (tri_dead[t]) continue;
            if (tri_has(t, e.v0)) {
                tri_dead[t] = true;
                --alive;
                continue;
            }
            for (int c = 0; c < 3; ++c)
                if (tris[t][c] == e.v1) tris[t][c] = e.v0;
            vert_tris[e.v0].push_back(t);
        }
        vert_tris[e.v1].clear();

        // Re-queue the neighborhood.
        std::set<int> neighbors;
        for (int t : vert_tris[e.v0]) {
            if (tri_dead[t]) continue;
            for (int c = 0; c < 3; ++c)
                if (tris[t][c] != e.v0) neighbors.insert(tris[t][c]);
        }
        for (int nb : neighbors) push_edge(e.v0, nb);
    }

    // Compact.
    TriangleMesh out;
    std::vector<int> remap(verts.size(), -1);
    for (size_t t = 0; t < tris.size(); ++t) {
        if (tri_dead[t]) continue;
        std::array<int, 3> idx;
        for (int c = 0; c < 3; ++c) {
            int v = tris[t][c];
            if (remap[v] < 0) {
                remap[v] = (int)out.vertices.size();
                out.vertices.push_back(verts[v]);
            }
            idx[c] = remap[v];
        }
        out.triangles.push_back(idx);
    }
    out.cleanup();
    return out;
}

// ---- UV atlas ----

AtlasResult build_atlas(const TriangleMesh& mesh, int texture_resolution) {
    if (mesh.triangles.empty()) throw InvalidInput("cannot parameterize an empty mesh");
    const int res = texture_resolution;
    int n_tris = (int)mesh.triangles.size();
    int n_cells = (n_tris + 1) / 2;
    int cols = 1;
    while (cols * cols < n_cells) ++cols;
    int cell = res / cols;
    // Each right triangle needs its gutter inset plus at least one interior texel.
    if (cell < 5)
        throw InvalidInput("texture resolution too small to pack " + std::to_string(n_tris) +
                           " triangle charts");

    AtlasResult out;
    TriangleMesh& m = out.mesh;
    m.vertices.reserve(size_t(n_tris) * 3);
    m.uvs.reserve(size_t(n_tris) * 3);
    m.triangles.reserve(n_tris);

    const double g = 1.0;  // one-texel inset; diagonal separation ~1.4 texels
    for (int t = 0; t < n_tris; ++t) {
        int cidx = t / 2;
        bool upper = t % 2 != 0;
        double x0 = double(cidx % cols) * cell;
        double y0 = double(cidx / cols) * cell;
        double uvpix[3][2];
        if (!upper) {
            uvpix[0][0] = x0 + g;            uvpix[0][1] = y0 + g;
            uvpix[1][0] = x0 + cell - 2 * g; uvpix[1][1] = y0 + g;
            uvpix[2][0] = x0 + g;            uvpix[2][1] = y0 + cell - 2 * g;
        } else {
            uvpix[0][0] = x0 + cell - g;     uvpix[0][1] = y0 + cell - g;
            uvpix[1][0] = x0 + 2 * g;        uvpix[1][1] = y0 + cell - g;
            uvpix[2][0] = x0 + cell - g;     uvpix[2][1] = y0 + 2 * g;
        }
        int base = (int)m.vertices.size();
        for (int c = 0; c < 3; ++c) {
            m.vertices.push_back(mesh.vertices[mesh.triangles[t][c]]);
            m.uvs.push_back({uvpix[c][0] / res, uvpix[c][1] / res});
        }
        m.triangles.push_back({base, base + 1, base + 2});
    }

    Atlas& atlas = out.atlas;
    atlas.resolution = res;
    atlas.positions.assign(size_t(res) * res, Vec3{});
    atlas.valid.assign(size_t(res) * res, 0);
    atlas.triangle_ids.assign(size_t(res) * res, -1);

    for (int t = 0; t < n_tris; ++t) {
        const auto& tri = m.triangles[t];
        double ax = m.uvs[tri[0]][0] * res, ay = m.uvs[tri[0]][1] * res;
        double bx = m.uvs[tri[1]][0] * res, by = m.uvs[tri[1]][1] * res;
        double cx = m.uvs[tri[2]][0] * res, cy = m.uvs[tri[2]][1] * res;
        int xmin = (int)std::floor(std::min({ax, bx, cx}));
        int xmax = (int)std::ceil(std::max({ax, bx, cx}));
        int ymin = (int)std::floor(std::min({ay, by, cy}));
        int ymax = (int)std::ceil(std::max({ay, by, cy}));
        double det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
        if (std::fabs(det) < 1e-12) continue;
        for (int y = std::max(0, ymin); y <= std::min(res - 1, ymax); ++y) {
            for (int x = std::max(0, xmin); x <= std::min(res - 1, xmax); ++x) {
                double px = x + 0.5, py = y + 0.5;
                double w1 = ((px - ax) * (cy - ay) - (cx - ax) * (py - ay)) / det;
                double w2 = ((bx - ax) * (py - ay) - (px - ax) * (by - ay)) / det;
                double w0 = 1.0 - w1 - w2;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                size_t idx = size_t(y) * res + x;
                atlas.positions[idx] = m.vertices[tri[0]] * w0 + m.vertices[tri[1]] * w1 +
                                       m.vertices[tri[2]] * w2;
                atlas.valid[idx] = 1;
                atlas.triangle_ids[idx] = t;
            }
        }
    }
    return out;
}

// ---- Baking ----

PbrTextureSet bake_textures(const SdfScene& scene, const Atlas& atlas) {
    const int res = atlas.resolution;
    PbrTextureSet set;
    set.resolution = res;
    set.base_color = HdrImage(res, res);
    set.roughness = ScalarImage(res, res);
    set.clearcoat_glossiness = ScalarImage(res, res);
    set.subsurface = ScalarImage(res, res);
    set.metallic = ScalarImage(res, res);
    set.dielectric = ScalarImage(res, res);
    set.clearcoat = ScalarImage(res, res);
    set.normal = HdrImage(res, res);
    set.valid = atlas.valid;

    parallel_for(size_t(res) * res, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            if (!atlas.valid[i]) continue;
            const Vec3& p = atlas.positions[i];
            TextelParams theta = scene.sample_texel(p);
            set.base_color.set_index(i, theta.base_color);
            set.roughness[i] = theta.roughness;
            set.clearcoat_glossiness[i] = theta.clearcoat_glossiness;
            set.subsurface[i] = theta.subsurface;
            set.metallic[i] = theta.metallic;
            set.dielectric[i] = theta.dielectric;
            set.clearcoat[i] = theta.clearcoat;
            auto n = scene.try_normal(p);
            Vec3 nv = n.value_or(Vec3{0, 0, 1});
            set.normal.set_index(i, {nv.x, nv.y, nv.z});
        }
    });

    // Gutter fill: copy from the nearest valid texel, breadth first.
    std::vector<int> source(size_t(res) * res, -1);
    std::queue<int> frontier;
    for (int i = 0; i < res * res; ++i)
        if (set.valid[i]) {
            source[i] = i;
            frontier.push(i);
        }
    const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
    while (!frontier.empty()) {
        int i = frontier.front();
        frontier.pop();
        int x = i % res, y = i / res;
        for (int d = 0; d < 4; ++d) {
            int nx2 = x + dx[d], ny2 = y + dy[d];
            if (nx2 < 0 || ny2 < 0 || nx2 >= res || ny2 >= res) continue;
            int j = ny2 * res + nx2;
            if (source[j] >= 0) continue;
            source[j] = source[i];
            frontier.push(j);
        }
    }
    for (int i = 0; i < res * res; ++i) {
        int s = source[i];
        if (s < 0 || s == i) continue;
        set.base_color.set_index(i, set.base_color.at_index(s));
        set.roughness[i] = set.roughness[s];
        set.clearcoat_glossiness[i] = set.clearcoat_glossiness[s];
        set.subsurface[i] = set.subsurface[s];
        set.metallic[i] = set.metallic[s];
        set.dielectric[i] = set.dielectric[s];
        set.clearcoat[i] = set.clearcoat[s];
        set.normal.set_index(i, set.normal.at_index(s));
    }
    return set;
}

// ---- Export / import ----

namespace {

void require_writable(const std::string& path, bool overwrite) {
    if (overwrite) return;
    FILE* f = std::fopen(path.c_str(), "rb");
    if (f) {
        std::fclose(f);
        throw InvalidInput(path + " exists (pass overwrite to replace)");
    }
}

PngImage gray8_from(const ScalarImage& img) {
    PngImage png;
    png.width = img.width();
    png.height = img.height();
    png.channels = 1;
    png.bit_depth = 8;
    png.pixels.resize(img.size());
    for (size_t i = 0; i < img.size(); ++i)
        png.pixels[i] = uint16_t(std::lround(clamp(img[i], 0.0, 1.0) * 255.0));
    return png;
}

}  // namespace

void export_asset(const TriangleMesh& mesh, const PbrTextureSet& textures, const std::string& dir,
                  const std::string& name, bool overwrite) {
    if (!mesh.has_uvs()) throw InvalidInput("export needs a parameterized mesh (run build_atlas)");
    std::string base = dir + "/" + name;
    const std::string obj_path = base + ".obj";
    const std::string mtl_path = base + ".mtl";
    require_writable(obj_path, overwrite);
    require_writable(mtl_path, overwrite);

    // Smooth vertex normals from incident faces.
    std::vector<Vec3> normals(mesh.vertices.size(), Vec3{0, 0, 0});
    for (const auto& t : mesh.triangles) {
        Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]],
                       mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        for (int c = 0; c < 3; ++c) normals[t[c]] += n;
    }
    for (auto& n : normals) n = normalized(n);

    FILE* f = std::fopen(obj_path.c_str(), "wb");
    if (!f) throw InvalidInput("cannot write " + obj_path);
    std::fprintf(f, "# colight asset export\nmtllib %s.mtl\n", name.c_str());
    for (const Vec3& v : mesh.vertices) std::fprintf(f, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    for (const auto& uv : mesh.uvs) std::fprintf(f, "vt %.9g %.9g\n", uv[0], uv[1]);
    for (const Vec3& n : normals) std::fprintf(f, "vn %.9g %.9g %.9g\n", n.x, n.y, n.z);
    std::fprintf(f, "usemtl %s\n", name.c_str());
    for (const auto& t : mesh.triangles)
        std::fprintf(f, "f %d/%d/%d %d/%d/%d %d/%d/%d\n", t[0] + 1, t[0] + 1, t[0] + 1, t[1] + 1,
                     t[1] + 1, t[1] + 1, t[2] + 1, t[2] + 1, t[2] + 1);
    std::fclose(f);

    f = std::fopen(mtl_path.c_str(), "wb");
    if (!f) throw InvalidInput("cannot write " + mtl_path);
    std::fprintf(f,
                 "newmtl %s\nmap_Kd %s_base_color.png\nmap_Pr %s_roughness.png\n"
                 "map_Pm %s_metallic.png\nnorm %s_normal.png\n",
                 name.c_str(), name.c_str(), name.c_str(), name.c_str(), name.c_str());
    std::fclose(f);

    // Base color: sRGB 8-bit.
    {
        PngImage png;
        png.width = png.height = textures.resolution;
        png.channels = 3;
        png.bit_depth = 8;
        png.pixels.resize(size_t(textures.resolution) * textures.resolution * 3);
        for (size_t i = 0; i < size_t(textures.resolution) * textures.resolution; ++i) {
            Rgb c = textures.base_color.at_index(i);
            for (int ch = 0; ch < 3; ++ch)
                png.pixels[i * 3 + ch] = uint16_t(std::lround(srgb_encode(c[ch]) * 255.0));
        }
        write_png(base + "_base_color.png", png);
    }
    write_png(base + "_roughness.png", gray8_from(textures.roughness));
    write_png(base + "_metallic.png", gray8_from(textures.metallic));
    write_png(base + "_dielectric.png", gray8_from(textures.dielectric));
    write_png(base + "_subsurface.png", gray8_from(textures.subsurface));
    write_png(base + "_clearcoat.png", gray8_from(textures.clearcoat));
    write_png(base + "_clearcoat_glossiness.png", gray8_from(textures.clearcoat_glossiness));
    // Normal map: 16-bit, (n+1)/2.
    {
        PngImage png;
        png.width = png.height = textures.resolution;
        png.channels = 3;
        png.bit_depth = 16;
        png.pixels.resize(size_t(textures.resolution) * textures.resolution * 3);
        for (size_t i = 0; i < size_t(textures.resolution) * textures.resolution; ++i) {
            Rgb n = textures.normal.at_index(i);
            for (int ch = 0; ch < 3; ++ch)
                png.pixels[i * 3 + ch] =
                    uint16_t(std::lround(clamp((n[ch] + 1.0) * 0.5, 0.0, 1.0) * 65535.0));
        }
        write_png(base + "_normal.png", png);
    }

    nlohmann::ordered_json sidecar;
    sidecar["format"] = "colight-asset-v1";
    sidecar["units"] = "meters";
    sidecar["coordinates"] = "right-handed, Y up";
    sidecar["normal_map"] = {{"space", "object"},
                             {"encoding", "(n+1)/2, 16-bit linear"},
                             {"file", name + "_normal.png"}};
    sidecar["base_color"] = {{"encoding", "sRGB 8-bit"}, {"file", name + "_base_color.png"}};
    nlohmann::ordered_json scalars = nlohmann::ordered_json::object();
    for (const char* ch : {"roughness", "metallic", "dielectric", "subsurface", "clearcoat",
                           "clearcoat_glossiness"})
        scalars[ch] = {{"encoding", "linear 8-bit gray"},
                       {"file", name + std::string("_") + ch + ".png"}};
    sidecar["scalar_maps"] = scalars;
    sidecar["charts"] = "per-triangle, one-texel gutters";
    std::ofstream side(base + ".json");
    side << sidecar.dump(2) << "\n";


}

TriangleMesh import_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    TriangleMesh mesh;
    std::vector<std::array<double, 2>> uv_pool;
    std::vector<int> vert_uv;  // uv index per vertex (1-based pool)
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v.x >> v.y >> v.z;
            mesh.vertices.push_back(v);
            vert_uv.push_back(-1);
        } else if (tag == "vt") {
            std::array<double, 2> uv{};
            ss >> uv[0] >> uv[1];
            uv_pool.push_back(uv);
        } else if (tag == "f") {
            std::array<int, 3> tri{};
            for (int c = 0; c < 3; ++c) {
                std::string tok;
                ss >> tok;
                int vi = std::atoi(tok.c_str());
                tri[c] = vi - 1;
                size_t slash = tok.find('/');
                if (slash != std::string::npos) {
                    int ti = std::atoi(tok.c_str() + slash + 1);
                    if (ti > 0 && size_t(vi - 1) < vert_uv.size()) vert_uv[vi - 1] = ti - 1;
                }
            }
            mesh.triangles.push_back(tri);
        }
    }
    if (!uv_pool.empty()) {
        mesh.uvs.assign(mesh.vertices.size(), {0, 0});
        for (size_t v = 0; v < mesh.vertices.size(); ++v)
            if (vert_uv[v] >= 0 && size_t(vert_uv[v]) < uv_pool.size()) mesh.uvs[v] = uv_pool[vert_uv[v]];
    }
    return mesh;
}

}  // namespace colight
