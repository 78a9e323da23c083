#include "colight/scene.hpp"

#include <cmath>
#include <map>

#include "colight/errors.hpp"

namespace colight {

// ---- Sphere ----

Vec3 SphereGeom::sdf_gradient(const Vec3& x) const {
    Vec3 u = x - center_;
    double n = norm(u);
    if (n <= 1e-12) return {0, 0, 0};
    return u / n;
}

std::string SphereGeom::param_name(int i) const {
    static const char* names[4] = {"center.x", "center.y", "center.z", "radius"};
    return names[i];
}

void SphereGeom::param_bounds(int i, double& lo, double& hi) const {
    if (i < 3) {
        lo = center_[i] - 10.0 * radius_;
        hi = center_[i] + 10.0 * radius_;
    } else {
        lo = 1e-4;
        hi = 100.0 * radius_;
    }
}

double SphereGeom::get_param(int i) const { return i < 3 ? center_[i] : radius_; }

void SphereGeom::set_param(int i, double v) {
    if (i < 3)
        center_[i] = v;
    else
        radius_ = v;
}

void SphereGeom::sdf_param_grad(const Vec3& x, SparseGrad& out) const {
    Vec3 u = x - center_;
    double n = norm(u);
    if (n > 1e-12) {
        Vec3 g = u / n;
        out.emplace_back(0, -g.x);
        out.emplace_back(1, -g.y);
        out.emplace_back(2, -g.z);
    }
    out.emplace_back(3, -1.0);
}

void SphereGeom::normal_param_grad(const Vec3& x, SparseVecGrad& out) const {
    Vec3 u = x - center_;
    double n = norm(u);
    if (n <= 1e-12) return;
    Vec3 nn = u / n;
    // d n / d center_j = -(I - n n^T)_j / |u|;  d n / d radius = 0.
    for (int j = 0; j < 3; ++j) {
        Vec3 col{j == 0 ? 1.0 : 0.0, j == 1 ? 1.0 : 0.0, j == 2 ? 1.0 : 0.0};
        Vec3 d = (col - nn * nn[j]) * (-1.0 / n);
        out.emplace_back(j, d);
    }
}

// ---- Box ----

double BoxGeom::sdf(const Vec3& x) const {
    Vec3 p = x - center_;
    Vec3 q{std::fabs(p.x) - half_.x, std::fabs(p.y) - half_.y, std::fabs(p.z) - half_.z};
    Vec3 qp = max(q, Vec3{0, 0, 0});
    double outside = norm(qp);
    double inside = std::fmin(std::fmax(q.x, std::fmax(q.y, q.z)), 0.0);
    return outside + inside;
}

Vec3 BoxGeom::sdf_gradient(const Vec3& x) const {
    Vec3 p = x - center_;
    Vec3 q{std::fabs(p.x) - half_.x, std::fabs(p.y) - half_.y, std::fabs(p.z) - half_.z};
    Vec3 qp = max(q, Vec3{0, 0, 0});
    double outside = norm(qp);
    Vec3 g;
    if (outside > 1e-12) {
        g = qp / outside;
    } else {
        // Inside: subgradient along the closest face.
        int axis = 0;
        if (q.y > q[axis]) axis = 1;
        if (q.z > q[axis]) axis = 2;
        g = {0, 0, 0};
        g[axis] = 1.0;
    }
    return {p.x < 0 ? -g.x : g.x, p.y < 0 ? -g.y : g.y, p.z < 0 ? -g.z : g.z};
}

// ---- Torus ----

double TorusGeom::sdf(const Vec3& x) const {
    Vec3 p = x - center_;
    double l = std::sqrt(p.x * p.x + p.z * p.z);
    double qx = l - major_;
    return std::sqrt(qx * qx + p.y * p.y) - minor_;
}

Vec3 TorusGeom::sdf_gradient(const Vec3& x) const {
    Vec3 p = x - center_;
    double l = std::sqrt(p.x * p.x + p.z * p.z);
    if (l < 1e-12) return {0, 0, 0};  // on the axis the distance is not smooth
    double qx = l - major_;
    double qn = std::sqrt(qx * qx + p.y * p.y);
    if (qn < 1e-12) return {0, 0, 0};  // core circle (medial)
    return {qx / qn * p.x / l, p.y / qn, qx / qn * p.z / l};
}

// ---- Capsule ----

double CapsuleGeom::sdf(const Vec3& x) const {
    Vec3 pa = x - a_, ba = b_ - a_;
    double h = clamp(dot(pa, ba) / dot(ba, ba), 0.0, 1.0);
    return norm(pa - ba * h) - radius_;
}

Vec3 CapsuleGeom::sdf_gradient(const Vec3& x) const {
    Vec3 pa = x - a_, ba = b_ - a_;
    double h = clamp(dot(pa, ba) / dot(ba, ba), 0.0, 1.0);
    Vec3 d = pa - ba * h;
    double n = norm(d);
    if (n < 1e-12) return {0, 0, 0};
    return d / n;
}

// ---- Composite ----

namespace {

// Polynomial smooth min; k = 0 degenerates to a hard min.
struct SminResult {
    double value;
    double da, db;
};

SminResult smin(double a, double b, double k) {
    if (k <= 0.0) {
        if (a <= b) return {a, 1.0, 0.0};
        return {b, 0.0, 1.0};
    }
    double h = clamp(0.5 + 0.5 * (b - a) / k, 0.0, 1.0);
    double value = b + (a - b) * h - k * h * (1.0 - h);
    // Envelope property: inside the band d value/dh vanishes, so the
    // partials are just the blend weights.
    return {value, h, 1.0 - h};
}

}  // namespace

CompositeGeom::CompositeGeom(std::vector<std::unique_ptr<Geometry>> children, double smoothness)
    : children_(std::move(children)), smoothness_(smoothness) {
    if (children_.empty()) throw InvalidInput("composite needs at least one child");
}

CompositeGeom::CompositeGeom(const CompositeGeom& o) : smoothness_(o.smoothness_) {
    children_.reserve(o.children_.size());
    for (const auto& c : o.children_) children_.push_back(c->clone());
}

double CompositeGeom::sdf(const Vec3& x) const {
    double d = children_[0]->sdf(x);
    for (size_t i = 1; i < children_.size(); ++i) d = smin(d, children_[i]->sdf(x), smoothness_).value;
    return d;
}

Vec3 CompositeGeom::sdf_gradient(const Vec3& x) const {
    double d = children_[0]->sdf(x);
    Vec3 g = children_[0]->sdf_gradient(x);
    for (size_t i = 1; i < children_.size(); ++i) {
        double di = children_[i]->sdf(x);
        SminResult s = smin(d, di, smoothness_);
        g = g * s.da + children_[i]->sdf_gradient(x) * s.db;
        d = s.value;
    }
    return g;
}

int CompositeGeom::region_index(const Vec3& x) const {
    int best = 0;
    double bestd = children_[0]->sdf(x);
    for (size_t i = 1; i < children_.size(); ++i) {
        double di = children_[i]->sdf(x);
        if (di < bestd) {
            bestd = di;
            best = (int)i;
        }
    }
    return best;
}

int CompositeGeom::param_count() const {
    int n = 0;
    for (const auto& c : children_) n += c->param_count();
    return n;
}

std::pair<int, int> CompositeGeom::locate(int i) const {
    for (size_t c = 0; c < children_.size(); ++c) {
        int n = children_[c]->param_count();
        if (i < n) return {(int)c, i};
        i -= n;
    }
    throw InvalidInput("composite parameter index out of range");
}

std::string CompositeGeom::param_name(int i) const {
    auto [c, j] = locate(i);
    return "child" + std::to_string(c) + "." + children_[c]->param_name(j);
}

void CompositeGeom::param_bounds(int i, double& lo, double& hi) const {
    auto [c, j] = locate(i);
    children_[c]->param_bounds(j, lo, hi);
}

double CompositeGeom::get_param(int i) const {
    auto [c, j] = locate(i);
    return children_[c]->get_param(j);
}

void CompositeGeom::set_param(int i, double v) {
    auto [c, j] = locate(i);
    children_[c]->set_param(j, v);
}

ShapeGradSupport CompositeGeom::shape_grad_support() const {
    ShapeGradSupport s =
        smoothness_ > 0.0 ? ShapeGradSupport::kSdfOnly : ShapeGradSupport::kFull;
    for (const auto& c : children_) {
        if (c->param_count() == 0) continue;
        ShapeGradSupport cs = c->shape_grad_support();
        if (cs == ShapeGradSupport::kNone) return ShapeGradSupport::kNone;
        if (cs == ShapeGradSupport::kSdfOnly) s = ShapeGradSupport::kSdfOnly;
    }
    return s;
}

void CompositeGeom::sdf_param_grad(const Vec3& x, SparseGrad& out) const {
    // Forward pass records the fold weights of each child's distance.
    size_t n = children_.size();
    std::vector<double> weight(n, 0.0);
    std::vector<double> dvals(n);
    for (size_t i = 0; i < n; ++i) dvals[i] = children_[i]->sdf(x);
    double d = dvals[0];
    weight[0] = 1.0;
    for (size_t i = 1; i < n; ++i) {
        SminResult s = smin(d, dvals[i], smoothness_);
        for (size_t j = 0; j < i; ++j) weight[j] *= s.da;
        weight[i] = s.db;
        d = s.value;
    }
    SparseGrad child_grad;
    int offset = 0;
    for (size_t i = 0; i < n; ++i) {
        int pc = children_[i]->param_count();
        if (pc > 0 && weight[i] != 0.0) {
            child_grad.clear();
            children_[i]->sdf_param_grad(x, child_grad);
            for (auto& [idx, val] : child_grad) out.emplace_back(offset + idx, val * weight[i]);
        }
        offset += pc;
    }
}

void CompositeGeom::normal_param_grad(const Vec3& x, SparseVecGrad& out) const {
    if (smoothness_ > 0.0)
        throw NumericalFailure("normal shape-partials unavailable for smooth composites");
    int region = region_index(x);
    int offset = 0;
    for (int i = 0; i < region; ++i) offset += children_[i]->param_count();
    SparseVecGrad child_grad;
    children_[region]->normal_param_grad(x, child_grad);
    for (auto& [idx, val] : child_grad) out.emplace_back(offset + idx, val);
}

// ---- Grid ----

GridGeom::GridGeom(int nx, int ny, int nz, const Vec3& origin, const Vec3& spacing,
                   std::vector<float> values)
    : nx_(nx), ny_(ny), nz_(nz), origin_(origin), spacing_(spacing), values_(std::move(values)) {
    if (nx < 2 || ny < 2 || nz < 2) throw InvalidInput("grid needs at least 2 nodes per axis");
    if (values_.size() != size_t(nx) * ny * nz) throw InvalidInput("grid value count mismatch");
}

std::unique_ptr<GridGeom> GridGeom::from_function(int nx, int ny, int nz, const Vec3& origin,
                                                  const Vec3& spacing,
                                                  const std::function<double(const Vec3&)>& fn) {
    std::vector<float> vals(size_t(nx) * ny * nz);
    size_t i = 0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                vals[i++] = float(fn(origin + Vec3{x * spacing.x, y * spacing.y, z * spacing.z}));
    return std::make_unique<GridGeom>(nx, ny, nz, origin, spacing, std::move(vals));
}

void GridGeom::interp_weights(const Vec3& x, SparseGrad& out) const {
    double fx = clamp((x.x - origin_.x) / spacing_.x, 0.0, nx_ - 1.000001);
    double fy = clamp((x.y - origin_.y) / spacing_.y, 0.0, ny_ - 1.000001);
    double fz = clamp((x.z - origin_.z) / spacing_.z, 0.0, nz_ - 1.000001);
    int ix = (int)fx, iy = (int)fy, iz = (int)fz;
    double tx = fx - ix, ty = fy - iy, tz = fz - iz;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                int idx = (iz + dz) * ny_ * nx_ + (iy + dy) * nx_ + (ix + dx);
                out.emplace_back(idx, w);
            }
}

double GridGeom::value_at(const Vec3& x) const {
    SparseGrad w;
    w.reserve(8);
    interp_weights(x, w);
    double v = 0;
    for (auto& [idx, wi] : w) v += wi * values_[idx];
    return v;
}

double GridGeom::sdf(const Vec3& x) const { return value_at(x); }

Vec3 GridGeom::sdf_gradient(const Vec3& x) const {
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 h{0, 0, 0};
        h[a] = spacing_[a];
        g[a] = (value_at(x + h) - value_at(x - h)) / (2.0 * spacing_[a]);
    }
    return g;
}

void GridGeom::param_bounds(int, double& lo, double& hi) const {
    double diag = norm(Vec3{(nx_ - 1) * spacing_.x, (ny_ - 1) * spacing_.y, (nz_ - 1) * spacing_.z});
    lo = -2.0 * diag;
    hi = 2.0 * diag;
}

void GridGeom::sdf_param_grad(const Vec3& x, SparseGrad& out) const { interp_weights(x, out); }

void GridGeom::normal_param_grad(const Vec3& x, SparseVecGrad& out) const {
    Vec3 g = sdf_gradient(x);
    double gn = norm(g);
    if (gn <= 1e-8) return;
    Vec3 n = g / gn;
    // d n / d cell = (I - n n^T)/|g| * d g / d cell, with d g / d cell from
    // the two offset interpolation stencils per axis.
    std::map<int, Vec3> dg;
    SparseGrad w;
    for (int a = 0; a < 3; ++a) {
        Vec3 h{0, 0, 0};
        h[a] = spacing_[a];
        double inv2h = 1.0 / (2.0 * spacing_[a]);
        w.clear();
        interp_weights(x + h, w);
        for (auto& [idx, wi] : w) dg[idx][a] += wi * inv2h;
        w.clear();
        interp_weights(x - h, w);
        for (auto& [idx, wi] : w) dg[idx][a] -= wi * inv2h;
    }
    for (auto& [idx, dgi] : dg) {
        Vec3 dn = (dgi - n * dot(n, dgi)) / gn;
        out.emplace_back(idx, dn);
    }
}

void GridGeom::gradnorm_param_grad(const Vec3& x, SparseGrad& out) const {
    Vec3 g = sdf_gradient(x);
    double gn = norm(g);
    if (gn <= 1e-8) return;
    Vec3 u = g / gn;
    std::map<int, Vec3> dg;
    SparseGrad w;
    for (int a = 0; a < 3; ++a) {
        Vec3 h{0, 0, 0};
        h[a] = spacing_[a];
        double inv2h = 1.0 / (2.0 * spacing_[a]);
        w.clear();
        interp_weights(x + h, w);
        for (auto& [idx, wi] : w) dg[idx][a] += wi * inv2h;
        w.clear();
        interp_weights(x - h, w);
        for (auto& [idx, wi] : w) dg[idx][a] -= wi * inv2h;
    }
    for (auto& [idx, dgi] : dg) out.emplace_back(idx, dot(u, dgi));
}

// ---- Texel fields ----

TextelParams TexelField::sample(const Vec3& x, const Geometry& geom) const {
    SparseGrad groups;
    sample_weights(x, geom, groups);
    TextelParams t;
    for (int c = 0; c < TextelParams::kDim; ++c) {
        double v = 0;
        for (auto& [g, w] : groups) v += w * get_param(g * TextelParams::kDim + c);
        t.set_component(c, v);
    }
    return t;
}

std::string TexelField::param_name(int i) const {
    int g = i / TextelParams::kDim, c = i % TextelParams::kDim;
    return group_name(g) + TextelParams::component_names()[c];
}

void PerPrimitiveTexelField::sample_weights(const Vec3& x, const Geometry& geom,
                                            SparseGrad& groups) const {
    int region = geom.region_index(x);
    if (region >= (int)thetas_.size())
        throw InvalidInput("per-primitive texel field smaller than region count");
    groups.emplace_back(region, 1.0);
}

GridTexelField::GridTexelField(int nx, int ny, int nz, const Vec3& origin, const Vec3& spacing,
                               std::vector<float> values)
    : nx_(nx), ny_(ny), nz_(nz), origin_(origin), spacing_(spacing), values_(std::move(values)) {
    if (values_.size() != size_t(nx) * ny * nz * TextelParams::kDim)
        throw InvalidInput("texel grid value count mismatch");
}

void GridTexelField::sample_weights(const Vec3& x, const Geometry&, SparseGrad& groups) const {
    double fx = clamp((x.x - origin_.x) / spacing_.x, 0.0, nx_ - 1.000001);
    double fy = clamp((x.y - origin_.y) / spacing_.y, 0.0, ny_ - 1.000001);
    double fz = clamp((x.z - origin_.z) / spacing_.z, 0.0, nz_ - 1.000001);
    int ix = (int)fx, iy = (int)fy, iz = (int)fz;
    double tx = fx - ix, ty = fy - iy, tz = fz - iz;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                groups.emplace_back((iz + dz) * ny_ * nx_ + (iy + dy) * nx_ + (ix + dx), w);
            }
}

// ---- Scene ----

Vec3 SdfScene::normal(const Vec3& x) const {
    auto n = try_normal(x);
    if (!n) throw NumericalFailure("degenerate distance gradient (medial axis)");
    return *n;
}

double eikonal_residual(const SdfScene& scene, std::span<const Vec3> points) {
    if (points.empty()) return 0.0;
    double acc = 0.0;
    for (const Vec3& p : points) {
        double r = 1.0 - norm(scene.geometry().sdf_gradient(p));
        acc += r * r;
    }
    return acc / double(points.size());
}

std::vector<Vec3> sample_roi_points(const Roi& roi, int n, Rng& rng) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        // Uniform direction via the cylinder trick, radius by cube-root law.
        double z = 1.0 - 2.0 * rng.uniform();
        double phi = 2.0 * M_PI * rng.uniform();
        double s = std::sqrt(std::fmax(0.0, 1.0 - z * z));
        double r = roi.radius * std::cbrt(rng.uniform());
        pts.push_back(roi.center + Vec3{s * std::cos(phi), s * std::sin(phi), z} * r);
    }
    return pts;
}

}  // namespace colight
