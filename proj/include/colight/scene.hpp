#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colight/brdf.hpp"
#include "colight/rng.hpp"
#include "colight/vec3.hpp"

namespace colight {

/// Spherical region of interest; geometry is defined and reconstructed only
/// inside it.
struct Roi {
    Vec3 center{0, 0, 0};
    double radius = 1.0;

    bool contains(const Vec3& x) const { return norm(x - center) <= radius; }
};

/// Sparse partials: (parameter index, d value / d parameter).
using SparseGrad = std::vector<std::pair<int, double>>;
using SparseVecGrad = std::vector<std::pair<int, Vec3>>;

/// How much of the shape-parameter chain a geometry supports.
enum class ShapeGradSupport {
    kNone,     // no optimizable shape parameters
    kSdfOnly,  // d sdf / d p available, normals not differentiable w.r.t. p
    kFull,     // sdf and normal partials available
};

class Geometry {
public:
    virtual ~Geometry() = default;
    virtual std::unique_ptr<Geometry> clone() const = 0;
    virtual std::string type_name() const = 0;

    virtual double sdf(const Vec3& x) const = 0;

    /// Gradient of the distance field. Analytic for primitives, central
    /// differences for grids. May have zero norm on medial axes.
    virtual Vec3 sdf_gradient(const Vec3& x) const = 0;

    /// Region index for multi-material assignment (nearest primitive).
    virtual int region_index(const Vec3&) const { return 0; }
    virtual int region_count() const { return 1; }

    // Optimizable shape parameters (flat, named, bounded).
    virtual int param_count() const { return 0; }
    virtual std::string param_name(int) const { return {}; }
    virtual void param_bounds(int, double& lo, double& hi) const { lo = 0; hi = 0; }
    virtual double get_param(int) const { return 0; }
    virtual void set_param(int, double) {}

    virtual ShapeGradSupport shape_grad_support() const { return ShapeGradSupport::kNone; }
    /// Appends (k, d sdf(x)/d p_k) for every parameter with nonzero partial.
    virtual void sdf_param_grad(const Vec3&, SparseGrad&) const {}
    /// Appends (k, d n(x)/d p_k) for the unit normal.
    virtual void normal_param_grad(const Vec3&, SparseVecGrad&) const {}
    /// Appends (k, d |grad sdf(x)| / d p_k). Empty for exact distance fields,
    /// whose gradient norm is 1 independent of the parameters.
    virtual void gradnorm_param_grad(const Vec3&, SparseGrad&) const {}
};

class SphereGeom final : public Geometry {
public:
    SphereGeom(const Vec3& center, double radius) : center_(center), radius_(radius) {}
    std::unique_ptr<Geometry> clone() const override { return std::make_unique<SphereGeom>(*this); }
    std::string type_name() const override { return "sphere"; }
    double sdf(const Vec3& x) const override { return norm(x - center_) - radius_; }
    Vec3 sdf_gradient(const Vec3& x) const override;

    int param_count() const override { return 4; }
    std::string param_name(int i) const override;
    void param_bounds(int i, double& lo, double& hi) const override;
    double get_param(int i) const override;
    void set_param(int i, double v) override;
    ShapeGradSupport shape_grad_support() const override { return ShapeGradSupport::kFull; }
    void sdf_param_grad(const Vec3& x, SparseGrad& out) const override;
    void normal_param_grad(const Vec3& x, SparseVecGrad& out) const override;

    const Vec3& center() const { return center_; }
    double radius() const { return radius_; }

private:
    Vec3 center_;
    double radius_;
};

class BoxGeom final : public Geometry {
public:
    BoxGeom(const Vec3& center, const Vec3& half_extents) : center_(center), half_(half_extents) {}
    std::unique_ptr<Geometry> clone() const override { return std::make_unique<BoxGeom>(*this); }
    std::string type_name() const override { return "box"; }
    double sdf(const Vec3& x) const override;
    Vec3 sdf_gradient(const Vec3& x) const override;
    const Vec3& center() const { return center_; }
    const Vec3& half_extents() const { return half_; }

private:
    Vec3 center_, half_;
};

/// Torus around a Y axis through its center.
class TorusGeom final : public Geometry {
public:
    TorusGeom(const Vec3& center, double major_radius, double minor_radius)
        : center_(center), major_(major_radius), minor_(minor_radius) {}
    std::unique_ptr<Geometry> clone() const override { return std::make_unique<TorusGeom>(*this); }
    std::string type_name() const override { return "torus"; }
    double sdf(const Vec3& x) const override;
    Vec3 sdf_gradient(const Vec3& x) const override;
    const Vec3& center() const { return center_; }
    double major_radius() const { return major_; }
    double minor_radius() const { return minor_; }

private:
    Vec3 center_;
    double major_, minor_;
};

class CapsuleGeom final : public Geometry {
public:
    CapsuleGeom(const Vec3& a, const Vec3& b, double radius) : a_(a), b_(b), radius_(radius) {}
    std::unique_ptr<Geometry> clone() const override { return std::make_unique<CapsuleGeom>(*this); }
    std::string type_name() const override { return "capsule"; }
    double sdf(const Vec3& x) const override;
    Vec3 sdf_gradient(const Vec3& x) const override;
    const Vec3& point_a() const { return a_; }
    const Vec3& point_b() const { return b_; }
    double radius() const { return radius_; }

private:
    Vec3 a_, b_;
    double radius_;
};

/// Union of child shapes. smoothness == 0 is a hard min; smoothness > 0
/// blends with the polynomial smooth-min of width k.
class CompositeGeom final : public Geometry {
public:
    CompositeGeom(std::vector<std::unique_ptr<Geometry>> children, double smoothness);
    CompositeGeom(const CompositeGeom& o);
    std::unique_ptr<Geometry> clone() const override { return std::make_unique<CompositeGeom>(*this); }
    std::string type_name() const override { return "composite"; }
    double sdf(const Vec3& x) const override;
    Vec3 sdf_gradient(const Vec3& x) const override;
    int region_index(const Vec3& x) const override;
    int region_count() const override { return (int)children_.size(); }

    int param_count() const override;
    std::string param_name(int i) const override;
    void param_bounds(int i, double& lo, double& hi) const override;
    double get_param(int i) const override;
    void set_param(int i, double v) override;
    ShapeGradSupport shape_grad_support() const override;
    void sdf_param_grad(const Vec3& x, SparseGrad& out) const override;
    void normal_param_grad(const Vec3& x, SparseVecGrad& out) const override;

    double smoothness() const { return smoothness_; }
    const Geometry& child(int i) const { return *children_[i]; }

private:
    // Maps flat parameter index to (child, child-local index).
    std::pair<int, int> locate(int i) const;
    std::vector<std::unique_ptr<Geometry>> children_;
    double smoothness_;
};

/// Trilinear distance grid over a box [origin, origin + (dims-1)*spacing].
/// Gradients are central differences of the interpolant with step = spacing.
class GridGeom final : public Geometry {
public:
    GridGeom(int nx, int ny, int nz, const Vec3& origin, const Vec3& spacing, std::vector<float> values);

    /// Samples fn at the grid nodes.
    static std::unique_ptr<GridGeom> from_function(int nx, int ny, int nz, const Vec3& origin,
                                                   const Vec3& spacing,
                                                   const std::function<double(const Vec3&)>& fn);

    std::unique_ptr<Geometry> clone() const override { return std::make_unique<GridGeom>(*this); }
    std::string type_name() const override { return "grid"; }
    double sdf(const Vec3& x) const override;
    Vec3 sdf_gradient(const Vec3& x) const override;

    int param_count() const override { return (int)values_.size(); }
    std::string param_name(int i) const override { return "cell" + std::to_string(i); }
    void param_bounds(int i, double& lo, double& hi) const override;
    double get_param(int i) const override { return values_[i]; }
    void set_param(int i, double v) override { values_[i] = float(v); }
    ShapeGradSupport shape_grad_support() const override { return ShapeGradSupport::kFull; }
    void sdf_param_grad(const Vec3& x, SparseGrad& out) const override;
    void normal_param_grad(const Vec3& x, SparseVecGrad& out) const override;
    void gradnorm_param_grad(const Vec3& x, SparseGrad& out) const override;

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    const Vec3& origin() const { return origin_; }
    const Vec3& spacing() const { return spacing_; }
    const std::vector<float>& values() const { return values_; }

    /// Trilinear weights at x: appends (node index, weight) for 8 nodes.
    void interp_weights(const Vec3& x, SparseGrad& out) const;

private:
    double value_at(const Vec3& x) const;
    int nx_, ny_, nz_;
    Vec3 origin_, spacing_;
    std::vector<float> values_;
};

// ---- Reflectance fields ----

/// Spatial field of TextelParams. Parameters are grouped in blocks of 9
/// (one TextelParams per region or grid node); flat index = group * 9 + comp.
class TexelField {
public:
    virtual ~TexelField() = default;
    virtual std::unique_ptr<TexelField> clone() const = 0;
    virtual std::string type_name() const = 0;

    TextelParams sample(const Vec3& x, const Geometry& geom) const;

    /// Interpolation weights: theta[c] = sum_k w_k * P[group_k * 9 + c].
    virtual void sample_weights(const Vec3& x, const Geometry& geom, SparseGrad& groups) const = 0;

    virtual int group_count() const = 0;
    virtual std::string group_name(int g) const = 0;
    int param_count() const { return group_count() * TextelParams::kDim; }
    std::string param_name(int i) const;
    virtual double get_param(int i) const = 0;
    virtual void set_param(int i, double v) = 0;
};

class ConstantTexelField final : public TexelField {
public:
    explicit ConstantTexelField(const TextelParams& theta) : theta_(theta) {}
    std::unique_ptr<TexelField> clone() const override { return std::make_unique<ConstantTexelField>(*this); }
    std::string type_name() const override { return "constant"; }
    void sample_weights(const Vec3&, const Geometry&, SparseGrad& groups) const override {
        groups.emplace_back(0, 1.0);
    }
    int group_count() const override { return 1; }
    std::string group_name(int) const override { return {}; }
    double get_param(int i) const override { return theta_.component(i); }
    void set_param(int i, double v) override { theta_.set_component(i, v); }
    const TextelParams& theta() const { return theta_; }

private:
    TextelParams theta_;
};

/// One TextelParams per composite region; lookup follows the nearest-region
/// rule (smallest individual child distance).
class PerPrimitiveTexelField final : public TexelField {
public:
    explicit PerPrimitiveTexelField(std::vector<TextelParams> thetas) : thetas_(std::move(thetas)) {}
    std::unique_ptr<TexelField> clone() const override {
        return std::make_unique<PerPrimitiveTexelField>(*this);
    }
    std::string type_name() const override { return "per_primitive"; }
    void sample_weights(const Vec3& x, const Geometry& geom, SparseGrad& groups) const override;
    int group_count() const override { return (int)thetas_.size(); }
    std::string group_name(int g) const override { return "prim" + std::to_string(g) + "."; }
    double get_param(int i) const override {
        return thetas_[i / TextelParams::kDim].component(i % TextelParams::kDim);
    }
    void set_param(int i, double v) override {
        thetas_[i / TextelParams::kDim].set_component(i % TextelParams::kDim, v);
    }
    const std::vector<TextelParams>& thetas() const { return thetas_; }

private:
    std::vector<TextelParams> thetas_;
};

/// Trilinear grid of TextelParams (9 floats per node).
class GridTexelField final : public TexelField {
public:
    GridTexelField(int nx, int ny, int nz, const Vec3& origin, const Vec3& spacing,
                   std::vector<float> values);
    std::unique_ptr<TexelField> clone() const override { return std::make_unique<GridTexelField>(*this); }
    std::string type_name() const override { return "grid"; }
    void sample_weights(const Vec3& x, const Geometry& geom, SparseGrad& groups) const override;
    int group_count() const override { return nx_ * ny_ * nz_; }
    std::string group_name(int g) const override { return "node" + std::to_string(g) + "."; }
    double get_param(int i) const override { return values_[i]; }
    void set_param(int i, double v) override { values_[i] = float(v); }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    const Vec3& origin() const { return origin_; }
    const Vec3& spacing() const { return spacing_; }
    const std::vector<float>& values() const { return values_; }

private:
    int nx_, ny_, nz_;
    Vec3 origin_, spacing_;
    std::vector<float> values_;  // node-major, 9 per node
};

// ---- Scene ----

/// Signed distance scene with an attached reflectance field. Immutable while
/// rendering; fits mutate their own copy between passes, so parallel queries
/// are safe.
class SdfScene {
public:
    SdfScene() = default;
    SdfScene(Roi roi, std::unique_ptr<Geometry> geometry, std::unique_ptr<TexelField> texels)
        : roi_(roi), geometry_(std::move(geometry)), texels_(std::move(texels)) {}
    SdfScene(const SdfScene& o)
        : roi_(o.roi_),
          geometry_(o.geometry_ ? o.geometry_->clone() : nullptr),
          texels_(o.texels_ ? o.texels_->clone() : nullptr) {}
    SdfScene& operator=(const SdfScene& o) {
        if (this != &o) {
            roi_ = o.roi_;
            geometry_ = o.geometry_ ? o.geometry_->clone() : nullptr;
            texels_ = o.texels_ ? o.texels_->clone() : nullptr;
        }
        return *this;
    }
    SdfScene(SdfScene&&) = default;
    SdfScene& operator=(SdfScene&&) = default;

    const Roi& roi() const { return roi_; }
    Geometry& geometry() { return *geometry_; }
    const Geometry& geometry() const { return *geometry_; }
    TexelField& texels() { return *texels_; }
    const TexelField& texels() const { return *texels_; }

    struct SdfValue {
        double value;
        bool outside_roi;
    };

    /// Signed distance; for points outside the ROI returns the distance to
    /// the ROI sphere with the flag set.
    SdfValue sdf_ex(const Vec3& x) const {
        double d_roi = norm(x - roi_.center) - roi_.radius;
        if (d_roi > 0) return {d_roi, true};
        return {geometry_->sdf(x), false};
    }
    double sdf(const Vec3& x) const { return sdf_ex(x).value; }

    /// Unit gradient normal; nullopt on degenerate-gradient (medial axis) points.
    std::optional<Vec3> try_normal(const Vec3& x) const {
        Vec3 g = geometry_->sdf_gradient(x);
        double n = norm(g);
        if (n <= 1e-8) return std::nullopt;
        return g / n;
    }
    /// Throwing variant of try_normal.
    Vec3 normal(const Vec3& x) const;

    TextelParams sample_texel(const Vec3& x) const {
        TextelParams t = texels_->sample(x, *geometry_);
        t.clamp_to_unit_box();
        return t;
    }

private:
    Roi roi_;
    std::unique_ptr<Geometry> geometry_;
    std::unique_ptr<TexelField> texels_;
};

/// Mean squared Eikonal residual E[(1 - |grad sdf|)^2] over the given points.
double eikonal_residual(const SdfScene& scene, std::span<const Vec3> points);

/// Uniform samples inside the ROI sphere.
std::vector<Vec3> sample_roi_points(const Roi& roi, int n, Rng& rng);

}  // namespace colight
