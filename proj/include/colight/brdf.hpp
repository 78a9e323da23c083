#pragma once

#include <array>
#include <string>

#include "colight/vec3.hpp"

namespace colight {

/// Lower clamp for n·h before any division by it. Grazing contributions are
/// suppressed by the max(n·v,0) factor in the radiance model, so the clamp
/// introduces no visible bias.
inline constexpr double kCosEps = 1e-4;

/// GGX roughness floor; D diverges as roughness -> 0.
inline constexpr double kRoughnessFloor = 1e-3;

/// The 9-dimensional reflectance parameter vector attached to a surface
/// point. All components live in [0,1].
struct TextelParams {
    Rgb base_color{0.5, 0.5, 0.5};
    double roughness = 0.5;
    double clearcoat_glossiness = 0.5;
    double subsurface = 0.0;
    double metallic = 0.0;
    double dielectric = 0.5;
    double clearcoat = 0.0;

    static constexpr int kDim = 9;
    static const std::array<std::string, kDim>& component_names();

    double component(int i) const;
    void set_component(int i, double v);
    std::array<double, kDim> to_array() const;
    static TextelParams from_array(const std::array<double, kDim>& a);

    bool in_unit_box() const;
    void clamp_to_unit_box();

    /// Derived clearcoat roughness, confined to [0.001, 0.1].
    double clearcoat_roughness() const { return 0.1 - 0.099 * clearcoat_glossiness; }
};

/// Shading configuration for the co-located model: view and light share one
/// direction h, so the BRDF depends on the single angle n·h.
struct ShadingGeom {
    double cos_nh = 1.0;

    /// Validates unit length of n and h, then clamps n·h into [kCosEps, 1].
    static ShadingGeom from_directions(const Vec3& n, const Vec3& h);
    static ShadingGeom from_cos(double cos_nh) { return {clamp(cos_nh, kCosEps, 1.0)}; }
};

/// Partial derivatives of the BRDF value. The base-color Jacobian is
/// diagonal (output channel k depends only on base_color[k]), so one Rgb per
/// parameter suffices.
struct BrdfGradient {
    Rgb d_base_color;  // d value[k] / d base_color[k]
    Rgb d_roughness;
    Rgb d_clearcoat_glossiness;
    Rgb d_subsurface;
    Rgb d_metallic;
    Rgb d_dielectric;
    Rgb d_clearcoat;
    Rgb d_cos_nh;

    /// Partial for component i in TextelParams::component order
    /// (0..2 = base color channels, then the six scalars).
    Rgb component(int i) const;
};

struct BrdfEval {
    Rgb value;
    BrdfGradient grad;
};

/// Full reflectance: diffuse + metallic + dielectric + clearcoat blend.
/// Throws InvalidInput if theta leaves the unit box.
Rgb eval_brdf(const ShadingGeom& geom, const TextelParams& theta);

/// Diffuse part only: (1-subsurface) * base lobe + subsurface * subsurface lobe.
Rgb eval_diffuse_lobes(const ShadingGeom& geom, const TextelParams& theta);

/// Shared GGX specular core D*G*F / (4 cos^2), with the caller-supplied
/// Fresnel term (base_color for the metallic lobe, 1 for the dielectric one).
Rgb eval_ggx_specular(const ShadingGeom& geom, const TextelParams& theta, const Rgb& fresnel);

/// Achromatic clearcoat lobe (Berry distribution, fixed F = 0.2).
double eval_clearcoat(const ShadingGeom& geom, const TextelParams& theta);

/// Value plus closed-form partials with respect to all nine parameters and
/// cos_nh. Matches central finite differences to < 1e-4 relative error.
BrdfEval brdf_gradient(const ShadingGeom& geom, const TextelParams& theta);

}  // namespace colight
