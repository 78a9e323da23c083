#pragma once

#include <memory>
#include <string>

#include "colight/brdf.hpp"
#include "colight/image.hpp"
#include "colight/rng.hpp"
#include "colight/vec3.hpp"

namespace colight {

/// Co-located point light state: intensity scale gamma (one unit of radiant
/// intensity when gamma == 1) and the binary on/off switch s.
struct Flashlight {
    double gamma = 1.0;
    int s = 0;

    void validate() const;
};

/// Ambient illumination for forward synthesis: black, constant, or an
/// equirectangular HDR raster. Directions use Y-up world coordinates.
class EnvironmentMap {
public:
    enum class Kind { kBlack, kConstant, kEquirect };

    EnvironmentMap() = default;
    static EnvironmentMap black() { return EnvironmentMap(); }
    static EnvironmentMap constant(const Rgb& c, int samples = 64);
    static EnvironmentMap equirect(HdrImage raster, int samples = 64);

    Kind kind() const { return kind_; }
    bool is_black() const { return kind_ == Kind::kBlack; }
    int samples() const { return samples_; }
    void set_samples(int n) { samples_ = n; }
    const Rgb& constant_color() const { return constant_; }
    const HdrImage& raster() const { return raster_; }

    /// Radiance arriving from direction d (pointing away from the surface).
    Rgb sample(const Vec3& d) const;

private:
    Kind kind_ = Kind::kBlack;
    Rgb constant_{0, 0, 0};
    HdrImage raster_;
    int samples_ = 64;
};

/// Parameter gradient of a shaded color: one Rgb per Theta component
/// (base-color block is diagonal like BrdfGradient) plus d/d normal.
struct ShadeGrad {
    Rgb d_theta[TextelParams::kDim];
    Rgb d_normal[3];  // d color / d n_k

    void clear() {
        for (auto& g : d_theta) g = {};
        for (auto& g : d_normal) g = {};
    }
    void accumulate_theta(const BrdfGradient& g, double scale);
};

/// Flashlight reflection at a surface point seen (and lit) from direction v
/// at distance t: rho(n,v,v) * max(n.v, 0) / t^2, with unit radiant
/// intensity. Throws on t <= 0.
Rgb flashlight_radiance(const Vec3& n, const Vec3& v, double t, const TextelParams& theta);
Rgb flashlight_radiance_grad(const Vec3& n, const Vec3& v, double t, const TextelParams& theta,
                             ShadeGrad& grad);

/// Direct-lighting environment shading: stratified hemisphere samples around
/// n, joint direction h = normalize(v + l) fed to the co-located BRDF.
/// Deterministic for a given stream; no shadows or interreflections.
Rgb ambient_radiance(const Vec3& v, const Vec3& n, const TextelParams& theta,
                     const EnvironmentMap& env, Rng rng);
Rgb ambient_radiance_grad(const Vec3& v, const Vec3& n, const TextelParams& theta,
                          const EnvironmentMap& env, Rng rng, ShadeGrad& grad);

/// Image formation: ambient + s * gamma * flash.
inline Rgb compose_intensity(const Rgb& ambient, const Rgb& flash, const Flashlight& light) {
    if (!light.s) return ambient;
    return ambient + flash * light.gamma;
}

/// Saturation rule: a pixel exceeds the displayable range if any channel is
/// >= threshold or negative.
bool pixel_saturated(const Rgb& c, double threshold = 1.0);

/// Saturation-aware L1: mean over pixels of M_p * sum_ch |I - Ihat|, where
/// M_p = 0 iff both pixels are saturated. Row-major summation order.
double rgb_loss(const HdrImage& rendered, const HdrImage& observed, double saturation_threshold = 1.0);

/// Mean binary cross entropy between mask values and accumulated alphas,
/// probabilities clamped to [1e-6, 1 - 1e-6].
double mask_loss(const ScalarImage& predicted_alpha_sums, const std::vector<uint8_t>& mask);
double bce(double target, double prob);

struct LossWeights {
    double w_eikonal = 0.1;
    double w_mask = 0.1;  // applied only when masks are supplied
};

double total_loss(double rgb, double eikonal, double mask_term, double w_eikonal, double w_mask);

}  // namespace colight
