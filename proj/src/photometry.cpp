#include "colight/photometry.hpp"

#include <cmath>

#include "colight/errors.hpp"

namespace colight {

void Flashlight::validate() const {
    if (!(gamma > 0)) throw InvalidInput("flashlight gamma must be > 0");
    if (s != 0 && s != 1) throw InvalidInput("flashlight switch must be 0 or 1");
}

EnvironmentMap EnvironmentMap::constant(const Rgb& c, int samples) {
    EnvironmentMap e;
    e.kind_ = Kind::kConstant;
    e.constant_ = c;
    e.samples_ = samples;
    return e;
}

EnvironmentMap EnvironmentMap::equirect(HdrImage raster, int samples) {
    for (double v : raster.data())
        if (!(v >= 0) || !std::isfinite(v)) throw InvalidInput("environment texels must be finite and >= 0");
    EnvironmentMap e;
    e.kind_ = Kind::kEquirect;
    e.raster_ = std::move(raster);
    e.samples_ = samples;
    return e;
}

Rgb EnvironmentMap::sample(const Vec3& d) const {
    switch (kind_) {
        case Kind::kBlack: return {0, 0, 0};
        case Kind::kConstant: return constant_;
        case Kind::kEquirect: break;
    }
    // Equirectangular: u wraps azimuth atan2(x, z), v maps polar acos(y).
    double theta = std::acos(clamp(d.y, -1.0, 1.0));
    double phi = std::atan2(d.x, d.z);
    double u = (phi + M_PI) / (2.0 * M_PI);
    double v = theta / M_PI;
    int w = raster_.width(), h = raster_.height();
    double px = u * w - 0.5, py = v * h - 0.5;
    int x0 = (int)std::floor(px), y0 = (int)std::floor(py);
    double tx = px - x0, ty = py - y0;
    auto wrap_x = [&](int x) { return ((x % w) + w) % w; };
    auto clamp_y = [&](int y) { return y < 0 ? 0 : (y >= h ? h - 1 : y); };
    Rgb c00 = raster_.at(wrap_x(x0), clamp_y(y0));
    Rgb c10 = raster_.at(wrap_x(x0 + 1), clamp_y(y0));
    Rgb c01 = raster_.at(wrap_x(x0), clamp_y(y0 + 1));
    Rgb c11 = raster_.at(wrap_x(x0 + 1), clamp_y(y0 + 1));
    return (c00 * (1 - tx) + c10 * tx) * (1 - ty) + (c01 * (1 - tx) + c11 * tx) * ty;
}

void ShadeGrad::accumulate_theta(const BrdfGradient& g, double scale) {
    for (int i = 0; i < TextelParams::kDim; ++i) {
        Rgb gi = g.component(i);
        d_theta[i] += gi * scale;
    }
}

namespace {

struct FlashCommon {
    double cos_nv;
    double inv_t2;
    ShadingGeom geom;
};

FlashCommon flash_common(const Vec3& n, const Vec3& v, double t) {
    if (!(t > 0)) throw InvalidInput("viewing distance must be > 0");
    FlashCommon f;
    f.cos_nv = dot(n, v);
    f.inv_t2 = 1.0 / (t * t);
    f.geom = ShadingGeom::from_cos(f.cos_nv);
    return f;
}

}  // namespace

Rgb flashlight_radiance(const Vec3& n, const Vec3& v, double t, const TextelParams& theta) {
    FlashCommon f = flash_common(n, v, t);
    if (f.cos_nv <= 0) return {0, 0, 0};
    return eval_brdf(f.geom, theta) * (f.cos_nv * f.inv_t2);
}

Rgb flashlight_radiance_grad(const Vec3& n, const Vec3& v, double t, const TextelParams& theta,
                             ShadeGrad& grad) {
    FlashCommon f = flash_common(n, v, t);
    if (f.cos_nv <= 0) return {0, 0, 0};
    BrdfEval e = brdf_gradient(f.geom, theta);
    double w = f.cos_nv * f.inv_t2;
    grad.accumulate_theta(e.grad, w);
    // d color / d n = inv_t2 * (d rho/d cos * cos + rho) * v, through
    // cos_nv = n.v appearing in both the BRDF angle and the foreshortening.
    bool clamped = f.cos_nv < kCosEps;
    for (int k = 0; k < 3; ++k) {
        Rgb dc = e.grad.d_cos_nh * (clamped ? 0.0 : f.cos_nv) + e.value;
        grad.d_normal[k] += dc * (f.inv_t2 * v[k]);
    }
    return e.value * w;
}

namespace {

// Stratified uniform-hemisphere directions around n in a deterministic frame.
struct HemisphereSampler {
    Vec3 n, t, b;
    int grid;  // grid x grid strata

    HemisphereSampler(const Vec3& n_, int samples) : n(n_) {
        orthonormal_basis(n, t, b);
        grid = 1;
        while (grid * grid < samples) ++grid;
    }
    int count() const { return grid * grid; }

    Vec3 direction(int i, Rng& rng) const {
        int sx = i % grid, sy = i / grid;
        double u = (sx + rng.uniform()) / grid;
        double w = (sy + rng.uniform()) / grid;
        double cos_theta = u;  // uniform in cos for uniform hemisphere density
        double sin_theta = std::sqrt(std::fmax(0.0, 1.0 - cos_theta * cos_theta));
        double phi = 2.0 * M_PI * w;
        return t * (sin_theta * std::cos(phi)) + b * (sin_theta * std::sin(phi)) + n * cos_theta;
    }
};

template <bool kWithGrad>
Rgb ambient_impl(const Vec3& v, const Vec3& n, const TextelParams& theta, const EnvironmentMap& env,
                 Rng rng, ShadeGrad* grad) {
    if (env.is_black()) return {0, 0, 0};
    HemisphereSampler sampler(n, env.samples());
    const double pdf_weight = 2.0 * M_PI / sampler.count();
    Rgb acc{0, 0, 0};
    for (int i = 0; i < sampler.count(); ++i) {
        Vec3 l = sampler.direction(i, rng);
        double cos_nl = dot(n, l);
        if (cos_nl <= 0) continue;
        Vec3 half = v + l;
        double hn = norm(half);
        if (hn < 1e-8) continue;
        half = half / hn;
        ShadingGeom geom = ShadingGeom::from_cos(dot(n, half));
        Rgb e = env.sample(l);
        double w = pdf_weight * cos_nl;
        if constexpr (kWithGrad) {
            BrdfEval be = brdf_gradient(geom, theta);
            acc += be.value * e * w;
            for (int c = 0; c < TextelParams::kDim; ++c)
                grad->d_theta[c] += be.grad.component(c) * e * w;
            // Treats the sampling frame as fixed; the integrand terms in n
            // are differentiated, the frame rotation is not.
            bool clamped = geom.cos_nh <= kCosEps || geom.cos_nh >= 1.0;
            for (int k = 0; k < 3; ++k) {
                Rgb d = be.value * e * (pdf_weight * l[k]);
                if (!clamped) d += be.grad.d_cos_nh * e * (w * half[k]);
                grad->d_normal[k] += d;
            }
        } else {
            acc += eval_brdf(geom, theta) * e * w;
        }
    }
    return acc;
}

}  // namespace

Rgb ambient_radiance(const Vec3& v, const Vec3& n, const TextelParams& theta,
                     const EnvironmentMap& env, Rng rng) {
    return ambient_impl<false>(v, n, theta, env, rng, nullptr);
}

Rgb ambient_radiance_grad(const Vec3& v, const Vec3& n, const TextelParams& theta,
                          const EnvironmentMap& env, Rng rng, ShadeGrad& grad) {
    return ambient_impl<true>(v, n, theta, env, rng, &grad);
}

bool pixel_saturated(const Rgb& c, double threshold) {
    for (int ch = 0; ch < 3; ++ch)
        if (c[ch] >= threshold || c[ch] < 0.0) return true;
    return false;
}

double rgb_loss(const HdrImage& rendered, const HdrImage& observed, double saturation_threshold) {
    if (rendered.width() != observed.width() || rendered.height() != observed.height())
        throw InvalidInput("rgb_loss: image dimensions differ");
    double acc = 0.0;
    size_t n = rendered.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        Rgb a = rendered.at_index(i), b = observed.at_index(i);
        if (pixel_saturated(a, saturation_threshold) && pixel_saturated(b, saturation_threshold))
            continue;
        acc += std::fabs(a.r - b.r) + std::fabs(a.g - b.g) + std::fabs(a.b - b.b);
    }
    return acc / double(n);
}

double bce(double target, double prob) {
    const double eps = 1e-6;
    double p = clamp(prob, eps, 1.0 - eps);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double mask_loss(const ScalarImage& predicted_alpha_sums, const std::vector<uint8_t>& mask) {
    if (predicted_alpha_sums.size() != mask.size()) throw InvalidInput("mask_loss: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < mask.size(); ++i) acc += bce(mask[i] ? 1.0 : 0.0, predicted_alpha_sums[i]);
    return acc / double(mask.size());
}

double total_loss(double rgb, double eikonal, double mask_term, double w_eikonal, double w_mask) {
    return rgb + w_eikonal * eikonal + w_mask * mask_term;
}

}  // namespace colight
