#include "colight/brdf.hpp"

#include <cmath>

#include "colight/errors.hpp"

namespace colight {

const std::array<std::string, TextelParams::kDim>& TextelParams::component_names() {
    static const std::array<std::string, kDim> names = {
        "base_color.r", "base_color.g", "base_color.b", "roughness", "clearcoat_glossiness",
        "subsurface",   "metallic",     "dielectric",   "clearcoat"};
    return names;
}

double TextelParams::component(int i) const {
    switch (i) {
        case 0: return base_color.r;
        case 1: return base_color.g;
        case 2: return base_color.b;
        case 3: return roughness;
        case 4: return clearcoat_glossiness;
        case 5: return subsurface;
        case 6: return metallic;
        case 7: return dielectric;
        default: return clearcoat;
    }
}

void TextelParams::set_component(int i, double v) {
    switch (i) {
        case 0: base_color.r = v; break;
        case 1: base_color.g = v; break;
        case 2: base_color.b = v; break;
        case 3: roughness = v; break;
        case 4: clearcoat_glossiness = v; break;
        case 5: subsurface = v; break;
        case 6: metallic = v; break;
        case 7: dielectric = v; break;
        default: clearcoat = v; break;
    }
}

std::array<double, TextelParams::kDim> TextelParams::to_array() const {
    std::array<double, kDim> a;
    for (int i = 0; i < kDim; ++i) a[i] = component(i);
    return a;
}

TextelParams TextelParams::from_array(const std::array<double, kDim>& a) {
    TextelParams t;
    for (int i = 0; i < kDim; ++i) t.set_component(i, a[i]);
    return t;
}

bool TextelParams::in_unit_box() const {
    for (int i = 0; i < kDim; ++i) {
        double v = component(i);
        if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return true;
}

void TextelParams::clamp_to_unit_box() {
    for (int i = 0; i < kDim; ++i) set_component(i, clamp(component(i), 0.0, 1.0));
}

ShadingGeom ShadingGeom::from_directions(const Vec3& n, const Vec3& h) {
    if (std::fabs(norm(n) - 1.0) > 1e-6 || std::fabs(norm(h) - 1.0) > 1e-6)
        throw InvalidInput("ShadingGeom: n and h must be unit vectors");
    return from_cos(dot(n, h));
}

Rgb BrdfGradient::component(int i) const {
    switch (i) {
        case 0: return {d_base_color.r, 0, 0};
        case 1: return {0, d_base_color.g, 0};
        case 2: return {0, 0, d_base_color.b};
        case 3: return d_roughness;
        case 4: return d_clearcoat_glossiness;
        case 5: return d_subsurface;
        case 6: return d_metallic;
        case 7: return d_dielectric;
        default: return d_clearcoat;
    }
}

namespace {

void check_theta(const TextelParams& theta) {
    if (!theta.in_unit_box()) throw InvalidInput("TextelParams outside [0,1]^9");
}

// Scalar diffuse factors; the RGB value is base_color times these.
struct DiffusePieces {
    double base;        // base lobe / base_color
    double subsurface;  // subsurface lobe / base_color
    double d_base_dr, d_sub_dr;
    double d_base_dc, d_sub_dc;
};

DiffusePieces diffuse_pieces(double c, double r) {
    DiffusePieces p{};
    double omc = 1.0 - c;
    double u = omc * omc;
    u *= u * omc;                   // (1-c)^5
    double du_dc = -5.0 * omc * omc * omc * omc;

    double fd = 1.0 + (2.0 * r - 0.5) * u;
    p.base = fd * fd / M_PI;
    p.d_base_dr = 2.0 * fd * 2.0 * u / M_PI;
    p.d_base_dc = 2.0 * fd * (2.0 * r - 0.5) * du_dc / M_PI;

    double fss = 1.0 + (r - 1.0) * u;
    double inv_c = 1.0 / c;
    double k = 1.25 / (2.0 * M_PI);
    double bracket = fss * fss * (inv_c - 1.0) + 1.0;
    p.subsurface = k * bracket;
    p.d_sub_dr = k * 2.0 * fss * u * (inv_c - 1.0);
    p.d_sub_dc = k * (2.0 * fss * (r - 1.0) * du_dc * (inv_c - 1.0) - fss * fss * inv_c * inv_c);
    return p;
}

// GGX D*G/(4c^2) and its partials w.r.t. roughness and c.
struct SpecCore {
    double value;
    double d_r;
    double d_c;
};

SpecCore ggx_core(double c, double roughness) {
    SpecCore out{};
    double r = std::fmax(roughness, kRoughnessFloor);
    double r2 = r * r;
    double r4 = r2 * r2;
    double dr4_dr = roughness > kRoughnessFloor ? 4.0 * r2 * r : 0.0;

    double c2 = c * c;
    double A = (r4 - 1.0) * c2 + 1.0;
    double D = r4 / (M_PI * A * A);
    double dD_dr4 = (A - 2.0 * r4 * c2) / (M_PI * A * A * A);
    double dD_dc = -4.0 * c * r4 * (r4 - 1.0) / (M_PI * A * A * A);

    double w = (1.0 - c2) / c2;
    double q = 1.0 + r4 * w;
    double s = std::sqrt(q);
    double G = 2.0 / (s + 1.0);
    double dG_dq = -1.0 / (s * (s + 1.0) * (s + 1.0));
    double dG_dr4 = dG_dq * w;
    double dw_dc = -2.0 / (c2 * c);
    double dG_dc = dG_dq * r4 * dw_dc;

    double inv4c2 = 1.0 / (4.0 * c2);
    out.value = D * G * inv4c2;
    out.d_r = (dD_dr4 * G + D * dG_dr4) * inv4c2 * dr4_dr;
    out.d_c = (dD_dc * G + D * dG_dc) * inv4c2 - D * G / (2.0 * c2 * c);
    return out;
}

// Clearcoat lobe (scalar) and partials w.r.t. glossiness and c.
struct ClearcoatCore {
    double value;
    double d_gloss;
    double d_c;
};

ClearcoatCore clearcoat_core(double c, double glossiness) {
    ClearcoatCore out{};
    double rc = 0.1 - 0.099 * glossiness;
    double drc = -0.099;
    double a = rc * rc - 1.0;   // < 0
    double L = std::log(rc);    // < 0
    double c2 = c * c;
    double B = 1.0 + a * c2;
    double D = a / (2.0 * M_PI * L * B);
    double da = 2.0 * rc;
    double dB_drc = da * c2;
    double dD_drc = (da * L * B - a * (B / rc + L * dB_drc)) / (2.0 * M_PI * L * L * B * B);
    double dD_dc = -a * a * c / (M_PI * L * B * B);

    double w = (1.0 - c2) / c2;
    double q = 1.0 + 0.0625 * w;  // fixed roughness 0.25 in the shadowing term
    double s = std::sqrt(q);
    double G = 2.0 / (s + 1.0);
    double dG_dc = -1.0 / (s * (s + 1.0) * (s + 1.0)) * 0.0625 * (-2.0 / (c2 * c));

    const double F = 0.2;
    double inv4c2 = 1.0 / (4.0 * c2);
    out.value = D * G * F * inv4c2;
    out.d_gloss = dD_drc * drc * G * F * inv4c2;
    out.d_c = (dD_dc * G + D * dG_dc) * F * inv4c2 - D * G * F / (2.0 * c2 * c);
    return out;
}

}  // namespace

Rgb eval_diffuse_lobes(const ShadingGeom& geom, const TextelParams& theta) {
    check_theta(theta);
    DiffusePieces p = diffuse_pieces(geom.cos_nh, theta.roughness);
    double s = (1.0 - theta.subsurface) * p.base + theta.subsurface * p.subsurface;
    return theta.base_color * s;
}

Rgb eval_ggx_specular(const ShadingGeom& geom, const TextelParams& theta, const Rgb& fresnel) {
    check_theta(theta);
    SpecCore core = ggx_core(geom.cos_nh, theta.roughness);
    return fresnel * core.value;
}

double eval_clearcoat(const ShadingGeom& geom, const TextelParams& theta) {
    check_theta(theta);
    return clearcoat_core(geom.cos_nh, theta.clearcoat_glossiness).value;
}

Rgb eval_brdf(const ShadingGeom& geom, const TextelParams& theta) {
    check_theta(theta);
    double c = geom.cos_nh;
    DiffusePieces dp = diffuse_pieces(c, theta.roughness);
    double diffuse_scalar = (1.0 - theta.subsurface) * dp.base + theta.subsurface * dp.subsurface;
    SpecCore spec = ggx_core(c, theta.roughness);
    double cc = clearcoat_core(c, theta.clearcoat_glossiness).value;

    double m = theta.metallic;
    Rgb value = theta.base_color * ((1.0 - m) * diffuse_scalar + m * spec.value);
    double achromatic = 0.08 * (1.0 - m) * theta.dielectric * spec.value + 0.25 * theta.clearcoat * cc;
    value += Rgb(achromatic);
    return value;
}

BrdfEval brdf_gradient(const ShadingGeom& geom, const TextelParams& theta) {
    check_theta(theta);
    double c = geom.cos_nh;
    DiffusePieces dp = diffuse_pieces(c, theta.roughness);
    SpecCore spec = ggx_core(c, theta.roughness);
    ClearcoatCore cc = clearcoat_core(c, theta.clearcoat_glossiness);

    double m = theta.metallic;
    double ss = theta.subsurface;
    double d = theta.dielectric;
    double k = theta.clearcoat;
    const Rgb& b = theta.base_color;

    double diffuse_scalar = (1.0 - ss) * dp.base + ss * dp.subsurface;
    double chroma_scalar = (1.0 - m) * diffuse_scalar + m * spec.value;
    double achroma = 0.08 * (1.0 - m) * d * spec.value + 0.25 * k * cc.value;

    BrdfEval out;
    out.value = b * chroma_scalar + Rgb(achroma);

    BrdfGradient& g = out.grad;
    g.d_base_color = Rgb(chroma_scalar);
    g.d_subsurface = b * ((1.0 - m) * (dp.subsurface - dp.base));
    g.d_metallic = b * (spec.value - diffuse_scalar) + Rgb(-0.08 * d * spec.value);
    g.d_dielectric = Rgb(0.08 * (1.0 - m) * spec.value);
    g.d_clearcoat = Rgb(0.25 * cc.value);
    g.d_clearcoat_glossiness = Rgb(0.25 * k * cc.d_gloss);

    double ddiff_dr = (1.0 - ss) * dp.d_base_dr + ss * dp.d_sub_dr;
    g.d_roughness = b * ((1.0 - m) * ddiff_dr + m * spec.d_r) + Rgb(0.08 * (1.0 - m) * d * spec.d_r);

    double ddiff_dc = (1.0 - ss) * dp.d_base_dc + ss * dp.d_sub_dc;
    g.d_cos_nh = b * ((1.0 - m) * ddiff_dc + m * spec.d_c) +
                 Rgb(0.08 * (1.0 - m) * d * spec.d_c + 0.25 * k * cc.d_c);
    return out;
}

}  // namespace colight
