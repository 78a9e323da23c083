#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "colight/image.hpp"
#include "colight/photometry.hpp"
#include "colight/scene.hpp"
#include "colight/vec3.hpp"

namespace colight {

struct PinholeIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;
};

/// World-from-camera rigid transform. Camera axes: x right, y down,
/// z forward; world is Y-up right-handed.
struct CameraPose {
    Mat3 rotation;
    Vec3 translation;

    void validate() const;
    Vec3 camera_center() const { return translation; }

    /// Camera placed at `eye`, optical axis through `target`.
    static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 1, 0});
};

struct CaptureView {
    PinholeIntrinsics intrinsics;
    CameraPose pose;
    Flashlight flashlight;

    void validate() const;
};

/// Viewing ray through a pixel, parameterized x(t) = origin - v * t with v
/// the unit direction from scene point back toward the camera.
struct Ray {
    Vec3 origin;
    Vec3 v;

    Vec3 point_at(double t) const { return origin - v * t; }
};

/// Ray with pixel-center convention (px + 0.5, py + 0.5).
Ray ray_for_pixel(const CaptureView& view, double px, double py);
std::vector<Ray> generate_rays(const CaptureView& view);

/// Projects a world point to pixel coordinates (same center convention);
/// nullopt behind the camera.
std::optional<std::pair<double, double>> project_point(const CaptureView& view, const Vec3& x);

struct RenderOptions {
    int n_samples = 128;            // sample points per ray inside the ROI
    double sharpness_scale = 64.0;  // logistic sharpness k = scale / roi.radius
    uint64_t seed = 0;
    bool jitter = true;  // stratified jitter of sample depths
    enum class Background { kNone, kConstant, kEnv };
    Background background = Background::kNone;
    Rgb background_color{0, 0, 0};
    double shade_eps = 1e-5;  // samples with weight below this skip shading
};

/// Logistic CDF used for the SDF-to-alpha conversion.
double logistic_cdf(double x, double sharpness);

/// Discrete opacity from two consecutive signed distances:
/// max((Phi(d0) - Phi(d1)) / Phi(d0), 0), clamped into [0, 1).
double alpha_from_sdf_pair(double d0, double d1, double sharpness);

struct RaySample {
    double t = 0;
    Vec3 pos;
    double sdf = 0;
    double alpha = 0;
    Rgb rgb;
};

struct RaySampleSet {
    std::vector<RaySample> samples;
    double t_near = 0, t_far = 0;

    bool empty() const { return samples.empty(); }
};

/// Stratified depths across the ray-ROI intersection with alphas from the
/// logistic rule; empty when the ray misses the ROI. rgb fields stay zero.
RaySampleSet sample_ray(const SdfScene& scene, const Ray& ray, int n_samples, Rng& rng,
                        const RenderOptions& opts);

/// Front-to-back alpha composition weights w_i = a_i * prod_{j<i}(1 - a_j).
std::vector<double> composite_weights(std::span<const double> alphas);

struct CompositeResult {
    Rgb rgb;
    double alpha_sum = 0;
    double depth = 0;    // weight-averaged, 0 when alpha_sum ~ 0
    Vec3 normal;         // weight-averaged and re-normalized; zero when undefined
};

CompositeResult composite(const RaySampleSet& samples, std::span<const Vec3> normals);
CompositeResult composite(const RaySampleSet& samples);

struct RenderResult {
    HdrImage radiance;
    ScalarImage depth;
    HdrImage normal;            // world-space normals in rgb
    ScalarImage alpha;
    HdrImage ambient_component; // composited ambient term
    HdrImage flash_component;   // composited unit-gamma flashlight term
    std::vector<uint8_t> flags; // per pixel, bit 0: degenerate normal seen
};

/// Per-sample record kept when the caller asks for a tape; carries what the
/// fit's backward pass needs.
struct PixelTapeSample {
    double t = 0;
    Vec3 pos;
    double sdf = 0;
    double alpha = 0;
    double weight = 0;
    bool shaded = false;
    Rgb ambient, flash;  // per-sample colors, unit gamma
    ShadeGrad flash_grad;
    ShadeGrad ambient_grad;
    SparseGrad texel_groups;  // reflectance-field interpolation weights
};

/// One pixel of the forward model. radiance assembly (gamma, background) is
/// left to the caller so components stay separable.
struct PixelShade {
    bool roi_hit = false;
    Rgb ambient, flash;  // composited, flash at unit gamma
    double alpha_sum = 0;
    double depth = 0;
    Vec3 normal;
    Vec3 ray_v;  // unit direction from scene back toward the camera
    uint8_t flag = 0;
    std::vector<PixelTapeSample> tape;  // filled only with_tape
};

/// The single forward path shared by render_view and the inverse solver.
/// Deterministic in (opts.seed, pixel_idx); with_tape adds gradient records
/// without changing any computed value.
PixelShade shade_pixel(const SdfScene& scene, const CaptureView& view, const EnvironmentMap& env,
                       const RenderOptions& opts, size_t pixel_idx, bool with_tape);

/// ambient + s*gamma*flash + background leak-through.
Rgb pixel_radiance(const PixelShade& px, const Flashlight& light, const EnvironmentMap& env,
                   const RenderOptions& opts);

/// Random viewpoints on the upper half dome (Y up) looking at `target`,
/// at distances in [dist_min, dist_max]. Elevation is kept above ~5 degrees.
std::vector<CameraPose> sample_half_dome_poses(const Vec3& target, double dist_min, double dist_max,
                                               int n, Rng& rng);

/// Spiral trajectory with monotone azimuth, emulating handheld capture.
std::vector<CameraPose> spiral_poses(const Vec3& target, double dist_min, double dist_max, int n,
                                     double turns = 2.0);

/// Full forward render. radiance = ambient + s * gamma * flash + background
/// leak-through; deterministic for a fixed seed (per-pixel RNG streams).
RenderResult render_view(const SdfScene& scene, const CaptureView& view, const EnvironmentMap& env,
                         const RenderOptions& opts);

}  // namespace colight
