#include "colight/renderer.hpp"

#include <cmath>

#include "colight/errors.hpp"
#include "colight/parallel.hpp"

namespace colight {

void PinholeIntrinsics::validate() const {
    if (!(fx > 0) || !(fy > 0)) throw InvalidInput("focal lengths must be > 0");
    if (width <= 0 || height <= 0) throw InvalidInput("image dimensions must be positive");
}

void CameraPose::validate() const {
    if (rotation.orthonormality_error() > 1e-6) throw InvalidInput("camera rotation not orthonormal");
}

CameraPose CameraPose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    Vec3 forward = normalized(target - eye);
    Vec3 u = up;
    if (norm(cross(forward, u)) < 1e-6) u = {0, 0, 1};
    Vec3 right = normalized(cross(forward, u));
    Vec3 down = normalized(cross(forward, right));
    CameraPose pose;
    pose.rotation = Mat3::from_cols(right, down, forward);
    pose.translation = eye;
    return pose;
}

void CaptureView::validate() const {
    intrinsics.validate();
    pose.validate();
    flashlight.validate();
}

Ray ray_for_pixel(const CaptureView& view, double px, double py) {
    Vec3 d_cam{(px + 0.5 - view.intrinsics.cx) / view.intrinsics.fx,
               (py + 0.5 - view.intrinsics.cy) / view.intrinsics.fy, 1.0};
    Vec3 d_world = normalized(view.pose.rotation * d_cam);
    return Ray{view.pose.camera_center(), -d_world};
}

std::vector<Ray> generate_rays(const CaptureView& view) {
    std::vector<Ray> rays;
    rays.reserve(size_t(view.intrinsics.width) * view.intrinsics.height);
    for (int y = 0; y < view.intrinsics.height; ++y)
        for (int x = 0; x < view.intrinsics.width; ++x) rays.push_back(ray_for_pixel(view, x, y));
    return rays;
}

std::optional<std::pair<double, double>> project_point(const CaptureView& view, const Vec3& x) {
    Vec3 xc = view.pose.rotation.transposed() * (x - view.pose.translation);
    if (xc.z <= 0) return std::nullopt;
    return std::make_pair(view.intrinsics.fx * xc.x / xc.z + view.intrinsics.cx - 0.5,
                          view.intrinsics.fy * xc.y / xc.z + view.intrinsics.cy - 0.5);
}

double logistic_cdf(double x, double sharpness) {
    double kx = sharpness * x;
    if (kx >= 0) return 1.0 / (1.0 + std::exp(-kx));
    double e = std::exp(kx);
    return e / (1.0 + e);
}

double alpha_from_sdf_pair(double d0, double d1, double sharpness) {
    double p0 = logistic_cdf(d0, sharpness);
    double p1 = logistic_cdf(d1, sharpness);
    if (p0 <= 0) return 0.0;
    double a = (p0 - p1) / p0;
    // Keep alpha strictly below 1 so transmittance stays positive.
    return clamp(a, 0.0, 1.0 - 1e-12);
}

namespace {

// Intersection parameters of x(t) = o - v t with the ROI sphere.
bool intersect_roi(const Roi& roi, const Ray& ray, double& t0, double& t1) {
    Vec3 d = -ray.v;
    Vec3 oc = ray.origin - roi.center;
    double b = dot(oc, d);
    double c = norm2(oc) - roi.radius * roi.radius;
    double disc = b * b - c;
    if (disc <= 0) return false;
    double s = std::sqrt(disc);
    t0 = std::fmax(-b - s, 0.0);
    t1 = -b + s;
    return t1 > t0;
}

}  // namespace

RaySampleSet sample_ray(const SdfScene& scene, const Ray& ray, int n_samples, Rng& rng,
                        const RenderOptions& opts) {
    RaySampleSet set;
    double t0, t1;
    if (!intersect_roi(scene.roi(), ray, t0, t1)) return set;
    set.t_near = t0;
    set.t_far = t1;
    double step = (t1 - t0) / n_samples;
    double k = opts.sharpness_scale / scene.roi().radius;
    set.samples.resize(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        double jitter = opts.jitter ? rng.uniform() : 0.5;
        RaySample& s = set.samples[i];
        s.t = t0 + (i + jitter) * step;
        s.pos = ray.point_at(s.t);
        s.sdf = scene.sdf(s.pos);
    }
    for (int i = 0; i + 1 < n_samples; ++i)
        set.samples[i].alpha = alpha_from_sdf_pair(set.samples[i].sdf, set.samples[i + 1].sdf, k);
    return set;
}

std::vector<double> composite_weights(std::span<const double> alphas) {
    std::vector<double> w(alphas.size());
    double transmittance = 1.0;
    for (size_t i = 0; i < alphas.size(); ++i) {
        w[i] = alphas[i] * transmittance;
        transmittance *= 1.0 - alphas[i];
    }
    return w;
}

CompositeResult composite(const RaySampleSet& samples, std::span<const Vec3> normals) {
    CompositeResult out;
    double transmittance = 1.0;
    double depth_acc = 0.0;
    Vec3 normal_acc{0, 0, 0};
    double sum = 0.0;
    for (size_t i = 0; i < samples.samples.size(); ++i) {
        const RaySample& s = samples.samples[i];
        double w = s.alpha * transmittance;
        transmittance *= 1.0 - s.alpha;
        if (w == 0.0) continue;
        out.rgb += s.rgb * w;
        depth_acc += s.t * w;
        if (!normals.empty()) normal_acc += normals[i] * w;
        sum += w;
    }
    out.alpha_sum = std::fmin(sum, 1.0);
    if (sum > 1e-9) {
        out.depth = depth_acc / sum;
        double nn = norm(normal_acc);
        out.normal = nn > 1e-12 ? normal_acc / nn : Vec3{0, 0, 0};
    }
    return out;
}

CompositeResult composite(const RaySampleSet& samples) { return composite(samples, {}); }

PixelShade shade_pixel(const SdfScene& scene, const CaptureView& view, const EnvironmentMap& env,
                       const RenderOptions& opts, size_t pixel_idx, bool with_tape) {
    const int w = view.intrinsics.width;
    int px = int(pixel_idx % w), py = int(pixel_idx / w);
    Ray ray = ray_for_pixel(view, px, py);
    Rng rng = Rng::stream(opts.seed, {0x70697865ULL, pixel_idx});
    RaySampleSet set = sample_ray(scene, ray, opts.n_samples, rng, opts);

    PixelShade out;
    out.ray_v = ray.v;
    out.roi_hit = !set.empty();
    if (set.empty()) return out;

    std::vector<double> alphas(set.samples.size());
    for (size_t i = 0; i < alphas.size(); ++i) alphas[i] = set.samples[i].alpha;
    std::vector<double> weights = composite_weights(alphas);
    if (with_tape) out.tape.resize(set.samples.size());

    double alpha_sum = 0, depth_acc = 0;
    Vec3 normal_acc{0, 0, 0};
    for (size_t i = 0; i < weights.size(); ++i) {
        const RaySample& s = set.samples[i];
        double wgt = weights[i];
        PixelTapeSample* rec = with_tape ? &out.tape[i] : nullptr;
        if (rec) {
            rec->t = s.t;
            rec->pos = s.pos;
            rec->sdf = s.sdf;
            rec->alpha = s.alpha;
            rec->weight = wgt;
        }
        alpha_sum += wgt;
        depth_acc += wgt * s.t;
        if (wgt <= opts.shade_eps) continue;
        auto n = scene.try_normal(s.pos);
        if (!n) {
            out.flag |= 1;
            continue;
        }
        normal_acc += *n * wgt;
        TextelParams theta = scene.sample_texel(s.pos);
        Rgb flash, ambient{0, 0, 0};
        if (rec) {
            rec->shaded = true;
            rec->flash_grad.clear();
            flash = flashlight_radiance_grad(*n, ray.v, s.t, theta, rec->flash_grad);
            if (!env.is_black()) {
                Rng amb = Rng::stream(opts.seed, {0x616d62ULL, pixel_idx, uint64_t(i)});
                rec->ambient_grad.clear();
                ambient = ambient_radiance_grad(ray.v, *n, theta, env, amb, rec->ambient_grad);
            }
            rec->flash = flash;
            rec->ambient = ambient;
            scene.texels().sample_weights(s.pos, scene.geometry(), rec->texel_groups);
        } else {
            flash = flashlight_radiance(*n, ray.v, s.t, theta);
            if (!env.is_black()) {
                Rng amb = Rng::stream(opts.seed, {0x616d62ULL, pixel_idx, uint64_t(i)});
                ambient = ambient_radiance(ray.v, *n, theta, env, amb);
            }
        }
        out.flash += flash * wgt;
        out.ambient += ambient * wgt;
    }
    out.alpha_sum = std::fmin(alpha_sum, 1.0);
    out.depth = out.alpha_sum > 1e-9 ? depth_acc / alpha_sum : 0.0;
    double nn = norm(normal_acc);
    out.normal = nn > 1e-12 ? normal_acc / nn : Vec3{0, 0, 0};
    return out;
}

Rgb pixel_radiance(const PixelShade& px, const Flashlight& light, const EnvironmentMap& env,
                   const RenderOptions& opts) {
    Rgb radiance = px.ambient;
    if (light.s) radiance += px.flash * light.gamma;
    double leak = 1.0 - px.alpha_sum;
    if (leak > 0 && opts.background != RenderOptions::Background::kNone) {
        Rgb bg = opts.background == RenderOptions::Background::kConstant ? opts.background_color
                                                                         : env.sample(-px.ray_v);
        radiance += bg * leak;
    }
    return radiance;
}

std::vector<CameraPose> sample_half_dome_poses(const Vec3& target, double dist_min, double dist_max,
                                               int n, Rng& rng) {
    std::vector<CameraPose> poses;
    poses.reserve(n);
    const double min_sin_elev = std::sin(5.0 * M_PI / 180.0);
    for (int i = 0; i < n; ++i) {
        double y = min_sin_elev + (1.0 - min_sin_elev) * rng.uniform();
        double phi = 2.0 * M_PI * rng.uniform();
        double s = std::sqrt(std::fmax(0.0, 1.0 - y * y));
        Vec3 dir{s * std::cos(phi), y, s * std::sin(phi)};
        double dist = rng.uniform(dist_min, dist_max);
        poses.push_back(CameraPose::look_at(target + dir * dist, target));
    }
    return poses;
}

std::vector<CameraPose> spiral_poses(const Vec3& target, double dist_min, double dist_max, int n,
                                     double turns) {
    std::vector<CameraPose> poses;
    poses.reserve(n);
    for (int i = 0; i < n; ++i) {
        double f = n > 1 ? double(i) / (n - 1) : 0.0;
        double phi = turns * 2.0 * M_PI * f;  // monotone azimuth
        double elev = (0.15 + 0.7 * f) * (M_PI / 2.0);
        double y = std::sin(elev);
        double s = std::cos(elev);
        Vec3 dir{s * std::cos(phi), y, s * std::sin(phi)};
        double dist = dist_min + (dist_max - dist_min) * 0.5 * (1.0 + std::sin(3.0 * phi));
        poses.push_back(CameraPose::look_at(target + dir * dist, target));
    }
    return poses;
}

RenderResult render_view(const SdfScene& scene, const CaptureView& view, const EnvironmentMap& env,
                         const RenderOptions& opts) {
    view.validate();
    const int w = view.intrinsics.width, h = view.intrinsics.height;
    RenderResult out;
    out.radiance = HdrImage(w, h);
    out.depth = ScalarImage(w, h);
    out.normal = HdrImage(w, h);
    out.alpha = ScalarImage(w, h);
    out.ambient_component = HdrImage(w, h);
    out.flash_component = HdrImage(w, h);
    out.flags.assign(size_t(w) * h, 0);

    parallel_for(size_t(w) * h, [&](size_t begin, size_t end) {
        for (size_t idx = begin; idx < end; ++idx) {
            PixelShade px = shade_pixel(scene, view, env, opts, idx, false);
            out.radiance.set_index(idx, pixel_radiance(px, view.flashlight, env, opts));
            out.ambient_component.set_index(idx, px.ambient);
            out.flash_component.set_index(idx, px.flash);
            out.alpha[idx] = px.alpha_sum;
            out.depth[idx] = px.depth;
            out.normal.set_index(idx, {px.normal.x, px.normal.y, px.normal.z});
            out.flags[idx] = px.flag;
        }
    });
    return out;
}

}  // namespace colight
