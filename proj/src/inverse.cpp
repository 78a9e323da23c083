#include "colight/inverse.hpp"

#include <algorithm>
#include <cmath>

#include "colight/errors.hpp"
#include "colight/parallel.hpp"

namespace colight {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t s = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

}  // namespace

void FitProblem::validate() const {
    if (observations.empty()) throw InvalidInput("fit needs at least one observation");
    bool any_texel_free = false;
    for (const auto& p : free_params)
        if (p.source == FreeParamRef::Source::kTexel) any_texel_free = true;
    if (any_texel_free) {
        bool any_flash = false;
        for (const auto& o : observations)
            if (o.view.flashlight.s) any_flash = true;
        if (!any_flash)
            throw InvalidInput(
                "free reflectance parameters require at least one flash-on view; "
                "without flashlight reflections they are unconstrained");
    }
    for (const auto& o : observations) {
        o.view.validate();
        if (o.image.width() != o.view.intrinsics.width || o.image.height() != o.view.intrinsics.height)
            throw InvalidInput("observation image does not match its intrinsics");
    }
    if (free_params.empty()) throw InvalidInput("no free parameters selected");
    for (const auto& p : free_params) {
        if (p.source == FreeParamRef::Source::kShape &&
            scene.geometry().shape_grad_support() == ShapeGradSupport::kNone)
            throw InvalidInput("geometry '" + scene.geometry().type_name() +
                               "' has no optimizable shape parameters");
    }
}

namespace {

bool token_matches(const std::string& token, const std::string& full) {
    if (token == full) return true;
    return full.size() > token.size() && full.compare(0, token.size(), token) == 0 &&
           full[token.size()] == '.';
}

}  // namespace

std::vector<FreeParamRef> expand_free_params(const SdfScene& scene,
                                             const std::vector<std::string>& tokens) {
    std::vector<FreeParamRef> out;
    auto add_unique = [&](FreeParamRef ref) {
        for (const auto& r : out)
            if (r.source == ref.source && r.index == ref.index) return;
        out.push_back(std::move(ref));
    };
    for (const std::string& tok : tokens) {
        bool matched = false;
        if (tok == "gamma") {
            add_unique({FreeParamRef::Source::kGamma, 0, "gamma", 1e-4, 1e4});
            matched = true;
        }
        if (tok == "texel" || tok.rfind("texel.", 0) == 0) {
            const TexelField& f = scene.texels();
            for (int i = 0; i < f.param_count(); ++i) {
                std::string full = "texel." + f.param_name(i);
                if (tok == "texel" || token_matches(tok, full)) {
                    add_unique({FreeParamRef::Source::kTexel, i, full, 0.0, 1.0});
                    matched = true;
                }
            }
        }
        if (tok == "shape" || tok.rfind("shape.", 0) == 0) {
            const Geometry& g = scene.geometry();
            for (int i = 0; i < g.param_count(); ++i) {
                std::string full = "shape." + g.param_name(i);
                if (tok == "shape" || token_matches(tok, full)) {
                    double lo, hi;
                    g.param_bounds(i, lo, hi);
                    add_unique({FreeParamRef::Source::kShape, i, full, lo, hi});
                    matched = true;
                }
            }
        }
        if (!matched) throw InvalidInput("free-parameter token '" + tok + "' matches nothing");
    }
    return out;
}

std::vector<double> gather_params(const FitProblem& problem, const SdfScene& scene, double gamma) {
    std::vector<double> v;
    v.reserve(problem.free_params.size());
    for (const auto& p : problem.free_params) {
        switch (p.source) {
            case FreeParamRef::Source::kGamma: v.push_back(gamma); break;
            case FreeParamRef::Source::kTexel: v.push_back(scene.texels().get_param(p.index)); break;
            case FreeParamRef::Source::kShape: v.push_back(scene.geometry().get_param(p.index)); break;
        }
    }
    return v;
}

void scatter_params(const FitProblem& problem, SdfScene& scene, double& gamma,
                    std::span<const double> values) {
    for (size_t i = 0; i < problem.free_params.size(); ++i) {
        const auto& p = problem.free_params[i];
        double v = clamp(values[i], p.lo, p.hi);
        switch (p.source) {
            case FreeParamRef::Source::kGamma: gamma = v; break;
            case FreeParamRef::Source::kTexel: scene.texels().set_param(p.index, v); break;
            case FreeParamRef::Source::kShape: scene.geometry().set_param(p.index, v); break;
        }
    }
}

std::vector<BatchRay> draw_batch(const FitProblem& problem, int batch_size, uint64_t seed,
                                 int64_t iteration) {
    size_t total = 0;
    std::vector<size_t> offsets(problem.observations.size());
    for (size_t i = 0; i < problem.observations.size(); ++i) {
        offsets[i] = total;
        total += problem.observations[i].image.pixel_count();
    }
    Rng rng = Rng::stream(seed, {0x626174ULL, uint64_t(iteration)});
    std::vector<BatchRay> batch(batch_size);
    for (auto& r : batch) {
        size_t g = rng.below(total);
        size_t obs = problem.observations.size() - 1;
        for (size_t i = 0; i + 1 < offsets.size(); ++i)
            if (g < offsets[i + 1]) {
                obs = i;
                break;
            }
        r.obs = int(obs);
        r.pixel = g - offsets[obs];
    }
    return batch;
}

namespace {

struct SlotMap {
    int gamma_slot = -1;
    std::vector<int> texel_slots;
    std::vector<int> shape_slots;
    bool any_texel = false, any_shape = false;

    SlotMap(const FitProblem& problem, const SdfScene& scene) {
        texel_slots.assign(scene.texels().param_count(), -1);
        shape_slots.assign(scene.geometry().param_count(), -1);
        for (size_t i = 0; i < problem.free_params.size(); ++i) {
            const auto& p = problem.free_params[i];
            switch (p.source) {
                case FreeParamRef::Source::kGamma: gamma_slot = int(i); break;
                case FreeParamRef::Source::kTexel:
                    texel_slots[p.index] = int(i);
                    any_texel = true;
                    break;
                case FreeParamRef::Source::kShape:
                    shape_slots[p.index] = int(i);
                    any_shape = true;
                    break;
            }
        }
    }
};

inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

struct RayWork {
    double rgb_loss = 0;
    double mask_loss = 0;
    std::vector<std::pair<int, double>> grad;  // (slot, d loss / d param)
};

// Forward + hand-rolled reverse pass for one ray.
void backprop_ray(const FitProblem& problem, const SdfScene& scene, double gamma,
                  const BatchRay& ray, const SlotMap& slots, bool with_grad, RayWork& work) {
    const Observation& obs = problem.observations[ray.obs];
    const RenderOptions& opts = obs.render;
    PixelShade px = shade_pixel(scene, obs.view, problem.env, opts, ray.pixel, with_grad);

    Flashlight light = obs.view.flashlight;
    light.gamma = gamma;
    Rgb predicted = pixel_radiance(px, light, problem.env, opts);
    Rgb observed = obs.image.at_index(ray.pixel);

    bool in_foreground = !problem.foreground_only || !obs.image.has_mask() ||
                         obs.image.mask_at(ray.pixel) != 0;
    bool saturated_both = pixel_saturated(predicted, problem.saturation_threshold) &&
                          pixel_saturated(observed, problem.saturation_threshold);
    Rgb sign{0, 0, 0};
    if (in_foreground && !saturated_both) {
        Rgb r = predicted - observed;
        work.rgb_loss = std::fabs(r.r) + std::fabs(r.g) + std::fabs(r.b);
        sign = {sgn(r.r), sgn(r.g), sgn(r.b)};
    }

    bool use_mask = obs.image.has_mask() && problem.weights.w_mask > 0;
    double d_mask_dW = 0;
    if (use_mask) {
        double target = obs.image.mask_at(ray.pixel) ? 1.0 : 0.0;
        work.mask_loss = bce(target, px.alpha_sum);
        const double eps = 1e-6;
        if (px.alpha_sum > eps && px.alpha_sum < 1.0 - eps) {
            double p = px.alpha_sum;
            d_mask_dW = -target / p + (1.0 - target) / (1.0 - p);
        }
    }

    if (!with_grad || px.tape.empty()) return;

    double s_gamma = light.s ? gamma : 0.0;

    // Background leak: C += bg * (1 - W).
    Rgb bg{0, 0, 0};
    if (opts.background != RenderOptions::Background::kNone)
        bg = opts.background == RenderOptions::Background::kConstant ? opts.background_color
                                                                     : problem.env.sample(-px.ray_v);

    if (slots.gamma_slot >= 0 && light.s) {
        double d = sign.r * px.flash.r + sign.g * px.flash.g + sign.b * px.flash.b;
        if (d != 0) work.grad.emplace_back(slots.gamma_slot, d);
    }

    // d loss / d W, where W = sum of weights (before the min with 1).
    double dL_dW = problem.weights.w_mask * d_mask_dW;
    dL_dW -= sign.r * bg.r + sign.g * bg.g + sign.b * bg.b;
    bool w_clamped = false;
    {
        double raw_sum = 0;
        for (const auto& smp : px.tape) raw_sum += smp.weight;
        w_clamped = raw_sum >= 1.0;
    }
    if (w_clamped) dL_dW = 0;

    const size_t n = px.tape.size();
    // g_i = d loss / d weight_i.
    std::vector<double> g(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const PixelTapeSample& smp = px.tape[i];
        double gi = dL_dW;
        if (smp.shaded) {
            Rgb per_sample = smp.ambient + smp.flash * s_gamma;
            gi += sign.r * per_sample.r + sign.g * per_sample.g + sign.b * per_sample.b;
        }
        g[i] = gi;
    }

    // d loss / d alpha via transmittance recurrences.
    std::vector<double> dL_dalpha(n, 0.0);
    {
        std::vector<double> suffix(n + 1, 0.0);
        for (size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + g[i] * px.tape[i].weight;
        double T = 1.0;
        for (size_t i = 0; i < n; ++i) {
            double a = px.tape[i].alpha;
            dL_dalpha[i] = T * g[i] - suffix[i + 1] / (1.0 - a);
            T *= 1.0 - a;
        }
    }

    // Chain into the sdf samples through the logistic alpha rule.
    double k = opts.sharpness_scale / scene.roi().radius;
    std::vector<double> dL_dsdf(n, 0.0);
    for (size_t i = 0; i + 1 < n; ++i) {
        if (dL_dalpha[i] == 0.0) continue;
        double p0 = logistic_cdf(px.tape[i].sdf, k);
        double p1 = logistic_cdf(px.tape[i + 1].sdf, k);
        if (p0 <= 0) continue;
        double raw = 1.0 - p1 / p0;
        if (raw <= 0.0 || raw >= 1.0 - 1e-12) continue;  // clamped: zero slope
        double one_m_a = 1.0 - raw;
        dL_dsdf[i] += dL_dalpha[i] * one_m_a * k * (1.0 - p0);
        dL_dsdf[i + 1] -= dL_dalpha[i] * k * (1.0 - p1) * one_m_a;
    }

    SparseGrad sparse;
    SparseVecGrad vec_sparse;
    for (size_t i = 0; i < n; ++i) {
        const PixelTapeSample& smp = px.tape[i];
        if (slots.any_shape && dL_dsdf[i] != 0.0) {
            sparse.clear();
            scene.geometry().sdf_param_grad(smp.pos, sparse);
            for (auto& [idx, v] : sparse) {
                int slot = slots.shape_slots[idx];
                if (slot >= 0) work.grad.emplace_back(slot, dL_dsdf[i] * v);
            }
        }
        if (!smp.shaded) continue;
        double w = smp.weight;

        if (slots.any_texel) {
            for (int c = 0; c < TextelParams::kDim; ++c) {
                Rgb d = smp.ambient_grad.d_theta[c] + smp.flash_grad.d_theta[c] * s_gamma;
                double contrib = (sign.r * d.r + sign.g * d.g + sign.b * d.b) * w;
                if (contrib == 0) continue;
                for (auto& [group, gw] : smp.texel_groups) {
                    int slot = slots.texel_slots[group * TextelParams::kDim + c];
                    if (slot >= 0) work.grad.emplace_back(slot, contrib * gw);
                }
            }
        }
        if (slots.any_shape &&
            scene.geometry().shape_grad_support() == ShapeGradSupport::kFull) {
            Vec3 dL_dn;
            for (int kk = 0; kk < 3; ++kk) {
                Rgb d = smp.ambient_grad.d_normal[kk] + smp.flash_grad.d_normal[kk] * s_gamma;
                dL_dn[kk] = (sign.r * d.r + sign.g * d.g + sign.b * d.b) * w;
            }
            if (dL_dn.x != 0 || dL_dn.y != 0 || dL_dn.z != 0) {
                vec_sparse.clear();
                scene.geometry().normal_param_grad(smp.pos, vec_sparse);
                for (auto& [idx, dn] : vec_sparse) {
                    int slot = slots.shape_slots[idx];
                    if (slot >= 0) work.grad.emplace_back(slot, dot(dL_dn, dn));
                }
            }
        }
    }
}

}  // namespace

LossBreakdown loss_and_gradients(const FitProblem& problem, const SdfScene& scene, double gamma,
                                 std::span<const BatchRay> batch, int64_t iteration, uint64_t seed,
                                 std::vector<double>* gradient) {
    SlotMap slots(problem, scene);
    const size_t nrays = batch.size();
    std::vector<RayWork> works(nrays);
    bool with_grad = gradient != nullptr;
    parallel_for(nrays, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
            backprop_ray(problem, scene, gamma, batch[i], slots, with_grad, works[i]);
    });

    LossBreakdown out;
    if (with_grad) gradient->assign(problem.free_params.size(), 0.0);
    double inv_n = nrays ? 1.0 / double(nrays) : 0.0;
    bool any_mask = false;
    for (const auto& o : problem.observations) any_mask |= o.image.has_mask();
    for (size_t i = 0; i < nrays; ++i) {
        out.rgb += works[i].rgb_loss * inv_n;
        out.mask += works[i].mask_loss * inv_n;
        if (with_grad)
            for (auto& [slot, v] : works[i].grad) {
                double scale = inv_n;
                (*gradient)[slot] += v * scale;
            }
    }

    // Eikonal regularizer over fresh uniform ROI samples.
    if (problem.weights.w_eikonal > 0 && problem.eikonal_samples > 0) {
        Rng rng = Rng::stream(seed, {0x65696bULL, uint64_t(iteration)});
        std::vector<Vec3> pts = sample_roi_points(scene.roi(), problem.eikonal_samples, rng);
        double acc = 0;
        SparseGrad sparse;
        double inv_m = 1.0 / double(pts.size());
        for (const Vec3& p : pts) {
            double r = 1.0 - norm(scene.geometry().sdf_gradient(p));
            acc += r * r;
            if (with_grad && slots.any_shape) {
                sparse.clear();
                scene.geometry().gradnorm_param_grad(p, sparse);
                for (auto& [idx, v] : sparse) {
                    int slot = slots.shape_slots[idx];
                    if (slot >= 0)
                        (*gradient)[slot] += problem.weights.w_eikonal * (-2.0 * r) * v * inv_m;
                }
            }
        }
        out.eikonal = acc * inv_m;
    }

    double w_mask_applied = any_mask ? problem.weights.w_mask : 0.0;
    out.total = total_loss(out.rgb, out.eikonal, out.mask, problem.weights.w_eikonal, w_mask_applied);

    if (with_grad) {
        for (double v : *gradient)
            if (!std::isfinite(v))
                throw NumericalFailure("non-finite gradient at iteration " + std::to_string(iteration));
    }
    return out;
}

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

FitResult fit(const FitProblem& problem, const FitConfig& config) {
    problem.validate();
    SdfScene scene = problem.scene;
    double gamma = problem.gamma_init;

    const size_t np = problem.free_params.size();
    std::vector<double> params = gather_params(problem, scene, gamma);

    // Optimizer works either directly on clamped parameters or on logits.
    bool sigmoid_mode = config.bounds_mode == FitConfig::BoundsMode::kSigmoid;
    std::vector<double> opt(np);
    auto to_external = [&](const std::vector<double>& o, std::vector<double>& ext) {
        for (size_t i = 0; i < np; ++i) {
            const auto& p = problem.free_params[i];
            ext[i] = sigmoid_mode ? p.lo + (p.hi - p.lo) * sigmoid(o[i]) : clamp(o[i], p.lo, p.hi);
        }
    };
    for (size_t i = 0; i < np; ++i) {
        const auto& p = problem.free_params[i];
        if (sigmoid_mode) {
            double t = clamp((params[i] - p.lo) / (p.hi - p.lo), 1e-7, 1.0 - 1e-7);
            opt[i] = logit(t);
        } else {
            opt[i] = clamp(params[i], p.lo, p.hi);
        }
    }

    AdamState adam;
    adam.m.assign(np, 0.0);
    adam.v.assign(np, 0.0);

    FitResult result;
    result.gradient_check.ran = false;
    std::vector<double> grad(np), ext(np), chain(np);
    double initial_loss = -1;
    int divergence_streak = 0;

    for (int iter = 0; iter < config.iterations; ++iter) {
        std::vector<BatchRay> batch = draw_batch(problem, config.batch_size, config.seed, iter);
        to_external(opt, ext);
        scatter_params(problem, scene, gamma, ext);
        LossBreakdown loss = loss_and_gradients(problem, scene, gamma, batch, iter, config.seed, &grad);
        result.loss_history.push_back(loss.total);

        if (config.check_gradients && iter == 0) {
            GradientCheckSummary& sum = result.gradient_check;
            sum.ran = true;
            Rng rng = Rng::stream(config.seed, {0x676368ULL});
            int ncheck = std::min<int>(config.gradient_check_coords, int(np));
            for (int c = 0; c < ncheck; ++c) {
                size_t coord = np <= size_t(ncheck) ? size_t(c) : rng.below(np);
                double h = 1e-5;
                std::vector<double> e = ext;
                e[coord] += h;
                SdfScene s2 = problem.scene;
                double g2 = gamma;
                scatter_params(problem, s2, g2, e);
                double lp = loss_and_gradients(problem, s2, g2, batch, iter, config.seed, nullptr).total;
                e[coord] -= 2 * h;
                scatter_params(problem, s2, g2, e);
                double lm = loss_and_gradients(problem, s2, g2, batch, iter, config.seed, nullptr).total;
                double fd = (lp - lm) / (2 * h);
                double ana = grad[coord];
                double denom = std::fmax(std::fmax(std::fabs(fd), std::fabs(ana)), 1e-8);
                sum.max_rel_error = std::fmax(sum.max_rel_error, std::fabs(fd - ana) / denom);
                ++sum.coords_checked;
            }
        }

        if (initial_loss < 0) initial_loss = loss.total;
        if (loss.total > config.divergence_factor * std::fmax(initial_loss, 1e-12)) {
            if (++divergence_streak >= config.divergence_patience)
                throw FitDivergence(result.loss_history);
        } else {
            divergence_streak = 0;
        }

        // Chain rule for the sigmoid reparameterization.
        if (sigmoid_mode) {
            for (size_t i = 0; i < np; ++i) {
                const auto& p = problem.free_params[i];
                double s = sigmoid(opt[i]);
                chain[i] = grad[i] * (p.hi - p.lo) * s * (1.0 - s);
            }
        } else {
            chain = grad;
        }

        double t = double(iter) / std::max(1, config.lr_decay_iters);
        double lr = config.lr + (config.lr_min - config.lr) * std::fmin(t, 1.0);
        adam.step += 1;
        double b1t = 1.0 - std::pow(config.beta1, double(adam.step));
        double b2t = 1.0 - std::pow(config.beta2, double(adam.step));
        for (size_t i = 0; i < np; ++i) {
            adam.m[i] = config.beta1 * adam.m[i] + (1.0 - config.beta1) * chain[i];
            adam.v[i] = config.beta2 * adam.v[i] + (1.0 - config.beta2) * chain[i] * chain[i];
            double mhat = adam.m[i] / b1t;
            double vhat = adam.v[i] / b2t;
            opt[i] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
            if (!sigmoid_mode) {
                const auto& p = problem.free_params[i];
                opt[i] = clamp(opt[i], p.lo, p.hi);  // projection step
            }
        }
    }

    to_external(opt, ext);
    scatter_params(problem, scene, gamma, ext);
    result.scene = std::move(scene);
    result.gamma = gamma;
    result.final_params = ext;
    return result;
}

HdrImage flash_isolate(const HdrImage& flash_img, const HdrImage& noflash_img,
                       double saturation_threshold) {
    if (flash_img.width() != noflash_img.width() || flash_img.height() != noflash_img.height())
        throw InvalidInput("flash_isolate: image dimensions differ");
    HdrImage out(flash_img.width(), flash_img.height());
    out.ensure_mask(1);
    for (size_t i = 0; i < out.pixel_count(); ++i) {
        Rgb a = flash_img.at_index(i), b = noflash_img.at_index(i);
        out.set_index(i, a - b);
        bool bad = pixel_saturated(a, saturation_threshold) || pixel_saturated(b, saturation_threshold);
        if (flash_img.has_mask() && !flash_img.mask_at(i)) bad = true;
        if (noflash_img.has_mask() && !noflash_img.mask_at(i)) bad = true;
        out.set_mask(i, bad ? 0 : 1);
    }
    return out;
}

std::vector<RatioFitReport> ratio_sweep(const RatioSweepConfig& config,
                                        const std::vector<double>& ratios) {
    // Shared poses and per-pose component measurements.
    Rng pose_rng = Rng::stream(config.seed, {0x706f7365ULL});
    std::vector<CameraPose> poses = sample_half_dome_poses(config.scene.roi().center,
                                                           config.distance_min, config.distance_max,
                                                           config.n_views, pose_rng);
    PinholeIntrinsics intr;
    intr.width = intr.height = config.resolution;
    intr.fx = intr.fy = 1.2 * config.resolution;
    intr.cx = intr.cy = config.resolution / 2.0;

    auto make_view = [&](int i, int s) {
        CaptureView v;
        v.intrinsics = intr;
        v.pose = poses[i];
        v.flashlight = Flashlight{1.0, s};
        return v;
    };
    auto options_for = [&](int i) {
        RenderOptions o = config.render;
        o.seed = mix_seed(config.seed, uint64_t(i));
        return o;
    };

    // One probe render per pose gives both components.
    double ambient_mean = 0, flash_mean = 0;
    size_t count = 0;
    for (int i = 0; i < config.n_views; ++i) {
        RenderResult r = render_view(config.scene, make_view(i, 1), config.env, options_for(i));
        for (size_t p = 0; p < r.radiance.pixel_count(); ++p) {
            ambient_mean += r.ambient_component.at_index(p).mean();
            flash_mean += r.flash_component.at_index(p).mean();
            ++count;
        }
    }
    ambient_mean /= double(count);
    flash_mean /= double(count);
    if (!(flash_mean > 0)) throw NumericalFailure("ratio sweep: flash component renders to zero");

    std::vector<RatioFitReport> reports;
    for (double ratio : ratios) {
        RatioFitReport rep;
        rep.ratio = ratio;
        bool darkroom = ratio >= 1.0;
        EnvironmentMap env = darkroom ? EnvironmentMap::black() : config.env;
        double gamma_gt = 0;
        if (darkroom)
            gamma_gt = config.darkroom_mean_target / flash_mean;
        else if (ratio > 0)
            gamma_gt = ratio * ambient_mean / ((1.0 - ratio) * flash_mean);
        rep.gamma_used = gamma_gt;

        FitProblem problem;
        problem.scene = config.scene;
        problem.env = env;
        problem.weights = config.weights;
        problem.saturation_threshold = 1e30;  // keep all HDR pixels in the loss here
        problem.free_params = expand_free_params(config.scene, config.free_tokens);

        for (int i = 0; i < config.n_views; ++i) {
            for (int s = 0; s <= 1; ++s) {
                if (ratio <= 0 && s == 1) continue;      // no flashlight signal at ratio 0
                if (darkroom && s == 0) continue;        // nothing to see in a dark room
                Observation o;
                o.view = make_view(i, s);
                o.view.flashlight.gamma = gamma_gt > 0 ? gamma_gt : 1.0;
                o.render = options_for(i);
                RenderResult r = render_view(config.scene, o.view, env, o.render);
                o.image = std::move(r.radiance);
                o.image.mask().resize(o.image.pixel_count());
                for (size_t p = 0; p < o.image.pixel_count(); ++p)
                    o.image.mask()[p] = r.alpha[p] >= 0.5 ? 1 : 0;
                problem.observations.push_back(std::move(o));
            }
        }
        problem.gamma_init = 1.0;

        bool any_texel_free = false;
        for (const auto& p : problem.free_params)
            if (p.source == FreeParamRef::Source::kTexel) any_texel_free = true;

        if (ratio <= 0 && any_texel_free) {
            rep.reflectance_unconstrained = true;
            reports.push_back(std::move(rep));
            continue;
        }

        // Start the search away from the ground truth.
        {
            std::vector<double> init;
            for (const auto& p : problem.free_params)
                init.push_back(p.source == FreeParamRef::Source::kGamma ? problem.gamma_init : 0.5);
            double g0 = problem.gamma_init;
            scatter_params(problem, problem.scene, g0, init);
            problem.gamma_init = g0;
        }

        FitConfig fc = config.fit;
        fc.seed = mix_seed(config.seed, 0x666974ULL + uint64_t(ratio * 1000));
        FitResult res = fit(problem, fc);
        rep.final_loss = res.loss_history.empty() ? 0 : res.loss_history.back();
        rep.gamma_fitted = res.gamma;
        rep.gamma_rel_error = gamma_gt > 0 ? std::fabs(res.gamma - gamma_gt) / gamma_gt : 0;
        for (const auto& p : problem.free_params) {
            if (p.source != FreeParamRef::Source::kTexel) continue;
            double fitted = res.scene.texels().get_param(p.index);
            double truth = config.scene.texels().get_param(p.index);
            double err = std::fabs(fitted - truth);
            rep.param_abs_error[p.name] = err;
            rep.max_texel_abs_error = std::fmax(rep.max_texel_abs_error, err);
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace colight
