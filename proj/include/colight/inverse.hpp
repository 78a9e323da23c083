#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "colight/errors.hpp"
#include "colight/renderer.hpp"

namespace colight {

/// One calibrated input image: view, observed radiance (mask plane optional),
/// and the render options (seed, sample counts) its forward model uses.
struct Observation {
    CaptureView view;
    HdrImage image;
    RenderOptions render;
};

struct FreeParamRef {
    enum class Source { kGamma, kTexel, kShape };
    Source source = Source::kGamma;
    int index = 0;  // within the texel field or shape parameter vectors
    std::string name;
    double lo = 0, hi = 1;
};

/// Inverse-rendering problem: recover selected texel-field values, the
/// flashlight intensity, and shape parameters from multi-view images.
struct FitProblem {
    SdfScene scene;  // template carrying initial values
    EnvironmentMap env;
    double gamma_init = 1.0;
    std::vector<Observation> observations;
    std::vector<FreeParamRef> free_params;
    LossWeights weights;
    double saturation_threshold = 1.0;
    int eikonal_samples = 128;
    bool foreground_only = true;  // restrict the rgb term to mask>0 pixels when masks exist

    /// Reflectance parameters are only supervised by flashlight reflections;
    /// rejects free texel parameters without at least one flash-on view.
    void validate() const;
};

/// Expands selection tokens ("gamma", "texel", "texel.roughness",
/// "texel.prim1.base_color", "shape.radius", ...) into parameter refs.
std::vector<FreeParamRef> expand_free_params(const SdfScene& scene,
                                             const std::vector<std::string>& tokens);

/// Reads the current values of the selected parameters from (scene, gamma).
std::vector<double> gather_params(const FitProblem& problem, const SdfScene& scene, double gamma);
/// Writes values back; clamps into declared bounds.
void scatter_params(const FitProblem& problem, SdfScene& scene, double& gamma,
                    std::span<const double> values);

/// A minibatch ray: observation index and flat pixel index.
struct BatchRay {
    int obs;
    size_t pixel;
};

std::vector<BatchRay> draw_batch(const FitProblem& problem, int batch_size, uint64_t seed,
                                 int64_t iteration);

struct LossBreakdown {
    double total = 0;
    double rgb = 0;
    double eikonal = 0;
    double mask = 0;
};

/// Batch loss and its gradient with respect to the free parameters. The rgb
/// term is the saturation-aware L1 over the batch rays; the Eikonal and mask
/// terms follow the fixed weights. Throws NumericalFailure on non-finite
/// gradients.
LossBreakdown loss_and_gradients(const FitProblem& problem, const SdfScene& scene, double gamma,
                                 std::span<const BatchRay> batch, int64_t iteration, uint64_t seed,
                                 std::vector<double>* gradient);

struct FitConfig {
    int iterations = 4000;
    int batch_size = 256;
    double lr = 5e-4;
    double lr_min = 2.5e-5;
    int lr_decay_iters = 5000;  // linear decay span, then held
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    uint64_t seed = 0;
    enum class BoundsMode { kClamp, kSigmoid } bounds_mode = BoundsMode::kClamp;
    bool check_gradients = false;
    int gradient_check_coords = 20;
    double divergence_factor = 1e3;
    int divergence_patience = 100;
};

struct AdamState {
    std::vector<double> m, v;
    int64_t step = 0;
};

struct GradientCheckSummary {
    bool ran = false;
    double max_rel_error = 0;
    int coords_checked = 0;
};

struct FitResult {
    SdfScene scene;
    double gamma = 1.0;
    std::vector<double> loss_history;
    std::vector<double> final_params;
    GradientCheckSummary gradient_check;
};

/// Thrown when the divergence detector trips; carries the loss history.
struct FitDivergence : NumericalFailure {
    explicit FitDivergence(std::vector<double> history)
        : NumericalFailure("fit diverged"), loss_history(std::move(history)) {}
    std::vector<double> loss_history;
};

/// Adam descent on the free parameters with the linear warm-decay schedule:
/// lr falls from config.lr to config.lr_min across lr_decay_iters, then
/// holds. Bounded parameters are projected (or sigmoid-mapped) each step.
/// Deterministic given the seed.
FitResult fit(const FitProblem& problem, const FitConfig& config);

/// Per-pixel difference of a same-view flash/no-flash pair; saturated pixels
/// in either input are masked out in the result.
HdrImage flash_isolate(const HdrImage& flash_img, const HdrImage& noflash_img,
                       double saturation_threshold = 1.0);

// ---- Flashlight ratio ablation ----

struct RatioSweepConfig {
    SdfScene scene;  // ground truth used for synthesis
    EnvironmentMap env;
    std::vector<std::string> free_tokens;
    int n_views = 16;
    int resolution = 64;
    double distance_min = 0.3, distance_max = 0.5;
    double darkroom_mean_target = 0.25;  // mean flash intensity target at ratio 1
    RenderOptions render;
    FitConfig fit;
    LossWeights weights;
    uint64_t seed = 0;
};

struct RatioFitReport {
    double ratio = 0;
    bool reflectance_unconstrained = false;
    double gamma_used = 0;   // synthesis gamma (0 for ratio 0)
    double gamma_fitted = 0;
    double gamma_rel_error = 0;
    std::map<std::string, double> param_abs_error;  // per free texel parameter
    double max_texel_abs_error = 0;
    double final_loss = 0;
};

/// Synthesizes observation sets where the flashlight contributes the given
/// fraction of mean image intensity, fits each, and reports parameter errors.
/// ratio 0 is flagged unconstrained and not fitted.
std::vector<RatioFitReport> ratio_sweep(const RatioSweepConfig& config,
                                        const std::vector<double>& ratios);

}  // namespace colight
