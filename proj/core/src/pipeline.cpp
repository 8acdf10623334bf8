#include "freetraj/pipeline.hpp"

#include <string>
#include <tuple>

#include "freetraj/diffusion.hpp"
#include "freetraj/errors.hpp"
#include "freetraj/parallel.hpp"

namespace freetraj {

TokenSet PromptSpec::token_set() const {
    TokenSet ts{std::vector<std::uint8_t>(tokens, 0)};
    for (auto k : fg_tokens) {
        if (k >= tokens) throw ValidationError("foreground token index " + std::to_string(k) + " is out of range");
        ts.fg[k] = 1;
    }
    return ts;
}

GenerationSeeds GenerationSeeds::from_base(Seed base) {
    GenerationSeeds s;
    s.noise.frames = derive_seed(base, "noise");
    s.noise.local = derive_seed(base, "local");
    s.noise.eta = derive_seed(base, "eta");
    s.noise.shuffle = derive_seed(base, "shuffle");
    s.model = derive_seed(base, "model");
    s.prompt = derive_seed(base, "prompt");
    s.sampler = derive_seed(base, "sampler");
    return s;
}

void validate_sampler(const SamplerConfig& c) {
    validate_shape(c.dims);
    validate_model(c.model, c.dims);
    if (c.steps == 0 || c.steps > c.train_steps) throw ValidationError("steps must be in [1, train_steps]");
    if (!(c.eta >= 0.0)) throw ValidationError("eta must be >= 0");
    if (!(c.keep_fraction >= 0.0 && c.keep_fraction <= 1.0)) throw ValidationError("keep_fraction must be in [0, 1]");
    validate_guidance(c.guidance, c.steps);
    (void)c.prompt.token_set();
    if (c.mode == Mode::long_video) {
        if (c.long_base_frames == 0 || c.long_base_frames > c.dims.frames) {
            throw ValidationError("long mode base block must be in [1, frames]");
        }
        if (c.windows.window == 0 || c.windows.stride == 0 || c.windows.stride > c.windows.window) {
            throw ValidationError("temporal windows need 0 < stride <= window");
        }
    }
}

SamplerConfig neutral_guidance(SamplerConfig c) {
    c.noise_guidance = true;
    c.attention_guidance = true;
    c.keep_fraction = 1.0;
    c.inject = false;
    c.guidance.alpha_scale = 0.0;
    c.guidance.beta = 1.0;
    c.guidance.suppress = false;
    c.guidance.isolation_lambda = 0.0;
    return c;
}

std::pair<std::vector<BBox>, FrameMaskStack> plan_trajectory(const TrajectorySpec& trajectory, const Shape4& dims) {
    const TrajectorySpec spec = retime_trajectory(trajectory, dims.frames);
    auto boxes = interpolate_boxes(spec);
    auto masks = rasterize_masks(boxes, dims.height, dims.width);
    return {std::move(boxes), std::move(masks)};
}

NoisePipelineConfig noise_config_for(const SamplerConfig& c, bool have_trajectory) {
    NoisePipelineConfig n;
    n.shape = c.dims;
    const bool guided = have_trajectory && c.noise_guidance;
    n.inject = guided && c.inject;
    n.keep_fraction = guided ? c.keep_fraction : 1.0;
    n.filter = c.filter;
    if (c.mode == Mode::long_video && c.dims.frames > c.long_base_frames) n.reschedule_block = c.long_base_frames;
    n.repeat_spans = c.repeat_spans;
    return n;
}

GuidanceHooks make_hooks(const SamplerConfig& c, std::vector<BBox> boxes, FrameMaskStack masks) {
    GuidanceHooks h;
    h.config = c.guidance;
    h.tokens = c.prompt.token_set();
    h.boxes = std::move(boxes);
    h.masks = std::move(masks);
    if (!c.repeat_spans.empty()) h.isolation_groups = frame_groups(c.dims.frames, c.repeat_spans);
    h.total_steps = c.steps;
    return h;
}

namespace {

struct ThreadScope {
    explicit ThreadScope(std::size_t n) : previous(thread_count()) { set_thread_count(n); }
    ~ThreadScope() { set_thread_count(previous); }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;
    std::size_t previous;
};

}  // namespace

GenerationResult generate(const SamplerConfig& config, const std::optional<TrajectorySpec>& trajectory,
                          AttentionProbe* probe) {
    validate_sampler(config);
    ThreadScope threads(config.threads);
    GenerationResult result;

    if (trajectory) std::tie(result.boxes, result.masks) = plan_trajectory(*trajectory, config.dims);

    NoisePipelineConfig ncfg = noise_config_for(config, trajectory.has_value());
    auto noise = build_initial_noise(ncfg, trajectory ? &result.masks : nullptr, config.seeds.noise);
    result.initial_noise = noise.noise;
    result.noise_stages = std::move(noise.stages);

    const DiffusionSchedule schedule = build_schedule(config.train_steps, config.beta_start, config.beta_end);
    const ToyDenoiser model(config.model, schedule, config.seeds.model);
    const Matrix text = model.embed_prompt(config.prompt.tokens, config.seeds.prompt);
    const Matrix null_text = Matrix::Zero(text.rows(), text.cols());

    std::optional<GuidanceHooks> hooks;
    if (trajectory && config.attention_guidance) hooks = make_hooks(config, result.boxes, result.masks);

    ForwardOptions opts;
    if (config.mode == Mode::long_video) opts.windows = config.windows;

    const auto timesteps = schedule.ddim_timesteps(config.steps);
    LatentTensor x = result.initial_noise;
    for (std::size_t k = 0; k < timesteps.size(); ++k) {
        const std::size_t t = timesteps[k];
        const std::size_t t_prev = k + 1 < timesteps.size() ? timesteps[k + 1] : 0;
        if (hooks) {
            hooks->step = config.steps - k;
            opts.hooks = &*hooks;
        }
        opts.probe = nullptr;
        const LatentTensor eps_u = model.forward(x, t, null_text, opts);
        opts.probe = probe;
        const LatentTensor eps_c = model.forward(x, t, text, opts);
        const LatentTensor eps = cfg_combine(eps_u, eps_c, config.cfg_scale);
        x = ddim_step(x, eps, t, t_prev, schedule, config.eta, derive_seed(config.seeds.sampler, k));
    }
    if (!x.all_finite()) throw InternalError("generation produced non-finite latents");
    result.latent = std::move(x);
    return result;
}

GenerationResult generate(SamplerConfig config, const std::optional<TrajectorySpec>& trajectory, Seed seed,
                          AttentionProbe* probe) {
    config.seeds = GenerationSeeds::from_base(seed);
    return generate(config, trajectory, probe);
}

}  // namespace freetraj
