#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "freetraj/attention_guidance.hpp"
#include "freetraj/denoiser.hpp"
#include "freetraj/noise_guidance.hpp"
#include "freetraj/trajectory.hpp"

namespace freetraj {

enum class Mode { normal, long_video, large };

struct PromptSpec {
    std::size_t tokens = 6;
    /// Indices of the tokens naming the controlled object.
    std::vector<std::size_t> fg_tokens{2};

    [[nodiscard]] TokenSet token_set() const;
};

struct GenerationSeeds {
    NoiseSeeds noise;
    Seed model{11};
    Seed prompt{12};
    Seed sampler{13};

    /// Every named stream derived from one base seed.
    [[nodiscard]] static GenerationSeeds from_base(Seed base);
};

/// Everything that determines a toy generation run.
struct SamplerConfig {
    Shape4 dims{4, 16, 16, 24};
    Mode mode = Mode::normal;

    std::size_t train_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    std::size_t steps = 50;
    double eta = 0.0;
    double cfg_scale = 12.0;

    ModelConfig model;
    PromptSpec prompt;

    bool noise_guidance = true;
    bool attention_guidance = true;
    /// Trajectory injection into the initial noise.
    bool inject = true;
    double keep_fraction = 0.25;
    FilterKind filter = FilterKind::ideal;
    GuidanceConfig guidance;

    /// Long mode: base block for noise rescheduling and temporal windows.
    std::size_t long_base_frames = 16;
    TemporalWindows windows;
    std::vector<RepeatSpan> repeat_spans;

    GenerationSeeds seeds;
    std::size_t threads = 1;
};

void validate_sampler(const SamplerConfig& config);

/// Settings under which every guidance hook is an exact no-op.
[[nodiscard]] SamplerConfig neutral_guidance(SamplerConfig config);

struct GenerationResult {
    LatentTensor latent;
    LatentTensor initial_noise;
    std::vector<std::string> noise_stages;
    std::vector<BBox> boxes;
    FrameMaskStack masks;
};

/// Builds the initial noise (guided when a trajectory is given and noise
/// guidance is on) and runs the DDIM loop with classifier-free guidance and
/// the attention hooks. Output is a pure function of (config, trajectory).
[[nodiscard]] GenerationResult generate(const SamplerConfig& config, const std::optional<TrajectorySpec>& trajectory,
                                        AttentionProbe* probe = nullptr);

/// Same, with all seeds derived from `seed`.
[[nodiscard]] GenerationResult generate(SamplerConfig config, const std::optional<TrajectorySpec>& trajectory,
                                        Seed seed, AttentionProbe* probe = nullptr);

/// Boxes and latent-resolution masks for a trajectory retimed to `frames`.
[[nodiscard]] std::pair<std::vector<BBox>, FrameMaskStack> plan_trajectory(const TrajectorySpec& trajectory,
                                                                           const Shape4& dims);

/// Noise-pipeline settings implied by a sampler config.
[[nodiscard]] NoisePipelineConfig noise_config_for(const SamplerConfig& config, bool have_trajectory);

/// Guidance hooks for a planned trajectory.
[[nodiscard]] GuidanceHooks make_hooks(const SamplerConfig& config, std::vector<BBox> boxes, FrameMaskStack masks);

}  // namespace freetraj
