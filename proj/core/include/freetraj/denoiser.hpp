#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "freetraj/attention_guidance.hpp"
#include "freetraj/diffusion.hpp"
#include "freetraj/rng.hpp"
#include "freetraj/tensor.hpp"
#include "freetraj/trajectory.hpp"

namespace freetraj {

struct ModelConfig {
    std::size_t channels = 4;
    std::size_t hidden = 16;
    std::size_t heads = 2;
    std::size_t text_dim = 16;
    /// Resolution levels; level l runs at (H >> l, W >> l).
    std::size_t levels = 2;
    /// First level that carries the spatial/temporal transformers; levels
    /// below it are convolution-only.
    std::size_t first_attention_level = 1;
    /// Gain on the query/key projections; larger values sharpen attention.
    double qk_gain = 0.5;
    /// Channel groups of the output-head group norm.
    std::size_t norm_groups = 4;
    /// Scale of the learned residual added to the analytic noise estimate.
    double output_scale = 0.5;
};

void validate_model(const ModelConfig& config, const Shape4& latent);

/// Attention edits applied inside the denoiser.
struct GuidanceHooks {
    GuidanceConfig config;
    TokenSet tokens;
    /// Per-frame target boxes and their latent-resolution masks.
    std::vector<BBox> boxes;
    FrameMaskStack masks;
    /// Frame partition for temporal isolation repair; empty disables it.
    std::vector<std::vector<std::size_t>> isolation_groups;
    /// Current denoising step index in {total_steps, ..., 1}.
    std::size_t step = 0;
    std::size_t total_steps = 0;

    [[nodiscard]] bool editing() const { return should_edit(step, total_steps, config.edit_steps); }
};

/// Measurements taken during a forward pass.
struct AttentionProbe {
    /// Latent-resolution target masks and prompt flags used for measuring.
    FrameMaskStack masks;
    TokenSet tokens;
    /// Cross-attention weight on foreground tokens from in-box queries,
    /// summed over frames, heads and attention levels.
    double fg_mass_in_box = 0.0;
    /// (first frame, frame count) of every temporal guidance mask window.
    std::vector<std::pair<std::size_t, std::size_t>> temporal_mask_windows;
    std::size_t edited_passes = 0;
};

/// Temporal attention split into overlapping local windows.
struct TemporalWindows {
    std::size_t window = 16;
    std::size_t stride = 4;
};

struct ForwardOptions {
    const GuidanceHooks* hooks = nullptr;
    AttentionProbe* probe = nullptr;
    std::optional<TemporalWindows> windows;
};

/// Small video UNet with pseudo-random weights. Each level runs
/// Conv -> TemporalConv -> SpatialTransformer(self, cross) ->
/// TemporalTransformer, with 2x2 pooling between levels.
/// The prediction is sqrt(1 - alpha_bar_t) z_t + output_scale * net(z_t),
/// i.e. the exact noise estimate for unit-variance Gaussian data plus the
/// network residual.
class ToyDenoiser {
public:
    ToyDenoiser(ModelConfig config, const DiffusionSchedule& schedule, Seed seed);

    [[nodiscard]] const ModelConfig& config() const { return config_; }

    /// `text` is n_tokens x text_dim; an all-zero matrix is the null prompt.
    [[nodiscard]] LatentTensor forward(const LatentTensor& z_t, std::size_t t, const Matrix& text,
                                       const ForwardOptions& options = {}) const;

    /// Deterministic prompt embedding: one random row per token.
    [[nodiscard]] Matrix embed_prompt(std::size_t tokens, Seed seed) const;

    struct AttentionWeights {
        Matrix q, k, v, o;
    };
    struct Block {
        std::vector<Matrix> conv;   // 3x3 kernel taps, hidden x hidden each
        std::vector<Matrix> tconv;  // 3 temporal taps
        AttentionWeights spatial;
        AttentionWeights cross;
        AttentionWeights temporal;
    };

private:
    ModelConfig config_;
    std::vector<double> alpha_bars_;
    Matrix in_proj_;
    Matrix time_proj_;
    Matrix out_proj_;
    std::vector<Block> blocks_;
};

}  // namespace freetraj
