#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "freetraj/rng.hpp"
#include "freetraj/tensor.hpp"
#include "freetraj/trajectory.hpp"

namespace freetraj {

/// I.i.d. standard normal tensor; element k is draw k of the seed's stream.
[[nodiscard]] LatentTensor sample_gaussian(const Shape4& shape, Seed seed);

enum class FlowDirection {
    down_right,  ///< content moves toward larger row and column indices
    up_right,    ///< content moves toward smaller row, larger column indices
};

/// Builds `frames` frames by shifting the single input frame cyclically by
/// `stride` cells per frame in the given direction.
[[nodiscard]] LatentTensor noise_flow(const LatentTensor& first_frame, std::size_t frames, std::size_t stride,
                                      FlowDirection direction);

enum class FilterKind { ideal, gaussian };

/// Spatio-temporal low-pass filter over the (frames, rows, cols) frequency
/// lattice, row-major, FFT bin order.
struct LowPassFilter {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    FilterKind kind = FilterKind::ideal;
    std::vector<double> values;
    /// Fraction of bins with value above 0.5.
    double keep_fraction = 0.0;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] double at(std::size_t f, std::size_t i, std::size_t j) const {
        return values[(f * height + i) * width + j];
    }
};

/// Squared radius of bin (kf, ki, kj) in signed normalized frequency, each
/// axis in [-1/2, 1/2].
[[nodiscard]] double normalized_radius2(std::size_t kf, std::size_t ki, std::size_t kj, std::size_t frames,
                                        std::size_t height, std::size_t width);

/// Keeps the smallest normalized-frequency ball holding at least
/// `keep_fraction` of all bins. The gaussian kind places its half-maximum
/// between that ball's radius and the next larger bin radius, so both kinds
/// keep the same set of bins.
[[nodiscard]] LowPassFilter build_lpf(std::size_t frames, std::size_t height, std::size_t width, double keep_fraction,
                                      FilterKind kind = FilterKind::ideal);

/// Percentage of the spectrum replaced by fresh noise.
[[nodiscard]] inline double resampled_percentage(double keep_fraction) { return 100.0 * (1.0 - keep_fraction); }

/// True iff H[k] == H[-k mod n] on every axis.
[[nodiscard]] bool is_symmetric(const LowPassFilter& filter);

/// IFFT3D(FFT3D(z) * H + FFT3D(eta) * (1 - H)), per channel.
[[nodiscard]] LatentTensor resample_high_freq(const LatentTensor& z, const LatentTensor& eta,
                                              const LowPassFilter& filter);

/// Replaces in-box noise of every frame with the matching crop of one shared
/// local noise patch (all channels together). Empty masks leave a frame
/// untouched.
[[nodiscard]] LatentTensor inject_trajectory(const LatentTensor& frame_noises, const LatentTensor& local_noise,
                                             const FrameMaskStack& masks);

/// Largest box extent over all frames: the local-noise size needed for
/// inject_trajectory.
[[nodiscard]] std::pair<std::size_t, std::size_t> max_box_extent(const FrameMaskStack& masks);

/// Output frame -> base frame map used by reschedule_noise: identity for the
/// first block, then one seeded shuffle of [0, base_frames) per block.
[[nodiscard]] std::vector<std::size_t> reschedule_mapping(std::size_t base_frames, std::size_t total_frames, Seed seed);

/// Long-sequence initial noise built from shuffled repeats of a base block.
[[nodiscard]] LatentTensor reschedule_noise(const LatentTensor& base, std::size_t total_frames, Seed seed);

struct RepeatSpan {
    std::size_t start = 0;
    std::size_t length = 0;
    /// Frame whose draw fills the whole span; must lie inside the span.
    std::size_t source = 0;
};

/// Gaussian noise in which every frame of a span repeats the span's source
/// frame; other frames are independent.
[[nodiscard]] LatentTensor partial_repeat_sample(const Shape4& shape, const std::vector<RepeatSpan>& spans, Seed seed);

/// Partition of [0, frames) into the spans plus singleton groups.
[[nodiscard]] std::vector<std::vector<std::size_t>> frame_groups(std::size_t frames,
                                                                  const std::vector<RepeatSpan>& spans);

/// Mean Pearson correlation between the spatial magnitude spectra of
/// adjacent frames, restricted to bins with 0 < radius <= band_radius.
/// 1 for frames that are cyclic shifts of each other, about 0 for
/// independent noise.
[[nodiscard]] double adjacent_frame_low_band_similarity(const LatentTensor& t, double band_radius = 0.25);

struct FlowDemoSettings {
    Shape4 shape{4, 16, 16, 24};
    FlowDirection direction = FlowDirection::down_right;
    std::size_t stride = 2;
    double keep_fraction = 0.25;
    FilterKind filter = FilterKind::ideal;
    double band_radius = 0.25;
    /// Independent draws averaged into the reported similarity.
    std::size_t trials = 128;
};

struct FlowDemoResult {
    /// Flowed and resampled noise of trial 0.
    LatentTensor noise;
    std::vector<double> trial_similarity;
    double mean_similarity = 0.0;
};

/// Flows one gaussian frame across the clip, resamples the high band and
/// measures adjacent-frame low-band similarity, once per trial. Trial k
/// draws from derive_seed(seed, k).
[[nodiscard]] FlowDemoResult flow_demo(const FlowDemoSettings& settings, Seed seed);

struct NoiseSeeds {
    Seed frames{1};
    Seed local{2};
    Seed eta{3};
    Seed shuffle{4};
};

struct NoisePipelineConfig {
    Shape4 shape{};
    bool inject = true;
    double keep_fraction = 0.25;
    FilterKind filter = FilterKind::ideal;
    /// Long mode: base block length for noise rescheduling.
    std::optional<std::size_t> reschedule_block;
    std::vector<RepeatSpan> repeat_spans;
};

struct NoisePipelineResult {
    LatentTensor noise;
    /// Stage names in execution order.
    std::vector<std::string> stages;
};

/// Initial latent noise: sample (or reschedule), optionally inject the
/// trajectory, then resample the high band. Rescheduling always precedes
/// injection and resampling.
[[nodiscard]] NoisePipelineResult build_initial_noise(const NoisePipelineConfig& config, const FrameMaskStack* masks,
                                                      const NoiseSeeds& seeds);

}  // namespace freetraj
