#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "freetraj/attention_guidance.hpp"
#include "freetraj/rng.hpp"
#include "freetraj/tensor.hpp"

namespace freetraj {

/// Linear variance schedule. Tables are indexed by timestep t in [0, T];
/// entry 0 is the noise-free convention (beta 0, alpha_bar 1).
class DiffusionSchedule {
public:
    DiffusionSchedule(std::size_t train_steps, double beta_start, double beta_end);

    [[nodiscard]] std::size_t train_steps() const { return betas_.size() - 1; }
    [[nodiscard]] double beta(std::size_t t) const { return betas_.at(t); }
    [[nodiscard]] double alpha(std::size_t t) const { return 1.0 - betas_.at(t); }
    [[nodiscard]] double alpha_bar(std::size_t t) const { return alpha_bars_.at(t); }
    [[nodiscard]] const std::vector<double>& alpha_bars() const { return alpha_bars_; }

    /// Uniformly strided sampling timesteps, descending: 1 + k * (T / steps).
    [[nodiscard]] std::vector<std::size_t> ddim_timesteps(std::size_t steps) const;

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
};

[[nodiscard]] DiffusionSchedule build_schedule(std::size_t train_steps, double beta_start, double beta_end);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
[[nodiscard]] LatentTensor q_sample(const LatentTensor& x0, std::size_t t, const LatentTensor& eps,
                                    const DiffusionSchedule& schedule);

/// One DDIM update from t to t_prev (< t). With eta > 0 the stochastic term
/// draws from `noise_seed`.
[[nodiscard]] LatentTensor ddim_step(const LatentTensor& x_t, const LatentTensor& eps_hat, std::size_t t,
                                     std::size_t t_prev, const DiffusionSchedule& schedule, double eta = 0.0,
                                     Seed noise_seed = Seed{0});

/// eps_uncond + scale * (eps_cond - eps_uncond).
[[nodiscard]] LatentTensor cfg_combine(const LatentTensor& eps_uncond, const LatentTensor& eps_cond, double scale);

/// Overlapping temporal windows of length `window` advanced by `stride`,
/// with a final window flush against the end so every frame is covered.
[[nodiscard]] std::vector<std::size_t> plan_windows(std::size_t frames, std::size_t window, std::size_t stride);

/// Effective per-frame fusion weights: weights[w][k] / sum over the windows
/// covering that frame. Result indexed [window][offset].
[[nodiscard]] std::vector<std::vector<double>> normalized_fusion_weights(
    std::size_t frames, const std::vector<std::size_t>& starts, std::size_t window,
    const std::vector<std::vector<double>>& weights);

/// Uniform raw weights for every window.
[[nodiscard]] std::vector<std::vector<double>> uniform_window_weights(std::size_t windows, std::size_t window);

/// Per-frame weighted average of window outputs (each window x D).
[[nodiscard]] Matrix fuse_windows(const std::vector<Matrix>& window_outputs, const std::vector<std::size_t>& starts,
                                  std::size_t window, const std::vector<std::vector<double>>& weights,
                                  std::size_t frames);

}  // namespace freetraj
