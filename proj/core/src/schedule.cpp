#include "freetraj/diffusion.hpp"

#include <cmath>
#include <string>

#include "freetraj/errors.hpp"
#include "freetraj/noise_guidance.hpp"

namespace freetraj {

DiffusionSchedule::DiffusionSchedule(std::size_t train_steps, double beta_start, double beta_end) {
    if (train_steps == 0) throw ValidationError("schedule needs at least one timestep");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ValidationError("schedule needs 0 < beta_start <= beta_end < 1");
    }
    betas_.assign(train_steps + 1, 0.0);
    alpha_bars_.assign(train_steps + 1, 1.0);
    for (std::size_t t = 1; t <= train_steps; ++t) {
        const double u = train_steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(train_steps - 1);
        betas_[t] = beta_start + (beta_end - beta_start) * u;
        alpha_bars_[t] = alpha_bars_[t - 1] * (1.0 - betas_[t]);
    }
}

std::vector<std::size_t> DiffusionSchedule::ddim_timesteps(std::size_t steps) const {
    const std::size_t T = train_steps();
    if (steps == 0 || steps > T) {
        throw ValidationError("sampler steps must be in [1, " + std::to_string(T) + "]");
    }
    const std::size_t stride = T / steps;
    std::vector<std::size_t> ts(steps);
    for (std::size_t k = 0; k < steps; ++k) ts[k] = 1 + (steps - 1 - k) * stride;
    return ts;
}

DiffusionSchedule build_schedule(std::size_t train_steps, double beta_start, double beta_end) {
    return DiffusionSchedule(train_steps, beta_start, beta_end);
}

LatentTensor q_sample(const LatentTensor& x0, std::size_t t, const LatentTensor& eps, const DiffusionSchedule& s) {
    if (x0.shape() != eps.shape()) throw ValidationError("q_sample: shape mismatch");
    if (t > s.train_steps()) throw ValidationError("q_sample: timestep out of range");
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    LatentTensor out(x0.shape());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out.data()[k] = static_cast<float>(a * x0.data()[k] + b * eps.data()[k]);
    }
    return out;
}

LatentTensor ddim_step(const LatentTensor& x_t, const LatentTensor& eps_hat, std::size_t t, std::size_t t_prev,
                       const DiffusionSchedule& s, double eta, Seed noise_seed) {
    if (x_t.shape() != eps_hat.shape()) throw ValidationError("ddim_step: shape mismatch");
    if (t_prev >= t) throw ValidationError("ddim_step: t_prev must be smaller than t");
    if (t > s.train_steps()) throw ValidationError("ddim_step: timestep out of range");
    if (!(eta >= 0.0)) throw ValidationError("ddim_step: eta must be >= 0");
    const double ab = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t_prev);
    const double sigma =
        eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(std::max(0.0, 1.0 - ab / ab_prev));
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
    const double sqrt_ab = std::sqrt(ab);
    const double sqrt_1mab = std::sqrt(1.0 - ab);
    const double sqrt_ab_prev = std::sqrt(ab_prev);

    LatentTensor noise;
    if (sigma > 0.0) noise = sample_gaussian(x_t.shape(), noise_seed);
    LatentTensor out(x_t.shape());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double e = eps_hat.data()[k];
        const double x0_hat = (x_t.data()[k] - sqrt_1mab * e) / sqrt_ab;
        double v = sqrt_ab_prev * x0_hat + dir * e;
        if (sigma > 0.0) v += sigma * noise.data()[k];
        out.data()[k] = static_cast<float>(v);
    }
    return out;
}

LatentTensor cfg_combine(const LatentTensor& eps_uncond, const LatentTensor& eps_cond, double scale) {
    if (eps_uncond.shape() != eps_cond.shape()) throw ValidationError("cfg_combine: shape mismatch");
    LatentTensor out(eps_cond.shape());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double u = eps_uncond.data()[k];
        out.data()[k] = static_cast<float>(u + scale * (eps_cond.data()[k] - u));
    }
    return out;
}

std::vector<std::size_t> plan_windows(std::size_t frames, std::size_t window, std::size_t stride) {
    if (window == 0 || stride == 0) throw ValidationError("window length and stride must be positive");
    if (window >= frames) return {0};
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + window <= frames; s += stride) starts.push_back(s);
    if (starts.back() + window < frames) starts.push_back(frames - window);
    return starts;
}

std::vector<std::vector<double>> uniform_window_weights(std::size_t windows, std::size_t window) {
    return std::vector<std::vector<double>>(windows, std::vector<double>(window, 1.0));
}

std::vector<std::vector<double>> normalized_fusion_weights(std::size_t frames, const std::vector<std::size_t>& starts,
                                                           std::size_t window,
                                                           const std::vector<std::vector<double>>& weights) {
    if (weights.size() != starts.size()) throw ValidationError("fusion: one weight row per window needed");
    std::vector<double> total(frames, 0.0);
    for (std::size_t w = 0; w < starts.size(); ++w) {
        const std::size_t len = std::min(window, frames - starts[w]);
        if (weights[w].size() < len) throw ValidationError("fusion: weight row shorter than its window");
        for (std::size_t k = 0; k < len; ++k) {
            if (!(weights[w][k] >= 0.0)) throw ValidationError("fusion: weights must be non-negative");
            total[starts[w] + k] += weights[w][k];
        }
    }
    for (std::size_t f = 0; f < frames; ++f) {
        if (!(total[f] > 0.0)) throw ValidationError("fusion: frame " + std::to_string(f) + " is not covered");
    }
    std::vector<std::vector<double>> out(starts.size());
    for (std::size_t w = 0; w < starts.size(); ++w) {
        const std::size_t len = std::min(window, frames - starts[w]);
        out[w].resize(len);
        for (std::size_t k = 0; k < len; ++k) out[w][k] = weights[w][k] / total[starts[w] + k];
    }
    return out;
}

Matrix fuse_windows(const std::vector<Matrix>& window_outputs, const std::vector<std::size_t>& starts,
                    std::size_t window, const std::vector<std::vector<double>>& weights, std::size_t frames) {
    if (window_outputs.size() != starts.size() || window_outputs.empty()) {
        throw ValidationError("fusion: one output per window needed");
    }
    const auto norm = normalized_fusion_weights(frames, starts, window, weights);
    const Eigen::Index dim = window_outputs.front().cols();
    Matrix fused = Matrix::Zero(static_cast<Eigen::Index>(frames), dim);
    for (std::size_t w = 0; w < starts.size(); ++w) {
        const auto& out = window_outputs[w];
        if (out.rows() != static_cast<Eigen::Index>(norm[w].size()) || out.cols() != dim) {
            throw ValidationError("fusion: window output has the wrong shape");
        }
        for (std::size_t k = 0; k < norm[w].size(); ++k) {
            fused.row(static_cast<Eigen::Index>(starts[w] + k)) += norm[w][k] * out.row(static_cast<Eigen::Index>(k));
        }
    }
    return fused;
}

}  // namespace freetraj
