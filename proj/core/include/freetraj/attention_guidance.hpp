#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "freetraj/trajectory.hpp"

namespace freetraj {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
/// Binary d_q x d_k attention mask.
using AttentionMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Prompt tokens with a foreground flag per token.
struct TokenSet {
    std::vector<std::uint8_t> fg;

    [[nodiscard]] std::size_t size() const { return fg.size(); }
    [[nodiscard]] std::size_t fg_count() const;
};

/// Soft-guidance knobs for the three attention types.
struct GuidanceConfig {
    /// Numerator of the default cross-attention boost
    /// alpha = alpha_scale / (fg_tokens * box_area).
    double alpha_scale = 0.25;
    double beta = 0.01;
    /// Edited denoising steps: t in {T, ..., T - edit_steps}.
    std::size_t edit_steps = 10;
    /// Gaussian width as a fraction of the box half-extent.
    double sigma_scale = 0.5;
    double isolation_lambda = 0.2;
    double isolation_threshold = 0.9;
    /// Mask (background pixel, foreground token) pairs with -inf.
    bool suppress = true;
};

/// Throws ValidationError for out-of-range knobs; `total_steps` bounds
/// edit_steps.
void validate_guidance(const GuidanceConfig& config, std::size_t total_steps);

struct CrossMasks {
    /// M_CA[i, j] = fg(i) * fg(j): the boosted pairs.
    AttentionMask boost;
    /// M'_CA[i, j] = 0 exactly on (background pixel, foreground token) pairs,
    /// which receive -inf logits; 1 elsewhere.
    AttentionMask keep;
};

[[nodiscard]] CrossMasks build_cross_masks(std::span<const std::uint8_t> target, const TokenSet& tokens);

/// M_SA[i, j] = 1 iff pixels i and j are both foreground or both background.
[[nodiscard]] AttentionMask build_spatial_self_mask(std::span<const std::uint8_t> target);

/// M_TA[f, k] for one pixel over frames [first, first + count) of the stack.
/// count = 0 means all frames from `first`.
[[nodiscard]] AttentionMask build_temporal_self_mask(const FrameMaskStack& stack, std::size_t pixel,
                                                     std::size_t first = 0, std::size_t count = 0);

/// exp(-((x-cx)^2/(2 sx^2) + (y-cy)^2/(2 sy^2))) with sx, sy = sigma_scale
/// times the half extents; 1 at the box center.
[[nodiscard]] double gaussian_weight(double x, double y, const BBox& box, double sigma_scale);

/// gaussian_weight at every cell center of an h x w lattice, row-major.
[[nodiscard]] Vector gaussian_weight_map(std::size_t height, std::size_t width, const BBox& box, double sigma_scale);

/// Default cross boost for one frame; 0 when no token is foreground.
[[nodiscard]] double default_alpha(double alpha_scale, std::size_t fg_tokens, double box_area);

[[nodiscard]] Matrix softmax_rows(const Matrix& logits);

/// softmax(Q K^T / sqrt(d)) V.
[[nodiscard]] Matrix scaled_dot_product_attention(const Matrix& q, const Matrix& k, const Matrix& v);

/// softmax(Q K^T / sqrt(d) + M) + S, where M is -inf where keep == 0 and
/// S[i, j] = alpha * g[i] where boost == 1.
[[nodiscard]] Matrix guided_cross_weights(const Matrix& q, const Matrix& k, const CrossMasks& masks, double alpha,
                                          const Vector& g);
[[nodiscard]] Matrix guided_cross_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                            const CrossMasks& masks, double alpha, const Vector& g);

/// softmax((Q K^T / sqrt(d)) * W) with W = beta off-mask, 1 on-mask.
[[nodiscard]] Matrix guided_self_weights(const Matrix& q, const Matrix& k, const AttentionMask& mask, double beta);
[[nodiscard]] Matrix guided_self_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                           const AttentionMask& mask, double beta);

/// True iff total - edit_steps <= t <= total.
[[nodiscard]] bool should_edit(std::size_t t, std::size_t total, std::size_t edit_steps);

/// Moves a fraction `lambda` of in-group mass to the out-of-group columns,
/// uniformly, for every row whose in-group mass exceeds `threshold`.
/// Rows stay stochastic. A single-group partition has nowhere to send mass:
/// the input is returned and a warning goes to stderr.
[[nodiscard]] Matrix redistribute_isolated_attention(const Matrix& weights,
                                                     const std::vector<std::vector<std::size_t>>& groups,
                                                     double lambda, double threshold = 0.9);

}  // namespace freetraj
