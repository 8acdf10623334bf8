#include "freetraj/attention_guidance.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include "freetraj/errors.hpp"

namespace freetraj {

std::size_t TokenSet::fg_count() const {
    std::size_t n = 0;
    for (auto v : fg) n += v ? 1 : 0;
    return n;
}

void validate_guidance(const GuidanceConfig& c, std::size_t total_steps) {
    if (!(c.alpha_scale >= 0.0) || !std::isfinite(c.alpha_scale)) throw ValidationError("alpha_scale must be >= 0");
    if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw ValidationError("beta must be in [0, 1]");
    if (c.edit_steps > total_steps) {
        throw ValidationError("edit_steps (" + std::to_string(c.edit_steps) + ") exceeds the sampler steps (" +
                              std::to_string(total_steps) + ")");
    }
    if (!(c.sigma_scale > 0.0) || !std::isfinite(c.sigma_scale)) throw ValidationError("sigma_scale must be > 0");
    if (!(c.isolation_lambda >= 0.0 && c.isolation_lambda < 1.0)) {
        throw ValidationError("isolation_lambda must be in [0, 1)");
    }
    if (!(c.isolation_threshold >= 0.0 && c.isolation_threshold <= 1.0)) {
        throw ValidationError("isolation_threshold must be in [0, 1]");
    }
}

CrossMasks build_cross_masks(std::span<const std::uint8_t> target, const TokenSet& tokens) {
    const auto dq = static_cast<Eigen::Index>(target.size());
    const auto dk = static_cast<Eigen::Index>(tokens.size());
    CrossMasks m{AttentionMask(dq, dk), AttentionMask(dq, dk)};
    for (Eigen::Index i = 0; i < dq; ++i) {
        const int fi = target[static_cast<std::size_t>(i)] ? 1 : 0;
        for (Eigen::Index j = 0; j < dk; ++j) {
            const int fj = tokens.fg[static_cast<std::size_t>(j)] ? 1 : 0;
            m.boost(i, j) = static_cast<std::uint8_t>(fi * fj);
            m.keep(i, j) = static_cast<std::uint8_t>(1 - (1 - fi) * fj);
        }
    }
    return m;
}

AttentionMask build_spatial_self_mask(std::span<const std::uint8_t> target) {
    const auto d = static_cast<Eigen::Index>(target.size());
    AttentionMask m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const int fi = target[static_cast<std::size_t>(i)] ? 1 : 0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const int fj = target[static_cast<std::size_t>(j)] ? 1 : 0;
            m(i, j) = static_cast<std::uint8_t>(fi * fj + (1 - fi) * (1 - fj));
        }
    }
    return m;
}

AttentionMask build_temporal_self_mask(const FrameMaskStack& stack, std::size_t pixel, std::size_t first,
                                       std::size_t count) {
    if (pixel >= stack.height * stack.width) throw ValidationError("temporal mask: pixel index out of range");
    if (first >= stack.frames()) throw ValidationError("temporal mask: first frame out of range");
    if (count == 0) count = stack.frames() - first;
    if (first + count > stack.frames()) throw ValidationError("temporal mask: frame window out of range");
    const auto n = static_cast<Eigen::Index>(count);
    AttentionMask m(n, n);
    for (Eigen::Index f = 0; f < n; ++f) {
        const int a = stack.masks[first + static_cast<std::size_t>(f)].flat()[pixel] ? 1 : 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const int b = stack.masks[first + static_cast<std::size_t>(k)].flat()[pixel] ? 1 : 0;
            m(f, k) = static_cast<std::uint8_t>(a * b + (1 - a) * (1 - b));
        }
    }
    return m;
}

double gaussian_weight(double x, double y, const BBox& box, double sigma_scale) {
    const double sx = sigma_scale * 0.5 * box.width();
    const double sy = sigma_scale * 0.5 * box.height();
    if (!(sx > 0.0) || !(sy > 0.0)) throw ValidationError("gaussian_weight: degenerate box extent");
    const double dx = x - box.center_x();
    const double dy = y - box.center_y();
    return std::exp(-(dx * dx / (2.0 * sx * sx) + dy * dy / (2.0 * sy * sy)));
}

Vector gaussian_weight_map(std::size_t height, std::size_t width, const BBox& box, double sigma_scale) {
    Vector g(static_cast<Eigen::Index>(height * width));
    for (std::size_t i = 0; i < height; ++i) {
        const double y = (static_cast<double>(i) + 0.5) / static_cast<double>(height);
        for (std::size_t j = 0; j < width; ++j) {
            const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(width);
            g(static_cast<Eigen::Index>(i * width + j)) = gaussian_weight(x, y, box, sigma_scale);
        }
    }
    return g;
}

double default_alpha(double alpha_scale, std::size_t fg_tokens, double box_area) {
    if (fg_tokens == 0) return 0.0;
    if (!(box_area > 0.0)) throw ValidationError("default_alpha: box area must be positive");
    return alpha_scale / (static_cast<double>(fg_tokens) * box_area);
}

Matrix softmax_rows(const Matrix& logits) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    const Vector row_max = logits.rowwise().maxCoeff();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        if (row_max(r) == kNegInf) {
            throw InternalError("softmax row " + std::to_string(r) + " is fully suppressed");
        }
    }
    Matrix out = (logits.colwise() - row_max).array().exp().matrix();
    const Vector sums = out.rowwise().sum();
    out.array().colwise() /= sums.array();
    return out;
}

namespace {

Matrix scaled_logits(const Matrix& q, const Matrix& k) {
    if (q.cols() != k.cols()) throw ValidationError("attention: query and key widths differ");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Matrix logits = q * k.transpose();
    logits *= scale;
    return logits;
}

void check_mask(const AttentionMask& m, const Matrix& logits, const char* what) {
    if (m.rows() != logits.rows() || m.cols() != logits.cols()) {
        throw ValidationError(std::string(what) + ": mask shape does not match d_q x d_k");
    }
}

}  // namespace

Matrix scaled_dot_product_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (k.rows() != v.rows()) throw ValidationError("attention: key and value counts differ");
    return softmax_rows(scaled_logits(q, k)) * v;
}

Matrix guided_cross_weights(const Matrix& q, const Matrix& k, const CrossMasks& masks, double alpha,
                            const Vector& g) {
    if (!(alpha >= 0.0)) throw ValidationError("guided cross attention: alpha must be >= 0");
    Matrix logits = scaled_logits(q, k);
    check_mask(masks.boost, logits, "guided cross attention");
    check_mask(masks.keep, logits, "guided cross attention");
    if (g.size() != logits.rows()) throw ValidationError("guided cross attention: one g value per query needed");
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
            if (!masks.keep(i, j)) logits(i, j) = kNegInf;
    Matrix w = softmax_rows(logits);
    if (alpha != 0.0) {
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                if (masks.boost(i, j)) w(i, j) += alpha * g(i);
    }
    return w;
}

Matrix guided_cross_attention(const Matrix& q, const Matrix& k, const Matrix& v, const CrossMasks& masks,
                              double alpha, const Vector& g) {
    if (k.rows() != v.rows()) throw ValidationError("attention: key and value counts differ");
    return guided_cross_weights(q, k, masks, alpha, g) * v;
}

Matrix guided_self_weights(const Matrix& q, const Matrix& k, const AttentionMask& mask, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("guided self attention: beta must be in [0, 1]");
    Matrix logits = scaled_logits(q, k);
    check_mask(mask, logits, "guided self attention");
    if (beta != 1.0) {
        for (Eigen::Index i = 0; i < logits.rows(); ++i)
            for (Eigen::Index j = 0; j < logits.cols(); ++j)
                if (!mask(i, j)) logits(i, j) *= beta;
    }
    return softmax_rows(logits);
}

Matrix guided_self_attention(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionMask& mask,
                             double beta) {
    if (k.rows() != v.rows()) throw ValidationError("attention: key and value counts differ");
    return guided_self_weights(q, k, mask, beta) * v;
}

bool should_edit(std::size_t t, std::size_t total, std::size_t edit_steps) {
    return t <= total && t + edit_steps >= total;
}

Matrix redistribute_isolated_attention(const Matrix& weights, const std::vector<std::vector<std::size_t>>& groups,
                                       double lambda, double threshold) {
    if (!(lambda >= 0.0 && lambda < 1.0)) throw ValidationError("redistribution: lambda must be in [0, 1)");
    if (weights.rows() != weights.cols()) throw ValidationError("redistribution: weights must be square");
    const auto n = static_cast<std::size_t>(weights.rows());
    std::vector<long> group_of(n, -1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (auto f : groups[g]) {
            if (f >= n || group_of[f] != -1) throw ValidationError("redistribution: groups are not a partition");
            group_of[f] = static_cast<long>(g);
        }
    }
    for (auto v : group_of)
        if (v == -1) throw ValidationError("redistribution: groups do not cover every frame");
    if (lambda == 0.0) return weights;
    if (groups.size() <= 1) {
        std::cerr << "warning: attention redistribution skipped, a single group has no out-of-group frames\n";
        return weights;
    }

    Matrix out = weights;
    for (std::size_t r = 0; r < n; ++r) {
        const auto& group = groups[static_cast<std::size_t>(group_of[r])];
        double in_mass = 0.0;
        for (auto c : group) in_mass += weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (in_mass <= threshold) continue;
        const double moved = lambda * in_mass;
        const double share = moved / static_cast<double>(n - group.size());
        for (std::size_t c = 0; c < n; ++c) {
            auto& w = out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            w = group_of[c] == group_of[r] ? w * (1.0 - lambda) : w + share;
        }
    }
    return out;
}

}  // namespace freetraj
