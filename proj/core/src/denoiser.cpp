#include "freetraj/denoiser.hpp"

#include <cmath>
#include <string>

#include "freetraj/errors.hpp"
#include "freetraj/parallel.hpp"

namespace freetraj {

namespace {

/// Per-frame token features, each (H*W) x D.
struct Features {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Matrix> frames;

    [[nodiscard]] std::size_t pixels() const { return height * width; }
};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Seed seed, double scale) {
    const CounterRng rng(seed);
    Matrix m(rows, cols);
    std::uint64_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal(k++);
    return m;
}

Matrix silu(const Matrix& x) {
    return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Matrix layer_norm(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).sum() / n;
        const double var = (x.row(r).array() - mean).square().sum() / n;
        out.row(r) = (x.row(r).array() - mean) / std::sqrt(var + 1e-5);
    }
    return out;
}

/// Group normalization over one frame: channels split into `groups`
/// contiguous groups, each standardized over all pixels and its channels.
Matrix group_norm(const Matrix& x, std::size_t groups) {
    Matrix out(x.rows(), x.cols());
    const auto per = x.cols() / static_cast<Eigen::Index>(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        const auto cols = x.middleCols(static_cast<Eigen::Index>(g) * per, per);
        const double n = static_cast<double>(cols.size());
        const double mean = cols.sum() / n;
        const double var = (cols.array() - mean).square().sum() / n;
        out.middleCols(static_cast<Eigen::Index>(g) * per, per) = (cols.array() - mean) / std::sqrt(var + 1e-5);
    }
    return out;
}

/// Rows of `x` (an H x W lattice) shifted by (di, dj) with zero padding:
/// out[i, j] = x[i + di, j + dj].
Matrix shifted(const Matrix& x, std::size_t height, std::size_t width, int di, int dj) {
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    const auto H = static_cast<int>(height);
    const auto W = static_cast<int>(width);
    for (int i = 0; i < H; ++i) {
        const int si = i + di;
        if (si < 0 || si >= H) continue;
        for (int j = 0; j < W; ++j) {
            const int sj = j + dj;
            if (sj < 0 || sj >= W) continue;
            out.row(i * W + j) = x.row(si * W + sj);
        }
    }
    return out;
}

Features pool2x2(const Features& in) {
    Features out{in.height / 2, in.width / 2, {}};
    out.frames.resize(in.frames.size());
    const Eigen::Index dim = in.frames.front().cols();
    for (std::size_t f = 0; f < in.frames.size(); ++f) {
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(out.pixels()), dim);
        for (std::size_t i = 0; i < out.height; ++i)
            for (std::size_t j = 0; j < out.width; ++j) {
                const auto dst = static_cast<Eigen::Index>(i * out.width + j);
                for (std::size_t a = 0; a < 2; ++a)
                    for (std::size_t b = 0; b < 2; ++b)
                        m.row(dst) += 0.25 * in.frames[f].row(static_cast<Eigen::Index>((2 * i + a) * in.width + 2 * j + b));
            }
        out.frames[f] = std::move(m);
    }
    return out;
}

void add_upsampled(Features& dst, const Features& coarse) {
    for (std::size_t f = 0; f < dst.frames.size(); ++f)
        for (std::size_t i = 0; i < dst.height; ++i)
            for (std::size_t j = 0; j < dst.width; ++j)
                dst.frames[f].row(static_cast<Eigen::Index>(i * dst.width + j)) +=
                    coarse.frames[f].row(static_cast<Eigen::Index>((i / 2) * coarse.width + j / 2));
}

Matrix head_cols(const Matrix& m, std::size_t head, std::size_t head_dim) {
    return m.middleCols(static_cast<Eigen::Index>(head * head_dim), static_cast<Eigen::Index>(head_dim));
}

/// Guidance data rescaled to one level's lattice.
struct LevelGuidance {
    FrameMaskStack masks;
    std::vector<double> alpha;
    std::vector<Vector> g;
};

}  // namespace

void validate_model(const ModelConfig& c, const Shape4& latent) {
    validate_shape(latent);
    if (c.channels != latent.channels) throw ValidationError("model channels do not match the latent channels");
    if (c.hidden == 0 || c.heads == 0 || c.hidden % c.heads != 0) {
        throw ValidationError("model hidden size must be a positive multiple of the head count");
    }
    if (c.text_dim == 0) throw ValidationError("text_dim must be positive");
    if (c.norm_groups == 0 || c.hidden % c.norm_groups != 0) {
        throw ValidationError("model hidden size must be a positive multiple of norm_groups");
    }
    if (c.levels == 0 || c.first_attention_level >= c.levels) {
        throw ValidationError("model needs at least one level carrying attention");
    }
    const std::size_t div = std::size_t{1} << (c.levels - 1);
    if (latent.height % div != 0 || latent.width % div != 0) {
        throw ValidationError("latent height/width must be divisible by 2^(levels-1) = " + std::to_string(div));
    }
}

ToyDenoiser::ToyDenoiser(ModelConfig config, const DiffusionSchedule& schedule, Seed seed)
    : config_(config), alpha_bars_(schedule.alpha_bars()) {
    if (config_.hidden == 0 || config_.heads == 0 || config_.hidden % config_.heads != 0 || config_.levels == 0) {
        throw ValidationError("invalid model configuration");
    }
    const auto C = static_cast<Eigen::Index>(config_.channels);
    const auto D = static_cast<Eigen::Index>(config_.hidden);
    const auto E = static_cast<Eigen::Index>(config_.text_dim);
    const double inv_d = 1.0 / std::sqrt(static_cast<double>(D));
    in_proj_ = random_matrix(C, D, derive_seed(seed, "in_proj"), 1.0 / std::sqrt(static_cast<double>(C)));
    time_proj_ = random_matrix(D, D, derive_seed(seed, "time_proj"), inv_d);
    out_proj_ = random_matrix(D, C, derive_seed(seed, "out_proj"), inv_d);

    for (std::size_t l = 0; l < config_.levels; ++l) {
        const Seed ls = derive_seed(seed, 1000 + l);
        Block b;
        const double conv_scale = 0.5 / std::sqrt(9.0 * static_cast<double>(D));
        for (std::uint64_t k = 0; k < 9; ++k) b.conv.push_back(random_matrix(D, D, derive_seed(ls, 10 + k), conv_scale));
        const double tconv_scale = 0.5 / std::sqrt(3.0 * static_cast<double>(D));
        for (std::uint64_t k = 0; k < 3; ++k)
            b.tconv.push_back(random_matrix(D, D, derive_seed(ls, 20 + k), tconv_scale));
        auto attn = [&](std::uint64_t base, Eigen::Index kv_in) {
            const double kv_scale = 1.0 / std::sqrt(static_cast<double>(kv_in));
            return AttentionWeights{random_matrix(D, D, derive_seed(ls, base), config_.qk_gain * inv_d),
                                    random_matrix(kv_in, D, derive_seed(ls, base + 1), config_.qk_gain * kv_scale),
                                    random_matrix(kv_in, D, derive_seed(ls, base + 2), kv_scale),
                                    random_matrix(D, D, derive_seed(ls, base + 3), inv_d)};
        };
        b.spatial = attn(30, D);
        b.cross = attn(40, E);
        b.temporal = attn(50, D);
        blocks_.push_back(std::move(b));
    }
}

Matrix ToyDenoiser::embed_prompt(std::size_t tokens, Seed seed) const {
    if (tokens == 0) throw ValidationError("prompt needs at least one token");
    return random_matrix(static_cast<Eigen::Index>(tokens), static_cast<Eigen::Index>(config_.text_dim), seed, 1.0);
}

LatentTensor ToyDenoiser::forward(const LatentTensor& z_t, std::size_t t, const Matrix& text,
                                  const ForwardOptions& options) const {
    const Shape4& s = z_t.shape();
    validate_model(config_, s);
    if (t >= alpha_bars_.size()) throw ValidationError("denoiser: timestep out of range");
    if (text.cols() != static_cast<Eigen::Index>(config_.text_dim) || text.rows() == 0) {
        throw ValidationError("denoiser: text embedding must be n_tokens x text_dim");
    }
    const GuidanceHooks* hooks = options.hooks;
    AttentionProbe* probe = options.probe;
    const bool editing = hooks != nullptr && hooks->editing();
    if (hooks != nullptr) {
        if (hooks->tokens.size() != static_cast<std::size_t>(text.rows())) {
            throw ValidationError("guidance token flags do not match the prompt length");
        }
        if (hooks->masks.frames() != s.frames || hooks->boxes.size() != s.frames ||
            hooks->masks.height != s.height || hooks->masks.width != s.width) {
            throw ValidationError("guidance masks/boxes do not match the latent");
        }
        if (hooks->config.suppress && hooks->tokens.fg_count() == hooks->tokens.size()) {
            throw ValidationError("suppression needs at least one background token in the prompt");
        }
    }
    if (probe != nullptr && (probe->masks.frames() != s.frames || probe->tokens.size() != static_cast<std::size_t>(text.rows()))) {
        throw ValidationError("probe masks/tokens do not match the inputs");
    }
    if (editing && probe != nullptr) ++probe->edited_passes;

    const std::size_t F = s.frames;
    const std::size_t D = config_.hidden;
    const std::size_t heads = config_.heads;
    const std::size_t head_dim = D / heads;

    // Sinusoidal timestep embedding.
    Eigen::RowVectorXd temb(static_cast<Eigen::Index>(D));
    for (std::size_t k = 0; k < D / 2; ++k) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(D / 2));
        temb(static_cast<Eigen::Index>(k)) = std::sin(static_cast<double>(t) * freq);
        temb(static_cast<Eigen::Index>(k + D / 2)) = std::cos(static_cast<double>(t) * freq);
    }
    const Eigen::RowVectorXd tbias = temb * time_proj_;

    Features h0{s.height, s.width, std::vector<Matrix>(F)};
    parallel_for(0, F, [&](std::size_t f) {
        Matrix px(static_cast<Eigen::Index>(s.frame_size()), static_cast<Eigen::Index>(s.channels));
        for (std::size_t c = 0; c < s.channels; ++c) {
            auto p = z_t.plane(c, f);
            for (std::size_t k = 0; k < p.size(); ++k) px(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = p[k];
        }
        Matrix m = px * in_proj_;
        m.rowwise() += tbias;
        h0.frames[f] = std::move(m);
    });

    const std::optional<std::vector<std::size_t>> window_starts =
        options.windows ? std::optional(plan_windows(F, options.windows->window, options.windows->stride))
                        : std::nullopt;
    const std::size_t window_len = options.windows ? std::min(options.windows->window, F) : F;

    auto run_block = [&](const Block& blk, Features x, std::size_t level) {
        const std::size_t P = x.pixels();
        // Conv and temporal conv, pre-activation residual.
        {
            Features act{x.height, x.width, std::vector<Matrix>(F)};
            parallel_for(0, F, [&](std::size_t f) { act.frames[f] = silu(x.frames[f]); });
            parallel_for(0, F, [&](std::size_t f) {
                Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(D));
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj)
                        acc += shifted(act.frames[f], x.height, x.width, di, dj) *
                               blk.conv[static_cast<std::size_t>((di + 1) * 3 + (dj + 1))];
                x.frames[f] += acc;
            });
            parallel_for(0, F, [&](std::size_t f) { act.frames[f] = silu(x.frames[f]); });
            std::vector<Matrix> tout(F);
            parallel_for(0, F, [&](std::size_t f) {
                Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(D));
                for (int k = -1; k <= 1; ++k) {
                    const long src = static_cast<long>(f) + k;
                    if (src < 0 || src >= static_cast<long>(F)) continue;
                    acc += act.frames[static_cast<std::size_t>(src)] * blk.tconv[static_cast<std::size_t>(k + 1)];
                }
                tout[f] = std::move(acc);
            });
            for (std::size_t f = 0; f < F; ++f) x.frames[f] += tout[f];
        }
        if (level < config_.first_attention_level) return x;

        LevelGuidance lg;
        if (hooks != nullptr && editing) {
            lg.masks = rescale_masks(hooks->masks, x.height, x.width);
            for (std::size_t f = 0; f < F; ++f) {
                lg.alpha.push_back(default_alpha(hooks->config.alpha_scale, hooks->tokens.fg_count(),
                                                 hooks->boxes[f].area()));
                lg.g.push_back(gaussian_weight_map(x.height, x.width, hooks->boxes[f], hooks->config.sigma_scale));
            }
        }
        FrameMaskStack probe_masks;
        if (probe != nullptr) probe_masks = rescale_masks(probe->masks, x.height, x.width);

        // Spatial self-attention.
        parallel_for(0, F, [&](std::size_t f) {
            const Matrix n = layer_norm(x.frames[f]);
            const Matrix q = n * blk.spatial.q, k = n * blk.spatial.k, v = n * blk.spatial.v;
            AttentionMask m_sa;
            if (editing) m_sa = build_spatial_self_mask(lg.masks.masks[f].flat());
            Matrix cat(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(D));
            for (std::size_t hd = 0; hd < heads; ++hd) {
                const Matrix qh = head_cols(q, hd, head_dim), kh = head_cols(k, hd, head_dim),
                             vh = head_cols(v, hd, head_dim);
                cat.middleCols(static_cast<Eigen::Index>(hd * head_dim), static_cast<Eigen::Index>(head_dim)) =
                    editing ? guided_self_attention(qh, kh, vh, m_sa, hooks->config.beta)
                            : scaled_dot_product_attention(qh, kh, vh);
            }
            x.frames[f] += cat * blk.spatial.o;
        });

        // Cross-attention to the prompt.
        const Matrix kc = text * blk.cross.k;
        const Matrix vc = text * blk.cross.v;
        std::vector<double> frame_mass(F, 0.0);
        parallel_for(0, F, [&](std::size_t f) {
            const Matrix q = layer_norm(x.frames[f]) * blk.cross.q;
            CrossMasks cm;
            if (editing) cm = build_cross_masks(lg.masks.masks[f].flat(), hooks->tokens);
            Matrix cat(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(D));
            for (std::size_t hd = 0; hd < heads; ++hd) {
                const Matrix qh = head_cols(q, hd, head_dim), kh = head_cols(kc, hd, head_dim),
                             vh = head_cols(vc, hd, head_dim);
                Matrix w;
                if (editing) {
                    CrossMasks use = cm;
                    if (!hooks->config.suppress) use.keep.setOnes();
                    w = guided_cross_weights(qh, kh, use, lg.alpha[f], lg.g[f]);
                } else {
                    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
                    Matrix logits = qh * kh.transpose();
                    logits *= scale;
                    w = softmax_rows(logits);
                }
                if (probe != nullptr) {
                    const auto target = probe_masks.masks[f].flat();
                    for (Eigen::Index i = 0; i < w.rows(); ++i) {
                        if (!target[static_cast<std::size_t>(i)]) continue;
                        for (Eigen::Index j = 0; j < w.cols(); ++j)
                            if (probe->tokens.fg[static_cast<std::size_t>(j)]) frame_mass[f] += w(i, j);
                    }
                }
                cat.middleCols(static_cast<Eigen::Index>(hd * head_dim), static_cast<Eigen::Index>(head_dim)) = w * vh;
            }
            x.frames[f] += cat * blk.cross.o;
        });
        if (probe != nullptr)
            for (double m : frame_mass) probe->fg_mass_in_box += m;

        // Temporal self-attention, optionally in fused local windows.
        std::vector<Matrix> nq(F), nk(F), nv(F);
        parallel_for(0, F, [&](std::size_t f) {
            const Matrix n = layer_norm(x.frames[f]);
            nq[f] = n * blk.temporal.q;
            nk[f] = n * blk.temporal.k;
            nv[f] = n * blk.temporal.v;
        });
        const std::vector<std::size_t> starts = window_starts ? *window_starts : std::vector<std::size_t>{0};
        const auto fusion_weights = uniform_window_weights(starts.size(), window_len);
        if (editing && probe != nullptr)
            for (auto st : starts) probe->temporal_mask_windows.emplace_back(st, window_len);

        const bool repair = hooks != nullptr && !hooks->isolation_groups.empty() && hooks->config.isolation_lambda > 0.0;
        std::vector<Matrix> tout(F, Matrix(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(D)));
        parallel_for(0, P, [&](std::size_t p) {
            auto gather = [&](const std::vector<Matrix>& src, std::size_t first, std::size_t count) {
                Matrix g(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(D));
                for (std::size_t k = 0; k < count; ++k) g.row(static_cast<Eigen::Index>(k)) = src[first + k].row(static_cast<Eigen::Index>(p));
                return g;
            };
            std::vector<Matrix> outs;
            outs.reserve(starts.size());
            for (std::size_t st : starts) {
                const Matrix q = gather(nq, st, window_len), k = gather(nk, st, window_len),
                             v = gather(nv, st, window_len);
                AttentionMask m_ta;
                if (editing) m_ta = build_temporal_self_mask(lg.masks, p, st, window_len);
                std::vector<std::vector<std::size_t>> local_groups;
                if (repair) {
                    for (const auto& grp : hooks->isolation_groups) {
                        std::vector<std::size_t> lg_frames;
                        for (auto fr : grp)
                            if (fr >= st && fr < st + window_len) lg_frames.push_back(fr - st);
                        if (!lg_frames.empty()) local_groups.push_back(std::move(lg_frames));
                    }
                }
                Matrix cat(static_cast<Eigen::Index>(window_len), static_cast<Eigen::Index>(D));
                for (std::size_t hd = 0; hd < heads; ++hd) {
                    const Matrix qh = head_cols(q, hd, head_dim), kh = head_cols(k, hd, head_dim),
                                 vh = head_cols(v, hd, head_dim);
                    Matrix w;
                    if (editing) {
                        w = guided_self_weights(qh, kh, m_ta, hooks->config.beta);
                    } else {
                        const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
                        Matrix logits = qh * kh.transpose();
                        logits *= scale;
                        w = softmax_rows(logits);
                    }
                    if (repair && local_groups.size() > 1) {
                        w = redistribute_isolated_attention(w, local_groups, hooks->config.isolation_lambda,
                                                            hooks->config.isolation_threshold);
                    }
                    cat.middleCols(static_cast<Eigen::Index>(hd * head_dim), static_cast<Eigen::Index>(head_dim)) = w * vh;
                }
                outs.push_back(std::move(cat));
            }
            const Matrix fused = starts.size() == 1 ? outs.front()
                                                    : fuse_windows(outs, starts, window_len, fusion_weights, F);
            const Matrix projected = fused * blk.temporal.o;
            for (std::size_t f = 0; f < F; ++f) tout[f].row(static_cast<Eigen::Index>(p)) = projected.row(static_cast<Eigen::Index>(f));
        });
        for (std::size_t f = 0; f < F; ++f) x.frames[f] += tout[f];
        return x;
    };

    // U-shaped pass: each level's output plus the upsampled coarser result.
    std::vector<Features> outs;
    Features cur = std::move(h0);
    for (std::size_t l = 0; l < config_.levels; ++l) {
        if (l > 0) cur = pool2x2(outs.back());
        outs.push_back(run_block(blocks_[l], std::move(cur), l));
    }
    for (std::size_t l = config_.levels - 1; l > 0; --l) add_upsampled(outs[l - 1], outs[l]);
    const Features& top = outs.front();

    LatentTensor eps(s);
    const double skip = std::sqrt(1.0 - alpha_bars_[t]);
    parallel_for(0, F, [&](std::size_t f) {
        const Matrix net = silu(group_norm(top.frames[f], config_.norm_groups)) * out_proj_;
        for (std::size_t c = 0; c < s.channels; ++c) {
            auto src = z_t.plane(c, f);
            auto dst = eps.plane(c, f);
            for (std::size_t k = 0; k < dst.size(); ++k) {
                dst[k] = static_cast<float>(skip * src[k] +
                                            config_.output_scale * net(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)));
            }
        }
    });
    return eps;
}

}  // namespace freetraj
