#include "freetraj/noise_guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "freetraj/errors.hpp"
#include "freetraj/fft.hpp"

namespace freetraj {

LatentTensor sample_gaussian(const Shape4& shape, Seed seed) {
    validate_shape(shape);
    LatentTensor out(shape);
    const CounterRng rng(seed);
    auto data = out.data();
    for (std::size_t k = 0; k < data.size(); ++k) data[k] = static_cast<float>(rng.normal(k));
    return out;
}

LatentTensor noise_flow(const LatentTensor& first_frame, std::size_t frames, std::size_t stride,
                        FlowDirection direction) {
    const auto& s = first_frame.shape();
    if (s.frames != 1) throw ValidationError("noise_flow expects a single input frame");
    if (frames == 0) throw ValidationError("noise_flow needs at least one output frame");
    const std::size_t H = s.height;
    const std::size_t W = s.width;
    LatentTensor out(Shape4{s.channels, frames, H, W});
    for (std::size_t c = 0; c < s.channels; ++c) {
        auto src = first_frame.plane(c, 0);
        for (std::size_t f = 0; f < frames; ++f) {
            // Unrolling the per-frame recurrence: frame f reads frame 0 at an
            // offset of f * stride on each axis.
            const std::size_t dr = (f * stride) % H;
            const std::size_t dc = (f * stride) % W;
            auto dst = out.plane(c, f);
            for (std::size_t i = 0; i < H; ++i) {
                const std::size_t si = direction == FlowDirection::down_right ? (i + H - dr) % H : (i + dr) % H;
                for (std::size_t j = 0; j < W; ++j) {
                    const std::size_t sj = (j + W - dc) % W;
                    dst[i * W + j] = src[si * W + sj];
                }
            }
        }
    }
    return out;
}

namespace {

double signed_freq(std::size_t k, std::size_t n) {
    const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    return kk / static_cast<double>(n);
}

}  // namespace

double normalized_radius2(std::size_t kf, std::size_t ki, std::size_t kj, std::size_t frames, std::size_t height,
                          std::size_t width) {
    // For even n the Nyquist bin k = n/2 maps to +1/2 and is its own mirror.
    const double a = std::abs(signed_freq(kf, frames));
    const double b = std::abs(signed_freq(ki, height));
    const double c = std::abs(signed_freq(kj, width));
    return a * a + b * b + c * c;
}

LowPassFilter build_lpf(std::size_t frames, std::size_t height, std::size_t width, double keep_fraction,
                        FilterKind kind) {
    if (frames == 0 || height == 0 || width == 0) throw ValidationError("filter shape has a zero dimension");
    if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
        throw ValidationError("keep_fraction must be in [0, 1]");
    }
    LowPassFilter lpf{frames, height, width, kind, {}, 0.0};
    const std::size_t n = frames * height * width;
    std::vector<double> r2(n);
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t i = 0; i < height; ++i)
            for (std::size_t j = 0; j < width; ++j)
                r2[(f * height + i) * width + j] = normalized_radius2(f, i, j, frames, height, width);

    const auto wanted = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9));
    if (wanted == 0) {
        lpf.values.assign(n, 0.0);
        return lpf;
    }
    if (wanted >= n) {
        lpf.values.assign(n, 1.0);
        lpf.keep_fraction = 1.0;
        return lpf;
    }
    std::vector<double> sorted = r2;
    std::sort(sorted.begin(), sorted.end());
    const double cutoff = sorted[wanted - 1];
    const auto next = std::upper_bound(sorted.begin(), sorted.end(), cutoff);

    lpf.values.resize(n);
    if (kind == FilterKind::ideal || next == sorted.end()) {
        for (std::size_t k = 0; k < n; ++k) lpf.values[k] = r2[k] <= cutoff ? 1.0 : 0.0;
    } else {
        // exp(-r2 / (2 s2)) = 1/2 at r2 = 2 s2 ln 2, placed midway to the next shell.
        const double half_r2 = 0.5 * (cutoff + *next);
        const double two_sigma2 = half_r2 / std::log(2.0);
        for (std::size_t k = 0; k < n; ++k) lpf.values[k] = std::exp(-r2[k] / two_sigma2);
    }
    const auto kept = std::count_if(lpf.values.begin(), lpf.values.end(), [](double v) { return v > 0.5; });
    lpf.keep_fraction = static_cast<double>(kept) / static_cast<double>(n);
    return lpf;
}

bool is_symmetric(const LowPassFilter& lpf) {
    for (std::size_t f = 0; f < lpf.frames; ++f) {
        const std::size_t nf = (lpf.frames - f) % lpf.frames;
        for (std::size_t i = 0; i < lpf.height; ++i) {
            const std::size_t ni = (lpf.height - i) % lpf.height;
            for (std::size_t j = 0; j < lpf.width; ++j) {
                const std::size_t nj = (lpf.width - j) % lpf.width;
                if (lpf.at(f, i, j) != lpf.at(nf, ni, nj)) return false;
            }
        }
    }
    return true;
}

LatentTensor resample_high_freq(const LatentTensor& z, const LatentTensor& eta, const LowPassFilter& filter) {
    const auto& s = z.shape();
    if (eta.shape() != s) throw ValidationError("resample_high_freq: z and eta shapes differ");
    if (filter.frames != s.frames || filter.height != s.height || filter.width != s.width ||
        filter.values.size() != s.frames * s.height * s.width) {
        throw ValidationError("resample_high_freq: filter shape does not match the latent");
    }
    Spectrum low = forward_spectrum(z);
    const Spectrum high = forward_spectrum(eta);
    const std::size_t n = filter.values.size();
    for (std::size_t c = 0; c < s.channels; ++c) {
        auto lo = low.channel(c);
        auto hi = high.channel(c);
        for (std::size_t k = 0; k < n; ++k) {
            const double h = filter.values[k];
            lo[k] = lo[k] * h + hi[k] * (1.0 - h);
        }
    }
    return inverse_spectrum(low, 1e-5);
}

std::pair<std::size_t, std::size_t> max_box_extent(const FrameMaskStack& masks) {
    std::size_t rows = 0, cols = 0;
    for (const auto& m : masks.masks) {
        if (auto r = m.bounds()) {
            rows = std::max(rows, r->rows);
            cols = std::max(cols, r->cols);
        }
    }
    return {rows, cols};
}

LatentTensor inject_trajectory(const LatentTensor& frame_noises, const LatentTensor& local_noise,
                               const FrameMaskStack& masks) {
    const auto& s = frame_noises.shape();
    const auto& ls = local_noise.shape();
    if (masks.frames() != s.frames || masks.height != s.height || masks.width != s.width) {
        throw ValidationError("inject_trajectory: masks do not match the latent frames/resolution");
    }
    if (ls.channels != s.channels || ls.frames != 1) {
        throw ValidationError("inject_trajectory: local noise must be a single frame with matching channels");
    }
    LatentTensor out = frame_noises;
    for (std::size_t f = 0; f < s.frames; ++f) {
        const auto& mask = masks.masks[f];
        const auto rect = mask.bounds();
        if (!rect) continue;
        if (rect->rows > ls.height || rect->cols > ls.width) {
            throw ValidationError("inject_trajectory: box at frame " + std::to_string(f) +
                                  " is larger than the local noise");
        }
        for (std::size_t i = rect->top; i < rect->top + rect->rows; ++i) {
            for (std::size_t j = rect->left; j < rect->left + rect->cols; ++j) {
                if (!mask.at(i, j)) continue;
                const auto [li, lj] = local_coords(*rect, i, j);
                for (std::size_t c = 0; c < s.channels; ++c) out(c, f, i, j) = local_noise(c, 0, li, lj);
            }
        }
    }
    return out;
}

std::vector<std::size_t> reschedule_mapping(std::size_t base_frames, std::size_t total_frames, Seed seed) {
    if (base_frames == 0) throw ValidationError("reschedule: empty base block");
    if (total_frames < base_frames) {
        throw ValidationError("reschedule: total_frames (" + std::to_string(total_frames) +
                              ") is smaller than the base block (" + std::to_string(base_frames) + ")");
    }
    std::vector<std::size_t> map(total_frames);
    std::iota(map.begin(), map.begin() + static_cast<std::ptrdiff_t>(base_frames), std::size_t{0});
    for (std::size_t block = 1; block * base_frames < total_frames; ++block) {
        const auto perm = seeded_permutation(base_frames, derive_seed(seed, block));
        for (std::size_t k = 0; k < base_frames && block * base_frames + k < total_frames; ++k) {
            map[block * base_frames + k] = perm[k];
        }
    }
    return map;
}

LatentTensor reschedule_noise(const LatentTensor& base, std::size_t total_frames, Seed seed) {
    const auto& s = base.shape();
    const auto map = reschedule_mapping(s.frames, total_frames, seed);
    LatentTensor out(Shape4{s.channels, total_frames, s.height, s.width});
    for (std::size_t f = 0; f < total_frames; ++f) out.copy_frame_from(base, map[f], f);
    return out;
}

namespace {

void validate_spans(std::size_t frames, const std::vector<RepeatSpan>& spans) {
    std::vector<RepeatSpan> sorted = spans;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const auto& sp = sorted[k];
        if (sp.length == 0 || sp.start + sp.length > frames) {
            throw ValidationError("repeat span [" + std::to_string(sp.start) + ", +" + std::to_string(sp.length) +
                                  ") is outside [0, " + std::to_string(frames) + ")");
        }
        if (sp.source < sp.start || sp.source >= sp.start + sp.length) {
            throw ValidationError("repeat span source frame must lie inside the span");
        }
        if (k > 0 && sorted[k - 1].start + sorted[k - 1].length > sp.start) {
            throw ValidationError("repeat spans overlap");
        }
    }
}

}  // namespace

LatentTensor partial_repeat_sample(const Shape4& shape, const std::vector<RepeatSpan>& spans, Seed seed) {
    validate_spans(shape.frames, spans);
    LatentTensor out = sample_gaussian(shape, seed);
    for (const auto& sp : spans) {
        for (std::size_t f = sp.start; f < sp.start + sp.length; ++f) {
            if (f != sp.source) out.copy_frame_from(out, sp.source, f);
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> frame_groups(std::size_t frames, const std::vector<RepeatSpan>& spans) {
    validate_spans(frames, spans);
    std::vector<std::vector<std::size_t>> groups;
    std::vector<RepeatSpan> sorted = spans;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    std::size_t next_span = 0;
    for (std::size_t f = 0; f < frames;) {
        if (next_span < sorted.size() && sorted[next_span].start == f) {
            std::vector<std::size_t> g(sorted[next_span].length);
            std::iota(g.begin(), g.end(), f);
            f += sorted[next_span].length;
            ++next_span;
            groups.push_back(std::move(g));
        } else {
            groups.push_back({f});
            ++f;
        }
    }
    return groups;
}

double adjacent_frame_low_band_similarity(const LatentTensor& t, double band_radius) {
    const auto& s = t.shape();
    if (s.frames < 2) throw ValidationError("similarity needs at least two frames");
    const std::size_t H = s.height;
    const std::size_t W = s.width;
    std::vector<std::size_t> band;
    for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
            const double r2 = normalized_radius2(0, i, j, 1, H, W);
            if (r2 > 0.0 && r2 <= band_radius * band_radius) band.push_back(i * W + j);
        }
    }
    if (band.size() < 2) throw ValidationError("low band holds fewer than two bins");

    auto magnitudes = [&](std::size_t c, std::size_t f) {
        auto p = t.plane(c, f);
        std::vector<Complex> buf(p.begin(), p.end());
        fft2d_inplace(buf, H, W, FftDirection::forward);
        std::vector<double> mag(band.size());
        for (std::size_t k = 0; k < band.size(); ++k) mag[k] = std::abs(buf[band[k]]);
        return mag;
    };
    auto pearson = [](const std::vector<double>& a, const std::vector<double>& b) {
        const double n = static_cast<double>(a.size());
        const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
        const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            sab += (a[k] - ma) * (b[k] - mb);
            saa += (a[k] - ma) * (a[k] - ma);
            sbb += (b[k] - mb) * (b[k] - mb);
        }
        if (saa <= 0.0 || sbb <= 0.0) return 0.0;
        return sab / std::sqrt(saa * sbb);
    };

    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t c = 0; c < s.channels; ++c) {
        auto prev = magnitudes(c, 0);
        for (std::size_t f = 1; f < s.frames; ++f) {
            auto cur = magnitudes(c, f);
            total += pearson(prev, cur);
            ++pairs;
            prev = std::move(cur);
        }
    }
    return total / static_cast<double>(pairs);
}

NoisePipelineResult build_initial_noise(const NoisePipelineConfig& config, const FrameMaskStack* masks,
                                        const NoiseSeeds& seeds) {
    const Shape4& shape = config.shape;
    validate_shape(shape);
    NoisePipelineResult result;

    if (config.reschedule_block) {
        const std::size_t block = *config.reschedule_block;
        if (block == 0 || block > shape.frames) {
            throw ValidationError("reschedule block must be in [1, frames]");
        }
        const Shape4 base_shape{shape.channels, block, shape.height, shape.width};
        const LatentTensor base = config.repeat_spans.empty()
                                      ? sample_gaussian(base_shape, seeds.frames)
                                      : partial_repeat_sample(base_shape, config.repeat_spans, seeds.frames);
        result.stages.emplace_back("sample");
        result.noise = reschedule_noise(base, shape.frames, seeds.shuffle);
        result.stages.emplace_back("reschedule");
    } else {
        result.noise = config.repeat_spans.empty() ? sample_gaussian(shape, seeds.frames)
                                                   : partial_repeat_sample(shape, config.repeat_spans, seeds.frames);
        result.stages.emplace_back("sample");
    }

    if (config.inject) {
        if (masks == nullptr) throw ValidationError("trajectory injection requested without masks");
        const auto [rows, cols] = max_box_extent(*masks);
        if (rows > 0 && cols > 0) {
            const LatentTensor local = sample_gaussian(Shape4{shape.channels, 1, rows, cols}, seeds.local);
            result.noise = inject_trajectory(result.noise, local, *masks);
        }
        result.stages.emplace_back("inject");
    }

    // An all-pass filter is the identity; skipping it keeps the output exact.
    if (config.keep_fraction < 1.0) {
        const LatentTensor eta = sample_gaussian(shape, seeds.eta);
        const auto lpf = build_lpf(shape.frames, shape.height, shape.width, config.keep_fraction, config.filter);
        result.noise = resample_high_freq(result.noise, eta, lpf);
        result.stages.emplace_back("resample");
    }
    return result;
}

FlowDemoResult flow_demo(const FlowDemoSettings& st, Seed seed) {
    validate_shape(st.shape);
    if (st.trials == 0) throw ValidationError("flow demo needs at least one trial");
    if (!(st.band_radius > 0.0)) throw ValidationError("band radius must be > 0");
    const LowPassFilter lpf = build_lpf(st.shape.frames, st.shape.height, st.shape.width, st.keep_fraction, st.filter);
    const Shape4 frame_shape{st.shape.channels, 1, st.shape.height, st.shape.width};
    FlowDemoResult out;
    for (std::size_t k = 0; k < st.trials; ++k) {
        const Seed trial = derive_seed(seed, k);
        const LatentTensor flowed =
            noise_flow(sample_gaussian(frame_shape, derive_seed(trial, "frame")), st.shape.frames, st.stride, st.direction);
        LatentTensor z = st.keep_fraction >= 1.0
                             ? flowed
                             : resample_high_freq(flowed, sample_gaussian(st.shape, derive_seed(trial, "eta")), lpf);
        out.trial_similarity.push_back(adjacent_frame_low_band_similarity(z, st.band_radius));
        if (k == 0) out.noise = std::move(z);
    }
    double sum = 0.0;
    for (double v : out.trial_similarity) sum += v;
    out.mean_similarity = sum / static_cast<double>(st.trials);
    return out;
}

}  // namespace freetraj
