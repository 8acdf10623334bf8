#include "freetraj/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "freetraj/errors.hpp"

namespace freetraj {

void validate_box(const BBox& b) {
    const bool finite = std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) && std::isfinite(b.y1);
    if (!finite || b.x0 < 0.0 || b.y0 < 0.0 || b.x1 > 1.0 || b.y1 > 1.0 || !(b.x0 < b.x1) || !(b.y0 < b.y1)) {
        throw ValidationError("invalid box [" + std::to_string(b.x0) + ", " + std::to_string(b.y0) + ", " +
                              std::to_string(b.x1) + ", " + std::to_string(b.y1) +
                              "]: need 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1");
    }
}

void validate_trajectory(const TrajectorySpec& spec) {
    if (spec.frames == 0) throw ValidationError("trajectory needs at least one frame");
    if (spec.keyframes.empty()) throw ValidationError("trajectory needs at least one keyframe");
    if (spec.keyframes.front().frame != 0) throw ValidationError("first keyframe must be frame 0");
    if (spec.keyframes.back().frame != spec.frames - 1) {
        throw ValidationError("last keyframe must be frame " + std::to_string(spec.frames - 1));
    }
    for (std::size_t k = 0; k < spec.keyframes.size(); ++k) {
        validate_box(spec.keyframes[k].box);
        if (k > 0 && spec.keyframes[k].frame <= spec.keyframes[k - 1].frame) {
            throw ValidationError("keyframe frame indices must strictly increase (keyframe " + std::to_string(k) +
                                  ")");
        }
    }
}

std::vector<BBox> interpolate_boxes(const TrajectorySpec& spec) {
    validate_trajectory(spec);
    std::vector<BBox> boxes(spec.frames);
    const auto& keys = spec.keyframes;
    if (keys.size() == 1) {
        boxes[0] = keys[0].box;
        return boxes;
    }
    for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
        const auto& a = keys[k];
        const auto& b = keys[k + 1];
        const double span = static_cast<double>(b.frame - a.frame);
        for (std::size_t f = a.frame; f <= b.frame; ++f) {
            const double u = static_cast<double>(f - a.frame) / span;
            auto lerp = [u](double p, double q) { return p + (q - p) * u; };
            boxes[f] = BBox{lerp(a.box.x0, b.box.x0), lerp(a.box.y0, b.box.y0), lerp(a.box.x1, b.box.x1),
                            lerp(a.box.y1, b.box.y1)};
        }
        boxes[a.frame] = a.box;
        boxes[b.frame] = b.box;
    }
    return boxes;
}

TrajectorySpec retime_trajectory(const TrajectorySpec& spec, std::size_t frames) {
    validate_trajectory(spec);
    if (frames == 0) throw ValidationError("cannot retime a trajectory to zero frames");
    if (frames == spec.frames) return spec;
    TrajectorySpec out{frames, {}};
    if (frames == 1) {
        out.keyframes.push_back({0, spec.keyframes.front().box});
        return out;
    }
    if (spec.frames == 1) {
        out.keyframes.push_back({0, spec.keyframes.front().box});
        out.keyframes.push_back({frames - 1, spec.keyframes.front().box});
        return out;
    }
    const double scale = static_cast<double>(frames - 1) / static_cast<double>(spec.frames - 1);
    for (const auto& key : spec.keyframes) {
        const auto frame = static_cast<std::size_t>(std::lround(static_cast<double>(key.frame) * scale));
        if (!out.keyframes.empty() && frame <= out.keyframes.back().frame) continue;
        out.keyframes.push_back({frame, key.box});
    }
    // Rounding can only merge interior keyframes; the endpoints map exactly.
    out.keyframes.back().frame = frames - 1;
    validate_trajectory(out);
    return out;
}

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), cells_(height * width, fill ? 1 : 0) {
    if (height == 0 || width == 0) throw ValidationError("mask lattice must be at least 1x1");
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

std::optional<CellRect> BinaryMask::bounds() const {
    std::size_t top = height_, bottom = 0, left = width_, right = 0;
    bool any = false;
    for (std::size_t i = 0; i < height_; ++i) {
        for (std::size_t j = 0; j < width_; ++j) {
            if (!at(i, j)) continue;
            any = true;
            top = std::min(top, i);
            bottom = std::max(bottom, i);
            left = std::min(left, j);
            right = std::max(right, j);
        }
    }
    if (!any) return std::nullopt;
    return CellRect{top, left, bottom - top + 1, right - left + 1};
}

BinaryMask rasterize_box(const BBox& box, std::size_t height, std::size_t width) {
    validate_box(box);
    BinaryMask mask(height, width);
    for (std::size_t i = 0; i < height; ++i) {
        const double cy = (static_cast<double>(i) + 0.5) / static_cast<double>(height);
        if (cy < box.y0 || cy > box.y1) continue;
        for (std::size_t j = 0; j < width; ++j) {
            const double cx = (static_cast<double>(j) + 0.5) / static_cast<double>(width);
            if (cx >= box.x0 && cx <= box.x1) mask.set(i, j, 1);
        }
    }
    return mask;
}

FrameMaskStack rasterize_masks(std::span<const BBox> boxes, std::size_t height, std::size_t width) {
    FrameMaskStack stack{height, width, {}};
    stack.masks.reserve(boxes.size());
    for (const auto& b : boxes) stack.masks.push_back(rasterize_box(b, height, width));
    return stack;
}

BinaryMask rescale_mask(const BinaryMask& mask, std::size_t height, std::size_t width) {
    const std::size_t h = mask.height();
    const std::size_t w = mask.width();
    BinaryMask out(height, width);
    // Source row r overlaps output row i iff r*height < (i+1)*h and (r+1)*height > i*h.
    for (std::size_t i = 0; i < height; ++i) {
        const std::size_t r_lo = (i * h) / height;
        const std::size_t r_hi = std::min(h, ((i + 1) * h + height - 1) / height);
        for (std::size_t j = 0; j < width; ++j) {
            const std::size_t c_lo = (j * w) / width;
            const std::size_t c_hi = std::min(w, ((j + 1) * w + width - 1) / width);
            bool hit = false;
            for (std::size_t r = r_lo; r < r_hi && !hit; ++r) {
                for (std::size_t c = c_lo; c < c_hi; ++c) {
                    if (mask.at(r, c)) {
                        hit = true;
                        break;
                    }
                }
            }
            if (hit) out.set(i, j, 1);
        }
    }
    return out;
}

FrameMaskStack rescale_masks(const FrameMaskStack& stack, std::size_t height, std::size_t width) {
    FrameMaskStack out{height, width, {}};
    out.masks.reserve(stack.masks.size());
    for (const auto& m : stack.masks) out.masks.push_back(rescale_mask(m, height, width));
    return out;
}

std::pair<std::size_t, std::size_t> local_coords(const CellRect& rect, std::size_t i, std::size_t j) {
    if (!rect.contains(i, j)) {
        throw DomainError("cell (" + std::to_string(i) + ", " + std::to_string(j) + ") is outside the box");
    }
    return {i - rect.top, j - rect.left};
}

}  // namespace freetraj
