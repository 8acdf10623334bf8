#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace freetraj {

/// Axis-aligned box in normalized frame coordinates; x runs along the width,
/// y along the height.
struct BBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 1.0;
    double y1 = 1.0;

    [[nodiscard]] double width() const { return x1 - x0; }
    [[nodiscard]] double height() const { return y1 - y0; }
    [[nodiscard]] double area() const { return width() * height(); }
    [[nodiscard]] double center_x() const { return 0.5 * (x0 + x1); }
    [[nodiscard]] double center_y() const { return 0.5 * (y0 + y1); }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Throws ValidationError unless 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1.
void validate_box(const BBox& box);

struct Keyframe {
    std::size_t frame = 0;
    BBox box;
};

struct TrajectorySpec {
    std::size_t frames = 1;
    std::vector<Keyframe> keyframes;
};

/// Keyframes must start at 0, end at frames-1 and strictly increase.
void validate_trajectory(const TrajectorySpec& spec);

/// Per-frame boxes by per-coordinate linear interpolation between keyframes.
[[nodiscard]] std::vector<BBox> interpolate_boxes(const TrajectorySpec& spec);

/// Maps keyframe times onto a different frame count, keeping their relative
/// position (k / (F-1)) and rounding to the nearest frame.
[[nodiscard]] TrajectorySpec retime_trajectory(const TrajectorySpec& spec, std::size_t frames);

/// Inclusive-exclusive cell rectangle on a lattice.
struct CellRect {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    [[nodiscard]] bool contains(std::size_t i, std::size_t j) const {
        return i >= top && i < top + rows && j >= left && j < left + cols;
    }
    friend bool operator==(const CellRect&, const CellRect&) = default;
};

/// Binary h x w lattice, row-major.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(std::size_t height, std::size_t width, std::uint8_t fill = 0);

    [[nodiscard]] std::size_t height() const { return height_; }
    [[nodiscard]] std::size_t width() const { return width_; }
    [[nodiscard]] std::uint8_t at(std::size_t i, std::size_t j) const { return cells_[i * width_ + j]; }
    void set(std::size_t i, std::size_t j, std::uint8_t v) { cells_[i * width_ + j] = v ? 1 : 0; }

    /// Row-major flattened view (the per-frame target vector used by the
    /// attention masks).
    [[nodiscard]] std::span<const std::uint8_t> flat() const { return cells_; }
    [[nodiscard]] std::size_t count() const;
    /// Bounding rectangle of the 1-cells, or nullopt for an empty mask.
    [[nodiscard]] std::optional<CellRect> bounds() const;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> cells_;
};

struct FrameMaskStack {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<BinaryMask> masks;

    [[nodiscard]] std::size_t frames() const { return masks.size(); }
    friend bool operator==(const FrameMaskStack&, const FrameMaskStack&) = default;
};

/// Cell (i, j) is set iff its center ((j+0.5)/w, (i+0.5)/h) lies in the
/// closed box.
[[nodiscard]] BinaryMask rasterize_box(const BBox& box, std::size_t height, std::size_t width);
[[nodiscard]] FrameMaskStack rasterize_masks(std::span<const BBox> boxes, std::size_t height, std::size_t width);

/// Resamples to (height, width): an output cell is set iff its footprint on
/// the source lattice overlaps any set source cell.
[[nodiscard]] BinaryMask rescale_mask(const BinaryMask& mask, std::size_t height, std::size_t width);
[[nodiscard]] FrameMaskStack rescale_masks(const FrameMaskStack& stack, std::size_t height, std::size_t width);

/// Position of (i, j) relative to the rectangle's top-left cell. Throws
/// DomainError when the point is outside.
[[nodiscard]] std::pair<std::size_t, std::size_t> local_coords(const CellRect& rect, std::size_t i, std::size_t j);

}  // namespace freetraj
