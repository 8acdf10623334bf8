#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace freetraj {

/// Extent of a latent video: channels x frames x rows x cols.
struct Shape4 {
    std::size_t channels = 0;
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    [[nodiscard]] std::size_t numel() const { return channels * frames * height * width; }
    [[nodiscard]] std::size_t frame_size() const { return height * width; }
    friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Throws ValidationError when any dimension is zero.
void validate_shape(const Shape4& shape);

/// Dense C x F x H x W float tensor, row-major (width fastest).
class LatentTensor {
public:
    LatentTensor() = default;
    explicit LatentTensor(Shape4 shape, float fill = 0.0f);
    LatentTensor(Shape4 shape, std::vector<float> data);

    [[nodiscard]] const Shape4& shape() const { return shape_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }

    [[nodiscard]] std::size_t index(std::size_t c, std::size_t f, std::size_t i, std::size_t j) const {
        return ((c * shape_.frames + f) * shape_.height + i) * shape_.width + j;
    }
    float& operator()(std::size_t c, std::size_t f, std::size_t i, std::size_t j) { return data_[index(c, f, i, j)]; }
    float operator()(std::size_t c, std::size_t f, std::size_t i, std::size_t j) const {
        return data_[index(c, f, i, j)];
    }

    [[nodiscard]] std::span<float> data() { return data_; }
    [[nodiscard]] std::span<const float> data() const { return data_; }
    [[nodiscard]] const std::vector<float>& values() const { return data_; }

    /// Contiguous H*W plane for (channel, frame).
    [[nodiscard]] std::span<float> plane(std::size_t c, std::size_t f);
    [[nodiscard]] std::span<const float> plane(std::size_t c, std::size_t f) const;

    /// Copy of frames [first, first + count) across all channels.
    [[nodiscard]] LatentTensor frames(std::size_t first, std::size_t count) const;
    /// Copy frame `src_frame` of `src` into frame `dst_frame` of this tensor.
    void copy_frame_from(const LatentTensor& src, std::size_t src_frame, std::size_t dst_frame);

    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const LatentTensor&, const LatentTensor&) = default;

private:
    Shape4 shape_{};
    std::vector<float> data_;
};

/// max_k |a_k - b_k|; shapes must agree.
[[nodiscard]] double max_abs_diff(const LatentTensor& a, const LatentTensor& b);
[[nodiscard]] double max_abs(const LatentTensor& a);

/// 64-bit FNV-1a over the shape and the raw little-endian float bytes.
[[nodiscard]] std::uint64_t content_hash(const LatentTensor& t);

}  // namespace freetraj
