#include "freetraj/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "freetraj/errors.hpp"

namespace freetraj {

void validate_shape(const Shape4& s) {
    if (s.channels == 0 || s.frames == 0 || s.height == 0 || s.width == 0) {
        throw ValidationError("tensor shape has a zero-sized dimension (" + std::to_string(s.channels) + "x" +
                              std::to_string(s.frames) + "x" + std::to_string(s.height) + "x" +
                              std::to_string(s.width) + ")");
    }
}

LatentTensor::LatentTensor(Shape4 shape, float fill) : shape_(shape) {
    validate_shape(shape_);
    data_.assign(shape_.numel(), fill);
}

LatentTensor::LatentTensor(Shape4 shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_.numel()) {
        throw ValidationError("tensor payload size does not match its shape");
    }
}

std::span<float> LatentTensor::plane(std::size_t c, std::size_t f) {
    return std::span<float>(data_).subspan(index(c, f, 0, 0), shape_.frame_size());
}

std::span<const float> LatentTensor::plane(std::size_t c, std::size_t f) const {
    return std::span<const float>(data_).subspan(index(c, f, 0, 0), shape_.frame_size());
}

LatentTensor LatentTensor::frames(std::size_t first, std::size_t count) const {
    if (count == 0 || first + count > shape_.frames) {
        throw ValidationError("frame range out of bounds");
    }
    LatentTensor out(Shape4{shape_.channels, count, shape_.height, shape_.width});
    for (std::size_t c = 0; c < shape_.channels; ++c) {
        for (std::size_t f = 0; f < count; ++f) {
            auto src = plane(c, first + f);
            std::copy(src.begin(), src.end(), out.plane(c, f).begin());
        }
    }
    return out;
}

void LatentTensor::copy_frame_from(const LatentTensor& src, std::size_t src_frame, std::size_t dst_frame) {
    if (src.shape_.channels != shape_.channels || src.shape_.height != shape_.height ||
        src.shape_.width != shape_.width) {
        throw ValidationError("frame copy between incompatible tensors");
    }
    if (src_frame >= src.shape_.frames || dst_frame >= shape_.frames) {
        throw ValidationError("frame index out of bounds");
    }
    for (std::size_t c = 0; c < shape_.channels; ++c) {
        auto from = src.plane(c, src_frame);
        std::copy(from.begin(), from.end(), plane(c, dst_frame).begin());
    }
}

bool LatentTensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
    if (a.shape() != b.shape()) {
        throw ValidationError("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        m = std::max(m, std::abs(static_cast<double>(a.data()[k]) - static_cast<double>(b.data()[k])));
    }
    return m;
}

double max_abs(const LatentTensor& a) {
    double m = 0.0;
    for (float v : a.data()) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
}

namespace {
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_bytes(std::uint64_t& h, const unsigned char* p, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        h ^= p[k];
        h *= kFnvPrime;
    }
}

void fnv_u64(std::uint64_t& h, std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    fnv_bytes(h, b, 8);
}
}  // namespace

std::uint64_t content_hash(const LatentTensor& t) {
    std::uint64_t h = kFnvOffset;
    fnv_u64(h, t.shape().channels);
    fnv_u64(h, t.shape().frames);
    fnv_u64(h, t.shape().height);
    fnv_u64(h, t.shape().width);
    for (float v : t.data()) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
        fnv_bytes(h, b, 4);
    }
    return h;
}

}  // namespace freetraj
