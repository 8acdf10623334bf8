#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "freetraj/tensor.hpp"
#include "freetraj/trajectory.hpp"

namespace freetraj {

/// FTNZ container: "FTNZ", u32 version, u8 dtype, u8 ndim, ndim x u32 dims,
/// then the row-major payload. Everything little-endian.
namespace ftnz {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

struct Array {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    [[nodiscard]] std::size_t numel() const;
    friend bool operator==(const Array&, const Array&) = default;
};

[[nodiscard]] std::string encode(const Array& array);
/// Throws ValidationError on a malformed header or truncated payload.
[[nodiscard]] Array decode(std::span<const char> bytes);

void write_file(const std::filesystem::path& path, const Array& array);
[[nodiscard]] Array read_file(const std::filesystem::path& path);

[[nodiscard]] Array from_tensor(const LatentTensor& t);
/// Requires a 4-D array.
[[nodiscard]] LatentTensor to_tensor(const Array& a);

/// (frames, height, width) array of 0/1 values.
[[nodiscard]] Array from_masks(const FrameMaskStack& stack);

}  // namespace ftnz
}  // namespace freetraj
