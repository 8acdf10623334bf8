#include "freetraj/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "freetraj/errors.hpp"

namespace freetraj::ftnz {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const char> bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + k])) << (8 * k);
    }
    return v;
}

}  // namespace

std::size_t Array::numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

std::string encode(const Array& array) {
    if (array.dims.empty() || array.dims.size() > 255) {
        throw ValidationError("FTNZ: ndim must be in [1, 255]");
    }
    if (array.numel() != array.data.size()) {
        throw ValidationError("FTNZ: payload size does not match dims");
    }
    std::string out = "FTNZ";
    put_u32(out, kVersion);
    out.push_back(static_cast<char>(kDtypeF32));
    out.push_back(static_cast<char>(array.dims.size()));
    for (auto d : array.dims) put_u32(out, d);
    out.reserve(out.size() + 4 * array.data.size());
    for (float v : array.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

Array decode(std::span<const char> bytes) {
    constexpr std::size_t kFixed = 4 + 4 + 1 + 1;
    if (bytes.size() < kFixed || std::string_view(bytes.data(), 4) != "FTNZ") {
        throw ValidationError("FTNZ: bad magic");
    }
    if (get_u32(bytes, 4) != kVersion) {
        throw ValidationError("FTNZ: unsupported version");
    }
    if (static_cast<std::uint8_t>(bytes[8]) != kDtypeF32) {
        throw ValidationError("FTNZ: unsupported dtype code");
    }
    const std::size_t ndim = static_cast<unsigned char>(bytes[9]);
    if (ndim == 0 || bytes.size() < kFixed + 4 * ndim) {
        throw ValidationError("FTNZ: truncated header");
    }
    Array a;
    for (std::size_t k = 0; k < ndim; ++k) a.dims.push_back(get_u32(bytes, kFixed + 4 * k));
    const std::size_t offset = kFixed + 4 * ndim;
    const std::size_t n = a.numel();
    if (bytes.size() != offset + 4 * n) {
        throw ValidationError("FTNZ: payload length does not match dims");
    }
    a.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) a.data[k] = std::bit_cast<float>(get_u32(bytes, offset + 4 * k));
    return a;
}

void write_file(const std::filesystem::path& path, const Array& array) {
    const std::string bytes = encode(array);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Array read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

Array from_tensor(const LatentTensor& t) {
    const auto& s = t.shape();
    return Array{{static_cast<std::uint32_t>(s.channels), static_cast<std::uint32_t>(s.frames),
                  static_cast<std::uint32_t>(s.height), static_cast<std::uint32_t>(s.width)},
                 t.values()};
}

LatentTensor to_tensor(const Array& a) {
    if (a.dims.size() != 4) throw ValidationError("FTNZ: expected a 4-D latent tensor");
    return LatentTensor(Shape4{a.dims[0], a.dims[1], a.dims[2], a.dims[3]}, a.data);
}

Array from_masks(const FrameMaskStack& stack) {
    Array a{{static_cast<std::uint32_t>(stack.frames()), static_cast<std::uint32_t>(stack.height),
             static_cast<std::uint32_t>(stack.width)},
            {}};
    a.data.reserve(a.numel());
    for (const auto& m : stack.masks)
        for (auto v : m.flat()) a.data.push_back(static_cast<float>(v));
    return a;
}

}  // namespace freetraj::ftnz
