#include "freetraj/rng.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace freetraj {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(Seed seed) : key_(mix64(seed.value + kGolden)) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
    return mix64(mix64(key_ ^ (counter * kGolden)) + counter);
}

double CounterRng::uniform(std::uint64_t counter) const {
    // 53 random mantissa bits, shifted off zero.
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t index) const {
    const std::uint64_t pair = index >> 1;
    const double u1 = uniform(2 * pair);
    const double u2 = uniform(2 * pair + 1);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
}

Seed derive_seed(Seed parent, std::string_view stream) {
    // FNV-1a of the stream name, then mixed with the parent.
    std::uint64_t h = 14695981039346656037ull;
    for (char ch : stream) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    return derive_seed(parent, h);
}

Seed derive_seed(Seed parent, std::uint64_t stream) {
    return Seed{mix64(mix64(parent.value ^ kGolden) ^ mix64(stream + 0x632BE59BD9B4E019ull))};
}

std::vector<std::size_t> seeded_permutation(std::size_t n, Seed seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t k = 0; k < n; ++k) perm[k] = k;
    const CounterRng rng(seed);
    for (std::size_t k = n; k > 1; --k) {
        const auto j = static_cast<std::size_t>(rng.uniform(k) * static_cast<double>(k));
        std::swap(perm[k - 1], perm[j < k ? j : k - 1]);
    }
    return perm;
}

}  // namespace freetraj
