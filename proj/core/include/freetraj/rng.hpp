#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace freetraj {

/// Reproducibility key for every random draw in the library.
struct Seed {
    std::uint64_t value = 0;
    friend bool operator==(const Seed&, const Seed&) = default;
};

/// Stateless counter-based generator: the n-th draw is a pure function of
/// (seed, n), so any element of a tensor can be produced independently and
/// results never depend on evaluation order or thread count.
class CounterRng {
public:
    explicit CounterRng(Seed seed);

    [[nodiscard]] std::uint64_t bits(std::uint64_t counter) const;
    /// Uniform on the open interval (0, 1).
    [[nodiscard]] double uniform(std::uint64_t counter) const;
    /// Standard normal via Box-Muller on counter pairs (2k, 2k+1).
    [[nodiscard]] double normal(std::uint64_t index) const;

private:
    std::uint64_t key_;
};

/// Independent child seed for a named stream.
[[nodiscard]] Seed derive_seed(Seed parent, std::string_view stream);
[[nodiscard]] Seed derive_seed(Seed parent, std::uint64_t stream);

/// Fisher-Yates permutation of [0, n) driven by `seed`.
[[nodiscard]] std::vector<std::size_t> seeded_permutation(std::size_t n, Seed seed);

}  // namespace freetraj
