#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "freetraj/noise_guidance.hpp"
#include "freetraj/rng.hpp"
#include "freetraj/tensor.hpp"

namespace testutil {

inline freetraj::LatentTensor randn(const freetraj::Shape4& s, std::uint64_t seed) {
    return freetraj::sample_gaussian(s, freetraj::Seed{seed});
}

inline std::filesystem::path scratch(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path(FREETRAJ_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
