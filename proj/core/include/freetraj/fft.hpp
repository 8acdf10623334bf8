#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "freetraj/tensor.hpp"

namespace freetraj {

using Complex = std::complex<double>;

enum class FftDirection { forward, inverse };

/// In-place 3-D DFT of a row-major (d0, d1, d2) complex volume. The inverse
/// is normalized by 1/(d0*d1*d2) so forward followed by inverse is identity.
void fft3d_inplace(std::span<Complex> volume, std::size_t d0, std::size_t d1, std::size_t d2, FftDirection dir);

/// 2-D variant over a (rows, cols) plane.
void fft2d_inplace(std::span<Complex> plane, std::size_t rows, std::size_t cols, FftDirection dir);

/// Per-channel spectrum over the (frames, rows, cols) axes of a latent.
struct Spectrum {
    Shape4 shape{};
    std::vector<Complex> coeffs;

    [[nodiscard]] std::span<Complex> channel(std::size_t c);
    [[nodiscard]] std::span<const Complex> channel(std::size_t c) const;
};

[[nodiscard]] Spectrum forward_spectrum(const LatentTensor& t);

/// Inverse transform; imaginary parts with magnitude above `imag_tolerance`
/// times max(1, max|real|) raise ValidationError, smaller residue is dropped.
[[nodiscard]] LatentTensor inverse_spectrum(const Spectrum& s, double imag_tolerance = 1e-5);

}  // namespace freetraj
