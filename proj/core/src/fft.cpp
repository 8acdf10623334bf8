#include "freetraj/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "freetraj/errors.hpp"

namespace freetraj {

namespace {

// FFTW planning is not thread-safe; execution on a private plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

void run_plan(std::span<Complex> data, int rank, const int* dims, FftDirection dir) {
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    const int sign = dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD;
    fftw_plan plan = nullptr;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft(rank, dims, buf, buf, sign, FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw InternalError("FFTW failed to create a plan");
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    if (dir == FftDirection::inverse) {
        const double scale = 1.0 / static_cast<double>(data.size());
        for (auto& v : data) v *= scale;
    }
}

}  // namespace

void fft3d_inplace(std::span<Complex> volume, std::size_t d0, std::size_t d1, std::size_t d2, FftDirection dir) {
    if (volume.size() != d0 * d1 * d2 || volume.empty()) {
        throw ValidationError("fft3d: volume size does not match dims");
    }
    const int dims[3] = {static_cast<int>(d0), static_cast<int>(d1), static_cast<int>(d2)};
    run_plan(volume, 3, dims, dir);
}

void fft2d_inplace(std::span<Complex> plane, std::size_t rows, std::size_t cols, FftDirection dir) {
    if (plane.size() != rows * cols || plane.empty()) {
        throw ValidationError("fft2d: plane size does not match dims");
    }
    const int dims[2] = {static_cast<int>(rows), static_cast<int>(cols)};
    run_plan(plane, 2, dims, dir);
}

std::span<Complex> Spectrum::channel(std::size_t c) {
    const std::size_t n = shape.frames * shape.height * shape.width;
    return std::span<Complex>(coeffs).subspan(c * n, n);
}

std::span<const Complex> Spectrum::channel(std::size_t c) const {
    const std::size_t n = shape.frames * shape.height * shape.width;
    return std::span<const Complex>(coeffs).subspan(c * n, n);
}

Spectrum forward_spectrum(const LatentTensor& t) {
    Spectrum s{t.shape(), std::vector<Complex>(t.size())};
    std::transform(t.data().begin(), t.data().end(), s.coeffs.begin(),
                   [](float v) { return Complex(static_cast<double>(v), 0.0); });
    for (std::size_t c = 0; c < s.shape.channels; ++c) {
        fft3d_inplace(s.channel(c), s.shape.frames, s.shape.height, s.shape.width, FftDirection::forward);
    }
    return s;
}

LatentTensor inverse_spectrum(const Spectrum& s, double imag_tolerance) {
    Spectrum work = s;
    for (std::size_t c = 0; c < work.shape.channels; ++c) {
        fft3d_inplace(work.channel(c), work.shape.frames, work.shape.height, work.shape.width,
                      FftDirection::inverse);
    }
    double max_real = 0.0;
    double max_imag = 0.0;
    for (const auto& v : work.coeffs) {
        max_real = std::max(max_real, std::abs(v.real()));
        max_imag = std::max(max_imag, std::abs(v.imag()));
    }
    if (max_imag > imag_tolerance * std::max(1.0, max_real)) {
        throw ValidationError("inverse spectrum has a non-negligible imaginary part (" + std::to_string(max_imag) +
                            "); the spectrum is not Hermitian");
    }
    LatentTensor out(work.shape);
    std::transform(work.coeffs.begin(), work.coeffs.end(), out.data().begin(),
                   [](const Complex& v) { return static_cast<float>(v.real()); });
    return out;
}

}  // namespace freetraj
