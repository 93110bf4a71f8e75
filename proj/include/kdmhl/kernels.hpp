#pragma once

// Data-parallel kernels. Every kernel has a plain serial reference in
// `kernels::serial` and an OpenMP implementation in `kernels::omp`; the two
// agree to rounding (tests/test_kernels.cpp) and bench/ compares their speed.
// The OpenMP variants are deterministic regardless of thread count.

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace kdmhl::kernels {

/// Tempo grid description for the Fourier tempogram.
struct TempoGrid {
  std::vector<double> bpm;
  double hop_s = 0.02;
  std::size_t half_window = 150;  // Hann window spans 2*half_window+1 frames
};

namespace serial {

/// Naive O(win^2) DFT per frame. out is frames x (win/2+1).
void stft(std::span<const float> samples, std::size_t win, std::size_t hop,
          std::span<const double> window, std::span<std::complex<double>> out);

/// Direct windowed sum F(tempo, n) = sum_m x[m] w(m-n) exp(-2 pi i f m hop).
/// out is tempi x frames.
void tempogram(std::span<const double> novelty, const TempoGrid& grid,
               std::span<std::complex<double>> out);

/// Variable-Q magnitudes at frame centres t*hop + win/2; out is frames x bins.
void vqt(std::span<const float> samples, std::size_t frames, std::size_t hop, std::size_t win,
         double sample_rate, std::span<const double> centre_hz, std::span<const double> bandwidth_hz,
         std::span<double> out);

}  // namespace serial

namespace omp {

/// FFTW-backed STFT, frames in parallel.
void stft(std::span<const float> samples, std::size_t win, std::size_t hop,
          std::span<const double> window, std::span<std::complex<double>> out);

/// Same quantity as serial::tempogram via running sums: the Hann window is a
/// sum of three complex exponentials, so each tempo costs O(T). Tempi in parallel.
void tempogram(std::span<const double> novelty, const TempoGrid& grid,
               std::span<std::complex<double>> out);

void vqt(std::span<const float> samples, std::size_t frames, std::size_t hop, std::size_t win,
         double sample_rate, std::span<const double> centre_hz, std::span<const double> bandwidth_hz,
         std::span<double> out);

}  // namespace omp

/// Hann weight used by both tempogram variants at offset j in [-h, h].
inline double tempogram_window(long j, std::size_t half_window) {
  return 0.5 + 0.5 * std::cos(3.14159265358979323846 * static_cast<double>(j) /
                              static_cast<double>(half_window + 1));
}

}  // namespace kdmhl::kernels
