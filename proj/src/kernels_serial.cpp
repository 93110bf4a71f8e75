#include <cmath>
#include <numbers>

#include "kdmhl/error.hpp"
#include "kdmhl/kernels.hpp"

namespace kdmhl::kernels::serial {

void stft(std::span<const float> samples, std::size_t win, std::size_t hop,
          std::span<const double> window, std::span<std::complex<double>> out) {
  require(window.size() == win, "stft: window length mismatch");
  const std::size_t frames = samples.size() < win ? 0 : 1 + (samples.size() - win) / hop;
  const std::size_t bins = win / 2 + 1;
  require(out.size() == frames * bins, "stft: output size mismatch");

  std::vector<double> cos_table(win), sin_table(win);
  for (std::size_t i = 0; i < win; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(win);
    cos_table[i] = std::cos(a);
    sin_table[i] = std::sin(a);
  }
  std::vector<double> frame(win);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < win; ++n) frame[n] = window[n] * samples[t * hop + n];
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      std::size_t idx = 0;
      for (std::size_t n = 0; n < win; ++n) {
        re += frame[n] * cos_table[idx];
        im -= frame[n] * sin_table[idx];
        idx += k;
        if (idx >= win) idx -= win;
      }
      out[t * bins + k] = {re, im};
    }
  }
}

void tempogram(std::span<const double> novelty, const TempoGrid& grid,
               std::span<std::complex<double>> out) {
  const std::size_t frames = novelty.size();
  require(out.size() == grid.bpm.size() * frames, "tempogram: output size mismatch");
  const long h = static_cast<long>(grid.half_window);
  const long n_frames = static_cast<long>(frames);
  for (std::size_t i = 0; i < grid.bpm.size(); ++i) {
    const double omega = 2.0 * std::numbers::pi * grid.bpm[i] / 60.0 * grid.hop_s;
    for (long n = 0; n < n_frames; ++n) {
      std::complex<double> acc = 0.0;
      for (long j = -h; j <= h; ++j) {
        const long m = n + j;
        if (m < 0 || m >= n_frames) continue;
        const double a = omega * static_cast<double>(m);
        acc += novelty[static_cast<std::size_t>(m)] * tempogram_window(j, grid.half_window) *
               std::complex<double>(std::cos(a), -std::sin(a));
      }
      out[i * frames + static_cast<std::size_t>(n)] = acc;
    }
  }
}

void vqt(std::span<const float> samples, std::size_t frames, std::size_t hop, std::size_t win,
         double sample_rate, std::span<const double> centre_hz, std::span<const double> bandwidth_hz,
         std::span<double> out) {
  const std::size_t bins = centre_hz.size();
  require(bandwidth_hz.size() == bins, "vqt: bandwidth size mismatch");
  require(out.size() == frames * bins, "vqt: output size mismatch");
  const auto n_samples = static_cast<long>(samples.size());
  for (std::size_t t = 0; t < frames; ++t) {
    const long centre = static_cast<long>(t * hop + win / 2);
    for (std::size_t k = 0; k < bins; ++k) {
      const long half = static_cast<long>(std::llround(0.5 * sample_rate / bandwidth_hz[k]));
      double re = 0.0, im = 0.0, norm = 0.0;
      for (long j = -half; j <= half; ++j) {
        const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * static_cast<double>(j) /
                                              static_cast<double>(half + 1));
        norm += w;
        const long m = centre + j;
        if (m < 0 || m >= n_samples) continue;
        const double a = 2.0 * std::numbers::pi * centre_hz[k] * static_cast<double>(j) / sample_rate;
        re += w * samples[static_cast<std::size_t>(m)] * std::cos(a);
        im -= w * samples[static_cast<std::size_t>(m)] * std::sin(a);
      }
      out[t * bins + k] = std::hypot(re, im) / norm;
    }
  }
}

}  // namespace kdmhl::kernels::serial
