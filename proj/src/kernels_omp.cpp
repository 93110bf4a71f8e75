#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "kdmhl/error.hpp"
#include "kdmhl/kernels.hpp"

namespace kdmhl::kernels::omp {
namespace {

// FFTW planning is not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct RealPlan {
  fftw_plan plan = nullptr;
  explicit RealPlan(std::size_t n) {
    std::lock_guard lock(planner_mutex());
    std::vector<double> in(n);
    std::vector<fftw_complex> out(n / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) fail(ErrorKind::Unsupported, "fftw: could not create plan");
  }
  ~RealPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  RealPlan(const RealPlan&) = delete;
  RealPlan& operator=(const RealPlan&) = delete;
};

}  // namespace

void stft(std::span<const float> samples, std::size_t win, std::size_t hop,
          std::span<const double> window, std::span<std::complex<double>> out) {
  require(window.size() == win, "stft: window length mismatch");
  const std::size_t frames = samples.size() < win ? 0 : 1 + (samples.size() - win) / hop;
  const std::size_t bins = win / 2 + 1;
  require(out.size() == frames * bins, "stft: output size mismatch");
  if (frames == 0) return;

  RealPlan plan(win);
  static_assert(sizeof(std::complex<double>) == sizeof(fftw_complex));
#pragma omp parallel
  {
    std::vector<double> frame(win);
#pragma omp for schedule(static)
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t n = 0; n < win; ++n) frame[n] = window[n] * samples[t * hop + n];
      fftw_execute_dft_r2c(plan.plan, frame.data(),
                           reinterpret_cast<fftw_complex*>(out.data() + t * bins));
    }
  }
}

void tempogram(std::span<const double> novelty, const TempoGrid& grid,
               std::span<std::complex<double>> out) {
  using cd = std::complex<double>;
  const std::size_t frames = novelty.size();
  require(out.size() == grid.bpm.size() * frames, "tempogram: output size mismatch");
  if (frames == 0) return;
  const long h = static_cast<long>(grid.half_window);
  const long n_frames = static_cast<long>(frames);
  const double theta = std::numbers::pi / static_cast<double>(h + 1);

  // w(j) = 1/2 + 1/4 e^{i theta j} + 1/4 e^{-i theta j}, so the windowed sum
  // splits into three prefix-sum differences.
  std::vector<cd> rot_pos(frames), rot_neg(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    const double a = theta * static_cast<double>(m);
    rot_pos[m] = {std::cos(a), std::sin(a)};
    rot_neg[m] = std::conj(rot_pos[m]);
  }

#pragma omp parallel
  {
    std::vector<cd> p0(frames + 1), pp(frames + 1), pn(frames + 1);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < grid.bpm.size(); ++i) {
      const double omega = 2.0 * std::numbers::pi * grid.bpm[i] / 60.0 * grid.hop_s;
      for (std::size_t m = 0; m < frames; ++m) {
        const double a = omega * static_cast<double>(m);
        const cd g = novelty[m] * cd(std::cos(a), -std::sin(a));
        p0[m + 1] = p0[m] + g;
        pp[m + 1] = pp[m] + g * rot_pos[m];
        pn[m + 1] = pn[m] + g * rot_neg[m];
      }
      for (long n = 0; n < n_frames; ++n) {
        const auto lo = static_cast<std::size_t>(std::max(0L, n - h));
        const auto hi = static_cast<std::size_t>(std::min(n_frames, n + h + 1));
        const auto un = static_cast<std::size_t>(n);
        out[i * frames + un] = 0.5 * (p0[hi] - p0[lo]) + 0.25 * rot_neg[un] * (pp[hi] - pp[lo]) +
                               0.25 * rot_pos[un] * (pn[hi] - pn[lo]);
      }
    }
  }
}

void vqt(std::span<const float> samples, std::size_t frames, std::size_t hop, std::size_t win,
         double sample_rate, std::span<const double> centre_hz, std::span<const double> bandwidth_hz,
         std::span<double> out) {
  const std::size_t bins = centre_hz.size();
  require(bandwidth_hz.size() == bins, "vqt: bandwidth size mismatch");
  require(out.size() == frames * bins, "vqt: output size mismatch");

  struct Filter {
    long half = 0;
    double norm = 0.0;
    std::vector<double> re, im;
  };
  std::vector<Filter> filters(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    auto& f = filters[k];
    f.half = static_cast<long>(std::llround(0.5 * sample_rate / bandwidth_hz[k]));
    for (long j = -f.half; j <= f.half; ++j) {
      const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * static_cast<double>(j) /
                                            static_cast<double>(f.half + 1));
      const double a = 2.0 * std::numbers::pi * centre_hz[k] * static_cast<double>(j) / sample_rate;
      f.norm += w;
      f.re.push_back(w * std::cos(a));
      f.im.push_back(-w * std::sin(a));
    }
  }

  const auto n_samples = static_cast<long>(samples.size());
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < frames; ++t) {
    const long centre = static_cast<long>(t * hop + win / 2);
    for (std::size_t k = 0; k < bins; ++k) {
      const auto& f = filters[k];
      double re = 0.0, im = 0.0;
      for (long j = -f.half; j <= f.half; ++j) {
        const long m = centre + j;
        if (m < 0 || m >= n_samples) continue;
        const double x = samples[static_cast<std::size_t>(m)];
        const auto idx = static_cast<std::size_t>(j + f.half);
        re += x * f.re[idx];
        im += x * f.im[idx];
      }
      out[t * bins + k] = std::hypot(re, im) / f.norm;
    }
  }
}

}  // namespace kdmhl::kernels::omp
