#include <doctest.h>

#include <omp.h>

#include "helpers.hpp"
#include "kdmhl/dsp.hpp"
#include "kdmhl/kernels.hpp"

using namespace kdmhl;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.f, 0.2f);
  std::vector<float> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

double max_abs(const std::vector<std::complex<double>>& v) {
  double m = 0;
  for (auto z : v) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

TEST_CASE("stft: FFTW path matches the naive DFT") {
  const auto x = noise(8000, 1);
  const auto w = dsp::hann_window(1024);
  const std::size_t frames = dsp::frame_count(x.size());
  std::vector<std::complex<double>> a(frames * 513), b(frames * 513);
  kernels::serial::stft(x, 1024, 320, w, a);
  kernels::omp::stft(x, 1024, 320, w, b);
  const double scale = max_abs(a);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9 * scale);
}

TEST_CASE("tempogram: running-sum path matches the direct sum") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  std::vector<double> x(400);
  for (auto& v : x) v = nd(rng);
  kernels::TempoGrid grid;
  grid.half_window = 60;
  for (double bpm = 30; bpm <= 300; bpm += 7) grid.bpm.push_back(bpm);
  std::vector<std::complex<double>> a(grid.bpm.size() * x.size()), b(a.size());
  kernels::serial::tempogram(x, grid, a);
  kernels::omp::tempogram(x, grid, b);
  const double scale = max_abs(a);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9 * scale);

  // independent oracle for one cell
  const std::size_t k = 5, n = 123;
  std::complex<double> want = 0;
  for (long m = static_cast<long>(n) - 60; m <= static_cast<long>(n) + 60; ++m) {
    if (m < 0 || m >= 400) continue;
    const double wv = 0.5 + 0.5 * std::cos(testutil::kPi * static_cast<double>(m - static_cast<long>(n)) / 61.0);
    want += x[static_cast<std::size_t>(m)] * wv *
            std::polar(1.0, -2 * testutil::kPi * grid.bpm[k] / 60.0 * static_cast<double>(m) * 0.02);
  }
  CHECK(std::abs(a[k * x.size() + n] - want) <= 1e-12 * scale);
}

TEST_CASE("vqt: precomputed filters match the on-the-fly reference") {
  const auto x = noise(16000, 3);
  const std::size_t frames = dsp::frame_count(x.size());
  std::vector<double> fc, bw;
  for (int k = 0; k < 84; k += 5) {
    fc.push_back(32.70319566257483 * std::pow(2.0, k / 12.0));
    bw.push_back((std::pow(2.0, 1.0 / 12.0) - 1.0) * fc.back() + 24.0);
  }
  std::vector<double> a(frames * fc.size()), b(a.size());
  kernels::serial::vqt(x, frames, 320, 1024, 16000, fc, bw, a);
  kernels::omp::vqt(x, frames, 320, 1024, 16000, fc, bw, b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("omp kernels give identical bits for any thread count") {
  const auto x = noise(20000, 4);
  const auto w = dsp::hann_window(1024);
  const std::size_t frames = dsp::frame_count(x.size());
  kernels::TempoGrid grid;
  for (double bpm = 30; bpm <= 600; bpm += 1) grid.bpm.push_back(bpm);
  std::vector<double> nov(frames);
  for (std::size_t i = 0; i < frames; ++i) nov[i] = x[i * 7 % x.size()];
  const int saved = omp_get_max_threads();
  std::vector<std::vector<std::complex<double>>> s, t;
  for (int threads : {1, 3}) {
    omp_set_num_threads(threads);
    s.emplace_back(frames * 513);
    kernels::omp::stft(x, 1024, 320, w, s.back());
    t.emplace_back(grid.bpm.size() * frames);
    kernels::omp::tempogram(nov, grid, t.back());
  }
  omp_set_num_threads(saved);
  CHECK(s[0] == s[1]);
  CHECK(t[0] == t[1]);
}
