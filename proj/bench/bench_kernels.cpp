// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "kdmhl/dsp.hpp"
#include "kdmhl/kernels.hpp"

using namespace kdmhl;

namespace {

std::vector<float> noise(std::size_t n) {
  std::mt19937_64 rng(7);
  std::normal_distribution<float> d(0.f, 0.1f);
  std::vector<float> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

std::size_t frames_for(std::size_t n) { return n < dsp::kWindow ? 0 : 1 + (n - dsp::kWindow) / dsp::kHop; }

template <auto Fn>
void bm_stft(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)) * 16000);
  const auto w = dsp::hann_window(dsp::kWindow);
  std::vector<std::complex<double>> out(frames_for(x.size()) * (dsp::kWindow / 2 + 1));
  for (auto _ : state) {
    Fn(x, dsp::kWindow, dsp::kHop, w, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void bm_tempogram(benchmark::State& state) {
  const std::size_t T = 997;
  std::vector<double> nov(T);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  for (auto& v : nov) v = d(rng);
  kernels::TempoGrid grid;
  for (double b = 30; b <= 30 + static_cast<double>(state.range(0)) - 1; b += 1) grid.bpm.push_back(b);
  std::vector<std::complex<double>> out(grid.bpm.size() * T);
  for (auto _ : state) {
    Fn(nov, grid, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void bm_vqt(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)) * 16000);
  const std::size_t frames = frames_for(x.size());
  std::vector<double> fc, bw;
  for (int k = 0; k < 84; ++k) {
    const double f = 32.70319566257483 * std::pow(2.0, k / 12.0);
    fc.push_back(f);
    bw.push_back((std::pow(2.0, 1.0 / 12.0) - 1.0) * f + 24.0);
  }
  std::vector<double> out(frames * fc.size());
  for (auto _ : state) {
    Fn(x, frames, dsp::kHop, dsp::kWindow, 16000.0, fc, bw, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(bm_stft<kernels::serial::stft>)->Name("stft/serial")->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_stft<kernels::omp::stft>)->Name("stft/omp")->Arg(1)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_tempogram<kernels::serial::tempogram>)->Name("tempogram/serial")->Arg(571)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_tempogram<kernels::omp::tempogram>)->Name("tempogram/omp")->Arg(571)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_vqt<kernels::serial::vqt>)->Name("vqt/serial")->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_vqt<kernels::omp::vqt>)->Name("vqt/omp")->Arg(2)->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
