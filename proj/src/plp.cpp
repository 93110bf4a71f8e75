#include <algorithm>
#include <cmath>
#include <numbers>

#include "kdmhl/dsp.hpp"
#include "kdmhl/error.hpp"
#include "kdmhl/kernels.hpp"

namespace kdmhl::dsp {
namespace {

// Index of the largest magnitude in [lo, hi]; earlier (slower) tempi win
// near-ties so that results do not depend on rounding noise.
std::size_t argmax_range(const std::vector<double>& mag, std::size_t stride, std::size_t n,
                         std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo + 1; i <= hi; ++i)
    if (mag[i * stride + n] > mag[best * stride + n] * (1.0 + 1e-9)) best = i;
  return best;
}

}  // namespace

std::vector<std::size_t> pick_curve_peaks(std::span<const double> curve, double rel_threshold,
                                          std::size_t min_distance) {
  if (curve.size() < 3) return {};
  const double top = *std::max_element(curve.begin(), curve.end());
  if (!(top > 0.0)) return {};
  const double floor_value = rel_threshold * top;

  std::vector<std::size_t> cand;
  for (std::size_t t = 1; t + 1 < curve.size(); ++t)
    if (curve[t] > curve[t - 1] && curve[t] > curve[t + 1] && curve[t] >= floor_value && curve[t] > 0.0)
      cand.push_back(t);
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return curve[a] > curve[b]; });

  std::vector<std::size_t> kept;
  for (std::size_t c : cand) {
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return (c > k ? c - k : k - c) < min_distance;
    });
    if (clear) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

PlpResult plp(const FeatureSequence& osf, const PlpConfig& config) {
  require(osf.dim == 1, "plp: expects a single-channel OSF");
  require(config.tempo_min > 0 && config.tempo_min < config.tempo_max, "plp: need 0 < tempo_min < tempo_max");
  require(config.tempo_step > 0, "plp: tempo_step must be positive");
  const std::size_t frames = osf.frames;
  PlpResult result;
  result.hop_s = osf.hop_s;
  result.curve.assign(frames, 0.0);
  result.local_tempo.assign(frames, 0.0);
  if (frames == 0) return result;

  kernels::TempoGrid grid;
  grid.hop_s = osf.hop_s;
  for (double b = config.tempo_min; b <= config.tempo_max + 1e-9; b += config.tempo_step) grid.bpm.push_back(b);
  grid.half_window = static_cast<std::size_t>(std::llround(config.window_s / 2.0 / osf.hop_s));
  const std::size_t n_tempi = grid.bpm.size();

  std::vector<std::complex<double>> tg(n_tempi * frames);
  kernels::omp::tempogram(osf.values, grid, tg);
  std::vector<double> mag(tg.size());
  for (std::size_t i = 0; i < tg.size(); ++i) mag[i] = std::abs(tg[i]);

  const long kc = std::lround(config.kernel_s / 2.0 / osf.hop_s);
  const long n_frames = static_cast<long>(frames);
  auto grid_index = [&](double bpm) { return (bpm - config.tempo_min) / config.tempo_step; };

  for (std::size_t n = 0; n < frames; ++n) {
    std::size_t best = argmax_range(mag, frames, n, 0, n_tempi - 1);
    const double best_mag = mag[best * frames + n];
    if (!(best_mag > 0.0)) continue;
    for (int d = config.subharmonic_max_divisor; d >= 2; --d) {
      const double target = grid.bpm[best] / d;
      if (target < config.tempo_min) continue;
      const double lo_f = std::floor(grid_index(target * (1.0 - config.subharmonic_search)));
      const double hi_f = std::ceil(grid_index(target * (1.0 + config.subharmonic_search)));
      const auto lo = static_cast<std::size_t>(std::max(0.0, lo_f));
      const auto hi = static_cast<std::size_t>(std::min(static_cast<double>(n_tempi - 1), hi_f));
      if (hi < lo) continue;
      const std::size_t cand = argmax_range(mag, frames, n, lo, hi);
      if (mag[cand * frames + n] >= config.subharmonic_ratio * best_mag) {
        best = cand;
        break;
      }
    }
    result.local_tempo[n] = grid.bpm[best];
    const double omega = 2.0 * std::numbers::pi * grid.bpm[best] / 60.0 * osf.hop_s;
    const double phase = std::arg(tg[best * frames + n]);
    const long c = static_cast<long>(n);
    for (long j = -kc; j <= kc; ++j) {
      const long m = c + j;
      if (m < 0 || m >= n_frames) continue;
      const double w = 0.5 + 0.5 * std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(kc + 1));
      result.curve[static_cast<std::size_t>(m)] += w * std::cos(omega * static_cast<double>(m) + phase);
    }
  }
  for (double& v : result.curve) v = std::max(0.0, v);
  result.peaks = pick_curve_peaks(result.curve, config.peak_rel_threshold, config.min_peak_distance);
  return result;
}

PlpResult plp_from_audio(const ingest::AudioChunk& chunk, const OnsetPipelineConfig& config) {
  const auto mel = log_mel(chunk, config.mel);
  const auto osf = superflux_osf(mel, config.flux_lag, config.flux_maxfilter_bands);
  return plp(highpass(osf, config.highpass_window_s), config.plp);
}

}  // namespace kdmhl::dsp
