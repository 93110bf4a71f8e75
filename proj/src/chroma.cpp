#include <cmath>

#include "kdmhl/dsp.hpp"
#include "kdmhl/error.hpp"
#include "kdmhl/kernels.hpp"

namespace kdmhl::dsp {
namespace {

// Pitch class with C = 0 for a frequency in Hz.
std::size_t pitch_class(double hz) {
  const long midi = std::lround(69.0 + 12.0 * std::log2(hz / 440.0));
  return static_cast<std::size_t>(((midi % 12) + 12) % 12);
}

}  // namespace

FeatureSequence chroma_stft(const Spectrogram& spec, double sample_rate) {
  const std::size_t fft_size = (spec.bins - 1) * 2;
  std::vector<long> cls(spec.bins, -1);
  for (std::size_t k = 1; k < spec.bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
    if (f >= 30.0 && f <= 8000.0) cls[k] = static_cast<long>(pitch_class(f));
  }
  FeatureSequence out(spec.frames, 12, FeatureKind::ChromaStft);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const auto row = spec.row(t);
    for (std::size_t k = 0; k < spec.bins; ++k)
      if (cls[k] >= 0) out.at(t, static_cast<std::size_t>(cls[k])) += std::norm(row[k]);
  }
  l2_normalize_rows(out);
  return out;
}

FeatureSequence chroma_stft(const ingest::AudioChunk& chunk) {
  return chroma_stft(stft(chunk.samples), chunk.sample_rate);
}

FeatureSequence vqt(const ingest::AudioChunk& chunk, const VqtConfig& config) {
  require(chunk.samples.size() >= kWindow, "vqt: chunk shorter than one window");
  const std::size_t bins = config.octaves * config.bins_per_octave;
  const double alpha = std::exp2(1.0 / static_cast<double>(config.bins_per_octave)) - 1.0;
  std::vector<double> centre(bins), bandwidth(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    centre[k] = config.f_min * std::exp2(static_cast<double>(k) / static_cast<double>(config.bins_per_octave));
    bandwidth[k] = alpha * centre[k] + config.gamma;
  }
  const std::size_t frames = frame_count(chunk.samples.size());
  FeatureSequence out(frames, bins, FeatureKind::ChromaVqt);
  kernels::omp::vqt(chunk.samples, frames, kHop, kWindow, chunk.sample_rate, centre, bandwidth, out.values);
  return out;
}

FeatureSequence chroma_vqt(const ingest::AudioChunk& chunk, const VqtConfig& config) {
  const auto spec = vqt(chunk, config);
  FeatureSequence out(spec.frames, 12, FeatureKind::ChromaVqt);
  const std::size_t first = pitch_class(config.f_min);
  for (std::size_t t = 0; t < spec.frames; ++t)
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const double v = spec.at(t, k);
      out.at(t, (first + k) % 12) += v * v;
    }
  l2_normalize_rows(out);
  return out;
}

}  // namespace kdmhl::dsp
