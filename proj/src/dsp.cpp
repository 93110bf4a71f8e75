#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kdmhl/dsp.hpp"
#include "kdmhl/error.hpp"
#include "kdmhl/kernels.hpp"

namespace kdmhl::dsp {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Mel: return "mel";
    case FeatureKind::ChromaStft: return "chroma_stft";
    case FeatureKind::ChromaVqt: return "chroma_vqt";
    case FeatureKind::Mfcc: return "mfcc";
    case FeatureKind::Osf: return "osf";
    case FeatureKind::Stacked: return "stacked";
    case FeatureKind::Learned: return "learned";
    case FeatureKind::Synthetic: return "synthetic";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& name) {
  for (auto k : {FeatureKind::Mel, FeatureKind::ChromaStft, FeatureKind::ChromaVqt, FeatureKind::Mfcc,
                 FeatureKind::Osf, FeatureKind::Stacked, FeatureKind::Learned, FeatureKind::Synthetic})
    if (to_string(k) == name) return k;
  fail(ErrorKind::BadData, "unknown feature kind '" + name + "'");
}

bool FeatureSequence::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::size_t frame_count(std::size_t samples, std::size_t win, std::size_t hop) {
  return samples < win ? 0 : 1 + (samples - win) / hop;
}

double frame_time(std::size_t t, double hop_s) { return static_cast<double>(t) * hop_s + kFrameCentre; }

std::size_t time_to_frame(double seconds, double hop_s) {
  const double f = std::round((seconds - kFrameCentre) / hop_s);
  return f <= 0.0 ? 0 : static_cast<std::size_t>(f);
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Spectrogram stft(std::span<const float> samples, std::size_t win, std::size_t hop) {
  require(win >= hop && hop > 0, "stft: need win >= hop > 0");
  if (samples.size() < win) fail(ErrorKind::BadData, "stft: signal shorter than one window");
  Spectrogram spec;
  spec.frames = frame_count(samples.size(), win, hop);
  spec.bins = win / 2 + 1;
  spec.values.resize(spec.frames * spec.bins);
  const auto window = hann_window(win);
  kernels::omp::stft(samples, win, hop, window, spec.values);
  return spec;
}

namespace {

double hz_to_mel(double f) {
  constexpr double f_sp = 200.0 / 3.0, min_log_hz = 1000.0, min_log_mel = 15.0;
  const double logstep = std::log(6.4) / 27.0;
  return f < min_log_hz ? f / f_sp : min_log_mel + std::log(f / min_log_hz) / logstep;
}

double mel_to_hz(double m) {
  constexpr double f_sp = 200.0 / 3.0, min_log_hz = 1000.0, min_log_mel = 15.0;
  const double logstep = std::log(6.4) / 27.0;
  return m < min_log_mel ? m * f_sp : min_log_hz * std::exp(logstep * (m - min_log_mel));
}

}  // namespace

std::vector<double> mel_filterbank(std::size_t bands, std::size_t fft_size, double sample_rate,
                                   double f_min, double f_max) {
  require(bands > 0 && f_max > f_min && f_min >= 0, "mel_filterbank: bad band layout");
  const std::size_t bins = fft_size / 2 + 1;
  std::vector<double> edges(bands + 2);
  const double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(bands + 1));

  std::vector<double> fb(bands * bins, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      const double up = (f - lo) / (mid - lo), down = (hi - f) / (hi - mid);
      fb[b * bins + k] = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

FeatureSequence log_mel(const Spectrogram& spec, double sample_rate, const MelConfig& config) {
  const std::size_t fft_size = (spec.bins - 1) * 2;
  const auto fb = mel_filterbank(config.bands, fft_size, sample_rate, config.f_min, config.f_max);
  const double wsum = static_cast<double>(fft_size) / 2.0;  // sum of a periodic Hann window
  FeatureSequence out(spec.frames, config.bands, FeatureKind::Mel);
#pragma omp parallel
  {
    std::vector<double> mag(spec.bins);
#pragma omp for schedule(static)
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const auto row = spec.row(t);
      for (std::size_t k = 0; k < spec.bins; ++k) mag[k] = std::abs(row[k]) / wsum;
      for (std::size_t b = 0; b < config.bands; ++b) {
        double acc = 0.0;
        for (std::size_t k = 0; k < spec.bins; ++k) acc += fb[b * spec.bins + k] * mag[k];
        out.at(t, b) = log_compress(acc, config.compression);
      }
    }
  }
  return out;
}

FeatureSequence log_mel(const ingest::AudioChunk& chunk, const MelConfig& config) {
  return log_mel(stft(chunk.samples), chunk.sample_rate, config);
}

FeatureSequence superflux_osf(const FeatureSequence& mel, std::size_t lag, std::size_t maxfilter_bands) {
  require(lag >= 1, "superflux: lag must be >= 1");
  require(maxfilter_bands >= 1, "superflux: max filter needs at least one band");
  FeatureSequence osf(mel.frames, 1, FeatureKind::Osf, mel.hop_s);
  const long reach = static_cast<long>(maxfilter_bands / 2);
  const long bands = static_cast<long>(mel.dim);
  for (std::size_t t = lag; t < mel.frames; ++t) {
    double acc = 0.0;
    for (long b = 0; b < bands; ++b) {
      double ref = -std::numeric_limits<double>::infinity();
      for (long j = std::max(0L, b - reach); j <= std::min(bands - 1, b + reach); ++j)
        ref = std::max(ref, mel.at(t - lag, static_cast<std::size_t>(j)));
      acc += std::max(0.0, mel.at(t, static_cast<std::size_t>(b)) - ref);
    }
    osf.at(t, 0) = acc;
  }
  return osf;
}

std::size_t highpass_window_frames(double window_s, double hop_s) {
  require(window_s > 0 && hop_s > 0, "highpass: window and hop must be positive");
  const auto w = static_cast<std::size_t>(std::llround(window_s / hop_s));
  return std::max<std::size_t>(1, w | 1U);
}

FeatureSequence highpass(const FeatureSequence& osf, double window_s) {
  require(osf.dim == 1, "highpass: expects a single-channel OSF");
  const std::size_t w = highpass_window_frames(window_s, osf.hop_s);
  const long c = static_cast<long>(w / 2);
  const long n = static_cast<long>(osf.frames);
  FeatureSequence out(osf.frames, 1, FeatureKind::Osf, osf.hop_s);
  for (long t = 0; t < n; ++t) {
    double acc = 0.0;
    for (long j = -c; j <= c; ++j) acc += osf.values[static_cast<std::size_t>(((t + j) % n + n) % n)];
    out.values[static_cast<std::size_t>(t)] = osf.values[static_cast<std::size_t>(t)] - acc / static_cast<double>(w);
  }
  return out;
}

void l2_normalize_rows(FeatureSequence& feat) {
  for (std::size_t t = 0; t < feat.frames; ++t) {
    auto row = feat.row(t);
    double s = 0.0;
    for (double v : row) s += v * v;
    if (s <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (double& v : row) v *= inv;
  }
}

FeatureSequence lag_stack(const FeatureSequence& feat, std::span<const std::size_t> lags) {
  require(!lags.empty(), "lag_stack: need at least one lag");
  FeatureSequence out(feat.frames, feat.dim * lags.size(), FeatureKind::Stacked, feat.hop_s);
  for (std::size_t t = 0; t < feat.frames; ++t) {
    for (std::size_t l = 0; l < lags.size(); ++l) {
      const std::size_t src = t >= lags[l] ? t - lags[l] : 0;
      std::copy_n(feat.values.begin() + static_cast<long>(src * feat.dim), feat.dim,
                  out.values.begin() + static_cast<long>(t * out.dim + l * feat.dim));
    }
  }
  return out;
}

FeatureSequence mfcc_from_mel(const FeatureSequence& mel, std::size_t n_coeffs) {
  require(n_coeffs >= 1 && n_coeffs <= mel.dim, "mfcc: n_coeffs must be in [1, bands]");
  const std::size_t bands = mel.dim;
  std::vector<double> basis(n_coeffs * bands);
  for (std::size_t k = 0; k < n_coeffs; ++k) {
    const double s = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(bands));
    for (std::size_t b = 0; b < bands; ++b)
      basis[k * bands + b] =
          s * std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(b) + 0.5) /
                       static_cast<double>(bands));
  }
  FeatureSequence out(mel.frames, n_coeffs, FeatureKind::Mfcc, mel.hop_s);
  for (std::size_t t = 0; t < mel.frames; ++t)
    for (std::size_t k = 0; k < n_coeffs; ++k) {
      double acc = 0.0;
      for (std::size_t b = 0; b < bands; ++b) acc += basis[k * bands + b] * mel.at(t, b);
      out.at(t, k) = acc;
    }
  return out;
}

FeatureSequence mfcc(const ingest::AudioChunk& chunk, std::size_t n_coeffs) {
  return mfcc_from_mel(log_mel(chunk), n_coeffs);
}

InputFeature input_feature_from_string(const std::string& name) {
  if (name == "mel") return InputFeature::Mel;
  if (name == "chroma-stft") return InputFeature::ChromaStft;
  if (name == "chroma-vqt") return InputFeature::ChromaVqt;
  if (name == "mfcc") return InputFeature::Mfcc;
  fail(ErrorKind::InvalidArgument, "unknown feature '" + name + "' (mel|chroma-stft|chroma-vqt|mfcc)");
}

std::string to_string(InputFeature f) {
  switch (f) {
    case InputFeature::Mel: return "mel";
    case InputFeature::ChromaStft: return "chroma-stft";
    case InputFeature::ChromaVqt: return "chroma-vqt";
    case InputFeature::Mfcc: return "mfcc";
  }
  return "mel";
}

FeatureSequence compute_feature(const ingest::AudioChunk& chunk, InputFeature which) {
  switch (which) {
    case InputFeature::Mel: return log_mel(chunk);
    case InputFeature::ChromaStft: return chroma_stft(chunk);
    case InputFeature::ChromaVqt: return chroma_vqt(chunk);
    case InputFeature::Mfcc: return mfcc(chunk, 20);
  }
  return log_mel(chunk);
}

}  // namespace kdmhl::dsp
