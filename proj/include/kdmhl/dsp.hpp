#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kdmhl/ingest.hpp"

namespace kdmhl::dsp {

// Frame grid shared by every pipeline feature: 1024-sample Hann windows every
// 320 samples (20 ms) at 16 kHz, no edge padding.
inline constexpr std::size_t kWindow = 1024;
inline constexpr std::size_t kHop = 320;
inline constexpr double kHopSeconds = 0.020;
inline constexpr std::size_t kMelBands = 128;

enum class FeatureKind { Mel, ChromaStft, ChromaVqt, Mfcc, Osf, Stacked, Learned, Synthetic };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

/// T x d row-major matrix of per-frame feature vectors.
struct FeatureSequence {
  std::size_t frames = 0;
  std::size_t dim = 0;
  double hop_s = kHopSeconds;
  FeatureKind kind = FeatureKind::Synthetic;
  std::vector<double> values;

  FeatureSequence() = default;
  FeatureSequence(std::size_t t, std::size_t d, FeatureKind k, double hop = kHopSeconds)
      : frames(t), dim(d), hop_s(hop), kind(k), values(t * d, 0.0) {}

  std::span<const double> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
  std::span<double> row(std::size_t t) { return {values.data() + t * dim, dim}; }
  double& at(std::size_t t, std::size_t d) { return values[t * dim + d]; }
  double at(std::size_t t, std::size_t d) const { return values[t * dim + d]; }

  bool all_finite() const;
};

/// Number of frames for `samples` input samples (0 if shorter than a window).
std::size_t frame_count(std::size_t samples, std::size_t win = kWindow, std::size_t hop = kHop);

/// Frames are time-stamped at the centre of their analysis window.
inline constexpr double kFrameCentre = 0.032;

/// t * hop_s + kFrameCentre.
double frame_time(std::size_t t, double hop_s = kHopSeconds);
std::size_t time_to_frame(double seconds, double hop_s = kHopSeconds);

// --- STFT ----------------------------------------------------------------------

struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;  // frames x bins

  std::span<const std::complex<double>> row(std::size_t t) const {
    return {values.data() + t * bins, bins};
  }
};

std::vector<double> hann_window(std::size_t n);  // periodic

/// Hann-windowed STFT, T = 1 + floor((N - win)/hop), F = win/2 + 1.
Spectrogram stft(std::span<const float> samples, std::size_t win = kWindow, std::size_t hop = kHop);

// --- mel / onset features ----------------------------------------------------------

struct MelConfig {
  std::size_t bands = kMelBands;
  double f_min = 30.0;
  double f_max = 8000.0;
  double compression = 1000.0;
};

/// Triangular mel filterbank (Slaney mel scale, peak-normalised), bands x bins.
std::vector<double> mel_filterbank(std::size_t bands, std::size_t fft_size, double sample_rate,
                                   double f_min, double f_max);

/// ln(1 + c*x) compression used for the mel input.
inline double log_compress(double x, double c = 1000.0) { return std::log1p(c * x); }

FeatureSequence log_mel(const ingest::AudioChunk& chunk, const MelConfig& config = {});
FeatureSequence log_mel(const Spectrogram& spec, double sample_rate, const MelConfig& config = {});

/// Spectral flux with a max filter across `maxfilter_bands` adjacent bands
/// of the reference frame `lag` frames back; half-wave rectified, summed.
FeatureSequence superflux_osf(const FeatureSequence& mel, std::size_t lag = 1,
                              std::size_t maxfilter_bands = 3);

/// Subtracts a centred moving average (odd window, circular edges).
FeatureSequence highpass(const FeatureSequence& osf, double window_s = 1.0);
std::size_t highpass_window_frames(double window_s, double hop_s);

// --- PLP -------------------------------------------------------------------------

struct PlpConfig {
  double tempo_min = 30.0;
  double tempo_max = 600.0;
  double tempo_step = 1.0;
  double window_s = 6.0;      // tempogram Hann window
  double kernel_s = 3.0;      // synthesized kernel length
  double peak_rel_threshold = 0.01;
  std::size_t min_peak_distance = 3;
  // Harmonic-error correction: prefer tempo/d for the largest d in
  // [2, subharmonic_max_divisor] whose local maximum reaches this fraction of
  // the best magnitude.
  double subharmonic_ratio = 0.75;
  double subharmonic_search = 0.03;
  int subharmonic_max_divisor = 8;
};

struct PlpResult {
  std::vector<double> curve;          // half-wave rectified
  std::vector<std::size_t> peaks;     // strictly increasing frame indices
  std::vector<double> local_tempo;    // BPM chosen per frame
  double hop_s = kHopSeconds;
};

PlpResult plp(const FeatureSequence& osf, const PlpConfig& config = {});

/// Strict local maxima >= rel_threshold * max, thinned greedily (highest
/// first) so that kept peaks are at least `min_distance` frames apart.
std::vector<std::size_t> pick_curve_peaks(std::span<const double> curve, double rel_threshold,
                                          std::size_t min_distance);

/// Mel -> Superflux -> high-pass -> PLP.
struct OnsetPipelineConfig {
  MelConfig mel{};
  std::size_t flux_lag = 1;
  std::size_t flux_maxfilter_bands = 3;
  double highpass_window_s = 1.0;
  PlpConfig plp{};
};
PlpResult plp_from_audio(const ingest::AudioChunk& chunk, const OnsetPipelineConfig& config = {});

// --- pitch / timbre features ------------------------------------------------------

FeatureSequence chroma_stft(const ingest::AudioChunk& chunk);
FeatureSequence chroma_stft(const Spectrogram& spec, double sample_rate);

struct VqtConfig {
  double f_min = 32.703195662574829;  // C1
  std::size_t octaves = 7;            // C1 .. B7 (C8 edge)
  std::size_t bins_per_octave = 12;
  double gamma = 24.0;                // Hz added to each bandwidth
};
/// Variable-Q magnitudes, frames x (octaves*bins_per_octave), frame-aligned with stft().
FeatureSequence vqt(const ingest::AudioChunk& chunk, const VqtConfig& config = {});
FeatureSequence chroma_vqt(const ingest::AudioChunk& chunk, const VqtConfig& config = {});

FeatureSequence mfcc(const ingest::AudioChunk& chunk, std::size_t n_coeffs = 20);
FeatureSequence mfcc_from_mel(const FeatureSequence& mel, std::size_t n_coeffs);

/// Per-frame L2 normalisation; zero rows stay zero.
void l2_normalize_rows(FeatureSequence& feat);

/// Row t = concat(feat[max(t - lag, 0)] for lag in lags).
FeatureSequence lag_stack(const FeatureSequence& feat, std::span<const std::size_t> lags);

/// Feature selected on the command line.
enum class InputFeature { Mel, ChromaStft, ChromaVqt, Mfcc };
InputFeature input_feature_from_string(const std::string& name);
std::string to_string(InputFeature f);
FeatureSequence compute_feature(const ingest::AudioChunk& chunk, InputFeature which);

// --- feature dump ----------------------------------------------------------------
// `<base>.json` header {kind, hop_s, T, d_v, dtype, byte_order, payload} plus a
// row-major little-endian float32 payload in `<base>.f32`.

void write_feature_dump(const std::filesystem::path& base, const FeatureSequence& feat);
FeatureSequence read_feature_dump(const std::filesystem::path& base);

}  // namespace kdmhl::dsp
