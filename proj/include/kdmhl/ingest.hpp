#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace kdmhl::ingest {

inline constexpr double kPipelineRate = 16000.0;

/// Mono audio excerpt. `offset` is the position of sample 0 within the source
/// track, in seconds.
struct AudioChunk {
  std::vector<float> samples;
  double sample_rate = kPipelineRate;
  std::string source_id;
  double offset = 0.0;

  double duration() const {
    return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// --- WAV -------------------------------------------------------------------

struct WavData {
  std::vector<float> samples;  // channel-averaged, [-1, 1]
  double sample_rate = 0.0;
  int channels = 0;
  int bits_per_sample = 0;
  bool is_float = false;
};

/// Reads PCM WAV (16/24/32-bit integer or 32-bit float, any channel count).
/// Channels are averaged. Throws kdmhl::Error on unreadable, unsupported or
/// empty files.
WavData read_wav(const std::filesystem::path& path);

enum class WavEncoding { Pcm16, Float32 };
void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               double sample_rate, WavEncoding encoding = WavEncoding::Pcm16);

// --- resampling --------------------------------------------------------------

struct ResamplerConfig {
  double kaiser_beta = 12.0;
  int taps_per_phase = 64;
};

/// Windowed-sinc (Kaiser) sample-rate conversion. Identity when rates match.
std::vector<float> resample(std::span<const float> input, double from_rate, double to_rate,
                            const ResamplerConfig& config = {});

/// Reads a WAV file, mixes to mono and resamples to `target_rate`.
AudioChunk load_audio(const std::filesystem::path& path, double target_rate = kPipelineRate);

// --- chunking ----------------------------------------------------------------

/// Non-overlapping chunks of exactly round(length_s * rate) samples, at most
/// `max_per_track`, picked evenly among the candidate offsets 0, L, 2L, ...
std::vector<AudioChunk> cut_chunks(const AudioChunk& track, double length_s,
                                   std::size_t max_per_track);

// --- beat annotations --------------------------------------------------------

struct BeatEvent {
  double time = 0.0;
  int metrical_position = 0;  // 1 = downbeat, 0 = unknown
};

struct BeatAnnotation {
  std::vector<BeatEvent> events;

  std::vector<double> times() const;
  std::vector<double> downbeat_times() const;
};

BeatAnnotation parse_beats(std::istream& in);
BeatAnnotation parse_beats(const std::filesystem::path& path);
std::string serialize_beats(const BeatAnnotation& annotation);
void write_beats(const std::filesystem::path& path, const BeatAnnotation& annotation);

// --- chunk manifest (JSON lines) ---------------------------------------------

struct ManifestEntry {
  std::string source_id;
  double offset = 0.0;
  double duration = 0.0;
  std::string audio;                 // path relative to the manifest directory
  std::vector<std::size_t> plp_peaks;  // optional, empty when not computed
};

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace kdmhl::ingest
