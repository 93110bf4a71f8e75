#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "kdmhl/error.hpp"
#include "kdmhl/ingest.hpp"

namespace kdmhl::ingest {
namespace {

double kaiser(double t, double beta) {
  if (std::abs(t) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - t * t)) / std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

// Lowpass prototype evaluated at offset d (input samples) from the output
// position. `scale` = min(1, to/from) moves the cutoff below the new Nyquist.
double kernel(double d, double scale, double half_width, double beta) {
  return scale * sinc(scale * d) * kaiser(d / half_width, beta);
}

bool is_integral(double v) { return v > 0 && std::floor(v) == v && v < 1e9; }

}  // namespace

std::vector<float> resample(std::span<const float> input, double from_rate, double to_rate,
                            const ResamplerConfig& config) {
  require(from_rate > 0 && to_rate > 0, "resample: rates must be positive");
  if (from_rate == to_rate) return {input.begin(), input.end()};
  if (input.empty()) return {};

  const double ratio = to_rate / from_rate;
  const double scale = std::min(1.0, ratio);
  const double half_width = 0.5 * config.taps_per_phase / scale;
  const long reach = static_cast<long>(std::ceil(half_width));
  const auto n_in = static_cast<long>(input.size());
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(input.size()) * ratio));
  std::vector<float> output(n_out);

  auto accumulate = [&](long base, std::span<const double> taps) {
    double acc = 0.0;
    for (long j = -reach + 1; j <= reach; ++j) {
      const long k = base + j;
      if (k >= 0 && k < n_in) acc += taps[static_cast<std::size_t>(j + reach - 1)] * input[static_cast<std::size_t>(k)];
    }
    return acc;
  };

  const std::size_t width = static_cast<std::size_t>(2 * reach);
  if (is_integral(from_rate) && is_integral(to_rate)) {
    const auto from = static_cast<long long>(from_rate);
    const auto to = static_cast<long long>(to_rate);
    const long long g = std::gcd(from, to);
    const long long up = to / g;    // phases
    const long long down = from / g;
    if (up <= 4096) {
      // Exact polyphase bank, each phase normalised to unit DC gain.
      std::vector<double> bank(static_cast<std::size_t>(up) * width);
      for (long long p = 0; p < up; ++p) {
        const double frac = static_cast<double>(p) / static_cast<double>(up);
        double sum = 0.0;
        for (long j = -reach + 1; j <= reach; ++j) {
          const double h = kernel(frac - static_cast<double>(j), scale, half_width, config.kaiser_beta);
          bank[static_cast<std::size_t>(p) * width + static_cast<std::size_t>(j + reach - 1)] = h;
          sum += h;
        }
        for (std::size_t j = 0; j < width; ++j) bank[static_cast<std::size_t>(p) * width + j] /= sum;
      }
#pragma omp parallel for schedule(static)
      for (std::size_t n = 0; n < n_out; ++n) {
        const long long pos = static_cast<long long>(n) * down;
        const long base = static_cast<long>(pos / up);
        const auto phase = static_cast<std::size_t>(pos % up);
        output[n] = static_cast<float>(accumulate(base, std::span<const double>(bank).subspan(phase * width, width)));
      }
      return output;
    }
  }

  // Arbitrary ratio: evaluate the kernel per output sample.
#pragma omp parallel for schedule(static)
  for (std::size_t n = 0; n < n_out; ++n) {
    const double x = static_cast<double>(n) / ratio;
    const long base = static_cast<long>(std::floor(x));
    const double frac = x - static_cast<double>(base);
    std::vector<double> taps(width);
    double sum = 0.0;
    for (long j = -reach + 1; j <= reach; ++j) {
      const double h = kernel(frac - static_cast<double>(j), scale, half_width, config.kaiser_beta);
      taps[static_cast<std::size_t>(j + reach - 1)] = h;
      sum += h;
    }
    for (double& h : taps) h /= sum;
    output[n] = static_cast<float>(accumulate(base, taps));
  }
  return output;
}

AudioChunk load_audio(const std::filesystem::path& path, double target_rate) {
  WavData wav = read_wav(path);
  AudioChunk chunk;
  chunk.source_id = path.stem().string();
  chunk.sample_rate = target_rate;
  chunk.samples = resample(wav.samples, wav.sample_rate, target_rate);
  for (float& s : chunk.samples) s = std::clamp(s, -1.0f, 1.0f);
  if (chunk.samples.empty()) fail(ErrorKind::BadData, path.string() + ": empty audio after resampling");
  return chunk;
}

std::vector<AudioChunk> cut_chunks(const AudioChunk& track, double length_s, std::size_t max_per_track) {
  require(length_s > 0.0, "cut_chunks: length must be positive");
  const auto length = static_cast<std::size_t>(std::llround(length_s * track.sample_rate));
  if (length == 0 || max_per_track == 0) return {};
  const std::size_t candidates = track.samples.size() / length;
  const std::size_t count = std::min(candidates, max_per_track);

  std::vector<AudioChunk> chunks;
  chunks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t slot = i;
    if (count < candidates) {
      slot = count == 1 ? 0
                        : static_cast<std::size_t>(std::floor(
                              static_cast<double>(i) * static_cast<double>(candidates - 1) /
                                  static_cast<double>(count - 1) + 0.5));
    }
    AudioChunk chunk;
    chunk.sample_rate = track.sample_rate;
    chunk.source_id = track.source_id;
    chunk.offset = track.offset + static_cast<double>(slot * length) / track.sample_rate;
    const auto first = track.samples.begin() + static_cast<std::ptrdiff_t>(slot * length);
    chunk.samples.assign(first, first + static_cast<std::ptrdiff_t>(length));
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::BadData, "cannot write " + path.string());
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["source_id"] = e.source_id;
    j["offset"] = e.offset;
    j["duration"] = e.duration;
    j["audio"] = e.audio;
    if (!e.plp_peaks.empty()) j["plp_peaks"] = e.plp_peaks;
    out << j.dump() << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingInput, "no such manifest: " + path.string());
  std::ifstream in(path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.source_id = j.at("source_id").get<std::string>();
      e.offset = j.at("offset").get<double>();
      e.duration = j.at("duration").get<double>();
      e.audio = j.at("audio").get<std::string>();
      if (j.contains("plp_peaks")) e.plp_peaks = j.at("plp_peaks").get<std::vector<std::size_t>>();
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorKind::BadData, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return entries;
}

}  // namespace kdmhl::ingest
