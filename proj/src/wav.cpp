#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "kdmhl/error.hpp"
#include "kdmhl/ingest.hpp"

namespace kdmhl::ingest {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(b, 2);
}
void put32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

float decode_sample(const unsigned char* p, int bits, bool is_float) {
  if (is_float) {
    std::uint32_t raw = le32(p);
    float f;
    std::memcpy(&f, &raw, sizeof f);
    return f;
  }
  switch (bits) {
    case 16:
      return static_cast<float>(static_cast<std::int16_t>(le16(p)) / 32768.0);
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<float>(v / 8388608.0);
    }
    case 32:
      return static_cast<float>(static_cast<std::int32_t>(le32(p)) / 2147483648.0);
    default:
      return 0.0f;
  }
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingInput, "no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::BadData, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorKind::BadData, path.string() + ": not a RIFF/WAVE file");
  }

  WavData wav;
  std::uint16_t format = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* header = bytes.data() + pos;
    const std::uint32_t size = le32(header + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(header, "fmt ", 4) == 0) {
      if (available < 16) fail(ErrorKind::BadData, path.string() + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      wav.channels = le16(f + 2);
      wav.sample_rate = le32(f + 4);
      wav.bits_per_sample = le16(f + 14);
      if (format == kFormatExtensible) {
        if (available < 26) fail(ErrorKind::BadData, path.string() + ": truncated extensible fmt");
        format = le16(f + 24);
      }
    } else if (std::memcmp(header, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = available;
    }
    pos = body + size + (size & 1u);
  }

  if (format != kFormatPcm && format != kFormatFloat) {
    fail(ErrorKind::Unsupported, path.string() + ": unsupported WAV encoding " + std::to_string(format));
  }
  wav.is_float = format == kFormatFloat;
  const bool bits_ok = wav.is_float ? wav.bits_per_sample == 32
                                    : (wav.bits_per_sample == 16 || wav.bits_per_sample == 24 ||
                                       wav.bits_per_sample == 32);
  if (!bits_ok) {
    fail(ErrorKind::Unsupported,
         path.string() + ": unsupported sample width " + std::to_string(wav.bits_per_sample));
  }
  if (wav.channels < 1 || wav.sample_rate <= 0) fail(ErrorKind::BadData, path.string() + ": bad fmt chunk");
  if (data == nullptr) fail(ErrorKind::BadData, path.string() + ": missing data chunk");

  const std::size_t width = static_cast<std::size_t>(wav.bits_per_sample / 8);
  const std::size_t frame_bytes = width * static_cast<std::size_t>(wav.channels);
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) fail(ErrorKind::BadData, path.string() + ": empty audio");

  wav.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < wav.channels; ++c) {
      acc += decode_sample(data + i * frame_bytes + static_cast<std::size_t>(c) * width,
                           wav.bits_per_sample, wav.is_float);
    }
    wav.samples[i] = std::clamp(static_cast<float>(acc / wav.channels), -1.0f, 1.0f);
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples, double sample_rate,
               WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::BadData, "cannot write " + path.string());
  const bool is_float = encoding == WavEncoding::Float32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(sample_rate));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * (bits / 8));

  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, is_float ? kFormatFloat : kFormatPcm);
  put16(out, 1);
  put32(out, rate);
  put32(out, rate * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  out.write("data", 4);
  put32(out, data_bytes);
  for (float s : samples) {
    if (is_float) {
      std::uint32_t raw;
      std::memcpy(&raw, &s, sizeof raw);
      put32(out, raw);
    } else {
      const double scaled = std::round(std::clamp(static_cast<double>(s), -1.0, 1.0) * 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
  }
}

}  // namespace kdmhl::ingest
