#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kdmhl/error.hpp"
#include "kdmhl/ingest.hpp"

namespace kdmhl::ingest {
namespace {

bool parse_double(std::string_view token, double& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

std::vector<double> BeatAnnotation::times() const {
  std::vector<double> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.time);
  return out;
}

std::vector<double> BeatAnnotation::downbeat_times() const {
  std::vector<double> out;
  for (const auto& e : events) {
    if (e.metrical_position == 1) out.push_back(e.time);
  }
  return out;
}

BeatAnnotation parse_beats(std::istream& in) {
  BeatAnnotation annotation;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string time_token, position_token;
    if (!(fields >> time_token) || time_token.front() == '#') continue;
    BeatEvent event;
    if (!parse_double(time_token, event.time)) {
      fail(ErrorKind::BadData, "line " + std::to_string(line_no) + ": non-numeric time '" + time_token + "'");
    }
    if (fields >> position_token) {
      double position = 0.0;
      if (!parse_double(position_token, position) || position < 0 || std::floor(position) != position) {
        fail(ErrorKind::BadData,
             "line " + std::to_string(line_no) + ": bad metrical position '" + position_token + "'");
      }
      event.metrical_position = static_cast<int>(position);
    }
    if (!annotation.events.empty() && event.time <= annotation.events.back().time) {
      fail(ErrorKind::BadData, "line " + std::to_string(line_no) + ": times must be strictly increasing");
    }
    annotation.events.push_back(event);
  }
  return annotation;
}

BeatAnnotation parse_beats(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingInput, "no such file: " + path.string());
  std::ifstream in(path);
  try {
    return parse_beats(in);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

std::string serialize_beats(const BeatAnnotation& annotation) {
  std::string out;
  char buf[64];
  for (const auto& e : annotation.events) {
    if (e.metrical_position > 0) {
      std::snprintf(buf, sizeof buf, "%.6f\t%d\n", e.time, e.metrical_position);
    } else {
      std::snprintf(buf, sizeof buf, "%.6f\n", e.time);
    }
    out += buf;
  }
  return out;
}

void write_beats(const std::filesystem::path& path, const BeatAnnotation& annotation) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::BadData, "cannot write " + path.string());
  out << serialize_beats(annotation);
}

}  // namespace kdmhl::ingest
