#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "kdmhl/dsp.hpp"
#include "kdmhl/error.hpp"

namespace kdmhl::dsp {
namespace {

std::filesystem::path with_suffix(std::filesystem::path base, const char* ext) {
  base += ext;
  return base;
}

}  // namespace

void write_feature_dump(const std::filesystem::path& base, const FeatureSequence& feat) {
  static_assert(std::endian::native == std::endian::little, "feature dumps assume a little-endian host");
  const auto payload = with_suffix(base, ".f32");
  nlohmann::ordered_json header;
  header["kind"] = to_string(feat.kind);
  header["hop_s"] = feat.hop_s;
  header["T"] = feat.frames;
  header["d_v"] = feat.dim;
  header["dtype"] = "float32";
  header["byte_order"] = "little";
  header["payload"] = payload.filename().string();

  std::ofstream js(with_suffix(base, ".json"));
  if (!js) fail(ErrorKind::MissingInput, "cannot write " + with_suffix(base, ".json").string());
  js << header.dump(2) << '\n';

  std::vector<float> data(feat.values.begin(), feat.values.end());
  std::ofstream bin(payload, std::ios::binary);
  if (!bin) fail(ErrorKind::MissingInput, "cannot write " + payload.string());
  bin.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
}

FeatureSequence read_feature_dump(const std::filesystem::path& base) {
  const auto header_path = with_suffix(base, ".json");
  std::ifstream js(header_path);
  if (!js) fail(ErrorKind::MissingInput, "cannot open " + header_path.string());
  nlohmann::json header;
  try {
    js >> header;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::BadData, header_path.string() + ": " + e.what());
  }
  if (header.value("dtype", "") != "float32" || header.value("byte_order", "") != "little")
    fail(ErrorKind::Unsupported, header_path.string() + ": only little-endian float32 payloads");

  FeatureSequence feat(header.at("T").get<std::size_t>(), header.at("d_v").get<std::size_t>(),
                       feature_kind_from_string(header.at("kind").get<std::string>()),
                       header.at("hop_s").get<double>());
  const auto payload = base.parent_path() / header.at("payload").get<std::string>();
  std::ifstream bin(payload, std::ios::binary);
  if (!bin) fail(ErrorKind::MissingInput, "cannot open " + payload.string());
  std::vector<float> data(feat.values.size());
  bin.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (bin.gcount() != static_cast<std::streamsize>(data.size() * sizeof(float)))
    fail(ErrorKind::BadData, payload.string() + ": payload shorter than header claims");
  std::copy(data.begin(), data.end(), feat.values.begin());
  return feat;
}

}  // namespace kdmhl::dsp
