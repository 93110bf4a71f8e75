#include <bit>
#include <fstream>

#include <json.hpp>

#include "kdmhl/error.hpp"
#include "kdmhl/ssl.hpp"

namespace kdmhl::ssl {

void write_checkpoint(const std::filesystem::path& base, const EncoderParams& params, const TrainConfig& config,
                      std::size_t step) {
  static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");
  auto header_path = base;
  header_path += ".json";
  auto blob_path = base;
  blob_path += ".f64";
  const auto& s = params.shape();
  nlohmann::ordered_json j;
  j["shape"] = {{"d_in", s.d_in}, {"d_hidden", s.d_hidden}, {"d_z", s.d_z}, {"d_head", s.d_head}, {"heads", s.heads}};
  j["config"] = {{"learning_rate", config.learning_rate},
                 {"momentum", config.momentum},
                 {"steps", config.steps},
                 {"batch", config.batch},
                 {"winners", config.winners},
                 {"tau", config.tau},
                 {"n_p", config.sampler.n_p},
                 {"n_n", config.sampler.n_n},
                 {"hard_fraction", config.sampler.hard_fraction},
                 {"seed", config.seed},
                 {"mode", config.mode == TrainMode::KdMhl ? "kd_mhl" : "self_training"}};
  j["step"] = step;
  j["count"] = params.size();
  j["dtype"] = "float64";
  j["byte_order"] = "little";
  j["payload"] = blob_path.filename().string();

  std::ofstream h(header_path);
  if (!h) fail(ErrorKind::MissingInput, "cannot write " + header_path.string());
  h << j.dump(2) << '\n';
  std::ofstream b(blob_path, std::ios::binary);
  if (!b) fail(ErrorKind::MissingInput, "cannot write " + blob_path.string());
  b.write(reinterpret_cast<const char*>(params.flat().data()),
          static_cast<std::streamsize>(params.size() * sizeof(double)));
}

EncoderParams read_checkpoint(const std::filesystem::path& base) {
  auto header_path = base;
  header_path += ".json";
  std::ifstream h(header_path);
  if (!h) fail(ErrorKind::MissingInput, "cannot open " + header_path.string());
  nlohmann::json j;
  try {
    h >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::BadData, header_path.string() + ": " + e.what());
  }
  ModelShape s;
  const auto& js = j.at("shape");
  s.d_in = js.at("d_in");
  s.d_hidden = js.at("d_hidden");
  s.d_z = js.at("d_z");
  s.d_head = js.at("d_head");
  s.heads = js.at("heads");
  EncoderParams params(s);
  if (j.at("count").get<std::size_t>() != params.size())
    fail(ErrorKind::BadData, header_path.string() + ": parameter count does not match shape");
  const auto blob_path = base.parent_path() / j.at("payload").get<std::string>();
  std::ifstream b(blob_path, std::ios::binary);
  if (!b) fail(ErrorKind::MissingInput, "cannot open " + blob_path.string());
  b.read(reinterpret_cast<char*>(params.flat().data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (b.gcount() != static_cast<std::streamsize>(params.size() * sizeof(double)))
    fail(ErrorKind::BadData, blob_path.string() + ": truncated parameter blob");
  return params;
}

}  // namespace kdmhl::ssl
