#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "cli_run.hpp"
#include "helpers.hpp"
#include "kdmhl/dsp.hpp"
#include "kdmhl/ingest.hpp"

using testutil::run_cli;
using testutil::slurp;
namespace fs = std::filesystem;

namespace {
std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}
}  // namespace

TEST_CASE("cli exit codes") {
  testutil::TempDir d("cli_exit");
  CHECK(run_cli(d.path, "config") == 0);
  CHECK(run_cli(d.path, "--tau -1 config") == 2);
  CHECK(slurp(d.path / "last.err").find("error[invalid-config]") == 0);
  CHECK(run_cli(d.path, "--set nope.key=1 config") == 2);
  CHECK(run_cli(d.path, "--select top5 config") == 2);
  CHECK(run_cli(d.path, "--features spectrogram config") == 2);
  CHECK(run_cli(d.path, "frobnicate") == 2);
  CHECK(run_cli(d.path, "eval missing_a missing_b") == 3);
  CHECK(run_cli(d.path, "plp missing.wav -o x") == 3);
  CHECK(run_cli(d.path, "--config missing.cfg config") == 3);
  std::ofstream(d.path / "junk.wav") << "not a wav file at all";
  const int rc = run_cli(d.path, "plp junk.wav -o x");
  CHECK(rc != 0);
  CHECK(rc != 3);
}

TEST_CASE("cli config round trip") {
  testutil::TempDir d("cli_cfg");
  REQUIRE(run_cli(d.path, "--seed 7 --set scoring.tau=0.2 config -o a.cfg") == 0);
  REQUIRE(run_cli(d.path, "--config a.cfg config -o b.cfg") == 0);
  CHECK(slurp(d.path / "a.cfg") == slurp(d.path / "b.cfg"));
  CHECK(slurp(d.path / "a.cfg").find("tau = 0.2") != std::string::npos);
  CHECK(slurp(d.path / "a.cfg").find("seed = 7") != std::string::npos);
}

TEST_CASE("cli mining, scoring, evaluation and decoding") {
  testutil::TempDir d("cli_pipe");
  REQUIRE(run_cli(d.path, "synth -o const --tracks 3 --duration 25") == 0);
  REQUIRE(run_cli(d.path, "synth -o change --tracks 3 --duration 25 --tempo-change 1.5") == 0);

  REQUIRE(run_cli(d.path, "mine const -o kept.jsonl") == 0);
  const auto kept = read_jsonl(d.path / "kept.jsonl");
  CHECK(kept.size() == 3);
  REQUIRE(run_cli(d.path, "mine change -o rej.jsonl") == 0);
  CHECK(read_jsonl(d.path / "rej.jsonl").empty());
  CHECK(slurp(d.path / "last.err").find("rejected change-000") != std::string::npos);

  REQUIRE(run_cli(d.path, "--select 3wta score kept.jsonl -o audit.jsonl --triplets trip.jsonl") == 0);
  const auto audit = read_jsonl(d.path / "audit.jsonl");
  CHECK(audit.size() == 3 * 3);
  for (const auto& a : audit) {
    CHECK(a["scores"].size() == 10);
    CHECK(a["winners"].size() == 3);
  }
  CHECK(!read_jsonl(d.path / "trip.jsonl").empty());

  REQUIRE(run_cli(d.path, "eval const const -o eval.json") == 0);
  const auto ev = nlohmann::json::parse(slurp(d.path / "eval.json"));
  const auto table = slurp(d.path / "last.out");
  CHECK(table.find("aggregate   1.0000   1.0000   1.0000") != std::string::npos);
  CHECK(ev.dump().find("const-000") != std::string::npos);

  REQUIRE(run_cli(d.path, "plp const/const-000.wav -o p0") == 0);
  const auto plp = nlohmann::json::parse(slurp(d.path / "p0.plp.json"));
  CHECK(!plp["peaks"].empty());
  const auto mel = kdmhl::dsp::read_feature_dump(d.path / "p0.mel");
  CHECK(mel.dim == 128);

  // one-column activation dump with spikes at known frames
  kdmhl::dsp::FeatureSequence act(200, 1, kdmhl::dsp::FeatureKind::Synthetic);
  for (std::size_t t : {20u, 45u, 70u, 95u}) act.values[t] = 0.9;
  kdmhl::dsp::write_feature_dump(d.path / "act", act);
  REQUIRE(run_cli(d.path, "decode act -o act.beats") == 0);
  const auto ann = kdmhl::ingest::parse_beats(d.path / "act.beats");
  REQUIRE(ann.events.size() == 4);
  CHECK(ann.events[0].time == doctest::Approx(kdmhl::dsp::frame_time(20)));
  REQUIRE(run_cli(d.path, "losses act act.beats -o l.json") == 0);
  const auto l = nlohmann::json::parse(slurp(d.path / "l.json"));
  CHECK(l["beat"]["weighted_bce"].get<double>() > 0);
  CHECK(l["beat"]["alpha"].get<double>() == doctest::Approx(196.0 / 4.0));
}

TEST_CASE("cli training writes checkpoints and logs") {
  testutil::TempDir d("cli_train");
  REQUIRE(run_cli(d.path, "synth -o src --tracks 2 --duration 21") == 0);
  REQUIRE(run_cli(d.path, "mine src -o m.jsonl") == 0);
  REQUIRE(run_cli(d.path, "--set ssl.steps=3 --set ssl.batch=2 train m.jsonl -o ck") == 0);
  for (const char* f : {"ck.json", "ck.f64", "ck.log.csv"}) CHECK(fs::exists(d.path / f));
  fs::create_directories(d.path / "pseudo");
  for (const auto& m : read_jsonl(d.path / "m.jsonl")) {
    std::ofstream out(d.path / "pseudo" / (m["source_id"].get<std::string>() + "-0.beats"));
    for (int i = 0; i < 30; ++i) out << 0.3 + 0.6 * i << "\n";
  }
  REQUIRE(run_cli(d.path, "--set ssl.steps=3 --set ssl.batch=2 selftrain m.jsonl pseudo -o sk") == 0);
  CHECK(fs::exists(d.path / "sk.json"));
}
