#include <doctest.h>

#include <array>
#include <functional>

#include "helpers.hpp"
#include "metric_oracles.hpp"
#include "kdmhl/ingest.hpp"
#include "kdmhl/metrics.hpp"

using namespace kdmhl;
using namespace kdmhl::metrics;

using namespace testutil;

TEST_CASE("trim examples") {
  CHECK(trim(std::vector<double>{1.0, 4.9, 5.1}) == std::vector<double>{5.1});
  CHECK(trim(std::vector<double>{5.0, 6, 7}) == std::vector<double>{5.0, 6, 7});
  CHECK(trim(std::vector<double>{}).empty());
}

TEST_CASE("f-measure examples") {
  const auto ref = grid(5, 0.5, 20);
  CHECK(f_measure(ref, ref) == 1.0);
  auto shifted = ref;
  for (auto& t : shifted) t += 0.1;
  CHECK(f_measure(shifted, ref) == 0.0);
  const auto dbl = grid(5, 0.25, 20);
  CHECK(std::abs(f_measure(dbl, ref) - 2.0 / 3.0) < 1e-12);
  CHECK(f_measure({}, {}) == 1.0);
  CHECK(f_measure({}, ref) == 0.0);
  CHECK(f_measure(ref, {}) == 0.0);
  // closed tolerance: exactly 70 ms still matches
  CHECK(f_measure(std::vector<double>{10.07}, std::vector<double>{10.0}) == 1.0);
  CHECK(f_measure(std::vector<double>{10.0701}, std::vector<double>{10.0}) == 0.0);
}

TEST_CASE("continuity examples") {
  const auto ref = grid(5, 0.5, 30);
  CHECK(*cmlt(ref, ref) == 1.0);
  CHECK(*amlt(ref, ref) == 1.0);
  auto off = ref;
  for (auto& t : off) t += 0.25;
  off.pop_back();
  CHECK(*cmlt(off, ref) == 0.0);
  CHECK(*amlt(off, ref) == doctest::Approx(1.0));
  const auto dbl = grid(5, 0.25, 30);
  CHECK(*cmlt(dbl, ref) < 0.5);
  CHECK(*amlt(dbl, ref) == doctest::Approx(1.0).epsilon(0.02));
  const auto half = grid(5, 1.0, 30);
  CHECK(*amlt(half, ref) == doctest::Approx(1.0).epsilon(0.02));
  CHECK_FALSE(cmlt(ref, std::vector<double>{6.0}).has_value());
  CHECK_FALSE(amlt(ref, std::vector<double>{}).has_value());
  CHECK(*cmlt(std::vector<double>{6.0}, ref) == 0.0);
  CHECK(reference_variants(ref, AmltVariants::MirEval).size() == 5);
  CHECK(reference_variants(ref, AmltVariants::Extended).size() == 9);
}

TEST_CASE("metrics agree exactly with the oracles on 100 jittered tracks") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto ref = trim(jittered_track(rng));
    const auto est = trim(jittered_track(rng).size() % 2 ? jittered_track(rng) : ref);
    auto noisy = est;
    std::normal_distribution<double> jit(0, 0.04);
    for (auto& t : noisy) t += jit(rng);
    std::sort(noisy.begin(), noisy.end());
    for (const std::vector<double>* e : std::array<const std::vector<double>*, 2>{&est, &noisy}) {
      CHECK(f_measure(*e, ref) == oracle_f(*e, ref, 0.07));
      CHECK(match_events(*e, ref).matched == kuhn_matches(*e, ref, 0.07));
      CHECK(*cmlt(*e, ref) == oracle_total(*e, ref));
      double best = 0;
      for (const auto& v : oracle_variants(ref)) best = std::max(best, oracle_total(*e, v));
      CHECK(*amlt(*e, ref) == best);
      const double c = *cmlt(*e, ref), a = *amlt(*e, ref);
      CHECK(0.0 <= c);
      CHECK(c <= a);
      CHECK(a <= 1.0);
    }
  }
}

TEST_CASE("time-shift invariance and symmetric perfect case") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const auto ref = jittered_track(rng), est = jittered_track(rng);
    auto rs = ref, es = est;
    for (auto& t : rs) t += 16.0;
    for (auto& t : es) t += 16.0;
    EvalOptions opt;
    const auto a = evaluate_track("a", est, ref, opt);
    opt.trim = 5.0 + 16.0;
    const auto b = evaluate_track("b", es, rs, opt);
    CHECK(a.f_measure == doctest::Approx(b.f_measure).epsilon(1e-12));
    CHECK(*a.cmlt == doctest::Approx(*b.cmlt).epsilon(1e-12));
    CHECK(*a.amlt == doctest::Approx(*b.amlt).epsilon(1e-12));
    const auto x = trim(ref);
    CHECK(f_measure(x, x) == 1.0);
    CHECK(*cmlt(x, x) == 1.0);
    CHECK(*amlt(x, x) == 1.0);
  }
}

TEST_CASE("corpus evaluation: pairing, aggregation, downbeats and reports") {
  testutil::TempDir dir("eval");
  std::filesystem::create_directories(dir / "est");
  std::filesystem::create_directories(dir / "ref");
  ingest::BeatAnnotation a;
  int k = 0;
  for (double t : grid(0.5, 0.5, 20)) a.events.push_back({t, k++ % 4 + 1});
  ingest::write_beats(dir.path / "ref" / "one.beats", a);
  ingest::write_beats(dir.path / "est" / "one.beats", a);
  ingest::write_beats(dir.path / "ref" / "two.beats", a);
  ingest::write_beats(dir.path / "est" / "two.beats", ingest::BeatAnnotation{});
  ingest::write_beats(dir.path / "ref" / "lonely.beats", a);
  ingest::write_beats(dir.path / "est" / "orphan.beats", a);

  const auto rep = evaluate_corpus(dir / "est", dir / "ref", EvalOptions{});
  REQUIRE(rep.tracks.size() == 2);
  CHECK(rep.warnings.size() == 2);
  CHECK(rep.tracks[0].name == "one");
  CHECK(rep.tracks[0].f_measure == 1.0);
  CHECK(rep.tracks[1].f_measure == 0.0);
  CHECK(rep.total.f_measure == 0.5);
  CHECK(rep.total.tracks == 2);
  CHECK(report_json(rep).find("\"f_measure\"") != std::string::npos);
  CHECK(report_table(rep).find("aggregate") != std::string::npos);

  EvalOptions down;
  down.downbeat = true;
  const auto d = evaluate_corpus(dir / "est", dir / "ref", down);
  CHECK(d.tracks[0].f_measure == 1.0);
  CHECK(d.tracks[0].matching.n_ref == trim(a.downbeat_times()).size());
}
