#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "kdmhl/error.hpp"
#include "kdmhl/supervised.hpp"

using namespace kdmhl;
using namespace kdmhl::supervised;

TEST_CASE("widen_targets examples") {
  CHECK(widen_targets(std::vector<int>{0, 0, 1, 0, 0}).weights == std::vector<double>{0, 0.5, 1, 0.5, 0});
  CHECK(widen_targets(std::vector<int>{1, 0, 1}).weights == std::vector<double>{1, 0.5, 1});
  CHECK(widen_targets(std::vector<int>(6, 0)).weights == std::vector<double>(6, 0.0));
  CHECK(widen_targets(std::vector<int>{0, 0, 0, 1, 0, 0, 0}, 2).weights == std::vector<double>{0, 0.5, 0.5, 1, 0.5, 0.5, 0});
  const auto w = widen_targets(std::vector<int>{0, 1, 0, 0, 0, 0, 1, 1, 0});
  CHECK(widen_targets(w.raw).weights == w.weights);
  for (std::size_t t = 0; t < w.weights.size(); ++t)
    if (w.weights[t] == 0.5) CHECK(((t > 0 && w.raw[t - 1]) || (t + 1 < w.raw.size() && w.raw[t + 1])));
  CHECK_THROWS_AS(widen_targets(std::vector<int>{0, 2}), Error);
}

TEST_CASE("weighted_bce examples") {
  const std::vector<int> raw{0, 0, 1, 0, 0, 0, 0, 1, 0, 0};
  const auto tg = widen_targets(raw, 0);
  std::vector<double> good(raw.size()), bad(raw.size());
  for (std::size_t t = 0; t < raw.size(); ++t) {
    good[t] = raw[t] ? 0.999 : 0.001;
    bad[t] = 1.0 - good[t];
  }
  CHECK(weighted_bce(good, tg) < 0.01);
  CHECK(weighted_bce(bad, tg) > weighted_bce(good, tg));
  const std::vector<double> half(8, 0.5);
  CHECK(weighted_bce(half, widen_targets(std::vector<int>(8, 0))) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // widened neighbours count as weighted positives only
  const auto w1 = widen_targets(std::vector<int>{0, 1, 0});
  const std::vector<double> a{0.2, 0.9, 0.4};
  const double want = -(std::log(0.9) + 0.5 * std::log(0.2) + 0.5 * std::log(0.4)) / 3.0;
  CHECK(weighted_bce(a, w1) == doctest::Approx(want).epsilon(1e-12));
  const auto w2 = widen_targets(std::vector<int>{0, 0, 1, 0});
  const std::vector<double> b{0.3, 0.2, 0.9, 0.4};
  CHECK(weighted_bce(b, w2) ==
        doctest::Approx(-(std::log(0.7) + 0.5 * std::log(0.2) + std::log(0.9) + 0.5 * std::log(0.4)) / 4.0).epsilon(1e-12));

  std::vector<double> clamp{0.0, 1.0, 0.0};
  CHECK(std::isfinite(weighted_bce(clamp, w1)));
  CHECK_THROWS_AS(weighted_bce(std::vector<double>{1.5, 0.5, 0.5}, w1), Error);
  CHECK_THROWS_AS(weighted_bce(std::vector<double>{NAN, 0.5, 0.5}, w1), Error);
  CHECK_THROWS_AS(weighted_bce(std::vector<double>{0.5}, w1), Error);
}

TEST_CASE("max_pool is a centred truncated window") {
  const std::vector<double> x{0, 3, 0, 0, 0, 0, 1};
  CHECK(max_pool(x, 3) == std::vector<double>{3, 3, 3, 0, 0, 1, 1});
  CHECK(max_pool(x, 7) == std::vector<double>{3, 3, 3, 3, 3, 1, 1});
}

TEST_CASE("st_bce: alpha, formula oracle, near-perfect fit and non-negativity") {
  std::vector<int> raw(1000, 0);
  for (int i = 0; i < 10; ++i) raw[50 + 100 * i] = 1;
  std::vector<double> act(1000, 1e-7);
  for (std::size_t t = 0; t < 1000; ++t)
    if (raw[t]) act[t] = 1 - 1e-7;
  const auto perfect = st_bce(act, raw);
  CHECK(perfect.alpha == 99.0);
  CHECK(perfect.total >= 0.0);
  CHECK(perfect.total < 1e-3);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (auto& a : act) a = u(rng);
  const auto r = st_bce(act, raw);
  const auto m7 = max_pool(act, 7);
  double pos = 0, neg = 0;
  for (std::size_t t = 0; t < 1000; ++t) {
    double m13 = 0;
    for (long j = static_cast<long>(t) - 6; j <= static_cast<long>(t) + 6; ++j)
      if (j >= 0 && j < 1000 && raw[static_cast<std::size_t>(j)]) m13 = 1;
    pos -= 99.0 * raw[t] * std::log(m7[t]);
    neg -= (1 - m13) * std::log(1 - m7[t]);
  }
  CHECK(r.positive_term == doctest::Approx(pos).epsilon(1e-12));
  CHECK(r.negative_term == doctest::Approx(neg).epsilon(1e-12));
  CHECK(r.total >= 0.0);
  CHECK_THROWS_AS(st_bce(act, std::vector<int>(1000, 0)), Error);
}

TEST_CASE("st_bce shift tolerance and negative masking") {
  std::vector<int> raw(400, 0);
  for (std::size_t p = 20; p < 380; p += 30) raw[p] = 1;
  auto spikes = [&](int shift) {
    std::vector<double> a(400, 0.01);
    for (std::size_t t = 0; t < 400; ++t)
      if (raw[t]) a[static_cast<std::size_t>(static_cast<long>(t) + shift)] = 0.97;
    return a;
  };
  const auto aligned = st_bce(spikes(0), raw);
  for (int s = -3; s <= 3; ++s) CHECK(st_bce(spikes(s), raw).positive_term == aligned.positive_term);
  CHECK(st_bce(spikes(4), raw).positive_term > aligned.positive_term);

  // negatives within +-6 frames of a label contribute nothing
  std::vector<double> a(400, 0.01);
  const auto base = st_bce(a, raw).negative_term;
  auto near = a;
  near[26] = 0.99;  // m7 spreads it over 23..29; only 27..29 lie outside the +-6 mask
  auto far = a;
  far[35] = 0.99;
  const double d_near = st_bce(near, raw).negative_term - base;
  const double d_far = st_bce(far, raw).negative_term - base;
  CHECK(d_near == doctest::Approx(3 * (std::log(0.99) - std::log(0.01))).epsilon(1e-9));
  CHECK(d_far == doctest::Approx(7 * (std::log(0.99) - std::log(0.01))).epsilon(1e-9));
  auto inside = a;
  inside[23] = 0.99;  // pooled over 20..26: all masked
  CHECK(st_bce(inside, raw).negative_term == base);
}

TEST_CASE("pick_peaks examples") {
  std::vector<double> a(20, 0.1);
  a[8] = 0.9;
  CHECK(pick_peaks(a, 0.5, 7) == std::vector<std::size_t>{8});
  a[10] = 0.8;
  CHECK(pick_peaks(a, 0.5, 5) == std::vector<std::size_t>{8});
  CHECK(pick_peaks(std::vector<double>(20, 0.3), 0.5, 7).empty());
  a[19] = 0.7;
  CHECK(pick_peaks(a, 0.5, 5) == std::vector<std::size_t>{8, 19});
}

TEST_CASE("decode snaps downbeats and numbers positions") {
  std::vector<double> beat(200, 0.05), down(200, 0.05);
  for (std::size_t t = 10; t < 200; t += 25) beat[t] = 0.9;
  down[61] = 0.8;   // one frame from the beat at 60
  down[160] = 0.8;  // exactly on the beat at 160
  const auto ann = decode(beat, down, 0.02);
  REQUIRE(ann.events.size() == 8);
  std::vector<int> pos;
  for (const auto& e : ann.events) pos.push_back(e.metrical_position);
  CHECK(pos == std::vector<int>{0, 0, 1, 2, 3, 4, 1, 2});
  CHECK(ann.events[0].time == doctest::Approx(10 * 0.02 + 0.032));
  CHECK(frame_labels(ann.times(), 200, 0.02)[60] == 1);
}
