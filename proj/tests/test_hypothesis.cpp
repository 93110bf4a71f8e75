#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "kdmhl/error.hpp"
#include "kdmhl/hypothesis.hpp"

using namespace kdmhl;
using namespace kdmhl::hypothesis;

namespace {

std::vector<std::size_t> iota_peaks(std::size_t n, std::size_t start = 10, std::size_t step = 20) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = start + i * step;
  return p;
}

}  // namespace

TEST_CASE("build_pool examples") {
  const std::vector<int> r1234{1, 2, 3, 4}, r1{1}, r3{3}, r0{0, 1}, rneg{-2};
  const auto pool = build_pool(r1234);
  CHECK(pool.size() == 10);
  CHECK(pool[0] == Hypothesis{1, 0});
  CHECK(pool[9] == Hypothesis{4, 3});
  for (std::size_t k = 1; k < pool.size(); ++k) {
    const auto& a = pool[k - 1];
    const auto& b = pool[k];
    CHECK((a.omega < b.omega || (a.omega == b.omega && a.phi < b.phi)));
    CHECK(pool.index_of(b) == k);
  }
  CHECK(build_pool(r1).hypotheses == std::vector<Hypothesis>{{1, 0}});
  CHECK(build_pool(r3).hypotheses == std::vector<Hypothesis>{{3, 0}, {3, 1}, {3, 2}});
  CHECK_THROWS_AS(build_pool(r0), Error);
  CHECK_THROWS_AS(build_pool(rneg), Error);
  CHECK_THROWS_AS(build_pool(std::vector<int>{}), Error);
  CHECK(default_pool().size() == 10);
}

TEST_CASE("subset examples") {
  const auto p6 = iota_peaks(6);
  CHECK(subset(p6, {2, 1}) == std::vector<std::size_t>{p6[0], p6[2], p6[4]});
  CHECK(subset(p6, {1, 0}) == p6);
  const auto p10 = iota_peaks(10);
  CHECK(subset(p10, {4, 2}) == std::vector<std::size_t>{p10[1], p10[5], p10[9]});
  CHECK(subset(p10, {4, 0}) == std::vector<std::size_t>{p10[3], p10[7]});
  CHECK(subset(std::vector<std::size_t>{5}, {2, 0}).empty());
}

TEST_CASE("subsets over phases partition the peaks") {
  const auto p = iota_peaks(23);
  for (int w = 1; w <= 5; ++w) {
    std::multiset<std::size_t> all;
    for (int f = 0; f < w; ++f)
      for (auto b : subset(p, {w, f})) all.insert(b);
    CHECK(all == std::multiset<std::size_t>(p.begin(), p.end()));
  }
}

TEST_CASE("admissibility examples and scaling invariance") {
  CHECK(admissible_intervals(std::vector<double>{0.5, 0.5, 0.5}));
  CHECK_FALSE(admissible_intervals(std::vector<double>{0.5, 0.61}));
  CHECK(admissible_intervals(std::vector<double>{0.5, 0.59}));
  CHECK_FALSE(admissible(std::vector<std::size_t>{1, 20}, 0.02));
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> d(18, 32);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> p{3};
    for (int i = 0; i < 12; ++i) p.push_back(p.back() + d(rng));
    std::vector<std::size_t> q(p);
    for (auto& v : q) v *= 3;
    CHECK(admissible(p, 0.02) == admissible(q, 0.02));
    CHECK(max_relative_variation(p) == doctest::Approx(max_relative_variation(q)));
  }
}

TEST_CASE("sampler: membership example and determinism") {
  const auto p = iota_peaks(8);
  SamplerConfig cfg;
  cfg.n_p = 2;
  cfg.n_n = 6;
  const auto t = sample_triplets(p, {2, 0}, 200, cfg, 42);
  REQUIRE(t);
  const std::set<std::size_t> even{p[1], p[3], p[5], p[7]}, odd{p[0], p[2], p[4], p[6]};
  CHECK(even.count(t->anchor));
  for (auto x : t->positives) CHECK(even.count(x));
  std::size_t hard = 0;
  for (std::size_t i = 0; i < t->negatives.size(); ++i)
    if (t->negative_kinds[i] == NegativeKind::Hard) {
      ++hard;
      CHECK(odd.count(t->negatives[i]));
    }
  CHECK(hard == 3);
  const auto u = sample_triplets(p, {2, 0}, 200, cfg, 42);
  CHECK(u->anchor == t->anchor);
  CHECK(u->positives == t->positives);
  CHECK(u->negatives == t->negatives);
}

TEST_CASE("sampler: degenerate and unsamplable cases return nothing") {
  std::vector<std::size_t> every(50);
  for (std::size_t i = 0; i < 50; ++i) every[i] = i;
  CHECK_FALSE(sample_triplets(every, {1, 0}, 50, SamplerConfig{}, 1));
  CHECK_FALSE(sample_triplets(iota_peaks(4), {1, 0}, 200, SamplerConfig{}, 1));  // needs n_p + 1 = 5
  CHECK_FALSE(sample_triplets(iota_peaks(10), {4, 3}, 400, SamplerConfig{}, 1));
}

TEST_CASE("sampler: hard negatives are backfilled with easy ones") {
  const auto p = iota_peaks(6);  // (1,0) has no hard negatives
  SamplerConfig cfg;
  cfg.n_p = 2;
  const auto t = sample_triplets(p, {1, 0}, 300, cfg, 3);
  REQUIRE(t);
  CHECK(t->negatives.size() == cfg.n_n);
  CHECK(std::all_of(t->negative_kinds.begin(), t->negative_kinds.end(), [](auto k) { return k == NegativeKind::Easy; }));
}

TEST_CASE("sampler invariants hold over 10k random draws") {
  std::mt19937_64 rng(123);
  const auto pool = default_pool();
  std::size_t drawn = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::uniform_int_distribution<std::size_t> gap(8, 40), count(6, 60);
    std::vector<std::size_t> p{std::uniform_int_distribution<std::size_t>(0, 30)(rng)};
    const std::size_t n = count(rng);
    for (std::size_t i = 1; i < n; ++i) p.push_back(p.back() + gap(rng));
    const std::size_t T = p.back() + 1 + gap(rng);
    const auto h = pool[static_cast<std::size_t>(trial) % pool.size()];
    SamplerConfig cfg;
    cfg.hard_fraction = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto t = sample_triplets(p, h, T, cfg, rng());
    const auto sub = subset(p, h);
    if (sub.size() < cfg.n_p + 1) {
      CHECK_FALSE(t);
      continue;
    }
    if (!t) continue;
    ++drawn;
    const std::set<std::size_t> in_sub(sub.begin(), sub.end()), peaks(p.begin(), p.end());
    std::set<std::size_t> seen{t->anchor};
    REQUIRE(in_sub.count(t->anchor));
    REQUIRE(t->positives.size() == cfg.n_p);
    REQUIRE(t->negatives.size() == cfg.n_n);
    for (auto x : t->positives) {
      REQUIRE(in_sub.count(x));
      REQUIRE(seen.insert(x).second);
    }
    std::size_t hard = 0;
    for (std::size_t i = 0; i < t->negatives.size(); ++i) {
      const auto x = t->negatives[i];
      REQUIRE(x < T);
      REQUIRE(seen.insert(x).second);
      if (t->negative_kinds[i] == NegativeKind::Hard) {
        ++hard;
        REQUIRE(peaks.count(x));
        REQUIRE_FALSE(in_sub.count(x));
      } else {
        for (auto b : p) REQUIRE((x > b ? x - b : b - x) >= 2);
      }
    }
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(std::llround(cfg.hard_fraction * 16)), p.size() - sub.size());
    REQUIRE(hard == want);
  }
  CHECK(drawn > 5000);
}

TEST_CASE("triplet record and seed mixing") {
  TripletSet t;
  t.anchor = 5;
  t.positives = {7, 9};
  t.negatives = {1, 30};
  t.negative_kinds = {NegativeKind::Hard, NegativeKind::Easy};
  CHECK(triplet_record("trk", {2, 1}, t) ==
        R"({"source_id":"trk","omega":2,"phi":1,"anchor":5,"positives":[7,9],"negatives":[{"idx":1,"kind":"hard"},{"idx":30,"kind":"easy"}]})");
  CHECK(mix_seed({1, 2}) != mix_seed({2, 1}));
  CHECK(mix_seed({1, 2}) == mix_seed({1, 2}));
  CHECK(to_string(Hypothesis{4, 2}) == "(4,2)");
}
