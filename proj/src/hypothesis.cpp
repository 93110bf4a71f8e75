#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "kdmhl/error.hpp"
#include "kdmhl/hypothesis.hpp"

namespace kdmhl::hypothesis {
namespace {

// Draws `count` distinct items from `pool` (partial Fisher-Yates); pool is reordered.
std::vector<std::size_t> draw(std::vector<std::size_t>& pool, std::size_t count, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  return {pool.begin(), pool.begin() + static_cast<long>(count)};
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string to_string(const Hypothesis& h) {
  return "(" + std::to_string(h.omega) + "," + std::to_string(h.phi) + ")";
}

std::size_t HypothesisPool::index_of(const Hypothesis& h) const {
  return static_cast<std::size_t>(std::find(hypotheses.begin(), hypotheses.end(), h) - hypotheses.begin());
}

HypothesisPool build_pool(std::span<const int> ratios) {
  require(!ratios.empty(), "build_pool: ratio set is empty");
  HypothesisPool pool;
  pool.ratios.assign(ratios.begin(), ratios.end());
  for (int r : pool.ratios) require(r >= 1, "build_pool: ratios must be positive");
  std::sort(pool.ratios.begin(), pool.ratios.end());
  pool.ratios.erase(std::unique(pool.ratios.begin(), pool.ratios.end()), pool.ratios.end());
  for (int w : pool.ratios)
    for (int p = 0; p < w; ++p) pool.hypotheses.push_back({w, p});
  return pool;
}

HypothesisPool default_pool() {
  const int ratios[] = {1, 2, 3, 4};
  return build_pool(ratios);
}

std::vector<std::size_t> subset(std::span<const std::size_t> peaks, const Hypothesis& h) {
  require(h.omega >= 1 && h.phi >= 0 && h.phi < h.omega, "subset: need 0 <= phi < omega");
  std::vector<std::size_t> out;
  const auto w = static_cast<std::size_t>(h.omega);
  // phi = 0 has no k = 0 member (index 0 is outside the 1-based range).
  for (std::size_t i = h.phi == 0 ? w : static_cast<std::size_t>(h.phi); i <= peaks.size(); i += w)
    out.push_back(peaks[i - 1]);
  return out;
}

bool admissible_intervals(std::span<const double> intervals, double max_rel_var) {
  if (intervals.size() < 2) return false;
  for (std::size_t i = 0; i + 1 < intervals.size(); ++i) {
    if (!(intervals[i] > 0.0)) return false;
    if (std::abs(intervals[i + 1] - intervals[i]) / intervals[i] > max_rel_var) return false;
  }
  return true;
}

bool admissible(std::span<const std::size_t> peaks, double hop_s, double max_rel_var) {
  if (peaks.size() < 3) return false;
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i)
    d.push_back(static_cast<double>(peaks[i + 1]) - static_cast<double>(peaks[i]));
  // frame counts keep the ratio exact; hop_s cancels
  (void)hop_s;
  return admissible_intervals(d, max_rel_var);
}

double max_relative_variation(std::span<const std::size_t> peaks) {
  if (peaks.size() < 3) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i + 2 < peaks.size(); ++i) {
    const double a = static_cast<double>(peaks[i + 1] - peaks[i]);
    const double b = static_cast<double>(peaks[i + 2] - peaks[i + 1]);
    worst = std::max(worst, std::abs(b - a) / a);
  }
  return worst;
}

std::optional<TripletSet> sample_triplets(std::span<const std::size_t> peaks, const Hypothesis& h,
                                          std::size_t frames, const SamplerConfig& config,
                                          std::mt19937_64& rng) {
  require(config.hard_fraction >= 0.0 && config.hard_fraction <= 1.0, "sample_triplets: hard_fraction in [0,1]");
  require(config.easy_min_distance >= 1, "sample_triplets: easy_min_distance must be >= 1");
  auto members = subset(peaks, h);
  if (members.size() < config.n_p + 1) return std::nullopt;

  std::vector<char> in_subset(frames, 0), near_peak(frames, 0);
  for (auto b : members) {
    require(b < frames, "sample_triplets: peak index beyond T");
    in_subset[b] = 1;
  }
  std::vector<std::size_t> hard;
  for (auto b : peaks) {
    require(b < frames, "sample_triplets: peak index beyond T");
    if (!in_subset[b]) hard.push_back(b);
    const std::size_t r = config.easy_min_distance - 1;
    for (std::size_t t = b >= r ? b - r : 0; t <= std::min(frames - 1, b + r); ++t) near_peak[t] = 1;
  }
  std::vector<std::size_t> easy;
  for (std::size_t t = 0; t < frames; ++t)
    if (!near_peak[t]) easy.push_back(t);

  const auto want_hard = static_cast<std::size_t>(std::llround(config.hard_fraction * static_cast<double>(config.n_n)));
  const std::size_t n_hard = std::min(want_hard, hard.size());
  const std::size_t n_easy = config.n_n - n_hard;
  if (easy.size() < n_easy) return std::nullopt;

  TripletSet out;
  auto picked = draw(members, config.n_p + 1, rng);
  out.anchor = picked[0];
  out.positives.assign(picked.begin() + 1, picked.end());
  for (auto t : draw(hard, n_hard, rng)) {
    out.negatives.push_back(t);
    out.negative_kinds.push_back(NegativeKind::Hard);
  }
  for (auto t : draw(easy, n_easy, rng)) {
    out.negatives.push_back(t);
    out.negative_kinds.push_back(NegativeKind::Easy);
  }
  return out;
}

std::optional<TripletSet> sample_triplets(std::span<const std::size_t> peaks, const Hypothesis& h,
                                          std::size_t frames, const SamplerConfig& config,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_triplets(peaks, h, frames, config, rng);
}

std::string triplet_record(const std::string& source_id, const Hypothesis& h, const TripletSet& t) {
  nlohmann::ordered_json j;
  j["source_id"] = source_id;
  j["omega"] = h.omega;
  j["phi"] = h.phi;
  j["anchor"] = t.anchor;
  j["positives"] = t.positives;
  auto negs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.negatives.size(); ++i)
    negs.push_back({{"idx", t.negatives[i]}, {"kind", t.negative_kinds[i] == NegativeKind::Hard ? "hard" : "easy"}});
  j["negatives"] = std::move(negs);
  return j.dump();
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = splitmix(h ^ splitmix(p));
  return h;
}

}  // namespace kdmhl::hypothesis
