#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace kdmhl::hypothesis {

/// Beats are every omega-th peak starting at 1-based peak index phi.
struct Hypothesis {
  int omega = 1;
  int phi = 0;
  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

std::string to_string(const Hypothesis& h);

struct HypothesisPool {
  std::vector<int> ratios;  // ascending, unique
  std::vector<Hypothesis> hypotheses;

  std::size_t size() const { return hypotheses.size(); }
  const Hypothesis& operator[](std::size_t k) const { return hypotheses[k]; }
  /// Position of h in the pool, or size() if absent.
  std::size_t index_of(const Hypothesis& h) const;
};

/// (omega ascending, phi ascending); K = sum of ratios.
HypothesisPool build_pool(std::span<const int> ratios);
HypothesisPool default_pool();  // {1,2,3,4}

/// {b_i : i = omega*k + phi, 1 <= i <= |peaks|}, with 1-based i.
std::vector<std::size_t> subset(std::span<const std::size_t> peaks, const Hypothesis& h);

/// Successive inter-peak intervals never vary by more than max_rel_var.
bool admissible(std::span<const std::size_t> peaks, double hop_s, double max_rel_var = 0.2);
bool admissible_intervals(std::span<const double> intervals, double max_rel_var = 0.2);
/// Largest |d_{i+1} - d_i| / d_i over the peak sequence (+inf with < 3 peaks).
double max_relative_variation(std::span<const std::size_t> peaks);

enum class NegativeKind { Easy, Hard };

struct TripletSet {
  std::size_t anchor = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  std::vector<NegativeKind> negative_kinds;  // parallel to negatives
};

struct SamplerConfig {
  std::size_t n_p = 4;
  std::size_t n_n = 16;
  double hard_fraction = 0.5;
  std::size_t easy_min_distance = 2;  // easy negatives sit at least this far from every peak
};

/// Returns nullopt when the hypothesis cannot be sampled: fewer than n_p + 1
/// candidates, or too few easy frames to fill the negatives.
std::optional<TripletSet> sample_triplets(std::span<const std::size_t> peaks, const Hypothesis& h,
                                          std::size_t frames, const SamplerConfig& config,
                                          std::mt19937_64& rng);
std::optional<TripletSet> sample_triplets(std::span<const std::size_t> peaks, const Hypothesis& h,
                                          std::size_t frames, const SamplerConfig& config,
                                          std::uint64_t seed);

/// One JSON-lines record: {source_id, omega, phi, anchor, positives, negatives[{idx, kind}]}.
std::string triplet_record(const std::string& source_id, const Hypothesis& h, const TripletSet& t);

/// Deterministic seed derivation for per-(step, chunk, hypothesis) streams.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

}  // namespace kdmhl::hypothesis
