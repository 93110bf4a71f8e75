#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kdmhl/dsp.hpp"
#include "kdmhl/hypothesis.hpp"

namespace kdmhl::scoring {

inline constexpr double kDefaultTau = 0.1;

/// Cosine similarity; zero when either vector has zero norm (and sets *zero_norm).
double cosine(std::span<const double> a, std::span<const double> b, bool* zero_norm = nullptr);

/// -sum_p log( exp(s_p/tau) / sum_n exp(s_n/tau) ) over cosine similarities
/// s to the anchor. The denominator runs over negatives only.
double contrastive(std::span<const double> pos_sims, std::span<const double> neg_sims, double tau);

struct Score {
  double value = 0.0;
  bool zero_norm = false;  // some used row had zero norm
};

Score score_hypothesis(const dsp::FeatureSequence& feat, const hypothesis::TripletSet& triplet,
                       double tau = kDefaultTau);

/// Running means of per-hypothesis scores, one entry per chunk.
class ScoreTable {
 public:
  struct Entry {
    std::vector<double> mean;
    std::size_t epochs = 0;
    std::vector<std::vector<double>> history;
  };

  explicit ScoreTable(std::size_t k, std::size_t history_cap = 0) : k_(k), history_cap_(history_cap) {}

  /// mean <- (e*mean + raw)/(e+1); unknown chunks start at raw.
  const Entry& update(const std::string& chunk_id, std::span<const double> raw);
  bool contains(const std::string& chunk_id) const { return entries_.count(chunk_id) != 0; }
  const Entry& at(const std::string& chunk_id) const;
  std::size_t k() const { return k_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::size_t k_;
  std::size_t history_cap_;  // 0 = keep everything
  std::map<std::string, Entry> entries_;
};

struct SelectionResult {
  std::vector<std::size_t> winners;  // best first
  std::vector<double> scores;
};

/// Pool indices ordered by score; NaN counts as +inf, ties go to the lower index.
std::vector<std::size_t> rank(std::span<const double> scores);
SelectionResult select_n_wta(std::span<const double> scores, std::size_t n);

enum class AccuracyMode { Exact, Octave, MetricLevel };
std::string to_string(AccuracyMode m);

/// Whether any of the first k ranked hypotheses is acceptable for `truth`.
/// Octave accepts omega' = m * omega (m >= 1) with phi' = phi (mod omega).
bool selection_accuracy(std::span<const hypothesis::Hypothesis> ranked, const hypothesis::Hypothesis& truth,
                        std::size_t k, AccuracyMode mode);

/// {source_id, epoch, scores[K], winners[n]}; non-finite scores are written as null.
std::string audit_record(const std::string& source_id, std::size_t epoch, std::span<const double> scores,
                         std::span<const std::size_t> winners);

}  // namespace kdmhl::scoring
