#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kdmhl::metrics {

inline constexpr double kDefaultTolerance = 0.070;
inline constexpr double kDefaultTrim = 5.0;
inline constexpr double kContinuityThreshold = 0.175;

/// Events at or after cutoff_s.
std::vector<double> trim(std::span<const double> times, double cutoff_s = kDefaultTrim);

struct Matching {
  std::size_t matched = 0;
  std::size_t n_est = 0;
  std::size_t n_ref = 0;
};

/// Time-ordered greedy one-to-one matching within the closed window |e - r| <= tol.
Matching match_events(std::span<const double> est, std::span<const double> ref, double tol_s = kDefaultTolerance);
double f_measure(std::span<const double> est, std::span<const double> ref, double tol_s = kDefaultTolerance);

enum class AmltVariants {
  Extended,  // 1x, off-beat, 2x, 1/2x (both phases), 3x, 1/3x (all phases)
  MirEval,   // 1x, off-beat, 2x, 1/2x odd, 1/2x even
};

std::vector<std::vector<double>> reference_variants(std::span<const double> ref, AmltVariants set);

/// Correct-beat count / max(|est|, |ref|) against one reference sequence.
double continuity_total(std::span<const double> est, std::span<const double> ref,
                        double theta = kContinuityThreshold);

/// Absent when fewer than two reference beats remain.
std::optional<double> cmlt(std::span<const double> est, std::span<const double> ref,
                           double theta = kContinuityThreshold);
std::optional<double> amlt(std::span<const double> est, std::span<const double> ref,
                           AmltVariants set = AmltVariants::Extended, double theta = kContinuityThreshold);

struct TrackMetrics {
  std::string name;
  double f_measure = 0.0;
  std::optional<double> cmlt, amlt;
  Matching matching;
};

struct Aggregate {
  double f_measure = 0.0;
  std::optional<double> cmlt, amlt;  // means over tracks where defined
  std::size_t tracks = 0;
};

struct EvalOptions {
  double tolerance = kDefaultTolerance;
  double trim = kDefaultTrim;
  bool downbeat = false;
  AmltVariants variants = AmltVariants::Extended;
};

TrackMetrics evaluate_track(const std::string& name, std::span<const double> est, std::span<const double> ref,
                            const EvalOptions& options);
Aggregate aggregate(std::span<const TrackMetrics> tracks);

struct MetricsReport {
  std::vector<TrackMetrics> tracks;
  Aggregate total;
  std::vector<std::string> warnings;
};

/// Pairs `<name>.beats` files by stem; a file without its counterpart is skipped
/// with a warning. With `downbeat`, both sides keep only position-1 events.
MetricsReport evaluate_corpus(const std::filesystem::path& est_dir, const std::filesystem::path& ref_dir,
                              const EvalOptions& options);

std::string report_json(const MetricsReport& report);
std::string report_table(const MetricsReport& report);

}  // namespace kdmhl::metrics
