#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kdmhl/ingest.hpp"

namespace kdmhl::supervised {

inline constexpr double kActivationClamp = 1e-7;

struct TargetSequence {
  std::vector<double> weights;  // 1 on labels, 0.5 on widened neighbours, else 0
  std::vector<int> raw;         // binary labels
};

TargetSequence widen_targets(std::span<const int> raw, std::size_t radius = 1);

/// Frame-averaged BCE with widened positive weights. Widened neighbours carry
/// no negative term.
double weighted_bce(std::span<const double> act, const TargetSequence& targets);

/// Centred max-pool of width `width` (odd); edge frames pool over what exists.
std::vector<double> max_pool(std::span<const double> x, std::size_t width);

struct StBce {
  double total = 0.0;
  double positive_term = 0.0;
  double negative_term = 0.0;
  double alpha = 0.0;  // negatives / positives
};

/// -sum_t alpha y_t log m7(p)_t + (1 - m13(y)_t) log(1 - m7(p)_t).
StBce st_bce(std::span<const double> act, std::span<const int> raw, std::size_t pred_pool = 7,
             std::size_t target_pool = 13);

/// Strict local maxima above threshold; lower peaks closer than min_dist to a
/// kept one are dropped (highest first).
std::vector<std::size_t> pick_peaks(std::span<const double> act, double threshold = 0.5, std::size_t min_dist = 7);

/// Frame labels from event times (nearest frame).
std::vector<int> frame_labels(std::span<const double> times, std::size_t frames, double hop_s);

/// Beat/downbeat peaks -> annotation. Each downbeat marks the nearest beat
/// within `snap` frames as position 1; following beats count up until the next.
ingest::BeatAnnotation decode(std::span<const double> beat_act, std::span<const double> downbeat_act,
                              double hop_s, double threshold = 0.5, std::size_t min_dist = 7,
                              std::size_t snap = 2);

}  // namespace kdmhl::supervised
