#include <algorithm>
#include <cmath>

#include "kdmhl/dsp.hpp"
#include "kdmhl/error.hpp"
#include "kdmhl/supervised.hpp"

namespace kdmhl::supervised {
namespace {

double clamp_act(double a) {
  if (!std::isfinite(a) || a < 0.0 || a > 1.0) fail(ErrorKind::BadData, "activation outside [0, 1]");
  return std::clamp(a, kActivationClamp, 1.0 - kActivationClamp);
}

}  // namespace

TargetSequence widen_targets(std::span<const int> raw, std::size_t radius) {
  TargetSequence out;
  out.raw.assign(raw.begin(), raw.end());
  out.weights.assign(raw.size(), 0.0);
  for (std::size_t t = 0; t < raw.size(); ++t) {
    require(raw[t] == 0 || raw[t] == 1, "widen_targets: labels must be binary");
    if (raw[t] != 1) continue;
    out.weights[t] = 1.0;
    const std::size_t lo = t >= radius ? t - radius : 0;
    for (std::size_t j = lo; j <= std::min(raw.size() - 1, t + radius); ++j)
      if (raw[j] != 1) out.weights[j] = std::max(out.weights[j], 0.5);
  }
  return out;
}

double weighted_bce(std::span<const double> act, const TargetSequence& targets) {
  require(act.size() == targets.weights.size() && act.size() == targets.raw.size(), "weighted_bce: length mismatch");
  if (act.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < act.size(); ++t) {
    const double a = clamp_act(act[t]);
    const double w = targets.weights[t];
    acc -= w * std::log(a);
    if (w == 0.0) acc -= std::log(1.0 - a);
  }
  return acc / static_cast<double>(act.size());
}

std::vector<double> max_pool(std::span<const double> x, std::size_t width) {
  require(width % 2 == 1, "max_pool: width must be odd");
  const std::size_t r = width / 2;
  std::vector<double> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t lo = t >= r ? t - r : 0;
    const std::size_t hi = std::min(x.size() - 1, t + r);
    out[t] = *std::max_element(x.begin() + static_cast<long>(lo), x.begin() + static_cast<long>(hi) + 1);
  }
  return out;
}

StBce st_bce(std::span<const double> act, std::span<const int> raw, std::size_t pred_pool, std::size_t target_pool) {
  require(act.size() == raw.size(), "st_bce: length mismatch");
  double pos = 0.0;
  for (int y : raw) {
    require(y == 0 || y == 1, "st_bce: labels must be binary");
    pos += y;
  }
  if (pos == 0.0) fail(ErrorKind::InvalidArgument, "st_bce: no positive frames, alpha undefined");

  std::vector<double> a(act.size()), y(raw.size());
  for (std::size_t t = 0; t < act.size(); ++t) {
    a[t] = clamp_act(act[t]);
    y[t] = raw[t];
  }
  const auto mp = max_pool(a, pred_pool);
  const auto my = max_pool(y, target_pool);
  StBce out;
  out.alpha = (static_cast<double>(raw.size()) - pos) / pos;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (y[t] != 0.0) out.positive_term -= out.alpha * y[t] * std::log(mp[t]);
    if (my[t] != 1.0) out.negative_term -= (1.0 - my[t]) * std::log(1.0 - mp[t]);
  }
  out.total = out.positive_term + out.negative_term;
  return out;
}

std::vector<std::size_t> pick_peaks(std::span<const double> act, double threshold, std::size_t min_dist) {
  std::vector<std::size_t> cand;
  for (std::size_t t = 0; t < act.size(); ++t) {
    const bool left = t == 0 || act[t] > act[t - 1];
    const bool right = t + 1 == act.size() || act[t] > act[t + 1];
    if (left && right && act[t] > threshold) cand.push_back(t);
  }
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t x, std::size_t y) { return act[x] > act[y]; });
  std::vector<std::size_t> kept;
  for (auto c : cand)
    if (std::none_of(kept.begin(), kept.end(), [&](std::size_t k) { return (c > k ? c - k : k - c) < min_dist; }))
      kept.push_back(c);
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<int> frame_labels(std::span<const double> times, std::size_t frames, double hop_s) {
  std::vector<int> out(frames, 0);
  for (double t : times) {
    if (t < 0.0) continue;
    const std::size_t f = dsp::time_to_frame(t, hop_s);
    if (f < frames) out[f] = 1;
  }
  return out;
}

ingest::BeatAnnotation decode(std::span<const double> beat_act, std::span<const double> downbeat_act, double hop_s,
                              double threshold, std::size_t min_dist, std::size_t snap) {
  const auto beats = pick_peaks(beat_act, threshold, min_dist);
  std::vector<std::size_t> downs;
  if (!downbeat_act.empty()) downs = pick_peaks(downbeat_act, threshold, min_dist);

  std::vector<int> is_down(beats.size(), 0);
  for (auto d : downs) {
    std::size_t best = beats.size();
    std::size_t best_gap = snap + 1;
    for (std::size_t i = 0; i < beats.size(); ++i) {
      const std::size_t gap = beats[i] > d ? beats[i] - d : d - beats[i];
      if (gap < best_gap) best_gap = gap, best = i;
    }
    if (best < beats.size()) is_down[best] = 1;
  }
  ingest::BeatAnnotation out;
  int position = 0;
  for (std::size_t i = 0; i < beats.size(); ++i) {
    if (is_down[i]) position = 1;
    else if (position > 0) ++position;
    out.events.push_back({dsp::frame_time(beats[i], hop_s), position});
  }
  return out;
}

}  // namespace kdmhl::supervised
