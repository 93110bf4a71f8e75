#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "kdmhl/error.hpp"
#include "kdmhl/scoring.hpp"

namespace kdmhl::scoring {

double cosine(std::span<const double> a, std::span<const double> b, bool* zero_norm) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) {
    if (zero_norm) *zero_norm = true;
    return 0.0;
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double contrastive(std::span<const double> pos_sims, std::span<const double> neg_sims, double tau) {
  require(tau > 0.0, "contrastive: tau must be positive");
  require(!neg_sims.empty(), "contrastive: need at least one negative");
  double top = -std::numeric_limits<double>::infinity();
  for (double s : neg_sims) top = std::max(top, s / tau);
  double acc = 0.0;
  for (double s : neg_sims) acc += std::exp(s / tau - top);
  const double lse = top + std::log(acc);
  double h = 0.0;
  for (double s : pos_sims) h -= s / tau - lse;
  return h;
}

Score score_hypothesis(const dsp::FeatureSequence& feat, const hypothesis::TripletSet& triplet, double tau) {
  auto check = [&](std::size_t t) { require(t < feat.frames, "score_hypothesis: triplet index beyond T"); };
  check(triplet.anchor);
  Score out;
  const auto a = feat.row(triplet.anchor);
  std::vector<double> sp, sn;
  for (auto p : triplet.positives) {
    check(p);
    sp.push_back(cosine(a, feat.row(p), &out.zero_norm));
  }
  for (auto n : triplet.negatives) {
    check(n);
    sn.push_back(cosine(a, feat.row(n), &out.zero_norm));
  }
  out.value = contrastive(sp, sn, tau);
  return out;
}

const ScoreTable::Entry& ScoreTable::update(const std::string& chunk_id, std::span<const double> raw) {
  require(raw.size() == k_, "ScoreTable: raw score length differs from K");
  auto [it, fresh] = entries_.try_emplace(chunk_id);
  Entry& e = it->second;
  if (fresh) {
    e.mean.assign(raw.begin(), raw.end());
  } else {
    const double n = static_cast<double>(e.epochs);
    for (std::size_t k = 0; k < k_; ++k) e.mean[k] = (n * e.mean[k] + raw[k]) / (n + 1.0);
  }
  ++e.epochs;
  e.history.emplace_back(raw.begin(), raw.end());
  if (history_cap_ > 0 && e.history.size() > history_cap_) e.history.erase(e.history.begin());
  return e;
}

const ScoreTable::Entry& ScoreTable::at(const std::string& chunk_id) const {
  auto it = entries_.find(chunk_id);
  if (it == entries_.end()) fail(ErrorKind::InvalidArgument, "ScoreTable: no entry for chunk '" + chunk_id + "'");
  return it->second;
}

std::vector<std::size_t> rank(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    return std::isnan(scores[i]) ? std::numeric_limits<double>::infinity() : scores[i];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return order;
}

SelectionResult select_n_wta(std::span<const double> scores, std::size_t n) {
  require(n >= 1 && n <= scores.size(), "select_n_wta: need 1 <= n <= K");
  SelectionResult out;
  out.winners = rank(scores);
  out.winners.resize(n);
  out.scores.assign(scores.begin(), scores.end());
  return out;
}

std::string to_string(AccuracyMode m) {
  switch (m) {
    case AccuracyMode::Exact: return "exact";
    case AccuracyMode::Octave: return "octave";
    case AccuracyMode::MetricLevel: return "metric_level";
  }
  return "exact";
}

bool selection_accuracy(std::span<const hypothesis::Hypothesis> ranked, const hypothesis::Hypothesis& truth,
                        std::size_t k, AccuracyMode mode) {
  require(std::find(ranked.begin(), ranked.end(), truth) != ranked.end(),
          "selection_accuracy: truth " + hypothesis::to_string(truth) + " is not in the pool");
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    const auto& h = ranked[i];
    switch (mode) {
      case AccuracyMode::Exact:
        if (h == truth) return true;
        break;
      case AccuracyMode::Octave:
        if (h.omega % truth.omega == 0 && h.phi % truth.omega == truth.phi) return true;
        break;
      case AccuracyMode::MetricLevel:
        if (h.omega == truth.omega) return true;
        break;
    }
  }
  return false;
}

std::string audit_record(const std::string& source_id, std::size_t epoch, std::span<const double> scores,
                         std::span<const std::size_t> winners) {
  nlohmann::ordered_json j;
  j["source_id"] = source_id;
  j["epoch"] = epoch;
  auto s = nlohmann::ordered_json::array();
  for (double v : scores) s.push_back(std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json());
  j["scores"] = std::move(s);
  j["winners"] = std::vector<std::size_t>(winners.begin(), winners.end());
  return j.dump();
}

}  // namespace kdmhl::scoring
