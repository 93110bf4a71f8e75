#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "kdmhl/error.hpp"
#include "kdmhl/ingest.hpp"
#include "kdmhl/metrics.hpp"

namespace kdmhl::metrics {
namespace {

// Absorbs decimal round-off so that a 70 ms offset written in seconds still matches.
constexpr double kBoundarySlack = 1e-9;

std::vector<double> interpolate(std::span<const double> ref, int factor) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < ref.size(); ++i)
    for (int j = 0; j < factor; ++j) out.push_back(ref[i] + (ref[i + 1] - ref[i]) * j / factor);
  if (!ref.empty()) out.push_back(ref.back());
  return out;
}

std::vector<double> every(std::span<const double> v, std::size_t step, std::size_t start) {
  std::vector<double> out;
  for (std::size_t i = start; i < v.size(); i += step) out.push_back(v[i]);
  return out;
}

}  // namespace

std::vector<double> trim(std::span<const double> times, double cutoff_s) {
  std::vector<double> out;
  for (double t : times)
    if (t >= cutoff_s) out.push_back(t);
  return out;
}

Matching match_events(std::span<const double> est, std::span<const double> ref, double tol_s) {
  Matching m;
  m.n_est = est.size();
  m.n_ref = ref.size();
  std::vector<char> used(ref.size(), 0);
  std::size_t start = 0;
  for (double e : est) {
    while (start < ref.size() && ref[start] < e - tol_s - kBoundarySlack) ++start;
    for (std::size_t j = start; j < ref.size() && ref[j] <= e + tol_s + kBoundarySlack; ++j) {
      if (!used[j]) {
        used[j] = 1;
        ++m.matched;
        break;
      }
    }
  }
  return m;
}

double f_measure(std::span<const double> est, std::span<const double> ref, double tol_s) {
  if (est.empty() && ref.empty()) return 1.0;
  if (est.empty() || ref.empty()) return 0.0;
  const auto m = match_events(est, ref, tol_s);
  if (m.matched == 0) return 0.0;
  const double p = static_cast<double>(m.matched) / static_cast<double>(est.size());
  const double r = static_cast<double>(m.matched) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

std::vector<std::vector<double>> reference_variants(std::span<const double> ref, AmltVariants set) {
  std::vector<std::vector<double>> out;
  const auto dbl = interpolate(ref, 2);
  out.emplace_back(ref.begin(), ref.end());
  out.push_back(every(dbl, 2, 1));  // off-beat
  out.push_back(dbl);
  out.push_back(every(ref, 2, 0));
  out.push_back(every(ref, 2, 1));
  if (set == AmltVariants::Extended) {
    out.push_back(interpolate(ref, 3));
    for (std::size_t s = 0; s < 3; ++s) out.push_back(every(ref, 3, s));
  }
  return out;
}

double continuity_total(std::span<const double> est, std::span<const double> ref, double theta) {
  if (est.size() < 2 || ref.size() < 2) return 0.0;
  std::vector<char> used(ref.size(), 0);
  std::size_t correct = 0;
  for (std::size_t m = 0; m < est.size(); ++m) {
    std::size_t nearest = 0;
    for (std::size_t j = 1; j < ref.size(); ++j)
      if (std::abs(est[m] - ref[j]) < std::abs(est[m] - ref[nearest])) nearest = j;
    if (used[nearest]) continue;
    const double diff = std::abs(est[m] - ref[nearest]);
    double ref_iv, est_iv;
    if (m == 0 || nearest == 0) {
      // No previous pair to compare against: use the following intervals.
      ref_iv = nearest + 1 < ref.size() ? ref[nearest + 1] - ref[nearest] : ref[nearest] - ref[nearest - 1];
      est_iv = m + 1 < est.size() ? est[m + 1] - est[m] : est[m] - est[m - 1];
    } else {
      ref_iv = ref[nearest] - ref[nearest - 1];
      est_iv = est[m] - est[m - 1];
    }
    const double phase = ref_iv == 0.0 ? 0.0 : std::abs(diff / ref_iv);
    const double period = ref_iv == 0.0 ? 0.0 : std::abs(1.0 - est_iv / ref_iv);
    if (phase < theta && period < theta) {
      used[nearest] = 1;
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(std::max(est.size(), ref.size()));
}

std::optional<double> cmlt(std::span<const double> est, std::span<const double> ref, double theta) {
  if (ref.size() < 2) return std::nullopt;
  return continuity_total(est, ref, theta);
}

std::optional<double> amlt(std::span<const double> est, std::span<const double> ref, AmltVariants set, double theta) {
  if (ref.size() < 2) return std::nullopt;
  double best = 0.0;
  for (const auto& v : reference_variants(ref, set)) best = std::max(best, continuity_total(est, v, theta));
  return best;
}

TrackMetrics evaluate_track(const std::string& name, std::span<const double> est, std::span<const double> ref,
                            const EvalOptions& options) {
  const auto e = trim(est, options.trim);
  const auto r = trim(ref, options.trim);
  TrackMetrics m;
  m.name = name;
  m.f_measure = f_measure(e, r, options.tolerance);
  m.matching = match_events(e, r, options.tolerance);
  m.cmlt = cmlt(e, r);
  m.amlt = amlt(e, r, options.variants);
  return m;
}

Aggregate aggregate(std::span<const TrackMetrics> tracks) {
  Aggregate a;
  a.tracks = tracks.size();
  if (tracks.empty()) return a;
  double c = 0.0, am = 0.0;
  std::size_t nc = 0;
  for (const auto& t : tracks) {
    a.f_measure += t.f_measure;
    if (t.cmlt && t.amlt) {
      c += *t.cmlt;
      am += *t.amlt;
      ++nc;
    }
  }
  a.f_measure /= static_cast<double>(tracks.size());
  if (nc) {
    a.cmlt = c / static_cast<double>(nc);
    a.amlt = am / static_cast<double>(nc);
  }
  return a;
}

MetricsReport evaluate_corpus(const std::filesystem::path& est_dir, const std::filesystem::path& ref_dir,
                              const EvalOptions& options) {
  namespace fs = std::filesystem;
  for (const auto& d : {est_dir, ref_dir})
    if (!fs::is_directory(d)) fail(ErrorKind::MissingInput, "not a directory: " + d.string());
  auto list = [](const fs::path& dir) {
    std::map<std::string, fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".beats") files[e.path().stem().string()] = e.path();
    return files;
  };
  const auto est_files = list(est_dir);
  const auto ref_files = list(ref_dir);
  MetricsReport report;
  auto times = [&](const fs::path& p) {
    const auto ann = ingest::parse_beats(p);
    return options.downbeat ? ann.downbeat_times() : ann.times();
  };
  for (const auto& [name, ref_path] : ref_files) {
    auto it = est_files.find(name);
    if (it == est_files.end()) {
      report.warnings.push_back("no estimate for reference '" + name + "', skipped");
      continue;
    }
    report.tracks.push_back(evaluate_track(name, times(it->second), times(ref_path), options));
  }
  for (const auto& [name, path] : est_files)
    if (!ref_files.count(name)) report.warnings.push_back("no reference for estimate '" + name + "', skipped");
  report.total = aggregate(report.tracks);
  return report;
}

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  auto tracks = nlohmann::ordered_json::array();
  for (const auto& t : report.tracks)
    tracks.push_back({{"name", t.name},
                      {"f_measure", t.f_measure},
                      {"cmlt", opt(t.cmlt)},
                      {"amlt", opt(t.amlt)},
                      {"matched", t.matching.matched},
                      {"n_est", t.matching.n_est},
                      {"n_ref", t.matching.n_ref}});
  j["tracks"] = std::move(tracks);
  j["aggregate"] = {{"f_measure", report.total.f_measure},
                    {"cmlt", opt(report.total.cmlt)},
                    {"amlt", opt(report.total.amlt)},
                    {"tracks", report.total.tracks}};
  j["warnings"] = report.warnings;
  return j.dump(2);
}

std::string report_table(const MetricsReport& report) {
  std::size_t w = 9;
  for (const auto& t : report.tracks) w = std::max(w, t.name.size());
  auto num = [](const std::optional<double>& v) {
    char b[16];
    if (!v) return std::string("      -");
    std::snprintf(b, sizeof b, "%7.4f", *v);
    return std::string(b);
  };
  std::ostringstream out;
  auto line = [&](const std::string& name, double f, const std::optional<double>& c, const std::optional<double>& a) {
    out << name << std::string(w - name.size() + 2, ' ') << num(f) << "  " << num(c) << "  " << num(a) << '\n';
  };
  out << "track" << std::string(w - 5 + 2, ' ') << "      F     CMLt     AMLt\n";
  for (const auto& t : report.tracks) line(t.name, t.f_measure, t.cmlt, t.amlt);
  line("aggregate", report.total.f_measure, report.total.cmlt, report.total.amlt);
  return out.str();
}

}  // namespace kdmhl::metrics
