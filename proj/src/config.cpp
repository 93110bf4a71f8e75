#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "kdmhl/config.hpp"
#include "kdmhl/error.hpp"

namespace kdmhl {
namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  fail(ErrorKind::InvalidConfig, "config key '" + key + "': cannot read '" + value + "' as " + what);
}

std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto s = trim_ws(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad(key, v, "a number");
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    if constexpr (std::is_floating_point_v<T>) out << fmt_double(v[i]);
    else out << v[i];
  }
  return out.str();
}

template <class T>
std::vector<T> split(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if constexpr (std::is_same_v<T, std::string>) out.push_back(trim_ws(item));
    else out.push_back(parse_number<T>(key, item));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const auto s = trim_ws(v);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad(key, v, "a boolean");
}

struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

// Builds a field from an accessor returning a reference into the config.
template <class Acc>
Field field(Acc acc) {
  using T = std::remove_reference_t<decltype(acc(std::declval<PipelineConfig&>()))>;
  Field f;
  f.get = [acc](const PipelineConfig& c) {
    const T& v = acc(const_cast<PipelineConfig&>(c));
    if constexpr (std::is_same_v<T, bool>) return std::string(v ? "true" : "false");
    else if constexpr (std::is_floating_point_v<T>) return fmt_double(v);
    else if constexpr (std::is_arithmetic_v<T>) return std::to_string(v);
    else if constexpr (std::is_same_v<T, std::string>) return v;
    else return join(v);
  };
  f.set = [acc](PipelineConfig& c, const std::string& key, const std::string& value) {
    T& v = acc(c);
    if constexpr (std::is_same_v<T, bool>) v = parse_bool(key, value);
    else if constexpr (std::is_arithmetic_v<T>) v = parse_number<T>(key, value);
    else if constexpr (std::is_same_v<T, std::string>) v = trim_ws(value);
    else v = split<typename T::value_type>(key, value);
  };
  return f;
}

#define KDMHL_FIELD(name, expr) {name, field([](PipelineConfig& c) -> auto& { return expr; })}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      KDMHL_FIELD("general.seed", c.seed),
      KDMHL_FIELD("general.workers", c.workers),
      KDMHL_FIELD("ingest.target_rate", c.target_rate),
      KDMHL_FIELD("ingest.chunk_length_s", c.chunk_length_s),
      KDMHL_FIELD("ingest.max_chunks_per_track", c.max_chunks_per_track),
      KDMHL_FIELD("dsp.features", c.features),
      KDMHL_FIELD("dsp.mel_bands", c.onset.mel.bands),
      KDMHL_FIELD("dsp.mel_fmin", c.onset.mel.f_min),
      KDMHL_FIELD("dsp.mel_fmax", c.onset.mel.f_max),
      KDMHL_FIELD("dsp.flux_lag", c.onset.flux_lag),
      KDMHL_FIELD("dsp.flux_maxfilter_bands", c.onset.flux_maxfilter_bands),
      KDMHL_FIELD("dsp.highpass_window_s", c.onset.highpass_window_s),
      KDMHL_FIELD("dsp.tempo_min", c.onset.plp.tempo_min),
      KDMHL_FIELD("dsp.tempo_max", c.onset.plp.tempo_max),
      KDMHL_FIELD("dsp.tempo_step", c.onset.plp.tempo_step),
      KDMHL_FIELD("dsp.tempogram_window_s", c.onset.plp.window_s),
      KDMHL_FIELD("dsp.plp_kernel_s", c.onset.plp.kernel_s),
      KDMHL_FIELD("dsp.peak_rel_threshold", c.onset.plp.peak_rel_threshold),
      KDMHL_FIELD("dsp.peak_min_distance", c.onset.plp.min_peak_distance),
      KDMHL_FIELD("dsp.subharmonic_ratio", c.onset.plp.subharmonic_ratio),
      KDMHL_FIELD("dsp.subharmonic_search", c.onset.plp.subharmonic_search),
      KDMHL_FIELD("dsp.subharmonic_max_divisor", c.onset.plp.subharmonic_max_divisor),
      KDMHL_FIELD("dsp.mfcc_coeffs", c.mfcc_coeffs),
      KDMHL_FIELD("hypothesis.ratios", c.ratios),
      KDMHL_FIELD("hypothesis.n_p", c.sampler.n_p),
      KDMHL_FIELD("hypothesis.n_n", c.sampler.n_n),
      KDMHL_FIELD("hypothesis.hard_fraction", c.sampler.hard_fraction),
      KDMHL_FIELD("hypothesis.easy_min_distance", c.sampler.easy_min_distance),
      KDMHL_FIELD("hypothesis.max_rel_var", c.max_rel_var),
      KDMHL_FIELD("scoring.tau", c.tau),
      KDMHL_FIELD("scoring.winners", c.winners),
      KDMHL_FIELD("scoring.epochs", c.score_epochs),
      KDMHL_FIELD("ssl.d_hidden", c.shape.d_hidden),
      KDMHL_FIELD("ssl.d_z", c.shape.d_z),
      KDMHL_FIELD("ssl.d_head", c.shape.d_head),
      KDMHL_FIELD("ssl.lags", c.lags),
      KDMHL_FIELD("ssl.learning_rate", c.train.learning_rate),
      KDMHL_FIELD("ssl.momentum", c.train.momentum),
      KDMHL_FIELD("ssl.steps", c.train.steps),
      KDMHL_FIELD("ssl.batch", c.train.batch),
      KDMHL_FIELD("supervised.widen_radius", c.widen_radius),
      KDMHL_FIELD("supervised.peak_threshold", c.peak_threshold),
      KDMHL_FIELD("supervised.peak_min_dist", c.peak_min_dist),
      KDMHL_FIELD("metrics.tolerance", c.eval.tolerance),
      KDMHL_FIELD("metrics.trim", c.eval.trim),
      {"metrics.amlt_variants",
       Field{[](const PipelineConfig& c) {
               return std::string(c.eval.variants == metrics::AmltVariants::Extended ? "extended" : "mir_eval");
             },
             [](PipelineConfig& c, const std::string& key, const std::string& v) {
               const auto s = trim_ws(v);
               if (s == "extended") c.eval.variants = metrics::AmltVariants::Extended;
               else if (s == "mir_eval") c.eval.variants = metrics::AmltVariants::MirEval;
               else bad(key, v, "extended|mir_eval");
             }}},
      KDMHL_FIELD("study.features", c.selection.features),
      KDMHL_FIELD("study.sigmas", c.selection.sigmas),
      KDMHL_FIELD("study.chunks", c.selection.chunks),
      KDMHL_FIELD("study.epochs", c.selection.epochs),
      KDMHL_FIELD("study.top_k", c.selection.top_k),
      KDMHL_FIELD("study.tempo_min", c.selection.tempo_min),
      KDMHL_FIELD("study.tempo_max", c.selection.tempo_max),
      KDMHL_FIELD("pretrain.train_chunks", c.pretrain_corpus.train_chunks),
      KDMHL_FIELD("pretrain.probe_train_chunks", c.pretrain_corpus.probe_train_chunks),
      KDMHL_FIELD("pretrain.probe_test_chunks", c.pretrain_corpus.probe_test_chunks),
      KDMHL_FIELD("pretrain.d_in", c.pretrain_corpus.d_in),
      KDMHL_FIELD("pretrain.signal_dims", c.pretrain_corpus.signal_dims),
      KDMHL_FIELD("pretrain.beat_shift", c.pretrain_corpus.beat_shift),
      KDMHL_FIELD("pretrain.nuisance_sigma", c.pretrain_corpus.nuisance_sigma),
      KDMHL_FIELD("pretrain.score_sigma", c.pretrain_corpus.score_sigma),
      KDMHL_FIELD("pretrain.seeds", c.pretrain_seeds),
  };
  return table;
}

#undef KDMHL_FIELD

void check(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::InvalidConfig, what);
}

}  // namespace

void PipelineConfig::validate() const {
  check(workers >= 0, "general.workers must be >= 0");
  check(target_rate == ingest::kPipelineRate, "ingest.target_rate must be 16000 (features assume it)");
  check(chunk_length_s > 0, "ingest.chunk_length_s must be positive");
  check(max_chunks_per_track >= 1, "ingest.max_chunks_per_track must be >= 1");
  try {
    dsp::input_feature_from_string(features);
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, std::string("dsp.features: ") + e.what());
  }
  const auto& p = onset.plp;
  check(p.tempo_min > 0 && p.tempo_min < p.tempo_max, "dsp.tempo_min must be positive and below dsp.tempo_max");
  check(p.tempo_step > 0 && p.window_s > 0 && p.kernel_s > 0, "dsp tempogram step/window/kernel must be positive");
  check(p.peak_rel_threshold >= 0 && p.peak_rel_threshold < 1, "dsp.peak_rel_threshold must lie in [0, 1)");
  check(p.subharmonic_ratio > 0 && p.subharmonic_ratio <= 1, "dsp.subharmonic_ratio must lie in (0, 1]");
  check(p.subharmonic_max_divisor >= 1, "dsp.subharmonic_max_divisor must be >= 1");
  check(onset.flux_lag >= 1 && onset.flux_maxfilter_bands >= 1, "dsp flux lag and max-filter width must be >= 1");
  check(onset.highpass_window_s > 0, "dsp.highpass_window_s must be positive");
  check(onset.mel.bands >= 1 && onset.mel.f_min >= 0 && onset.mel.f_min < onset.mel.f_max &&
            onset.mel.f_max <= target_rate / 2,
        "dsp mel band layout is invalid");
  check(mfcc_coeffs >= 1 && mfcc_coeffs <= onset.mel.bands, "dsp.mfcc_coeffs must lie in [1, mel_bands]");
  check(!ratios.empty(), "hypothesis.ratios must not be empty");
  for (int r : ratios) check(r >= 1, "hypothesis.ratios must be positive integers");
  check(sampler.n_p >= 1 && sampler.n_n >= 1, "hypothesis.n_p and n_n must be >= 1");
  check(sampler.hard_fraction >= 0 && sampler.hard_fraction <= 1, "hypothesis.hard_fraction must lie in [0, 1]");
  check(sampler.easy_min_distance >= 1, "hypothesis.easy_min_distance must be >= 1");
  check(max_rel_var > 0, "hypothesis.max_rel_var must be positive");
  check(tau > 0, "scoring.tau must be positive");
  check(winners >= 1 && winners <= pool().size(), "scoring.winners must lie in [1, K]");
  check(score_epochs >= 1, "scoring.epochs must be >= 1");
  check(shape.d_hidden >= 1 && shape.d_z >= 1 && shape.d_head >= 2, "ssl dimensions must be positive (d_head >= 2)");
  check(!lags.empty(), "ssl.lags must not be empty");
  check(train.learning_rate > 0 && train.momentum >= 0 && train.momentum < 1, "ssl learning rate/momentum out of range");
  check(train.steps >= 1 && train.batch >= 1, "ssl.steps and ssl.batch must be >= 1");
  check(peak_threshold > 0 && peak_threshold < 1, "supervised.peak_threshold must lie in (0, 1)");
  check(peak_min_dist >= 1, "supervised.peak_min_dist must be >= 1");
  check(eval.tolerance > 0 && eval.trim >= 0, "metrics.tolerance must be positive and metrics.trim >= 0");
  check(!selection.features.empty() && !selection.sigmas.empty(), "study features and sigmas must not be empty");
  for (const auto& f : selection.features)
    check(f == "template" || f == "mel" || f == "chroma-stft" || f == "chroma-vqt" || f == "mfcc",
          "study.features entries must be template|mel|chroma-stft|chroma-vqt|mfcc");
  for (double s : selection.sigmas) check(s >= 0, "study.sigmas must be non-negative");
  check(selection.chunks >= 1 && selection.epochs >= 1 && selection.top_k >= 1, "study counts must be >= 1");
  check(selection.tempo_min >= 30 && selection.tempo_min < selection.tempo_max && selection.tempo_max <= 300,
        "study tempo range must lie in [30, 300] BPM");
  const auto& pc = pretrain_corpus;
  check(pc.train_chunks >= 1 && pc.probe_train_chunks >= 1 && pc.probe_test_chunks >= 1, "pretrain chunk counts must be >= 1");
  check(pc.signal_dims >= 2 && pc.signal_dims <= pc.d_in, "pretrain.signal_dims must lie in [2, d_in]");
  check(!pretrain_seeds.empty(), "pretrain.seeds must not be empty");
}

std::vector<std::string> PipelineConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

std::string PipelineConfig::dump() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [k, f] : fields()) {
    const auto dot = k.find('.');
    const auto sec = k.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    out << k.substr(dot + 1) << " = " << f.get(*this) << '\n';
  }
  return out.str();
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) fail(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

PipelineConfig PipelineConfig::parse(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::InvalidConfig, "config line " + std::to_string(lineno) + ": bad section");
      section = trim_ws(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::InvalidConfig, "config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim_ws(line.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    cfg.set(key, line.substr(eq + 1));
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingInput, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ssl::TrainConfig PipelineConfig::train_config() const {
  ssl::TrainConfig t = train;
  t.seed = seed;
  t.tau = tau;
  t.winners = winners;
  t.sampler = sampler;
  return t;
}

synthbench::SelectionStudyConfig PipelineConfig::selection_config() const {
  auto s = selection;
  s.seed = seed;
  s.tau = tau;
  s.sampler = sampler;
  return s;
}

synthbench::PretrainStudyConfig PipelineConfig::pretrain_config() const {
  synthbench::PretrainStudyConfig p;
  p.corpus = pretrain_corpus;
  p.train = train_config();
  p.shape = shape;
  p.seeds.clear();
  for (auto s : pretrain_seeds) p.seeds.push_back(hypothesis::mix_seed({seed, s}));
  return p;
}

hypothesis::HypothesisPool PipelineConfig::pool() const { return hypothesis::build_pool(ratios); }

std::string select_name(std::size_t winners) { return winners == 1 ? "wta" : std::to_string(winners) + "wta"; }

std::size_t parse_select(const std::string& name) {
  if (name == "wta") return 1;
  if (name.size() > 3 && name.substr(name.size() - 3) == "wta") {
    std::size_t n = 0;
    const auto head = name.substr(0, name.size() - 3);
    auto [p, ec] = std::from_chars(head.data(), head.data() + head.size(), n);
    if (ec == std::errc() && p == head.data() + head.size() && n >= 1) return n;
  }
  fail(ErrorKind::InvalidArgument, "--select expects wta|2wta|3wta, got '" + name + "'");
}

}  // namespace kdmhl
