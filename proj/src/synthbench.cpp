#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "kdmhl/error.hpp"
#include "kdmhl/synthbench.hpp"

namespace kdmhl::synthbench {

using hypothesis::mix_seed;

std::vector<float> render_clicks(std::span<const double> times, std::span<const double> amplitudes,
                                 double duration_s, double sample_rate, double click_hz) {
  require(times.size() == amplitudes.size(), "render_clicks: one amplitude per click");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  const auto burst = static_cast<std::size_t>(std::llround(0.02 * sample_rate));
  const double decay = 0.0025 * sample_rate;
  std::vector<float> out(n, 0.0f);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const long start = std::lround(times[i] * sample_rate);
    if (start < 0) continue;
    for (std::size_t j = 0; j < burst && static_cast<std::size_t>(start) + j < n; ++j) {
      const double s = amplitudes[i] * std::exp(-static_cast<double>(j) / decay) *
                       std::sin(2.0 * std::numbers::pi * click_hz * static_cast<double>(j) / sample_rate);
      float& o = out[static_cast<std::size_t>(start) + j];
      o = std::clamp(o + static_cast<float>(s), -1.0f, 1.0f);
    }
  }
  return out;
}

std::vector<double> tempo_change_times(double bpm_a, double bpm_b, double change_s, double duration_s,
                                       double phase_s) {
  require(bpm_a > 0 && bpm_b > 0, "tempo_change_times: tempi must be positive");
  std::vector<double> out;
  double t = phase_s;
  while (t < duration_s) {
    out.push_back(t);
    t += 60.0 / (t < change_s ? bpm_a : bpm_b);
  }
  return out;
}

SyntheticChunk gen_chunk(int omega, int phi, double tempo_bpm, double noise_sigma, std::uint64_t seed,
                         const ChunkOptions& options) {
  require(omega >= 1 && phi >= 0 && phi < omega, "gen_chunk: need 0 <= phi < omega");
  require(tempo_bpm >= 30.0 && tempo_bpm <= 300.0, "gen_chunk: tempo must lie in [30, 300] BPM");
  require(noise_sigma >= 0.0, "gen_chunk: noise sigma must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticChunk c;
  c.planted = {omega, phi};
  c.tempo_bpm = tempo_bpm;
  c.tatum_period = 60.0 / (tempo_bpm * omega);
  const std::size_t frames = dsp::frame_count(static_cast<std::size_t>(std::llround(options.duration_s * options.sample_rate)));
  require(frames > 0, "gen_chunk: duration shorter than one frame");

  const double phase = std::uniform_real_distribution<double>(0.0, c.tatum_period)(rng);
  for (double t = dsp::kFrameCentre + phase;; t += c.tatum_period) {
    const std::size_t f = dsp::time_to_frame(t);
    if (f >= frames || t > options.duration_s) break;
    if (!c.tatum_frames.empty() && c.tatum_frames.back() == f) continue;
    c.tatum_times.push_back(t);
    c.tatum_frames.push_back(f);
  }
  const hypothesis::Hypothesis h{omega, phi};
  c.beat_frames = hypothesis::subset(c.tatum_frames, h);
  {
    std::vector<std::size_t> idx(c.tatum_times.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (auto i : hypothesis::subset(idx, h)) c.beat_times.push_back(c.tatum_times[i]);
  }

  c.features = dsp::FeatureSequence(frames, options.feature_dim, dsp::FeatureKind::Synthetic);
  std::vector<double> tmpl(options.feature_dim);
  for (double& v : tmpl) v = gauss(rng);
  for (double& v : c.features.values) v = gauss(rng);
  for (auto b : c.beat_frames)
    for (std::size_t d = 0; d < options.feature_dim; ++d) c.features.at(b, d) = tmpl[d] + noise_sigma * gauss(rng);

  if (options.render_audio) {
    std::vector<double> amps(c.tatum_times.size(), options.tatum_amplitude);
    std::vector<std::size_t> idx(c.tatum_times.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (auto i : hypothesis::subset(idx, h)) amps[i] = options.beat_amplitude;
    c.audio = render_clicks(c.tatum_times, amps, options.duration_s, options.sample_rate);
  }
  return c;
}

// --- selection study ---------------------------------------------------------------------

namespace {

struct PlantedDraw {
  std::size_t index;
  double tempo;
};

PlantedDraw draw_planted(std::uint64_t seed, std::size_t pool_size, double tempo_min, double tempo_max) {
  std::mt19937_64 rng(seed);
  PlantedDraw d;
  d.index = std::uniform_int_distribution<std::size_t>(0, pool_size - 1)(rng);
  d.tempo = std::uniform_real_distribution<double>(tempo_min, tempo_max)(rng);
  return d;
}

dsp::FeatureSequence study_features(const std::string& kind, int omega, int phi, double tempo, double sigma,
                                    std::uint64_t seed, std::vector<std::size_t>& peaks, hypothesis::Hypothesis& truth) {
  ChunkOptions opt;
  const bool audio = kind != "template";
  opt.render_audio = audio;
  auto c = gen_chunk(omega, phi, tempo, audio ? 0.0 : sigma, seed, opt);
  peaks = c.tatum_frames;
  truth = c.planted;
  if (!audio) return std::move(c.features);
  std::mt19937_64 rng(mix_seed({seed, 0xA0D10ULL}));
  std::normal_distribution<double> gauss(0.0, 0.05 * sigma);
  ingest::AudioChunk chunk;
  chunk.sample_rate = opt.sample_rate;
  chunk.samples = std::move(c.audio);
  if (sigma > 0.0)
    for (float& s : chunk.samples) s = std::clamp(static_cast<float>(s + gauss(rng)), -1.0f, 1.0f);
  return dsp::compute_feature(chunk, dsp::input_feature_from_string(kind));
}

}  // namespace

std::vector<SelectionCell> run_selection_study(const SelectionStudyConfig& config) {
  require(config.chunks > 0 && config.epochs > 0 && config.top_k > 0, "selection study: chunks, epochs, top_k > 0");
  for (const auto& f : config.features)
    if (f != "template") dsp::input_feature_from_string(f);
  const auto pool = hypothesis::default_pool();
  const std::size_t K = pool.size();
  const std::size_t top = std::min(config.top_k, K);
  const scoring::AccuracyMode modes[] = {scoring::AccuracyMode::Exact, scoring::AccuracyMode::Octave,
                                         scoring::AccuracyMode::MetricLevel};
  std::vector<SelectionCell> cells;
  for (const auto& feature : config.features) {
    for (double sigma : config.sigmas) {
      // hits[c][mode][k]
      std::vector<std::array<std::vector<char>, 3>> hits(config.chunks);
      std::vector<char> truth_unsamplable(config.chunks, 0);
#pragma omp parallel for schedule(dynamic)
      for (std::size_t c = 0; c < config.chunks; ++c) {
        const std::uint64_t cs = mix_seed({config.seed, c});
        const auto d = draw_planted(cs, K, config.tempo_min, config.tempo_max);
        const auto& h = pool[d.index];
        std::vector<std::size_t> peaks;
        hypothesis::Hypothesis truth;
        const auto feat = study_features(feature, h.omega, h.phi, d.tempo, sigma, mix_seed({cs, 1}), peaks, truth);
        scoring::ScoreTable table(K);
        for (std::size_t e = 0; e < config.epochs; ++e) {
          std::vector<double> raw(K, std::numeric_limits<double>::infinity());
          for (std::size_t k = 0; k < K; ++k) {
            auto t = hypothesis::sample_triplets(peaks, pool[k], feat.frames, config.sampler, mix_seed({cs, 2, e, k}));
            if (t) raw[k] = scoring::score_hypothesis(feat, *t, config.tau).value;
          }
          table.update("chunk", raw);
        }
        const auto& mean = table.at("chunk").mean;
        truth_unsamplable[c] = !std::isfinite(mean[d.index]);
        std::vector<hypothesis::Hypothesis> ranked;
        for (auto k : scoring::rank(mean)) ranked.push_back(pool[k]);
        for (std::size_t m = 0; m < 3; ++m) {
          hits[c][m].resize(top);
          for (std::size_t k = 0; k < top; ++k)
            hits[c][m][k] = scoring::selection_accuracy(ranked, truth, k + 1, modes[m]);
        }
      }
      SelectionCell cell;
      cell.feature = feature;
      cell.sigma = sigma;
      cell.chunks = config.chunks;
      for (auto* v : {&cell.exact, &cell.octave, &cell.metric}) v->assign(top, 0.0);
      for (std::size_t c = 0; c < config.chunks; ++c) {
        cell.skipped += truth_unsamplable[c];
        for (std::size_t k = 0; k < top; ++k) {
          cell.exact[k] += hits[c][0][k];
          cell.octave[k] += hits[c][1][k];
          cell.metric[k] += hits[c][2][k];
        }
      }
      for (auto* v : {&cell.exact, &cell.octave, &cell.metric})
        for (double& x : *v) x /= static_cast<double>(config.chunks);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::string selection_csv(const std::vector<SelectionCell>& cells) {
  std::ostringstream out;
  out << "feature,sigma,k,exact,octave,metric_level,chunks,truth_unsamplable\n";
  char buf[160];
  for (const auto& c : cells)
    for (std::size_t k = 0; k < c.exact.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%s,%g,%zu,%.6f,%.6f,%.6f,%zu,%zu\n", c.feature.c_str(), c.sigma, k + 1,
                    c.exact[k], c.octave[k], c.metric[k], c.chunks, c.skipped);
      out << buf;
    }
  return out.str();
}

std::string selection_table(const std::vector<SelectionCell>& cells) {
  std::ostringstream out;
  const std::size_t top = cells.empty() ? 0 : cells.front().exact.size();
  char buf[64];
  auto group = [&](const std::string& title) {
    std::string s = " | " + title;
    s.resize(3 + top * 6, ' ');
    out << s;
  };
  out << "feature      sigma ";
  group("Exact");
  group("Octave");
  group("Metric Lvl");
  out << "\n                   ";
  for (int g = 0; g < 3; ++g) {
    out << " |";
    for (std::size_t k = 0; k < top; ++k) {
      std::snprintf(buf, sizeof buf, "  top%zu", k + 1);
      out << buf;
    }
    out << ' ';
  }
  out << '\n';
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%-12s %5g ", c.feature.c_str(), c.sigma);
    out << buf;
    for (const auto* v : {&c.exact, &c.octave, &c.metric}) {
      out << " |";
      for (double x : *v) {
        std::snprintf(buf, sizeof buf, " %5.1f", 100.0 * x);
        out << buf;
      }
      out << ' ';
    }
    out << '\n';
  }
  return out.str();
}

// --- pre-training study -----------------------------------------------------------------

PretrainCorpus make_pretrain_corpus(const PretrainCorpusConfig& config, std::uint64_t seed) {
  require(config.signal_dims >= 2 && config.signal_dims <= config.d_in, "pretrain corpus: bad signal subspace");
  const auto pool = hypothesis::default_pool();
  std::mt19937_64 rng(mix_seed({seed, 0x0B7AULL}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const long d = static_cast<long>(config.d_in);
  Eigen::MatrixXd g(d, d);
  for (long i = 0; i < d * d; ++i) g.data()[i] = gauss(rng);
  const Eigen::MatrixXd rot = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();

  auto make = [&](const char* split, std::size_t count, std::uint64_t tag) {
    std::vector<LabelledChunk> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint64_t cs = mix_seed({seed, tag, i});
      const auto draw = draw_planted(cs, pool.size(), config.tempo_min, config.tempo_max);
      const auto& h = pool[draw.index];
      ChunkOptions opt;
      opt.feature_dim = config.score_dim;
      auto c = gen_chunk(h.omega, h.phi, draw.tempo, config.score_sigma, mix_seed({cs, 1}), opt);

      std::mt19937_64 r2(mix_seed({cs, 2}));
      const std::size_t frames = c.features.frames;
      Eigen::MatrixXd x(static_cast<long>(frames), d);
      for (long t = 0; t < x.rows(); ++t) {
        for (std::size_t j = 0; j < config.signal_dims; ++j) x(t, static_cast<long>(j)) = gauss(r2);
        for (long j = static_cast<long>(config.signal_dims); j < d; ++j) x(t, j) = config.nuisance_sigma * gauss(r2);
      }
      Eigen::VectorXd centre = Eigen::VectorXd::Zero(static_cast<long>(config.signal_dims));
      for (std::size_t j = 1; j < config.signal_dims; ++j) centre(static_cast<long>(j)) = gauss(r2);
      centre(0) += config.beat_shift;
      for (auto b : c.beat_frames)
        for (std::size_t j = 0; j < config.signal_dims; ++j)
          x(static_cast<long>(b), static_cast<long>(j)) = centre(static_cast<long>(j)) + config.beat_jitter * gauss(r2);
      const Eigen::MatrixXd xr = x * rot.transpose();

      auto& lc = out[i];
      lc.planted = draw.index;
      lc.labels.assign(frames, 0);
      for (auto b : c.beat_frames) lc.labels[b] = 1;
      lc.chunk.id = std::string(split) + "-" + std::to_string(i);
      lc.chunk.score_view = std::move(c.features);
      lc.chunk.encoder_view = dsp::FeatureSequence(frames, config.d_in, dsp::FeatureKind::Synthetic);
      for (long t = 0; t < xr.rows(); ++t)
        for (long j = 0; j < d; ++j) lc.chunk.encoder_view.at(static_cast<std::size_t>(t), static_cast<std::size_t>(j)) = xr(t, j);
      lc.chunk.peaks = c.tatum_frames;
      lc.chunk.pseudo_beats = c.beat_frames;
    }
    return out;
  };
  PretrainCorpus corpus;
  corpus.train = make("train", config.train_chunks, 1);
  corpus.probe_train = make("probe-train", config.probe_train_chunks, 2);
  corpus.probe_test = make("probe-test", config.probe_test_chunks, 3);
  return corpus;
}

double probe_f_measure(const ssl::EncoderParams& params, const PretrainCorpus& corpus) {
  auto stack = [&](const std::vector<LabelledChunk>& set, std::vector<int>& labels) {
    std::vector<ssl::RowMatrix> zs;
    long rows = 0;
    for (const auto& c : set) {
      zs.push_back(ssl::encode(params, c.chunk.encoder_view));
      rows += zs.back().rows();
      labels.insert(labels.end(), c.labels.begin(), c.labels.end());
    }
    ssl::RowMatrix all(rows, static_cast<long>(params.shape().d_z));
    long at = 0;
    for (const auto& z : zs) {
      all.middleRows(at, z.rows()) = z;
      at += z.rows();
    }
    return all;
  };
  std::vector<int> ytr, yte;
  const auto xtr = stack(corpus.probe_train, ytr);
  const auto xte = stack(corpus.probe_test, yte);
  const auto probe = ssl::fit_probe(xtr, ytr);
  return ssl::binary_f_measure(ssl::probe_predict(probe, xte), yte);
}

double PretrainRow::mean_probe_f() const {
  if (probe_f.empty()) return 0.0;
  double s = 0.0;
  for (double v : probe_f) s += v;
  return s / static_cast<double>(probe_f.size());
}

std::vector<PretrainRow> run_pretrain_study(const PretrainStudyConfig& config) {
  require(!config.seeds.empty(), "pretrain study: need at least one seed");
  const auto pool = hypothesis::default_pool();
  ssl::ModelShape shape = config.shape;
  shape.d_in = config.corpus.d_in;
  shape.heads = pool.size();

  std::vector<PretrainRow> rows(5);
  const char* names[] = {"untrained", "wta", "2wta", "3wta", "self"};
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].setting = names[i];

  auto window_mean = [](const std::vector<ssl::StepLog>& log, bool last) {
    const std::size_t w = std::max<std::size_t>(1, log.size() / 10);
    double s = 0.0;
    for (std::size_t i = 0; i < w; ++i) s += log[last ? log.size() - w + i : i].loss;
    return s / static_cast<double>(w);
  };

  for (auto seed : config.seeds) {
    const auto corpus = make_pretrain_corpus(config.corpus, seed);
    std::vector<ssl::TrainChunk> chunks;
    std::vector<std::size_t> planted;
    for (const auto& c : corpus.train) {
      chunks.push_back(c.chunk);
      planted.push_back(c.planted);
    }
    ssl::TrainConfig tc = config.train;
    tc.seed = seed;
    rows[0].probe_f.push_back(probe_f_measure(ssl::EncoderParams::random(shape, ssl::init_seed(tc.seed)), corpus));
    for (std::size_t n = 1; n <= 3; ++n) {
      tc.mode = ssl::TrainMode::KdMhl;
      tc.winners = n;
      const auto r = ssl::train(chunks, pool, shape, tc, planted);
      rows[n].probe_f.push_back(probe_f_measure(r.params, corpus));
      rows[n].hit_rate.push_back(r.final_hit_rate);
      rows[n].loss_first.push_back(window_mean(r.log, false));
      rows[n].loss_last.push_back(window_mean(r.log, true));
    }
    tc.mode = ssl::TrainMode::SelfTraining;
    tc.winners = 1;
    const auto r = ssl::self_train(chunks, shape, tc);
    rows[4].probe_f.push_back(probe_f_measure(r.params, corpus));
    rows[4].loss_first.push_back(window_mean(r.log, false));
    rows[4].loss_last.push_back(window_mean(r.log, true));
  }
  return rows;
}

std::string pretrain_csv(const std::vector<PretrainRow>& rows) {
  std::ostringstream out;
  out << "setting,seed_index,probe_f,hit_rate,loss_first,loss_last\n";
  char buf[200];
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.probe_f.size(); ++i) {
      auto at = [&](const std::vector<double>& v) { return i < v.size() ? v[i] : std::nan(""); };
      std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f\n", r.setting.c_str(), i, r.probe_f[i],
                    at(r.hit_rate), at(r.loss_first), at(r.loss_last));
      out << buf;
    }
  return out.str();
}

std::string pretrain_table(const std::vector<PretrainRow>& rows) {
  std::ostringstream out;
  out << "setting     probe F (mean)   per seed\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-11s %8.4f        ", r.setting.c_str(), r.mean_probe_f());
    out << buf;
    for (double v : r.probe_f) {
      std::snprintf(buf, sizeof buf, " %.4f", v);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace kdmhl::synthbench
