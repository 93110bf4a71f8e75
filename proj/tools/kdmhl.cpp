// kdmhl: command-line front end for the rhythm self-supervision toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "kdmhl/config.hpp"
#include "kdmhl/dsp.hpp"
#include "kdmhl/error.hpp"
#include "kdmhl/hypothesis.hpp"
#include "kdmhl/ingest.hpp"
#include "kdmhl/metrics.hpp"
#include "kdmhl/scoring.hpp"
#include "kdmhl/ssl.hpp"
#include "kdmhl/supervised.hpp"
#include "kdmhl/synthbench.hpp"

namespace fs = std::filesystem;
using namespace kdmhl;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> features;
  std::optional<std::string> select;
  std::optional<double> tau;
  std::vector<std::string> overrides;  // key=value
};

PipelineConfig effective_config(const Globals& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : PipelineConfig::load(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::InvalidConfig, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;
  if (g.features) cfg.features = *g.features;
  if (g.select) cfg.winners = parse_select(*g.select);
  if (g.tau) cfg.tau = *g.tau;
  cfg.validate();
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::MissingInput, "cannot write " + path.string());
  out << text;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) fail(ErrorKind::MissingInput, "no such file: " + p.string());
}

std::vector<fs::path> wav_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::MissingInput, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

ordered_json plp_json(const dsp::PlpResult& r) {
  ordered_json j;
  j["hop_s"] = r.hop_s;
  j["frames"] = r.curve.size();
  j["peaks"] = r.peaks;
  std::vector<double> times;
  for (auto p : r.peaks) times.push_back(dsp::frame_time(p, r.hop_s));
  j["peak_times"] = times;
  std::vector<double> used;
  for (double t : r.local_tempo)
    if (t > 0) used.push_back(t);
  std::sort(used.begin(), used.end());
  j["median_tempo_bpm"] = used.empty() ? 0.0 : used[used.size() / 2];
  j["max_rel_interval_variation"] = r.peaks.size() >= 3 ? hypothesis::max_relative_variation(r.peaks) : -1.0;
  j["curve"] = r.curve;
  return j;
}

// --- commands ------------------------------------------------------------------------------

void cmd_plp(const PipelineConfig& cfg, const fs::path& audio, const fs::path& out) {
  require_file(audio);
  const auto chunk = ingest::load_audio(audio, cfg.target_rate);
  const auto r = dsp::plp_from_audio(chunk, cfg.onset);
  auto j = plp_json(r);
  j["source_id"] = chunk.source_id;
  j["admissible"] = hypothesis::admissible(r.peaks, r.hop_s, cfg.max_rel_var);
  write_text(fs::path(out.string() + ".plp.json"), j.dump(2) + "\n");
  const auto which = dsp::input_feature_from_string(cfg.features);
  auto feat = which == dsp::InputFeature::Mfcc ? dsp::mfcc(chunk, cfg.mfcc_coeffs) : dsp::compute_feature(chunk, which);
  dsp::write_feature_dump(fs::path(out.string() + "." + cfg.features), feat);
  std::printf("%s: %zu frames, %zu PLP peaks, %s\n", chunk.source_id.c_str(), r.curve.size(), r.peaks.size(),
              j["admissible"].get<bool>() ? "admissible" : "not admissible");
}

void cmd_mine(const PipelineConfig& cfg, const fs::path& audio_dir, const fs::path& manifest) {
  const auto files = wav_files(audio_dir);
  const fs::path base = manifest.parent_path().empty() ? fs::path(".") : manifest.parent_path();
  const fs::path chunk_dir = base / (manifest.stem().string() + "_chunks");
  fs::create_directories(chunk_dir);
  std::vector<ingest::ManifestEntry> kept;
  std::size_t total = 0, rejected = 0;
  for (const auto& f : files) {
    const auto track = ingest::load_audio(f, cfg.target_rate);
    const auto chunks = ingest::cut_chunks(track, cfg.chunk_length_s, cfg.max_chunks_per_track);
    if (chunks.empty()) std::fprintf(stderr, "warning: %s shorter than one chunk, skipped\n", f.filename().c_str());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      ++total;
      const auto r = dsp::plp_from_audio(chunks[i], cfg.onset);
      if (!hypothesis::admissible(r.peaks, r.hop_s, cfg.max_rel_var)) {
        ++rejected;
        std::fprintf(stderr, "rejected %s @ %.3f s: %zu peaks, max interval variation %.3f\n",
                     track.source_id.c_str(), chunks[i].offset, r.peaks.size(),
                     hypothesis::max_relative_variation(r.peaks));
        continue;
      }
      const std::string name = track.source_id + "-" + std::to_string(i) + ".wav";
      ingest::write_wav(chunk_dir / name, chunks[i].samples, chunks[i].sample_rate, ingest::WavEncoding::Float32);
      ingest::ManifestEntry e;
      e.source_id = track.source_id;
      e.offset = chunks[i].offset;
      e.duration = chunks[i].duration();
      e.audio = (fs::path(chunk_dir.filename()) / name).generic_string();
      e.plp_peaks = r.peaks;
      kept.push_back(std::move(e));
    }
  }
  ingest::write_manifest(manifest, kept);
  std::printf("mined %zu chunks from %zu tracks: %zu kept, %zu rejected\n", total, files.size(), kept.size(), rejected);
}

struct LoadedChunk {
  std::string id;
  ingest::AudioChunk audio;
  std::vector<std::size_t> peaks;
};

std::vector<LoadedChunk> load_manifest_chunks(const PipelineConfig& cfg, const fs::path& manifest) {
  require_file(manifest);
  const auto entries = ingest::read_manifest(manifest);
  if (entries.empty()) fail(ErrorKind::BadData, manifest.string() + ": manifest has no chunks");
  std::vector<LoadedChunk> out;
  for (const auto& e : entries) {
    const fs::path p = manifest.parent_path() / e.audio;
    require_file(p);
    LoadedChunk c;
    c.audio = ingest::load_audio(p, cfg.target_rate);
    c.id = c.audio.source_id;
    c.peaks = e.plp_peaks.empty() ? dsp::plp_from_audio(c.audio, cfg.onset).peaks : e.plp_peaks;
    out.push_back(std::move(c));
  }
  return out;
}

dsp::FeatureSequence features_for(const PipelineConfig& cfg, const ingest::AudioChunk& a) {
  const auto which = dsp::input_feature_from_string(cfg.features);
  return which == dsp::InputFeature::Mfcc ? dsp::mfcc(a, cfg.mfcc_coeffs) : dsp::compute_feature(a, which);
}

void cmd_score(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& out,
               const std::string& triplets_out) {
  const auto chunks = load_manifest_chunks(cfg, manifest);
  const auto pool = cfg.pool();
  scoring::ScoreTable table(pool.size());
  std::string audit, trip;
  std::size_t flagged = 0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const auto feat = features_for(cfg, chunks[c].audio);
    for (std::size_t e = 0; e < cfg.score_epochs; ++e) {
      std::vector<double> raw(pool.size(), std::numeric_limits<double>::infinity());
      for (std::size_t k = 0; k < pool.size(); ++k) {
        auto t = hypothesis::sample_triplets(chunks[c].peaks, pool[k], feat.frames, cfg.sampler,
                                             hypothesis::mix_seed({cfg.seed, c, e, k}));
        if (!t) continue;
        const auto s = scoring::score_hypothesis(feat, *t, cfg.tau);
        raw[k] = s.value;
        flagged += s.zero_norm;
        if (!triplets_out.empty()) trip += hypothesis::triplet_record(chunks[c].id, pool[k], *t) + "\n";
      }
      const auto& entry = table.update(chunks[c].id, raw);
      const auto sel = scoring::select_n_wta(entry.mean, cfg.winners);
      audit += scoring::audit_record(chunks[c].id, e, entry.mean, sel.winners) + "\n";
    }
  }
  if (flagged) std::fprintf(stderr, "warning: %zu scores used a zero-norm feature vector\n", flagged);
  write_text(out, audit);
  if (!triplets_out.empty()) write_text(triplets_out, trip);
  std::printf("scored %zu chunks x %zu hypotheses x %zu epochs (%s)\n", chunks.size(), pool.size(), cfg.score_epochs,
              select_name(cfg.winners).c_str());
}

std::vector<ssl::TrainChunk> train_chunks(const PipelineConfig& cfg, const std::vector<LoadedChunk>& chunks) {
  std::vector<ssl::TrainChunk> out;
  for (const auto& c : chunks) {
    ssl::TrainChunk t;
    t.id = c.id;
    t.score_view = features_for(cfg, c.audio);
    t.encoder_view = dsp::lag_stack(t.score_view, cfg.lags);
    t.peaks = c.peaks;
    out.push_back(std::move(t));
  }
  return out;
}

ssl::ModelShape shape_for(const PipelineConfig& cfg, const std::vector<ssl::TrainChunk>& chunks) {
  ssl::ModelShape s = cfg.shape;
  s.d_in = chunks.front().encoder_view.dim;
  s.heads = cfg.pool().size();
  return s;
}

void finish_training(const PipelineConfig& cfg, const ssl::TrainResult& r, const ssl::TrainConfig& tc,
                     const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  ssl::write_checkpoint(out, r.params, tc, tc.steps);
  ssl::write_log_csv(fs::path(out.string() + ".log.csv"), r.log);
  const auto& last = r.log.back();
  std::printf("trained %zu steps (%s), final loss %.6f\n", tc.steps,
              tc.mode == ssl::TrainMode::KdMhl ? select_name(cfg.winners).c_str() : "self-training", last.loss);
}

void cmd_train(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& out) {
  const auto chunks = train_chunks(cfg, load_manifest_chunks(cfg, manifest));
  auto tc = cfg.train_config();
  tc.mode = ssl::TrainMode::KdMhl;
  const auto r = ssl::train(chunks, cfg.pool(), shape_for(cfg, chunks), tc);
  finish_training(cfg, r, tc, out);
}

void cmd_selftrain(const PipelineConfig& cfg, const fs::path& manifest, const fs::path& pseudo_dir, const fs::path& out) {
  if (!fs::is_directory(pseudo_dir)) fail(ErrorKind::MissingInput, "not a directory: " + pseudo_dir.string());
  auto chunks = train_chunks(cfg, load_manifest_chunks(cfg, manifest));
  std::vector<ssl::TrainChunk> usable;
  for (auto& c : chunks) {
    const fs::path p = pseudo_dir / (c.id + ".beats");
    if (!fs::exists(p)) {
      std::fprintf(stderr, "warning: no pseudo beats for %s, skipped\n", c.id.c_str());
      continue;
    }
    const auto times = ingest::parse_beats(p).times();
    const auto labels = supervised::frame_labels(times, c.encoder_view.frames, c.encoder_view.hop_s);
    for (std::size_t t = 0; t < labels.size(); ++t)
      if (labels[t]) c.pseudo_beats.push_back(t);
    if (c.pseudo_beats.size() < cfg.sampler.n_p + 1) {
      std::fprintf(stderr, "warning: %s has %zu pseudo beats (< n_p + 1), skipped\n", c.id.c_str(), c.pseudo_beats.size());
      continue;
    }
    usable.push_back(std::move(c));
  }
  if (usable.empty()) fail(ErrorKind::BadData, "no chunk has usable pseudo beats");
  auto tc = cfg.train_config();
  tc.mode = ssl::TrainMode::SelfTraining;
  const auto r = ssl::self_train(usable, shape_for(cfg, usable), tc);
  finish_training(cfg, r, tc, out);
}

void cmd_eval(const PipelineConfig& cfg, const fs::path& est, const fs::path& ref, bool downbeat,
              std::optional<double> trim, const std::string& out) {
  auto opt = cfg.eval;
  opt.downbeat = downbeat;
  if (trim) opt.trim = *trim;
  const auto report = metrics::evaluate_corpus(est, ref, opt);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::fputs(metrics::report_table(report).c_str(), stdout);
  if (!out.empty()) write_text(out, metrics::report_json(report) + "\n");
}

std::pair<std::vector<double>, std::vector<double>> read_activations(const fs::path& base) {
  const auto a = dsp::read_feature_dump(base);
  if (a.dim < 1 || a.dim > 2) fail(ErrorKind::BadData, "activation dump must have 1 or 2 columns (beat[, downbeat])");
  std::vector<double> beat(a.frames), down;
  for (std::size_t t = 0; t < a.frames; ++t) beat[t] = a.at(t, 0);
  if (a.dim == 2) {
    down.resize(a.frames);
    for (std::size_t t = 0; t < a.frames; ++t) down[t] = a.at(t, 1);
  }
  return {beat, down};
}

void cmd_decode(const PipelineConfig& cfg, const fs::path& act, const fs::path& out) {
  const auto [beat, down] = read_activations(act);
  const auto ann = supervised::decode(beat, down, dsp::kHopSeconds, cfg.peak_threshold, cfg.peak_min_dist);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  ingest::write_beats(out, ann);
  std::printf("decoded %zu beats, %zu downbeats\n", ann.events.size(), ann.downbeat_times().size());
}

void cmd_losses(const PipelineConfig& cfg, const fs::path& act, const fs::path& ref, const std::string& out) {
  require_file(ref);
  const auto [beat, down] = read_activations(act);
  const auto ann = ingest::parse_beats(ref);
  ordered_json j;
  auto one = [&](const std::vector<double>& a, const std::vector<double>& times) {
    const auto raw = supervised::frame_labels(times, a.size(), dsp::kHopSeconds);
    const auto targets = supervised::widen_targets(raw, cfg.widen_radius);
    ordered_json r;
    r["weighted_bce"] = supervised::weighted_bce(a, targets);
    if (std::find(raw.begin(), raw.end(), 1) != raw.end()) {
      const auto st = supervised::st_bce(a, raw);
      r["st_bce"] = st.total;
      r["st_bce_positive"] = st.positive_term;
      r["st_bce_negative"] = st.negative_term;
      r["alpha"] = st.alpha;
    } else {
      std::fprintf(stderr, "warning: no positive frames, st_bce undefined\n");
      r["st_bce"] = nullptr;
    }
    return r;
  };
  j["beat"] = one(beat, ann.times());
  if (!down.empty()) j["downbeat"] = one(down, ann.downbeat_times());
  const auto text = j.dump(2) + "\n";
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text(out, text);
}

void cmd_bench_selection(const PipelineConfig& cfg, const fs::path& out) {
  const auto cells = synthbench::run_selection_study(cfg.selection_config());
  const auto table = synthbench::selection_table(cells);
  write_text(fs::path(out.string() + ".csv"), synthbench::selection_csv(cells));
  write_text(fs::path(out.string() + ".txt"), table);
  std::fputs(table.c_str(), stdout);
}

void cmd_bench_pretrain(const PipelineConfig& cfg, const fs::path& out) {
  const auto rows = synthbench::run_pretrain_study(cfg.pretrain_config());
  const auto table = synthbench::pretrain_table(rows);
  write_text(fs::path(out.string() + ".csv"), synthbench::pretrain_csv(rows));
  write_text(fs::path(out.string() + ".txt"), table);
  std::fputs(table.c_str(), stdout);
}

void cmd_synth(const PipelineConfig& cfg, const fs::path& dir, std::size_t tracks, double change_factor,
               double duration) {
  require(tracks >= 1, "synth: --tracks must be >= 1");
  require(duration > 0, "synth: --duration must be positive");
  require(change_factor > 0, "synth: --tempo-change must be positive");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < tracks; ++i) {
    std::mt19937_64 rng(hypothesis::mix_seed({cfg.seed, 0x5E7ULL, i}));
    const double bpm = std::uniform_real_distribution<double>(70.0, 140.0)(rng);
    const double phase = std::uniform_real_distribution<double>(0.0, 60.0 / bpm)(rng);
    const double change = change_factor == 1.0 ? duration + 1.0
                                               : std::uniform_real_distribution<double>(0.4, 0.6)(rng) * duration;
    const auto times = synthbench::tempo_change_times(bpm, bpm * change_factor, change, duration, phase);
    const std::vector<double> amps(times.size(), 0.5);
    const auto audio = synthbench::render_clicks(times, amps, duration, cfg.target_rate);
    char name[64];
    std::snprintf(name, sizeof name, "%s-%03zu", change_factor == 1.0 ? "const" : "change", i);
    ingest::write_wav(dir / (std::string(name) + ".wav"), audio, cfg.target_rate, ingest::WavEncoding::Pcm16);
    ingest::BeatAnnotation ann;
    for (double t : times) ann.events.push_back({t, 0});
    ingest::write_beats(dir / (std::string(name) + ".beats"), ann);
  }
  std::printf("wrote %zu click tracks to %s\n", tracks, dir.c_str());
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidConfig: return 2;
    case ErrorKind::MissingInput: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rhythm self-supervision toolkit: PLP hypotheses, contrastive scoring, pre-training, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Config file (key = value)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--workers", g.workers, "Worker threads (0 = all cores)");
  app.add_option("--features", g.features, "mel|chroma-stft|chroma-vqt|mfcc");
  app.add_option("--select", g.select, "wta|2wta|3wta");
  app.add_option("--tau", g.tau, "Temperature");
  app.add_option("--set", g.overrides, "Override a config key (key=value), repeatable");

  std::string a1, a2, a3, out, triplets;
  bool downbeat = false, dump = false;
  std::optional<double> trim;
  std::size_t tracks = 10;
  double change = 1.0, duration = 20.0;

  auto* plp = app.add_subcommand("plp", "PLP curve, peaks and a feature dump for one audio file");
  plp->add_option("audio", a1)->required();
  plp->add_option("-o,--out", out, "Output prefix")->required();

  auto* mine = app.add_subcommand("mine", "Cut chunks from a directory of WAVs and keep quasi-constant-tempo ones");
  mine->add_option("audio_dir", a1)->required();
  mine->add_option("-o,--out", out, "Manifest (JSON lines)")->required();

  auto* score = app.add_subcommand("score", "Score every hypothesis of every manifest chunk");
  score->add_option("manifest", a1)->required();
  score->add_option("-o,--out", out, "Audit output (JSON lines)")->required();
  score->add_option("--triplets", triplets, "Also export sampled triplets (JSON lines)");

  auto* train = app.add_subcommand("train", "Pre-train the encoder with selected hypotheses");
  train->add_option("manifest", a1)->required();
  train->add_option("-o,--out", out, "Checkpoint prefix")->required();

  auto* selftrain = app.add_subcommand("selftrain", "Pre-train the encoder on pseudo beats");
  selftrain->add_option("manifest", a1)->required();
  selftrain->add_option("pseudo_dir", a2, "Directory of <chunk>.beats files (chunk-relative seconds)")->required();
  selftrain->add_option("-o,--out", out, "Checkpoint prefix")->required();

  auto* eval = app.add_subcommand("eval", "F-measure, CMLt and AMLt over matching .beats files");
  eval->add_option("est_dir", a1)->required();
  eval->add_option("ref_dir", a2)->required();
  eval->add_flag("--downbeat", downbeat, "Evaluate downbeats (metrical position 1)");
  eval->add_option("--trim", trim, "Ignore events before this time (s)");
  eval->add_option("-o,--out", out, "JSON report");

  auto* decode = app.add_subcommand("decode", "Peak-pick an activation dump into a .beats file");
  decode->add_option("activations", a1, "Activation dump prefix (float32, 1-2 columns)")->required();
  decode->add_option("-o,--out", out, ".beats output")->required();

  auto* losses = app.add_subcommand("losses", "Weighted BCE and ST-BCE of an activation dump against a .beats file");
  losses->add_option("activations", a1)->required();
  losses->add_option("reference", a2)->required();
  losses->add_option("-o,--out", out, "JSON output (default stdout)");

  auto* bsel = app.add_subcommand("bench-selection", "Selection-accuracy study on synthetic chunks");
  bsel->add_option("-o,--out", out, "Output prefix (.csv, .txt)")->required();

  auto* bpre = app.add_subcommand("bench-pretrain", "WTA / n-WTA / self-training pre-training study");
  bpre->add_option("-o,--out", out, "Output prefix (.csv, .txt)")->required();

  auto* synth = app.add_subcommand("synth", "Render synthetic click tracks with reference beats");
  synth->add_option("-o,--out", out, "Output directory")->required();
  synth->add_option("--tracks", tracks, "Number of tracks");
  synth->add_option("--tempo-change", change, "Tempo factor applied mid-track (1 = constant)");
  synth->add_option("--duration", duration, "Track length (s)");

  auto* config = app.add_subcommand("config", "Print or write the effective configuration");
  config->add_flag("--dump", dump, "Print the configuration");
  config->add_option("-o,--out", out, "Write the configuration to a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = effective_config(g);
    if (*plp) cmd_plp(cfg, a1, out);
    else if (*mine) cmd_mine(cfg, a1, out);
    else if (*score) cmd_score(cfg, a1, out, triplets);
    else if (*train) cmd_train(cfg, a1, out);
    else if (*selftrain) cmd_selftrain(cfg, a1, a2, out);
    else if (*eval) cmd_eval(cfg, a1, a2, downbeat, trim, out);
    else if (*decode) cmd_decode(cfg, a1, out);
    else if (*losses) cmd_losses(cfg, a1, a2, out);
    else if (*bsel) cmd_bench_selection(cfg, out);
    else if (*bpre) cmd_bench_pretrain(cfg, out);
    else if (*synth) cmd_synth(cfg, out, tracks, change, duration);
    else if (*config) {
      if (!out.empty()) write_text(out, cfg.dump());
      if (dump || out.empty()) std::fputs(cfg.dump().c_str(), stdout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 1;
  }
  return 0;
}
