#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kdmhl/dsp.hpp"
#include "kdmhl/hypothesis.hpp"
#include "kdmhl/scoring.hpp"
#include "kdmhl/ssl.hpp"

namespace kdmhl::synthbench {

struct ChunkOptions {
  double duration_s = 20.0;
  std::size_t feature_dim = 12;
  bool render_audio = false;
  double beat_amplitude = 0.5;
  double tatum_amplitude = 0.2;
  double sample_rate = 16000.0;
};

struct SyntheticChunk {
  hypothesis::Hypothesis planted;
  double tempo_bpm = 0.0;     // beats per minute
  double tatum_period = 0.0;  // seconds
  std::vector<double> tatum_times;
  std::vector<std::size_t> tatum_frames;
  std::vector<std::size_t> beat_frames;
  std::vector<double> beat_times;
  dsp::FeatureSequence features;  // template on beats, N(0,1) elsewhere
  std::vector<float> audio;       // empty unless rendered
};

/// Tatums every 60/(tempo*omega) s from a random phase; beats are the (omega, phi)
/// subset of the tatum frames.
SyntheticChunk gen_chunk(int omega, int phi, double tempo_bpm, double noise_sigma, std::uint64_t seed,
                         const ChunkOptions& options = {});

/// Decaying tone bursts at the given times.
std::vector<float> render_clicks(std::span<const double> times, std::span<const double> amplitudes,
                                 double duration_s, double sample_rate = 16000.0, double click_hz = 1000.0);

/// Click times of a track whose tempo changes from bpm_a to bpm_b at change_s.
std::vector<double> tempo_change_times(double bpm_a, double bpm_b, double change_s, double duration_s,
                                       double phase_s);

// --- selection study ---------------------------------------------------------------------

struct SelectionStudyConfig {
  std::vector<std::string> features{"template"};  // template | mel | chroma-stft | chroma-vqt | mfcc
  std::vector<double> sigmas{0.0, 0.1, 0.5, 1.0, 2.0, 4.0};
  std::size_t chunks = 200;
  std::size_t epochs = 5;  // running-mean epochs per chunk
  std::size_t top_k = 3;
  double tempo_min = 60.0;
  double tempo_max = 160.0;
  double tau = scoring::kDefaultTau;
  hypothesis::SamplerConfig sampler{};
  std::uint64_t seed = 0;
};

struct SelectionCell {
  std::string feature;
  double sigma = 0.0;
  std::size_t chunks = 0;
  std::size_t skipped = 0;
  std::vector<double> exact, octave, metric;  // index k-1, fractions in [0,1]
};

std::vector<SelectionCell> run_selection_study(const SelectionStudyConfig& config);
std::string selection_csv(const std::vector<SelectionCell>& cells);
std::string selection_table(const std::vector<SelectionCell>& cells);

// --- pre-training study -----------------------------------------------------------------

struct PretrainCorpusConfig {
  std::size_t train_chunks = 64;
  std::size_t probe_train_chunks = 16;
  std::size_t probe_test_chunks = 16;
  std::size_t d_in = 24;
  std::size_t signal_dims = 4;
  double beat_shift = 4.0;       // offset of beat frames along a fixed signal direction
  double beat_jitter = 0.1;
  double nuisance_sigma = 2.0;
  double score_sigma = 1.0;      // noise on the scoring view's beat template
  std::size_t score_dim = 12;
  double tempo_min = 60.0;
  double tempo_max = 160.0;
};

struct LabelledChunk {
  ssl::TrainChunk chunk;
  std::size_t planted = 0;  // pool index
  std::vector<int> labels;  // 1 on beat frames
};

struct PretrainCorpus {
  std::vector<LabelledChunk> train, probe_train, probe_test;
};

/// Scoring view from gen_chunk; encoder view puts beats at a fixed offset in a
/// low-dimensional signal subspace hidden among high-variance nuisance dims,
/// all rotated by a seed-fixed orthogonal matrix.
PretrainCorpus make_pretrain_corpus(const PretrainCorpusConfig& config, std::uint64_t seed);

struct PretrainStudyConfig {
  PretrainCorpusConfig corpus{};
  ssl::TrainConfig train{};
  ssl::ModelShape shape{};
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

struct PretrainRow {
  std::string setting;            // untrained | wta | 2wta | 3wta | self
  std::vector<double> probe_f;    // per seed
  std::vector<double> hit_rate;   // per seed (KD-MHL only)
  std::vector<double> loss_first, loss_last;  // mean over first / last 10% of steps
  double mean_probe_f() const;
};

std::vector<PretrainRow> run_pretrain_study(const PretrainStudyConfig& config);
double probe_f_measure(const ssl::EncoderParams& params, const PretrainCorpus& corpus);
std::string pretrain_csv(const std::vector<PretrainRow>& rows);
std::string pretrain_table(const std::vector<PretrainRow>& rows);

}  // namespace kdmhl::synthbench
