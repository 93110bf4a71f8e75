#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kdmhl/dsp.hpp"
#include "kdmhl/hypothesis.hpp"
#include "kdmhl/metrics.hpp"
#include "kdmhl/ssl.hpp"
#include "kdmhl/synthbench.hpp"

namespace kdmhl {

/// Every tunable of the pipeline. Files are flat `key = value` lines
/// (`#` comments, optional `[section]` headers prefixing `section.`).
struct PipelineConfig {
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = all available cores

  // ingest
  double target_rate = ingest::kPipelineRate;
  double chunk_length_s = 20.0;
  std::size_t max_chunks_per_track = 5;

  // dsp
  std::string features = "mel";
  dsp::OnsetPipelineConfig onset{};
  std::size_t mfcc_coeffs = 20;

  // hypothesis
  std::vector<int> ratios{1, 2, 3, 4};
  hypothesis::SamplerConfig sampler{};
  double max_rel_var = 0.2;

  // scoring
  double tau = scoring::kDefaultTau;
  std::size_t winners = 1;
  std::size_t score_epochs = 3;

  // ssl
  ssl::ModelShape shape{};
  ssl::TrainConfig train{};
  std::vector<std::size_t> lags{0, 1, 2};

  // supervised
  std::size_t widen_radius = 1;
  double peak_threshold = 0.5;
  std::size_t peak_min_dist = 7;

  // metrics
  metrics::EvalOptions eval{};

  // studies
  synthbench::SelectionStudyConfig selection{};
  synthbench::PretrainCorpusConfig pretrain_corpus{};
  std::vector<std::uint64_t> pretrain_seeds{0, 1, 2};

  /// Throws InvalidConfig when a module precondition does not hold.
  void validate() const;

  std::string dump() const;
  /// Sets one key from its text form (InvalidConfig on unknown keys or bad values).
  void set(const std::string& key, const std::string& value);
  std::vector<std::string> keys() const;

  static PipelineConfig parse(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);

  /// TrainConfig with seed/tau/winners/sampler filled in from the shared fields.
  ssl::TrainConfig train_config() const;
  synthbench::SelectionStudyConfig selection_config() const;
  synthbench::PretrainStudyConfig pretrain_config() const;
  hypothesis::HypothesisPool pool() const;
};

std::string select_name(std::size_t winners);
std::size_t parse_select(const std::string& name);  // wta | 2wta | 3wta | <n>wta

}  // namespace kdmhl
