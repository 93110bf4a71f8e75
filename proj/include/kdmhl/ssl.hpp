#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kdmhl/dsp.hpp"
#include "kdmhl/hypothesis.hpp"
#include "kdmhl/scoring.hpp"

namespace kdmhl::ssl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelShape {
  std::size_t d_in = 24;
  std::size_t d_hidden = 32;
  std::size_t d_z = 16;
  std::size_t d_head = 8;
  std::size_t heads = 10;
};

/// Frame-local encoder z = W2 tanh(W1 x + b1) + b2 and K linear heads, all
/// stored in one flat vector.
class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(const ModelShape& shape);
  static EncoderParams random(const ModelShape& shape, std::uint64_t seed);

  const ModelShape& shape() const { return shape_; }
  Eigen::VectorXd& flat() { return theta_; }
  const Eigen::VectorXd& flat() const { return theta_; }
  std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }

  using MapM = Eigen::Map<Eigen::MatrixXd>;
  using MapCM = Eigen::Map<const Eigen::MatrixXd>;
  using MapV = Eigen::Map<Eigen::VectorXd>;
  using MapCV = Eigen::Map<const Eigen::VectorXd>;

  MapCM w1() const { return cmat(off_w1_, shape_.d_hidden, shape_.d_in); }
  MapCV b1() const { return cvec(off_b1_, shape_.d_hidden); }
  MapCM w2() const { return cmat(off_w2_, shape_.d_z, shape_.d_hidden); }
  MapCV b2() const { return cvec(off_b2_, shape_.d_z); }
  MapCM head_w(std::size_t k) const { return cmat(head_offset(k), shape_.d_head, shape_.d_z); }
  MapCV head_b(std::size_t k) const { return cvec(head_offset(k) + shape_.d_head * shape_.d_z, shape_.d_head); }

  /// Same layout over an arbitrary parameter-shaped vector (e.g. a gradient).
  MapM w1(Eigen::VectorXd& v) const { return mat(v, off_w1_, shape_.d_hidden, shape_.d_in); }
  MapV b1(Eigen::VectorXd& v) const { return vec(v, off_b1_, shape_.d_hidden); }
  MapM w2(Eigen::VectorXd& v) const { return mat(v, off_w2_, shape_.d_z, shape_.d_hidden); }
  MapV b2(Eigen::VectorXd& v) const { return vec(v, off_b2_, shape_.d_z); }
  MapM head_w(Eigen::VectorXd& v, std::size_t k) const { return mat(v, head_offset(k), shape_.d_head, shape_.d_z); }
  MapV head_b(Eigen::VectorXd& v, std::size_t k) const {
    return vec(v, head_offset(k) + shape_.d_head * shape_.d_z, shape_.d_head);
  }

  /// [offset, offset + count) of head k inside flat().
  std::size_t head_offset(std::size_t k) const { return off_heads_ + k * head_size(); }
  std::size_t head_size() const { return shape_.d_head * shape_.d_z + shape_.d_head; }
  std::size_t encoder_size() const { return off_heads_; }

 private:
  MapCM cmat(std::size_t off, std::size_t r, std::size_t c) const {
    return MapCM(theta_.data() + off, static_cast<long>(r), static_cast<long>(c));
  }
  MapCV cvec(std::size_t off, std::size_t n) const { return MapCV(theta_.data() + off, static_cast<long>(n)); }
  static MapM mat(Eigen::VectorXd& v, std::size_t off, std::size_t r, std::size_t c) {
    return MapM(v.data() + off, static_cast<long>(r), static_cast<long>(c));
  }
  static MapV vec(Eigen::VectorXd& v, std::size_t off, std::size_t n) {
    return MapV(v.data() + off, static_cast<long>(n));
  }

  ModelShape shape_{};
  Eigen::VectorXd theta_;
  std::size_t off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0, off_heads_ = 0;
};

inline constexpr double kRmsEpsilon = 1e-8;

/// T x d_z encoder output.
RowMatrix encode(const EncoderParams& params, const dsp::FeatureSequence& feat);
/// T x d_head, each row u / sqrt(mean(u^2) + eps) with u = W_k z + b_k. k is a 0-based pool index.
RowMatrix head_project(const EncoderParams& params, const RowMatrix& z, std::size_t k);

double ntxent_loss(const RowMatrix& zk, const hypothesis::TripletSet& triplet, double tau = scoring::kDefaultTau);
dsp::FeatureSequence as_features(const RowMatrix& m, dsp::FeatureKind kind = dsp::FeatureKind::Learned);

/// Loss and d(loss)/d(row) for the rows the triplet touches (others untouched).
double ntxent_with_grad(const RowMatrix& zk, const hypothesis::TripletSet& triplet, double tau, RowMatrix& grad_rows);

enum class TrainMode { KdMhl, SelfTraining };

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t steps = 150;
  std::size_t batch = 8;
  std::size_t winners = 1;
  double tau = scoring::kDefaultTau;
  hypothesis::SamplerConfig sampler{};
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::KdMhl;
};

/// One training chunk: a fixed view for scoring, a view for the encoder,
/// the PLP peaks and (for self-training) pseudo beat frames.
struct TrainChunk {
  std::string id;
  dsp::FeatureSequence score_view;
  dsp::FeatureSequence encoder_view;
  std::vector<std::size_t> peaks;
  std::vector<std::size_t> pseudo_beats;
};

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> per_head;        // zero for heads that did not win
  std::vector<std::size_t> winners;    // pool indices that contributed
  bool skipped = false;                // nothing samplable
};

/// Raw scores h_k for every hypothesis (+inf when unsamplable).
std::vector<double> raw_scores(const TrainChunk& chunk, const hypothesis::HypothesisPool& pool,
                               const TrainConfig& config, std::uint64_t step_seed);

/// Selected-hypotheses loss for one chunk whose running means are in `table`.
/// With grad != nullptr, also accumulates the analytic gradient (same shape as params).
LossBreakdown total_loss(const EncoderParams& params, const TrainChunk& chunk,
                         const hypothesis::HypothesisPool& pool, const scoring::ScoreTable& table,
                         const TrainConfig& config, std::uint64_t step_seed, Eigen::VectorXd* grad = nullptr);

/// Self-training loss on z rows with omega = 1 triplets from the pseudo beats.
LossBreakdown self_loss(const EncoderParams& params, const TrainChunk& chunk, const TrainConfig& config,
                        std::uint64_t step_seed, Eigen::VectorXd* grad = nullptr);

struct StepLog {
  std::size_t step = 0;
  double loss = 0.0;
  std::size_t chunks_used = 0;
  std::vector<std::size_t> winner_counts;  // K entries (empty for self-training)
};

struct TrainResult {
  EncoderParams params;
  std::vector<StepLog> log;
  scoring::ScoreTable table{0};
  /// Fraction of selections equal to the chunk's planted hypothesis over the last
  /// 10% of steps (only when `planted` is supplied).
  double final_hit_rate = 0.0;
};

/// planted[i] is chunk i's true hypothesis pool index (optional, for logging only).
/// Seed used by train()/self_train() to initialise parameters.
std::uint64_t init_seed(std::uint64_t run_seed);

TrainResult train(const std::vector<TrainChunk>& corpus, const hypothesis::HypothesisPool& pool,
                  const ModelShape& shape, const TrainConfig& config,
                  const std::vector<std::size_t>& planted = {});
TrainResult self_train(const std::vector<TrainChunk>& corpus, const ModelShape& shape, const TrainConfig& config);

void write_log_csv(const std::filesystem::path& path, const std::vector<StepLog>& log);

// --- linear probe -------------------------------------------------------------------

struct Probe {
  Eigen::VectorXd mean, scale, weights;  // weights has a trailing bias
};

/// L2-regularised logistic regression (Newton) on standardised rows.
Probe fit_probe(const RowMatrix& x, const std::vector<int>& labels, double l2 = 1e-3, int iterations = 30);
std::vector<int> probe_predict(const Probe& probe, const RowMatrix& x);
/// F-measure of the positive class.
double binary_f_measure(const std::vector<int>& predicted, const std::vector<int>& labels);

// --- checkpoint -----------------------------------------------------------------------
// `<base>.json` {shape, config, step, payload} + little-endian float64 blob `<base>.f64`.

void write_checkpoint(const std::filesystem::path& base, const EncoderParams& params, const TrainConfig& config,
                      std::size_t step);
EncoderParams read_checkpoint(const std::filesystem::path& base);

}  // namespace kdmhl::ssl
