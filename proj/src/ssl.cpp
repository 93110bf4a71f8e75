#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "kdmhl/error.hpp"
#include "kdmhl/ssl.hpp"

namespace kdmhl::ssl {
namespace {

using hypothesis::mix_seed;

enum Purpose : std::uint64_t { kScorePurpose = 1, kLossPurpose = 2, kSelfPurpose = 3, kOrderPurpose = 4 };

// Cached forward pass of the encoder for one chunk.
struct Forward {
  RowMatrix h;  // T x d_hidden (post-tanh)
  RowMatrix z;  // T x d_z
};

Forward forward(const EncoderParams& params, const dsp::FeatureSequence& feat) {
  const auto& s = params.shape();
  if (feat.dim != s.d_in) fail(ErrorKind::InvalidArgument, "encoder view width does not match d_in");
  Eigen::Map<const RowMatrix> x(feat.values.data(), static_cast<long>(feat.frames), static_cast<long>(feat.dim));
  Forward f;
  f.h = ((x * params.w1().transpose()).rowwise() + params.b1().transpose()).array().tanh();
  f.z = (f.h * params.w2().transpose()).rowwise() + params.b2().transpose();
  return f;
}

std::vector<long> touched_rows(const hypothesis::TripletSet& t) {
  std::vector<long> rows{static_cast<long>(t.anchor)};
  for (auto p : t.positives) rows.push_back(static_cast<long>(p));
  for (auto n : t.negatives) rows.push_back(static_cast<long>(n));
  return rows;
}

// Back-propagates dL/dz on `rows` through the encoder into grad.
void backprop_encoder(const EncoderParams& params, const dsp::FeatureSequence& feat, const Forward& f,
                      const RowMatrix& gz, const std::set<long>& rows, Eigen::VectorXd& grad) {
  auto gw1 = params.w1(grad);
  auto gb1 = params.b1(grad);
  auto gw2 = params.w2(grad);
  auto gb2 = params.b2(grad);
  const auto w2 = params.w2();
  for (long t : rows) {
    const Eigen::VectorXd dz = gz.row(t).transpose();
    const Eigen::VectorXd h = f.h.row(t).transpose();
    gw2.noalias() += dz * h.transpose();
    gb2 += dz;
    const Eigen::VectorXd da = (w2.transpose() * dz).array() * (1.0 - h.array().square());
    Eigen::Map<const Eigen::VectorXd> x(feat.values.data() + static_cast<std::size_t>(t) * feat.dim,
                                        static_cast<long>(feat.dim));
    gw1.noalias() += da * x.transpose();
    gb1 += da;
  }
}

}  // namespace

std::vector<double> raw_scores(const TrainChunk& chunk, const hypothesis::HypothesisPool& pool,
                               const TrainConfig& config, std::uint64_t step_seed) {
  std::vector<double> out(pool.size(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    auto t = hypothesis::sample_triplets(chunk.peaks, pool[k], chunk.score_view.frames, config.sampler,
                                         mix_seed({step_seed, kScorePurpose, k}));
    if (t) out[k] = scoring::score_hypothesis(chunk.score_view, *t, config.tau).value;
  }
  return out;
}

LossBreakdown total_loss(const EncoderParams& params, const TrainChunk& chunk,
                         const hypothesis::HypothesisPool& pool, const scoring::ScoreTable& table,
                         const TrainConfig& config, std::uint64_t step_seed, Eigen::VectorXd* grad) {
  const auto& shape = params.shape();
  require(pool.size() == shape.heads, "total_loss: pool size differs from head count");
  LossBreakdown out;
  out.per_head.assign(pool.size(), 0.0);
  const auto sel = scoring::select_n_wta(table.at(chunk.id).mean, config.winners);

  const Forward f = forward(params, chunk.encoder_view);
  RowMatrix gz;
  std::set<long> rows;
  if (grad) gz = RowMatrix::Zero(f.z.rows(), f.z.cols());

  for (std::size_t k : sel.winners) {
    auto t = hypothesis::sample_triplets(chunk.peaks, pool[k], chunk.encoder_view.frames, config.sampler,
                                         mix_seed({step_seed, kLossPurpose, k}));
    if (!t) continue;
    const RowMatrix y = head_project(params, f.z, k);
    RowMatrix gy = RowMatrix::Zero(y.rows(), y.cols());
    const double l = ntxent_with_grad(y, *t, config.tau, gy);
    out.per_head[k] = l;
    out.total += l;
    out.winners.push_back(k);
    if (!grad) continue;

    auto gw = params.head_w(*grad, k);
    auto gb = params.head_b(*grad, k);
    const auto w = params.head_w(k);
    const double d = static_cast<double>(shape.d_head);
    for (long r : touched_rows(*t)) {
      rows.insert(r);
      const Eigen::VectorXd zr = f.z.row(r).transpose();
      const Eigen::VectorXd u = w * zr + params.head_b(k);
      const double rms = std::sqrt(u.squaredNorm() / d + kRmsEpsilon);
      const Eigen::VectorXd yr = y.row(r).transpose();
      const Eigen::VectorXd g = gy.row(r).transpose();
      const Eigen::VectorXd du = (g - yr * (g.dot(yr) / d)) / rms;
      gw.noalias() += du * zr.transpose();
      gb += du;
      gz.row(r) += (w.transpose() * du).transpose();
    }
  }
  out.skipped = out.winners.empty();
  if (grad && !out.skipped) backprop_encoder(params, chunk.encoder_view, f, gz, rows, *grad);
  return out;
}

LossBreakdown self_loss(const EncoderParams& params, const TrainChunk& chunk, const TrainConfig& config,
                        std::uint64_t step_seed, Eigen::VectorXd* grad) {
  LossBreakdown out;
  auto t = hypothesis::sample_triplets(chunk.pseudo_beats, {1, 0}, chunk.encoder_view.frames, config.sampler,
                                       mix_seed({step_seed, kSelfPurpose}));
  if (!t) {
    out.skipped = true;
    return out;
  }
  const Forward f = forward(params, chunk.encoder_view);
  RowMatrix gz = RowMatrix::Zero(f.z.rows(), f.z.cols());
  out.total = ntxent_with_grad(f.z, *t, config.tau, gz);
  if (grad) {
    const auto r = touched_rows(*t);
    backprop_encoder(params, chunk.encoder_view, f, gz, std::set<long>(r.begin(), r.end()), *grad);
  }
  return out;
}

std::uint64_t init_seed(std::uint64_t run_seed) { return mix_seed({run_seed, 0xE11CULL}); }

namespace {

TrainResult run(const std::vector<TrainChunk>& corpus, const hypothesis::HypothesisPool* pool,
                const ModelShape& shape, const TrainConfig& config, const std::vector<std::size_t>& planted) {
  if (corpus.empty()) fail(ErrorKind::InvalidArgument, "train: empty corpus");
  require(config.learning_rate > 0 && config.steps > 0 && config.batch > 0 && config.tau > 0,
          "train: learning rate, steps, batch and tau must be positive");
  if (pool) require(config.winners >= 1 && config.winners <= pool->size(), "train: need 1 <= n <= K");
  require(planted.empty() || planted.size() == corpus.size(), "train: planted list length mismatch");

  const std::size_t n = corpus.size();
  const std::size_t batch = std::min(config.batch, n);
  TrainResult result;
  result.params = EncoderParams::random(shape, init_seed(config.seed));
  result.table = scoring::ScoreTable(pool ? pool->size() : 0);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(static_cast<long>(result.params.size()));

  std::vector<std::size_t> order(n);
  std::size_t order_epoch = std::numeric_limits<std::size_t>::max();
  const std::size_t tail_from = config.steps - std::max<std::size_t>(1, config.steps / 10);
  std::size_t hits = 0, selections = 0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> idx(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t pos = step * batch + i;
      if (pos / n != order_epoch) {
        order_epoch = pos / n;
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), std::mt19937_64(mix_seed({config.seed, kOrderPurpose, order_epoch})));
      }
      idx[i] = order[pos % n];
    }
    std::vector<std::uint64_t> seeds(batch);
    for (std::size_t i = 0; i < batch; ++i) seeds[i] = mix_seed({config.seed, step, idx[i]});

    if (pool) {
      std::vector<std::vector<double>> raw(batch);
#pragma omp parallel for schedule(dynamic)
      for (std::size_t i = 0; i < batch; ++i) raw[i] = raw_scores(corpus[idx[i]], *pool, config, seeds[i]);
      for (std::size_t i = 0; i < batch; ++i) result.table.update(corpus[idx[i]].id, raw[i]);
    }

    std::vector<Eigen::VectorXd> grads(batch);
    std::vector<LossBreakdown> losses(batch);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < batch; ++i) {
      grads[i] = Eigen::VectorXd::Zero(static_cast<long>(result.params.size()));
      losses[i] = pool ? total_loss(result.params, corpus[idx[i]], *pool, result.table, config, seeds[i], &grads[i])
                       : self_loss(result.params, corpus[idx[i]], config, seeds[i], &grads[i]);
    }

    StepLog entry;
    entry.step = step;
    if (pool) entry.winner_counts.assign(pool->size(), 0);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<long>(result.params.size()));
    for (std::size_t i = 0; i < batch; ++i) {
      if (losses[i].skipped) continue;
      g += grads[i];
      entry.loss += losses[i].total;
      ++entry.chunks_used;
      for (auto k : losses[i].winners) {
        ++entry.winner_counts[k];
        if (step >= tail_from && !planted.empty()) {
          ++selections;
          hits += (k == planted[idx[i]]);
        }
      }
    }
    entry.loss /= static_cast<double>(batch);
    g /= static_cast<double>(batch);
    velocity = config.momentum * velocity + g;
    result.params.flat() -= config.learning_rate * velocity;
    result.log.push_back(std::move(entry));
  }
  result.final_hit_rate = selections ? static_cast<double>(hits) / static_cast<double>(selections) : 0.0;
  return result;
}

}  // namespace

TrainResult train(const std::vector<TrainChunk>& corpus, const hypothesis::HypothesisPool& pool,
                  const ModelShape& shape, const TrainConfig& config, const std::vector<std::size_t>& planted) {
  require(shape.heads == pool.size(), "train: head count must equal pool size");
  return run(corpus, &pool, shape, config, planted);
}

TrainResult self_train(const std::vector<TrainChunk>& corpus, const ModelShape& shape, const TrainConfig& config) {
  return run(corpus, nullptr, shape, config, {});
}

void write_log_csv(const std::filesystem::path& path, const std::vector<StepLog>& log) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::MissingInput, "cannot write " + path.string());
  out << "step,loss,chunks";
  const std::size_t k = log.empty() ? 0 : log.front().winner_counts.size();
  for (std::size_t i = 0; i < k; ++i) out << ",w" << i;
  out << '\n';
  char buf[64];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%.10g", e.loss);
    out << e.step << ',' << buf << ',' << e.chunks_used;
    for (auto c : e.winner_counts) out << ',' << c;
    out << '\n';
  }
}

}  // namespace kdmhl::ssl
