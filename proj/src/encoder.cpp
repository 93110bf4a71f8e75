#include <cmath>
#include <random>

#include "kdmhl/error.hpp"
#include "kdmhl/ssl.hpp"

namespace kdmhl::ssl {

EncoderParams::EncoderParams(const ModelShape& shape) : shape_(shape) {
  require(shape.d_in > 0 && shape.d_hidden > 0 && shape.d_z > 0 && shape.d_head > 0 && shape.heads > 0,
          "EncoderParams: all dimensions must be positive");
  off_w1_ = 0;
  off_b1_ = off_w1_ + shape.d_hidden * shape.d_in;
  off_w2_ = off_b1_ + shape.d_hidden;
  off_b2_ = off_w2_ + shape.d_z * shape.d_hidden;
  off_heads_ = off_b2_ + shape.d_z;
  theta_ = Eigen::VectorXd::Zero(static_cast<long>(off_heads_ + shape.heads * head_size()));
}

EncoderParams EncoderParams::random(const ModelShape& shape, std::uint64_t seed) {
  EncoderParams p(shape);
  std::mt19937_64 rng(seed);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike.
  auto fill = [&](double* data, std::size_t count, std::size_t fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t i = 0; i < count; ++i) data[i] = u(rng);
  };
  double* t = p.theta_.data();
  fill(t + p.off_w1_, shape.d_hidden * shape.d_in + shape.d_hidden, shape.d_in);
  fill(t + p.off_w2_, shape.d_z * shape.d_hidden + shape.d_z, shape.d_hidden);
  for (std::size_t k = 0; k < shape.heads; ++k) fill(t + p.head_offset(k), p.head_size(), shape.d_z);
  return p;
}

RowMatrix encode(const EncoderParams& params, const dsp::FeatureSequence& feat) {
  const auto& s = params.shape();
  if (feat.dim != s.d_in)
    fail(ErrorKind::InvalidArgument, "encode: feature width " + std::to_string(feat.dim) + " != d_in " +
                                         std::to_string(s.d_in));
  Eigen::Map<const RowMatrix> x(feat.values.data(), static_cast<long>(feat.frames), static_cast<long>(feat.dim));
  RowMatrix h = ((x * params.w1().transpose()).rowwise() + params.b1().transpose()).array().tanh();
  RowMatrix z = (h * params.w2().transpose()).rowwise() + params.b2().transpose();
  return z;
}

RowMatrix head_project(const EncoderParams& params, const RowMatrix& z, std::size_t k) {
  require(k < params.shape().heads, "head_project: head index out of range");
  require(static_cast<std::size_t>(z.cols()) == params.shape().d_z, "head_project: z width != d_z");
  RowMatrix u = (z * params.head_w(k).transpose()).rowwise() + params.head_b(k).transpose();
  const double d = static_cast<double>(u.cols());
  for (long t = 0; t < u.rows(); ++t) u.row(t) /= std::sqrt(u.row(t).squaredNorm() / d + kRmsEpsilon);
  return u;
}

dsp::FeatureSequence as_features(const RowMatrix& m, dsp::FeatureKind kind) {
  dsp::FeatureSequence f(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), kind);
  std::copy(m.data(), m.data() + m.size(), f.values.begin());
  return f;
}

double ntxent_loss(const RowMatrix& zk, const hypothesis::TripletSet& triplet, double tau) {
  return scoring::score_hypothesis(as_features(zk), triplet, tau).value;
}

double ntxent_with_grad(const RowMatrix& zk, const hypothesis::TripletSet& triplet, double tau,
                        RowMatrix& grad_rows) {
  require(tau > 0.0, "ntxent: tau must be positive");
  require(grad_rows.rows() == zk.rows() && grad_rows.cols() == zk.cols(), "ntxent: gradient shape mismatch");
  require(!triplet.negatives.empty(), "ntxent: need at least one negative");
  const long a = static_cast<long>(triplet.anchor);
  const Eigen::RowVectorXd va = zk.row(a);
  const double na = va.norm();

  auto sim = [&](long b, double& nb) {
    nb = zk.row(b).norm();
    return (na == 0.0 || nb == 0.0) ? 0.0 : va.dot(zk.row(b)) / (na * nb);
  };
  // d s / d a and d s / d b for s = cos(a, b); zero when a norm vanishes.
  auto backprop = [&](long b, double s, double nb, double coeff) {
    if (na == 0.0 || nb == 0.0 || coeff == 0.0) return;
    const Eigen::RowVectorXd vb = zk.row(b);
    grad_rows.row(a) += coeff * (vb / (na * nb) - s * va / (na * na));
    grad_rows.row(b) += coeff * (va / (na * nb) - s * vb / (nb * nb));
  };

  const std::size_t n_n = triplet.negatives.size();
  std::vector<double> sn(n_n), nn(n_n);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_n; ++i) {
    sn[i] = sim(static_cast<long>(triplet.negatives[i]), nn[i]);
    top = std::max(top, sn[i] / tau);
  }
  double z = 0.0;
  for (double s : sn) z += std::exp(s / tau - top);
  const double lse = top + std::log(z);

  double loss = 0.0;
  for (auto p : triplet.positives) {
    double np = 0.0;
    const double s = sim(static_cast<long>(p), np);
    loss -= s / tau - lse;
    backprop(static_cast<long>(p), s, np, -1.0 / tau);
  }
  const double n_p = static_cast<double>(triplet.positives.size());
  for (std::size_t i = 0; i < n_n; ++i) {
    const double soft = std::exp(sn[i] / tau - lse);
    backprop(static_cast<long>(triplet.negatives[i]), sn[i], nn[i], n_p * soft / tau);
  }
  return loss;
}

}  // namespace kdmhl::ssl
