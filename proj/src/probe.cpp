#include <cmath>

#include "kdmhl/error.hpp"
#include "kdmhl/ssl.hpp"

namespace kdmhl::ssl {
namespace {

Eigen::MatrixXd design(const Probe& probe, const RowMatrix& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  for (long t = 0; t < x.rows(); ++t) {
    out.row(t).head(x.cols()) = ((x.row(t).transpose() - probe.mean).array() / probe.scale.array()).transpose();
    out(t, x.cols()) = 1.0;
  }
  return out;
}

}  // namespace

Probe fit_probe(const RowMatrix& x, const std::vector<int>& labels, double l2, int iterations) {
  require(static_cast<std::size_t>(x.rows()) == labels.size(), "fit_probe: label count mismatch");
  require(x.rows() > 0, "fit_probe: empty training set");
  Probe probe;
  probe.mean = x.colwise().mean().transpose();
  probe.scale = ((x.rowwise() - probe.mean.transpose()).array().square().colwise().mean().sqrt() + 1e-9).transpose();
  const Eigen::MatrixXd xb = design(probe, x);

  double pos = 0.0;
  for (int y : labels) pos += (y == 1);
  require(pos > 0 && pos < static_cast<double>(labels.size()), "fit_probe: need both classes");

  Eigen::VectorXd y(xb.rows());
  for (long t = 0; t < xb.rows(); ++t) y(t) = labels[static_cast<std::size_t>(t)] == 1 ? 1.0 : 0.0;
  probe.weights = Eigen::VectorXd::Zero(xb.cols());
  const Eigen::MatrixXd ridge = l2 * Eigen::MatrixXd::Identity(xb.cols(), xb.cols());
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd p = (1.0 + (-(xb * probe.weights)).array().exp()).inverse().matrix();
    const Eigen::VectorXd g = xb.transpose() * (p - y) + l2 * probe.weights;
    const Eigen::VectorXd curv = p.array() * (1.0 - p.array());
    const Eigen::MatrixXd hess = xb.transpose() * curv.asDiagonal() * xb + ridge;
    probe.weights -= hess.ldlt().solve(g);
  }
  return probe;
}

std::vector<int> probe_predict(const Probe& probe, const RowMatrix& x) {
  const Eigen::VectorXd s = design(probe, x) * probe.weights;
  std::vector<int> out(static_cast<std::size_t>(s.size()));
  for (long t = 0; t < s.size(); ++t) out[static_cast<std::size_t>(t)] = s(t) >= 0.0 ? 1 : 0;
  return out;
}

double binary_f_measure(const std::vector<int>& predicted, const std::vector<int>& labels) {
  require(predicted.size() == labels.size(), "binary_f_measure: length mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    tp += predicted[i] == 1 && labels[i] == 1;
    fp += predicted[i] == 1 && labels[i] != 1;
    fn += predicted[i] != 1 && labels[i] == 1;
  }
  if (tp == 0) return 0.0;
  const double p = tp / (tp + fp), r = tp / (tp + fn);
  return 2 * p * r / (p + r);
}

}  // namespace kdmhl::ssl
