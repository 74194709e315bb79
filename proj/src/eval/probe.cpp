#include "pxm/eval/probe.hpp"

#include "pxm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace pxm::eval {
namespace {

Eigen::MatrixXd softmax_columns(Eigen::MatrixXd z) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    z.col(j).array() -= z.col(j).maxCoeff();
    z.col(j) = z.col(j).array().exp();
    z.col(j) /= z.col(j).sum();
  }
  return z;
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, const std::vector<int>& classes) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes.size()), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), labels[i]);
    y(it - classes.begin(), static_cast<Eigen::Index>(i)) = 1.0;
  }
  return y;
}

}  // namespace

Eigen::MatrixXd ProbeModel::probabilities(const Eigen::MatrixXd& x) const {
  if (x.rows() != weights.cols()) throw ShapeError("linear_probe: feature dimension mismatch");
  return softmax_columns((weights * x).colwise() + bias);
}

std::vector<int> ProbeModel::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd p = probabilities(x);
  std::vector<int> out(static_cast<std::size_t>(p.cols()));
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    Eigen::Index best = 0;
    p.col(j).maxCoeff(&best);  // first maximum on ties
    out[static_cast<std::size_t>(j)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

double probe_objective(const ProbeModel& m, const Eigen::MatrixXd& x, const std::vector<int>& labels, double l2) {
  const Eigen::MatrixXd z = (m.weights * x).colwise() + m.bias;
  const Eigen::MatrixXd y = one_hot(labels, m.classes);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double mx = z.col(j).maxCoeff();
    const double lse = mx + std::log((z.col(j).array() - mx).exp().sum());
    loss += lse - z.col(j).dot(y.col(j));
  }
  return loss / static_cast<double>(z.cols()) + 0.5 * l2 * m.weights.squaredNorm();
}

ProbeModel fit_linear_probe(const Eigen::MatrixXd& x, const std::vector<int>& labels, const ProbeOptions& opt) {
  if (static_cast<std::size_t>(x.cols()) != labels.size()) throw ShapeError("linear_probe: label count mismatch");
  const std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw std::invalid_argument("linear_probe: training set needs at least two classes");

  ProbeModel m;
  m.classes.assign(present.begin(), present.end());
  const auto c = static_cast<Eigen::Index>(m.classes.size());
  m.weights = Eigen::MatrixXd::Zero(c, x.rows());
  m.bias = Eigen::VectorXd::Zero(c);
  const Eigen::MatrixXd y = one_hot(labels, m.classes);
  const double n = static_cast<double>(x.cols());

  double f = probe_objective(m, x, labels, opt.l2);
  double step = 1.0;
  for (m.iterations = 0; m.iterations < opt.max_iters; ++m.iterations) {
    const Eigen::MatrixXd r = (m.probabilities(x) - y) / n;
    const Eigen::MatrixXd gw = r * x.transpose() + opt.l2 * m.weights;
    const Eigen::VectorXd gb = r.rowwise().sum();
    const double g2 = gw.squaredNorm() + gb.squaredNorm();
    m.grad_norm = std::sqrt(g2);
    if (m.grad_norm < opt.grad_tol) break;

    // Armijo backtracking; the step grows again after each accepted move.
    step *= 2.0;
    ProbeModel trial = m;
    for (;;) {
      trial.weights = m.weights - step * gw;
      trial.bias = m.bias - step * gb;
      const double ft = probe_objective(trial, x, labels, opt.l2);
      if (ft <= f - 0.5 * step * g2 || step < 1e-12) {
        f = ft;
        break;
      }
      step *= 0.5;
    }
    m.weights = trial.weights;
    m.bias = trial.bias;
  }
  return m;
}

ProbeResult linear_probe(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels,
                         const Eigen::MatrixXd& test_x, const ProbeOptions& opt) {
  ProbeResult r;
  r.model = fit_linear_probe(train_x, train_labels, opt);
  r.probabilities = r.model.probabilities(test_x);
  r.predictions = r.model.predict(test_x);
  return r;
}

}  // namespace pxm::eval
