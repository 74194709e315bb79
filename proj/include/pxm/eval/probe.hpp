#pragma once

#include <Eigen/Dense>

#include <vector>

namespace pxm::eval {

struct ProbeOptions {
  double l2 = 1e-3;           // ridge on the weights, not the bias
  double grad_tol = 1e-6;
  int max_iters = 10000;
};

struct ProbeModel {
  Eigen::MatrixXd weights;  // C x D
  Eigen::VectorXd bias;     // C
  std::vector<int> classes; // class id of each row
  int iterations = 0;
  double grad_norm = 0.0;

  /// Softmax probabilities, one column per sample (C x N).
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& x) const;
  std::vector<int> predict(const Eigen::MatrixXd& x) const;
};

/// Multinomial logistic regression fit by full-batch gradient descent with
/// backtracking line search. Features are columns of `x` (D x N).
/// Throws std::invalid_argument if fewer than two classes are present.
ProbeModel fit_linear_probe(const Eigen::MatrixXd& x, const std::vector<int>& labels, const ProbeOptions& opt = {});

/// Mean cross-entropy plus the ridge term; exposed for tests.
double probe_objective(const ProbeModel& m, const Eigen::MatrixXd& x, const std::vector<int>& labels, double l2);

struct ProbeResult {
  std::vector<int> predictions;
  Eigen::MatrixXd probabilities;  // C x N_test
  ProbeModel model;
};

ProbeResult linear_probe(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels,
                         const Eigen::MatrixXd& test_x, const ProbeOptions& opt = {});

}  // namespace pxm::eval
