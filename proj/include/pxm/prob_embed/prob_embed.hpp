#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "pxm/errors.hpp"

namespace pxm {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
inline constexpr double kTeacherVarianceFloor = 1e-8;

/// Diagonal Gaussian latent N(mu, diag(exp(log_var))).
template <typename Scalar>
struct BasicProbEmbedding {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mu;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> log_var;

  Eigen::Index dim() const { return mu.size(); }
  auto variance() const { return log_var.array().exp(); }
};
using ProbEmbedding = BasicProbEmbedding<double>;

/// Column-per-sample batch of embeddings (D x B each).
struct EmbeddingBatch {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd log_var;

  Eigen::Index dim() const { return mu.rows(); }
  Eigen::Index size() const { return mu.cols(); }
  ProbEmbedding at(Eigen::Index i) const { return {mu.col(i), log_var.col(i)}; }
  void set(Eigen::Index i, const ProbEmbedding& z) {
    mu.col(i) = z.mu;
    log_var.col(i) = z.log_var;
  }
  static EmbeddingBatch zeros(Eigen::Index dim, Eigen::Index n) {
    return {Eigen::MatrixXd::Zero(dim, n), Eigen::MatrixXd::Zero(dim, n)};
  }
};

/// Entry (i, j) is true iff item i of one modality is paired with item j of the other.
using MatchMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline MatchMatrix identity_match(Eigen::Index n) {
  MatchMatrix m = MatchMatrix::Constant(n, n, false);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = true;
  return m;
}

/// Loss hyperparameters. `sigmoid_scale`/`sigmoid_shift` are the initial
/// values of the trainable matching scalars a and b. With `calibrate_shift`
/// the initial b is instead set from the data so that the mean match
/// probability at initialization equals the positive rate of the batch.
struct LossWeights {
  double lambda = 0.9;
  double sigmoid_scale = 10.0;
  double sigmoid_shift = 0.0;
  bool calibrate_shift = true;
  double vib_weight = 0.0;
  double infonce_temperature = 0.07;

  void validate() const;
};

/// Teacher frame embeddings, one row per frame (n x d).
struct FrameEmbeddingSet {
  Eigen::MatrixXd frames;
};

// ---------------------------------------------------------------------------
// Closed-form sampled distance between diagonal Gaussians:
//   d(z1, z2) = ||mu1 - mu2||^2 + ||var1 + var2||_1
// which equals E||x1 - x2||^2 for independent x1 ~ z1, x2 ~ z2.

template <typename Scalar>
Scalar csd(const BasicProbEmbedding<Scalar>& a, const BasicProbEmbedding<Scalar>& b) {
  if (a.dim() != b.dim() || a.log_var.size() != a.dim() || b.log_var.size() != b.dim()) {
    throw ShapeError("csd: dimension mismatch " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  return (a.mu - b.mu).squaredNorm() + (a.variance() + b.variance()).abs().sum();
}

/// m x n matrix of csd between the columns of two batches.
Eigen::MatrixXd csd_matrix(const EmbeddingBatch& a, const EmbeddingBatch& b);

/// logistic(-a d + b); strictly decreasing in d for a > 0.
double match_prob(double d, double a, double b);

/// Mean binary cross-entropy between match_prob(csd(A_i, B_j)) and M(i, j)
/// over every pair.
double pcme_matching_loss(const EmbeddingBatch& a, const EmbeddingBatch& b, const MatchMatrix& m,
                          double scale, double shift);

/// Symmetric InfoNCE over cosine similarities / temperature. Every row and
/// column of `m` must hold exactly one positive.
double infonce_loss(const Eigen::MatrixXd& a_mu, const Eigen::MatrixXd& b_mu, const MatchMatrix& m,
                    double temperature);

/// KL(N(mu, diag var) || N(0, I)).
template <typename Scalar>
Scalar vib_regularizer(const BasicProbEmbedding<Scalar>& z) {
  const auto var = z.variance();
  return Scalar(0.5) * (var + z.mu.array().square() - Scalar(1) - z.log_var.array()).sum();
}

/// Gaussian summary of independent frames: sample mean and population
/// variance (divisor n); log_var = log(var + 1e-8). The mean is not rescaled.
ProbEmbedding teacher_aggregate(const FrameEmbeddingSet& frames);

double combined_loss(double loss_text, double loss_teacher, double lambda);

/// Mean of the variance vector.
template <typename Scalar>
Scalar uncertainty_scalar(const BasicProbEmbedding<Scalar>& z) {
  return z.variance().mean();
}

/// L2-normalizes the affine mu head and clamps the log-variance head.
/// Throws NumericError if the raw mu has zero norm.
ProbEmbedding project_heads(const Eigen::VectorXd& features, const Eigen::MatrixXd& mu_weight,
                            const Eigen::VectorXd& mu_bias, const Eigen::MatrixXd& logvar_weight,
                            const Eigen::VectorXd& logvar_bias);

}  // namespace pxm
