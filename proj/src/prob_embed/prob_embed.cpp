#include "pxm/prob_embed/prob_embed.hpp"

#include <cmath>

namespace pxm {
namespace {

double log1p_exp(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void require_batch_match(const char* op, Eigen::Index rows, Eigen::Index cols, const MatchMatrix& m) {
  if (rows == 0 || cols == 0) throw ShapeError(std::string(op) + ": empty batch");
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(op) + ": match matrix " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + " does not match batch " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda", "must lie in [0, 1]");
  if (!(sigmoid_scale > 0.0)) throw ConfigError("sigmoid_scale", "must be positive");
  if (!std::isfinite(sigmoid_shift)) throw ConfigError("sigmoid_shift", "must be finite");
  if (!(vib_weight >= 0.0)) throw ConfigError("vib_weight", "must be non-negative");
  if (!(infonce_temperature > 0.0)) throw ConfigError("infonce_temperature", "must be positive");
}

Eigen::MatrixXd csd_matrix(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("csd: dimension mismatch " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  const Eigen::MatrixXd var_a = a.log_var.array().exp();
  const Eigen::MatrixXd var_b = b.log_var.array().exp();
  Eigen::MatrixXd d(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      d(i, j) = (a.mu.col(i) - b.mu.col(j)).squaredNorm() + (var_a.col(i) + var_b.col(j)).cwiseAbs().sum();
    }
  }
  return d;
}

double match_prob(double d, double a, double b) {
  const double z = -a * d + b;
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double pcme_matching_loss(const EmbeddingBatch& a, const EmbeddingBatch& b, const MatchMatrix& m,
                          double scale, double shift) {
  require_batch_match("pcme_matching_loss", a.size(), b.size(), m);
  const Eigen::MatrixXd d = csd_matrix(a, b);
  double total = 0.0;
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      const double z = -scale * d(i, j) + shift;
      // -log p = softplus(-z), -log(1 - p) = softplus(z)
      total += m(i, j) ? log1p_exp(-z) : log1p_exp(z);
    }
  }
  return total / static_cast<double>(d.size());
}

double infonce_loss(const Eigen::MatrixXd& a_mu, const Eigen::MatrixXd& b_mu, const MatchMatrix& m,
                    double temperature) {
  require_batch_match("infonce_loss", a_mu.cols(), b_mu.cols(), m);
  if (!(temperature > 0.0)) throw std::invalid_argument("infonce_loss: temperature must be positive");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (m.row(i).count() != 1) throw std::invalid_argument("infonce_loss: row " + std::to_string(i) + " needs exactly one positive");
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (m.col(j).count() != 1) throw std::invalid_argument("infonce_loss: column " + std::to_string(j) + " needs exactly one positive");

  const Eigen::MatrixXd an = a_mu.colwise().normalized();
  const Eigen::MatrixXd bn = b_mu.colwise().normalized();
  const Eigen::MatrixXd logits = (an.transpose() * bn) / temperature;

  auto cross_entropy = [](const Eigen::MatrixXd& s, const MatchMatrix& pos) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const double mx = s.row(i).maxCoeff();
      const double lse = mx + std::log((s.row(i).array() - mx).exp().sum());
      Eigen::Index target = 0;
      pos.row(i).maxCoeff(&target);
      total += lse - s(i, target);
    }
    return total / static_cast<double>(s.rows());
  };
  const MatchMatrix mt = m.transpose();
  return 0.5 * (cross_entropy(logits, m) + cross_entropy(logits.transpose(), mt));
}

ProbEmbedding teacher_aggregate(const FrameEmbeddingSet& set) {
  const Eigen::MatrixXd& f = set.frames;
  if (f.rows() < 1 || f.cols() < 1) throw ShapeError("teacher_aggregate: need at least one frame");
  if (!f.allFinite()) throw NumericError("teacher_aggregate: non-finite frame embedding");
  const double n = static_cast<double>(f.rows());
  ProbEmbedding z;
  z.mu = f.colwise().sum().transpose() / n;
  const Eigen::MatrixXd centered = f.rowwise() - z.mu.transpose();
  const Eigen::VectorXd var = centered.array().square().colwise().sum().transpose() / n;
  z.log_var = (var.array() + kTeacherVarianceFloor).log();
  return z;
}

double combined_loss(double loss_text, double loss_teacher, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("combined_loss: lambda must lie in [0, 1]");
  return lambda * loss_text + (1.0 - lambda) * loss_teacher;
}

ProbEmbedding project_heads(const Eigen::VectorXd& features, const Eigen::MatrixXd& mu_weight,
                            const Eigen::VectorXd& mu_bias, const Eigen::MatrixXd& logvar_weight,
                            const Eigen::VectorXd& logvar_bias) {
  if (mu_weight.cols() != features.size() || logvar_weight.cols() != features.size() ||
      mu_bias.size() != mu_weight.rows() || logvar_bias.size() != logvar_weight.rows()) {
    throw ShapeError("project_heads: feature dimension " + std::to_string(features.size()) +
                     " does not match head input " + std::to_string(mu_weight.cols()));
  }
  Eigen::VectorXd raw = mu_weight * features + mu_bias;
  const double norm = raw.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("project_heads: degenerate mu (zero norm)");
  ProbEmbedding z;
  z.mu = raw / norm;
  z.log_var = (logvar_weight * features + logvar_bias).cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return z;
}

}  // namespace pxm
