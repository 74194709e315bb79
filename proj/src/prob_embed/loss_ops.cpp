#include "pxm/prob_embed/loss_ops.hpp"

#include "pxm/autodiff/init.hpp"

#include <cmath>
#include <memory>

namespace pxm {

using ad::Index;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

double log1p_exp(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_match(const char* op, const Matrix& d, const MatchMatrix& m) {
  if (d.size() == 0) throw ShapeError(std::string(op) + ": empty batch");
  if (m.rows() != d.rows() || m.cols() != d.cols()) {
    throw ShapeError(std::string(op) + ": match matrix " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + " vs batch " + std::to_string(d.rows()) + "x" +
                     std::to_string(d.cols()));
  }
}

}  // namespace

void init_heads(ad::ParamStore& params, const std::string& prefix, Index in_dim, Index out_dim,
                double logvar_bias, std::mt19937_64& rng) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(in_dim));
  params.add(prefix + ".mu.w", ad::Tensor({out_dim, in_dim}, ad::normal_matrix(out_dim, in_dim, sd, rng)));
  params.add(prefix + ".mu.b", ad::Tensor::zeros({out_dim}));
  params.add(prefix + ".logvar.w",
             ad::Tensor({out_dim, in_dim}, ad::normal_matrix(out_dim, in_dim, 0.1 * sd, rng)));
  params.add(prefix + ".logvar.b", ad::Tensor({out_dim}, Matrix::Constant(out_dim, 1, logvar_bias)));
}

ProbVars project_heads(const Var& features, ad::ParamStore& params, const std::string& prefix) {
  Tape& t = features.tape();
  const Var raw_mu = ad::dense(features, t.param(params, prefix + ".mu.w"), t.param(params, prefix + ".mu.b"));
  const Var raw_lv =
      ad::dense(features, t.param(params, prefix + ".logvar.w"), t.param(params, prefix + ".logvar.b"));
  return {ad::l2_normalize(raw_mu), ad::clamp(raw_lv, kLogVarMin, kLogVarMax)};
}

Var pairwise_csd(const ProbVars& a, const ProbVars& b) {
  const Matrix& mu_a = a.mu.value();
  const Matrix& mu_b = b.mu.value();
  if (mu_a.rows() != mu_b.rows() || a.log_var.rows() != mu_a.rows() || b.log_var.rows() != mu_b.rows() ||
      a.log_var.cols() != mu_a.cols() || b.log_var.cols() != mu_b.cols()) {
    throw ShapeError("csd: dimension mismatch " + std::to_string(mu_a.rows()) + " vs " +
                     std::to_string(mu_b.rows()));
  }
  auto var_a = std::make_shared<Matrix>(a.log_var.value().array().exp());
  auto var_b = std::make_shared<Matrix>(b.log_var.value().array().exp());
  Matrix d(mu_a.cols(), mu_b.cols());
  for (Index j = 0; j < mu_b.cols(); ++j)
    for (Index i = 0; i < mu_a.cols(); ++i)
      d(i, j) = (mu_a.col(i) - mu_b.col(j)).squaredNorm() + (var_a->col(i) + var_b->col(j)).cwiseAbs().sum();

  const bool needs = a.mu.requires_grad() || a.log_var.requires_grad() || b.mu.requires_grad() ||
                     b.log_var.requires_grad();
  return a.mu.tape().record(std::move(d), 0, needs, [a, b, var_a, var_b](Tape& t, const Matrix& g) {
    const Eigen::VectorXd row_sum = g.rowwise().sum();
    const Eigen::RowVectorXd col_sum = g.colwise().sum();
    const Matrix& mu_a = a.mu.value();
    const Matrix& mu_b = b.mu.value();
    if (a.mu.requires_grad()) {
      Matrix da = mu_a * row_sum.asDiagonal();
      da -= mu_b * g.transpose();
      t.accumulate(a.mu, 2.0 * da);
    }
    if (b.mu.requires_grad()) {
      Matrix db = mu_b * col_sum.transpose().asDiagonal();
      db -= mu_a * g;
      t.accumulate(b.mu, 2.0 * db);
    }
    if (a.log_var.requires_grad()) t.accumulate(a.log_var, Matrix(var_a->array().rowwise() * row_sum.transpose().array()));
    if (b.log_var.requires_grad()) t.accumulate(b.log_var, Matrix(var_b->array().rowwise() * col_sum.array()));
  });
}

Var match_bce(const Var& distances, const MatchMatrix& m, const Var& scale, const Var& shift) {
  const Matrix& d = distances.value();
  check_match("match_bce", d, m);
  const double s = scale.value()(0, 0);
  const double b = shift.value()(0, 0);
  const double n = static_cast<double>(d.size());

  auto dz = std::make_shared<Matrix>(d.rows(), d.cols());
  double total = 0.0;
  for (Index j = 0; j < d.cols(); ++j) {
    for (Index i = 0; i < d.rows(); ++i) {
      const double z = -s * d(i, j) + b;
      total += m(i, j) ? log1p_exp(-z) : log1p_exp(z);
      (*dz)(i, j) = (sigmoid(z) - (m(i, j) ? 1.0 : 0.0)) / n;
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  const bool needs = distances.requires_grad() || scale.requires_grad() || shift.requires_grad();
  return distances.tape().record(std::move(out), 0, needs, [=](Tape& t, const Matrix& g) {
    const double go = g(0, 0);
    if (distances.requires_grad()) t.accumulate(distances, (-s * go) * (*dz));
    if (scale.requires_grad()) t.accumulate(scale, Matrix::Constant(1, 1, -go * dz->cwiseProduct(distances.value()).sum()));
    if (shift.requires_grad()) t.accumulate(shift, Matrix::Constant(1, 1, go * dz->sum()));
  });
}

Var infonce(const Var& a_mu, const Var& b_mu, const MatchMatrix& m, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("infonce: temperature must be positive");
  if (a_mu.rows() != b_mu.rows()) throw ShapeError("infonce: embedding dimension mismatch");
  const Var an = ad::l2_normalize(a_mu);
  const Var bn = ad::l2_normalize(b_mu);
  const Matrix logits = an.value().transpose() * bn.value() / temperature;
  check_match("infonce", logits, m);
  for (Index i = 0; i < m.rows(); ++i)
    if (m.row(i).count() != 1) throw std::invalid_argument("infonce: row " + std::to_string(i) + " needs exactly one positive");
  for (Index j = 0; j < m.cols(); ++j)
    if (m.col(j).count() != 1) throw std::invalid_argument("infonce: column " + std::to_string(j) + " needs exactly one positive");

  const Matrix y = m.cast<double>().matrix();
  // Row-wise and column-wise softmax.
  Matrix p_row = logits;
  for (Index i = 0; i < p_row.rows(); ++i) {
    const double mx = p_row.row(i).maxCoeff();
    p_row.row(i) = (p_row.row(i).array() - mx).exp();
  }
  const Eigen::VectorXd row_z = p_row.rowwise().sum();
  Matrix p_col = logits;
  for (Index j = 0; j < p_col.cols(); ++j) {
    const double mx = p_col.col(j).maxCoeff();
    p_col.col(j) = (p_col.col(j).array() - mx).exp();
  }
  const Eigen::RowVectorXd col_z = p_col.colwise().sum();

  double ce_rows = 0.0, ce_cols = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    const double lse = logits.row(i).maxCoeff() + std::log(row_z(i));
    ce_rows += lse - logits.row(i).dot(y.row(i));
  }
  for (Index j = 0; j < logits.cols(); ++j) {
    const double lse = logits.col(j).maxCoeff() + std::log(col_z(j));
    ce_cols += lse - logits.col(j).dot(y.col(j));
  }
  const double rows = static_cast<double>(logits.rows());
  const double cols = static_cast<double>(logits.cols());
  Matrix out(1, 1);
  out(0, 0) = 0.5 * (ce_rows / rows + ce_cols / cols);

  p_row.array().colwise() /= row_z.array();
  p_col.array().rowwise() /= col_z.array();
  auto dlogits = std::make_shared<Matrix>(0.5 * ((p_row - y) / rows + (p_col - y) / cols) / temperature);

  const bool needs = an.requires_grad() || bn.requires_grad();
  return a_mu.tape().record(std::move(out), 0, needs, [an, bn, dlogits](Tape& t, const Matrix& g) {
    const double go = g(0, 0);
    if (an.requires_grad()) t.accumulate(an, go * (bn.value() * dlogits->transpose()));
    if (bn.requires_grad()) t.accumulate(bn, go * (an.value() * (*dlogits)));
  });
}

Var vib_kl(const ProbVars& z) {
  const Matrix& mu = z.mu.value();
  const Matrix& lv = z.log_var.value();
  if (mu.rows() != lv.rows() || mu.cols() != lv.cols()) throw ShapeError("vib_kl: mu/log_var mismatch");
  const double batch = static_cast<double>(mu.cols());
  auto var = std::make_shared<Matrix>(lv.array().exp());
  Matrix out(1, 1);
  out(0, 0) = 0.5 * (var->array() + mu.array().square() - 1.0 - lv.array()).sum() / batch;
  const bool needs = z.mu.requires_grad() || z.log_var.requires_grad();
  return z.mu.tape().record(std::move(out), 0, needs, [z, var, batch](Tape& t, const Matrix& g) {
    const double go = g(0, 0);
    if (z.mu.requires_grad()) t.accumulate(z.mu, (go / batch) * z.mu.value());
    if (z.log_var.requires_grad()) t.accumulate(z.log_var, Matrix((0.5 * go / batch) * (var->array() - 1.0)));
  });
}

EmbeddingBatch to_batch(const ProbVars& z) { return {z.mu.value(), z.log_var.value()}; }

void init_match_scalars(ad::ParamStore& params, double scale, double shift, const std::string& prefix) {
  if (!(scale > 0.0)) throw std::invalid_argument("match scale must be positive");
  // softplus^{-1}(a) = log(exp(a) - 1), written to stay finite for large a.
  const double raw = scale > 30.0 ? scale : std::log(std::expm1(scale));
  params.add(prefix + ".scale_raw", ad::Tensor({}, Matrix::Constant(1, 1, raw)));
  params.add(prefix + ".shift", ad::Tensor({}, Matrix::Constant(1, 1, shift)));
}

std::pair<Var, Var> match_scalars(Tape& tape, ad::ParamStore& params, const std::string& prefix) {
  return {ad::softplus(tape.param(params, prefix + ".scale_raw")), tape.param(params, prefix + ".shift")};
}

double match_scale_value(const ad::ParamStore& params, const std::string& prefix) {
  return log1p_exp(params.value(prefix + ".scale_raw")(0, 0));
}
double match_shift_value(const ad::ParamStore& params, const std::string& prefix) {
  return params.value(prefix + ".shift")(0, 0);
}

}  // namespace pxm
