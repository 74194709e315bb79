#include "pxm/autodiff/ops.hpp"

#include "pxm/errors.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace pxm::ad {
namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_tape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

void require_same_extents(const char* op, const Var& a, const Var& b) {
  require_same_tape(op, a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a.value()) + " vs " + dims(b.value()));
  }
}

bool any_grad(std::initializer_list<Var> vs) {
  for (const Var& v : vs)
    if (v.requires_grad()) return true;
  return false;
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Index conv1d_output_length(Index length, Index kernel, const Conv1dGeometry& g) {
  if (g.stride < 1 || g.padding < 0 || kernel < 1 || kernel > length + 2 * g.padding) {
    throw ShapeError("conv1d: invalid geometry (T=" + std::to_string(length) +
                     ", K=" + std::to_string(kernel) + ", stride=" + std::to_string(g.stride) +
                     ", padding=" + std::to_string(g.padding) + ")");
  }
  return (length + 2 * g.padding - kernel) / g.stride + 1;
}

Var add(const Var& a, const Var& b) {
  require_same_extents("add", a, b);
  return a.tape().record(a.value() + b.value(), a.steps(), any_grad({a, b}),
                         [a, b](Tape& t, const Matrix& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, g);
                         });
}

Var sub(const Var& a, const Var& b) {
  require_same_extents("sub", a, b);
  return a.tape().record(a.value() - b.value(), a.steps(), any_grad({a, b}),
                         [a, b](Tape& t, const Matrix& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, -g);
                         });
}

Var scale(const Var& a, double s) {
  return a.tape().record(s * a.value(), a.steps(), a.requires_grad(),
                         [a, s](Tape& t, const Matrix& g) { t.accumulate(a, s * g); });
}

Var axpby(double alpha, const Var& x, double beta, const Var& y) {
  require_same_extents("axpby", x, y);
  return x.tape().record(alpha * x.value() + beta * y.value(), x.steps(), any_grad({x, y}),
                         [=](Tape& t, const Matrix& g) {
                           t.accumulate(x, alpha * g);
                           t.accumulate(y, beta * g);
                         });
}

Var matmul(const Var& a, const Var& b) {
  require_same_tape("matmul", a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + dims(a.value()) + " * " + dims(b.value()));
  }
  return a.tape().record(a.value() * b.value(), 0, any_grad({a, b}), [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var relu(const Var& x) {
  return x.tape().record(x.value().cwiseMax(0.0), x.steps(), x.requires_grad(),
                         [x](Tape& t, const Matrix& g) {
                           t.accumulate(x, Matrix((x.value().array() > 0.0).select(g.array(), 0.0)));
                         });
}

Var softplus(const Var& x) {
  return x.tape().record(x.value().unaryExpr(&stable_softplus), x.steps(), x.requires_grad(),
                         [x](Tape& t, const Matrix& g) {
                           t.accumulate(x, g.cwiseProduct(x.value().unaryExpr(&sigmoid)));
                         });
}

Var clamp(const Var& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  return x.tape().record(x.value().cwiseMax(lo).cwiseMin(hi), x.steps(), x.requires_grad(),
                         [x, lo, hi](Tape& t, const Matrix& g) {
                           const auto& v = x.value().array();
                           t.accumulate(x, Matrix(((v >= lo) && (v <= hi)).select(g.array(), 0.0)));
                         });
}

Var sum(const Var& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape().record(std::move(out), 0, x.requires_grad(), [x](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor");
  Matrix out(1, 1);
  out(0, 0) = x.value().sum() / n;
  return x.tape().record(std::move(out), 0, x.requires_grad(), [x, n](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Var dense(const Var& x, const Var& weight, const Var& bias) {
  require_same_tape("dense", x, weight);
  require_same_tape("dense", x, bias);
  if (x.is_sequence()) throw ShapeError("dense: expects a feature batch, got a sequence batch");
  if (weight.cols() != x.rows() || bias.rows() != weight.rows() || bias.cols() != 1) {
    throw ShapeError("dense: shape mismatch W " + dims(weight.value()) + ", b " + dims(bias.value()) +
                     ", x " + dims(x.value()));
  }
  Matrix out = weight.value() * x.value();
  out.colwise() += bias.value().col(0);
  return x.tape().record(std::move(out), 0, any_grad({x, weight, bias}),
                         [x, weight, bias](Tape& t, const Matrix& g) {
                           if (weight.requires_grad()) t.accumulate(weight, g * x.value().transpose());
                           if (bias.requires_grad()) t.accumulate(bias, g.rowwise().sum());
                           if (x.requires_grad()) t.accumulate(x, weight.value().transpose() * g);
                         });
}

Var conv1d(const Var& x, const Var& kernel, const Var& bias, Index kernel_size, const Conv1dGeometry& geo) {
  require_same_tape("conv1d", x, kernel);
  require_same_tape("conv1d", x, bias);
  if (!x.is_sequence()) throw ShapeError("conv1d: expects a sequence batch");
  const Index c_in = x.rows();
  const Index length = x.steps();
  const Index batch = x.batch();
  const Index c_out = kernel.rows();
  if (kernel_size < 1 || kernel.cols() != c_in * kernel_size || bias.rows() != c_out || bias.cols() != 1) {
    throw ShapeError("conv1d: kernel " + dims(kernel.value()) + " / bias " + dims(bias.value()) +
                     " incompatible with input channels " + std::to_string(c_in) + " and K=" +
                     std::to_string(kernel_size));
  }
  const Index out_len = conv1d_output_length(length, kernel_size, geo);

  // im2col: row i*K + k, column b*T' + t holds x(i, b*T + t*stride + k - padding).
  auto cols = std::make_shared<Matrix>(Matrix::Zero(c_in * kernel_size, batch * out_len));
  const Matrix& xv = x.value();
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < out_len; ++t) {
      const Index dst = b * out_len + t;
      for (Index k = 0; k < kernel_size; ++k) {
        const Index src = t * geo.stride + k - geo.padding;
        if (src < 0 || src >= length) continue;
        for (Index i = 0; i < c_in; ++i) (*cols)(i * kernel_size + k, dst) = xv(i, b * length + src);
      }
    }
  }
  Matrix out = kernel.value() * (*cols);
  out.colwise() += bias.value().col(0);

  return x.tape().record(
      std::move(out), out_len, any_grad({x, kernel, bias}),
      [=](Tape& t, const Matrix& g) {
        if (kernel.requires_grad()) t.accumulate(kernel, g * cols->transpose());
        if (bias.requires_grad()) t.accumulate(bias, g.rowwise().sum());
        if (!x.requires_grad()) return;
        const Matrix dcols = kernel.value().transpose() * g;
        Matrix dx = Matrix::Zero(c_in, batch * length);
        for (Index b = 0; b < batch; ++b) {
          for (Index tt = 0; tt < out_len; ++tt) {
            const Index srcc = b * out_len + tt;
            for (Index k = 0; k < kernel_size; ++k) {
              const Index pos = tt * geo.stride + k - geo.padding;
              if (pos < 0 || pos >= length) continue;
              for (Index i = 0; i < c_in; ++i) dx(i, b * length + pos) += dcols(i * kernel_size + k, srcc);
            }
          }
        }
        t.accumulate(x, dx);
      });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require_same_tape("layer_norm", x, gain);
  require_same_tape("layer_norm", x, bias);
  const Index rows = x.rows();
  if (gain.rows() != rows || gain.cols() != 1 || bias.rows() != rows || bias.cols() != 1) {
    throw ShapeError("layer_norm: gain " + dims(gain.value()) + " / bias " + dims(bias.value()) +
                     " incompatible with input " + dims(x.value()));
  }
  const Matrix& xv = x.value();
  const Eigen::RowVectorXd mu = xv.colwise().mean();
  auto xhat = std::make_shared<Matrix>(xv.rowwise() - mu);
  Eigen::RowVectorXd inv_sd = (xhat->array().square().colwise().mean() + eps).sqrt().inverse();
  xhat->array().rowwise() *= inv_sd.array();

  Matrix out = xhat->array().colwise() * gain.value().col(0).array();
  out.colwise() += bias.value().col(0);

  return x.tape().record(std::move(out), x.steps(), any_grad({x, gain, bias}),
                         [=](Tape& t, const Matrix& g) {
                           if (gain.requires_grad())
                             t.accumulate(gain, g.cwiseProduct(*xhat).rowwise().sum());
                           if (bias.requires_grad()) t.accumulate(bias, g.rowwise().sum());
                           if (!x.requires_grad()) return;
                           Matrix dxhat = g.array().colwise() * gain.value().col(0).array();
                           const Eigen::RowVectorXd m1 = dxhat.colwise().mean();
                           const Eigen::RowVectorXd m2 = dxhat.cwiseProduct(*xhat).colwise().mean();
                           Matrix dx = dxhat.rowwise() - m1;
                           dx.array() -= xhat->array().rowwise() * m2.array();
                           dx.array().rowwise() *= inv_sd.array();
                           t.accumulate(x, dx);
                         });
}

Var global_avg_pool(const Var& x) {
  if (!x.is_sequence()) throw ShapeError("global_avg_pool: expects a sequence batch");
  const Index steps = x.steps();
  const Index batch = x.batch();
  Matrix out(x.rows(), batch);
  for (Index b = 0; b < batch; ++b) out.col(b) = x.value().middleCols(b * steps, steps).rowwise().mean();
  return x.tape().record(std::move(out), 0, x.requires_grad(), [x, steps, batch](Tape& t, const Matrix& g) {
    Matrix dx(x.rows(), batch * steps);
    for (Index b = 0; b < batch; ++b)
      dx.middleCols(b * steps, steps) = (g.col(b) / static_cast<double>(steps)).replicate(1, steps);
    t.accumulate(x, dx);
  });
}

Var l2_normalize(const Var& x) {
  const Matrix& xv = x.value();
  const Eigen::RowVectorXd norms = xv.colwise().norm();
  for (Index j = 0; j < norms.size(); ++j) {
    if (!(norms(j) > 0.0) || !std::isfinite(norms(j))) {
      throw NumericError("l2_normalize: column " + std::to_string(j) + " has zero or non-finite norm");
    }
  }
  auto y = std::make_shared<Matrix>(xv.array().rowwise() / norms.array());
  Matrix out = *y;
  return x.tape().record(std::move(out), x.steps(), x.requires_grad(), [x, y, norms](Tape& t, const Matrix& g) {
    const Eigen::RowVectorXd proj = y->cwiseProduct(g).colwise().sum();
    Matrix dx = g - Matrix(y->array().rowwise() * proj.array());
    dx.array().rowwise() /= norms.array();
    t.accumulate(x, dx);
  });
}

Var embedding_mean(const Var& table, const Matrix& weights) {
  if (weights.rows() != table.rows()) {
    throw ShapeError("embedding_mean: weights " + dims(weights) + " incompatible with table " +
                     dims(table.value()));
  }
  auto w = std::make_shared<Matrix>(weights);
  return table.tape().record(table.value().transpose() * weights, 0, table.requires_grad(),
                             [table, w](Tape& t, const Matrix& g) {
                               t.accumulate(table, (*w) * g.transpose());
                             });
}

}  // namespace pxm::ad
