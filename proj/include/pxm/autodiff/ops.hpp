#pragma once

#include "pxm/autodiff/tape.hpp"

namespace pxm::ad {

struct Conv1dGeometry {
  Index stride = 1;
  Index padding = 0;
};

/// Output length of a 1-D convolution; throws ShapeError on invalid geometry.
Index conv1d_output_length(Index length, Index kernel, const Conv1dGeometry& g);

// Elementwise and linear algebra. Binary elementwise ops require identical
// extents; `steps` is taken from the first operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var relu(const Var& x);
Var softplus(const Var& x);
/// Values outside [lo, hi] are clipped and pass no gradient.
Var clamp(const Var& x, double lo, double hi);
Var sum(const Var& x);
Var mean(const Var& x);
/// a * x + b * y with scalar coefficients, recorded as one node.
Var axpby(double a, const Var& x, double b, const Var& y);

/// W x + bias for a feature batch x (F x B); W is out x F, bias is out x 1.
Var dense(const Var& x, const Var& weight, const Var& bias);

/// Sequence batch x (C_in x B*T), kernel stored C_out x (C_in*K), bias C_out x 1.
Var conv1d(const Var& x, const Var& kernel, const Var& bias, Index kernel_size,
           const Conv1dGeometry& g);

/// Normalizes every column over its rows, then applies per-row gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// Mean over time of a sequence batch: C x (B*T) -> C x B.
Var global_avg_pool(const Var& x);

/// Column-wise unit L2 norm. Throws NumericError on a zero column.
Var l2_normalize(const Var& x);

/// Mean of embedding rows per sequence: table is V x E, result E x B.
/// `weights` is V x B with each column summing to one.
Var embedding_mean(const Var& table, const Matrix& weights);

}  // namespace pxm::ad
