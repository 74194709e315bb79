#pragma once

#include "pxm/autodiff/param_store.hpp"

#include <cmath>
#include <random>

namespace pxm::ad {

/// Gaussian fill with standard deviation `sd`.
inline Matrix normal_matrix(Index rows, Index cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sd);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

/// He initialization for a ReLU layer with the given fan-in.
inline Matrix he_normal(Index rows, Index cols, Index fan_in, std::mt19937_64& rng) {
  return normal_matrix(rows, cols, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

inline void add_dense(ParamStore& params, const std::string& name, Index in, Index out, std::mt19937_64& rng) {
  params.add(name + ".w", Tensor({out, in}, he_normal(out, in, in, rng)));
  params.add(name + ".b", Tensor::zeros({out}));
}

inline void add_conv1d(ParamStore& params, const std::string& name, Index c_in, Index c_out, Index kernel,
                       std::mt19937_64& rng) {
  params.add(name + ".w", Tensor({c_out, c_in, kernel}, he_normal(c_out, c_in * kernel, c_in * kernel, rng)));
  params.add(name + ".b", Tensor::zeros({c_out}));
}

inline void add_layer_norm(ParamStore& params, const std::string& name, Index width) {
  params.add(name + ".gain", Tensor({width}, Matrix::Ones(width, 1)));
  params.add(name + ".bias", Tensor::zeros({width}));
}

}  // namespace pxm::ad
