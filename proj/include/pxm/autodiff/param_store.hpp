#pragma once

#include "pxm/autodiff/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pxm::ad {

/// One trainable tensor with its gradient and AdamW moments.
struct Param {
  Tensor tensor;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
};

/// Named parameters plus shared optimizer step counter.
///
/// Iteration order is lexicographic by name, so anything that walks the
/// store (initialization, serialization, gradient checks) is deterministic.
class ParamStore {
 public:
  /// Registers a parameter. Throws std::invalid_argument on a duplicate name.
  Param& add(const std::string& name, Tensor initial);

  bool contains(std::string_view name) const;
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;

  const Matrix& value(std::string_view name) const { return at(name).tensor.value; }
  Matrix& value(std::string_view name) { return at(name).tensor.value; }

  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  Index scalar_count() const;

  void zero_grad();

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Exact equality of names, shapes and values.
  bool same_values(const ParamStore& other) const;

 private:
  std::map<std::string, Param, std::less<>> params_;
  std::int64_t step_ = 0;
};

struct AdamWOptions {
  double lr = 4e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One AdamW update over every parameter using the gradients already stored.
///
/// Decay is decoupled: w <- w * (1 - lr * wd) before the bias-corrected Adam
/// step, so moments never see the decay term.
void adamw_step(ParamStore& params, const AdamWOptions& opt);

}  // namespace pxm::ad
