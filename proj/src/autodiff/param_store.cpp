#include "pxm/autodiff/param_store.hpp"

#include "pxm/errors.hpp"

#include <cmath>
#include <sstream>

namespace pxm::ad {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::pair<Index, Index> storage_extents(const Shape& shape) {
  for (Index e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + to_string(shape));
  }
  switch (shape.size()) {
    case 0: return {1, 1};
    case 1: return {shape[0], 1};
    case 2: return {shape[0], shape[1]};
    default: return {shape[0], element_count(shape) / std::max<Index>(shape[0], 1)};
  }
}

Tensor::Tensor(Shape s, Matrix v) : shape(std::move(s)), value(std::move(v)) {
  const auto [r, c] = storage_extents(shape);
  if (value.rows() != r || value.cols() != c) {
    throw ShapeError("tensor storage " + std::to_string(value.rows()) + "x" +
                     std::to_string(value.cols()) + " does not match shape " + to_string(shape));
  }
}

Tensor Tensor::zeros(const Shape& shape) {
  const auto [r, c] = storage_extents(shape);
  return Tensor(shape, Matrix::Zero(r, c));
}

std::vector<double> Tensor::row_major() const {
  std::vector<double> out(static_cast<std::size_t>(value.size()));
  std::size_t k = 0;
  for (Index i = 0; i < value.rows(); ++i)
    for (Index j = 0; j < value.cols(); ++j) out[k++] = value(i, j);
  return out;
}

Tensor Tensor::from_row_major(const Shape& shape, const std::vector<double>& values) {
  Tensor t = zeros(shape);
  if (static_cast<Index>(values.size()) != t.value.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     to_string(shape));
  }
  std::size_t k = 0;
  for (Index i = 0; i < t.value.rows(); ++i)
    for (Index j = 0; j < t.value.cols(); ++j) t.value(i, j) = values[k++];
  return t;
}

Param& ParamStore::add(const std::string& name, Tensor initial) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Param p;
  const Index r = initial.value.rows(), c = initial.value.cols();
  p.tensor = std::move(initial);
  p.grad = Matrix::Zero(r, c);
  p.first_moment = Matrix::Zero(r, c);
  p.second_moment = Matrix::Zero(r, c);
  return params_.emplace(name, std::move(p)).first->second;
}

bool ParamStore::contains(std::string_view name) const { return params_.find(name) != params_.end(); }

Param& ParamStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

const Param& ParamStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

Index ParamStore::scalar_count() const {
  Index n = 0;
  for (const auto& [_, p] : params_) n += p.tensor.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto it = other.params_.begin();
  for (const auto& [name, p] : params_) {
    if (name != it->first || p.tensor.shape != it->second.tensor.shape) return false;
    if (p.tensor.value != it->second.tensor.value) return false;
    ++it;
  }
  return true;
}

void adamw_step(ParamStore& params, const AdamWOptions& opt) {
  if (!(opt.lr > 0.0)) throw std::invalid_argument("adamw: lr must be positive");
  if (opt.beta1 < 0.0 || opt.beta1 >= 1.0 || opt.beta2 < 0.0 || opt.beta2 >= 1.0)
    throw std::invalid_argument("adamw: betas must lie in [0, 1)");

  const std::int64_t t = params.step() + 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  const double decay = 1.0 - opt.lr * opt.weight_decay;

  for (auto& [_, p] : params) {
    Matrix& w = p.tensor.value;
    w *= decay;
    p.first_moment = opt.beta1 * p.first_moment + (1.0 - opt.beta1) * p.grad;
    p.second_moment = opt.beta2 * p.second_moment + (1.0 - opt.beta2) * p.grad.cwiseProduct(p.grad);
    w.array() -= opt.lr * (p.first_moment.array() / bc1) /
                 ((p.second_moment.array() / bc2).sqrt() + opt.eps);
  }
  params.set_step(t);
}

}  // namespace pxm::ad
