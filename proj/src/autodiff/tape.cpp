#include "pxm/autodiff/tape.hpp"

#include "pxm/errors.hpp"

namespace pxm::ad {

const Matrix& Var::value() const { return tape_->nodes_.at(id_).value; }
Index Var::steps() const { return tape_->nodes_.at(id_).steps; }
bool Var::requires_grad() const { return tape_->nodes_.at(id_).requires_grad; }

Index Var::batch() const {
  const Index s = steps();
  return s > 0 ? value().cols() / s : value().cols();
}

Var Tape::constant(Matrix value, Index steps) {
  Node n;
  n.value = std::move(value);
  n.steps = steps;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Matrix value, Index steps) {
  Var v = constant(std::move(value), steps);
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Param& p = store.at(name);
  Node n;
  n.value = p.tensor.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, Index steps, bool requires_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.steps = steps;
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& v, const Matrix& grad) {
  Node& n = nodes_.at(v.id());
  if (!n.requires_grad) return;
  if (grad.rows() != n.value.rows() || grad.cols() != n.value.cols()) {
    throw ShapeError("gradient " + std::to_string(grad.rows()) + "x" + std::to_string(grad.cols()) +
                     " does not match value " + std::to_string(n.value.rows()) + "x" +
                     std::to_string(n.value.cols()));
  }
  if (n.has_grad) {
    n.grad += grad;
  } else {
    n.grad = grad;
    n.has_grad = true;
  }
}

void Tape::backward(const Var& loss, ParamStore& store) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss recorded on another tape");
  const Matrix& lv = loss.value();
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + std::to_string(lv.rows()) + "x" +
                     std::to_string(lv.cols()));
  }
  store.zero_grad();
  for (Node& n : nodes_) n.has_grad = false;

  accumulate(loss, Matrix::Ones(1, 1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      // The closure may append to nodes_' grads but never to nodes_ itself.
      Matrix g = std::move(n.grad);
      n.has_grad = false;
      n.backward(*this, g);
    }
  }
}

const Matrix& Tape::grad(const Var& v) const {
  const Node& n = nodes_.at(v.id());
  if (!n.has_grad) throw std::logic_error("no gradient recorded for node");
  return n.grad;
}

}  // namespace pxm::ad
