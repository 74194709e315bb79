#pragma once

#include "pxm/autodiff/param_store.hpp"
#include "pxm/autodiff/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pxm::ad {

class Tape;

/// Handle to a value recorded on a Tape.
///
/// Activations are feature-major. A batch of B feature vectors of width F is
/// an F x B matrix with `steps() == 0`. A batch of B sequences with C channels
/// and T time steps is a C x (B*T) matrix with `steps() == T`; sample b owns
/// columns [b*T, (b+1)*T).
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Index steps() const;
  Index batch() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool is_sequence() const { return steps() > 0; }
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of a computation.
///
/// Ops append nodes in evaluation order, so the node list is a topological
/// order of the DAG and backward is a single reverse sweep.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradient.
  Var constant(Matrix value, Index steps = 0);
  /// Leaf whose gradient is kept after backward (input sensitivity).
  Var input(Matrix value, Index steps = 0);
  /// Leaf bound to a stored parameter; backward accumulates into Param::grad.
  Var param(ParamStore& store, const std::string& name);

  /// Records an op result. `backward` receives d(loss)/d(result) and must call
  /// `accumulate` for each input that requires gradient.
  Var record(Matrix value, Index steps, bool requires_grad, BackwardFn backward);

  void accumulate(const Var& v, const Matrix& grad);

  /// Seeds d(loss)/d(loss) = 1 and sweeps backward. Every parameter in
  /// `store` ends with its full gradient; unreachable ones are zero.
  /// Throws ShapeError if `loss` is not 1 x 1.
  void backward(const Var& loss, ParamStore& store);

  const Matrix& grad(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    Index steps = 0;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Param* param = nullptr;
  };
  std::vector<Node> nodes_;
};

}  // namespace pxm::ad
