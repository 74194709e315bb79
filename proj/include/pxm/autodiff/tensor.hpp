#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace pxm::ad {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Shape = std::vector<Index>;

/// Number of elements implied by a shape. A rank-0 shape holds one value.
inline Index element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape);

/// Dense 64-bit tensor with an explicit logical shape.
///
/// Storage is an Eigen matrix whose layout depends on rank:
///   rank 0       -> 1 x 1
///   rank 1 {n}   -> n x 1
///   rank 2 {r,c} -> r x c
///   rank 3 {a,b,c} -> a x (b*c)
/// Logical row-major order therefore equals the row-major traversal of the
/// storage matrix, which is what the checkpoint format serializes.
struct Tensor {
  Shape shape;
  Matrix value;

  Tensor() = default;
  Tensor(Shape s, Matrix v);

  static Tensor zeros(const Shape& shape);
  Index size() const { return value.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }

  /// Values in logical row-major order.
  std::vector<double> row_major() const;
  static Tensor from_row_major(const Shape& shape, const std::vector<double>& values);
};

/// Storage extents for a parameter of the given logical shape.
std::pair<Index, Index> storage_extents(const Shape& shape);

}  // namespace pxm::ad
