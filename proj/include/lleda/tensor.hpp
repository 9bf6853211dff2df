#pragma once

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lleda/errors.hpp"
#include "lleda/rng.hpp"

namespace lleda {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Row-major dense matrix; every tensor's payload is stored as one of these.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_to_string(const Shape& shape);
Index shape_numel(const Shape& shape);

namespace detail {

template <typename Scalar>
struct Node {
  Shape shape;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix<Scalar>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

/// Dense n-dimensional array with reverse-mode gradient support.
///
/// A Tensor is a shared handle onto an immutable value node. Operations build a
/// graph of nodes; `backward` walks that graph from a scalar root and accumulates
/// gradients into every node that requires them. Only leaves may be mutated, and
/// only through `mutable_value` / `assign`, which is how optimisers update
/// parameters between steps.
///
/// The payload is viewed as a matrix: rank 0 is 1x1, rank 1 of extent n is 1xn,
/// and rank k >= 2 is shape[0] x (product of the remaining extents).
template <typename Scalar>
class Tensor {
 public:
  using Mat = Matrix<Scalar>;

  /// Rank-0 zero, no gradient.
  Tensor();

  /// Rank-2 leaf with shape [rows, cols].
  explicit Tensor(Mat value, bool requires_grad = false);

  /// Leaf with an explicit shape; `value` must hold product(shape) elements.
  Tensor(Shape shape, Mat value, bool requires_grad = false);

  static Tensor scalar(Scalar v, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::span<const Scalar> values, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::initializer_list<Scalar> values, bool requires_grad = false);
  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor constant(Shape shape, Scalar v);
  static Tensor identity(Index n);
  static Tensor random_normal(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
  static Tensor random_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index numel() const { return node_->value.size(); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }

  const Mat& value() const { return node_->value; }
  std::span<const Scalar> data() const { return {node_->value.data(), static_cast<std::size_t>(numel())}; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return node_->grad.size() != 0; }

  /// Accumulated gradient, or zeros of the value's shape when none was recorded.
  Mat grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  /// Leaf-only mutators.
  void set_requires_grad(bool on);
  Mat& mutable_value();
  void assign(const Mat& v);

  /// New leaf sharing no graph history; value is copied.
  Tensor detach() const;
  /// Deep copy of a leaf, preserving requires_grad.
  Tensor clone() const;

  /// Same node, viewed with another shape of equal element count.
  Tensor reshape(Shape shape) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  /// Internal: builds an op result. Parents that do not require gradients are
  /// dropped; the result requires a gradient iff any parent does.
  static Tensor make_result(Shape shape, Mat value, std::vector<Tensor> parents,
                            std::function<void(detail::Node<Scalar>&)> backward);

  detail::Node<Scalar>& node() const { return *node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<Scalar>> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node<Scalar>> node_;

  template <typename S>
  friend void backward(const Tensor<S>& root);
};

/// Propagates d(root)/d(node) to every node reachable from `root`.
/// `root` must hold exactly one element.
template <typename Scalar>
void backward(const Tensor<Scalar>& root);

// ---------------------------------------------------------------------------
// Differentiable operations.

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a);

enum class ElementwiseOp { add, sub, mul };

template <typename Scalar>
Tensor<Scalar> elementwise(const Tensor<Scalar>& a, const Tensor<Scalar>& b, ElementwiseOp op);

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, ElementwiseOp::add);
}
template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, ElementwiseOp::sub);
}
/// Hadamard product.
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return elementwise(a, b, ElementwiseOp::mul);
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor);
template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& a, Scalar offset);

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a);
template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& a);
/// Requires non-negative input.
template <typename Scalar>
Tensor<Scalar> sqrt(const Tensor<Scalar>& a);
template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& a);

enum class ReduceOp { sum, mean, var_per_dim };

/// Reduction over one axis (result drops that axis) or, with no axis, over all
/// elements (rank-0 result). `var_per_dim` is the unbiased (N-1) variance and
/// defaults to axis 0.
template <typename Scalar>
Tensor<Scalar> reduce(const Tensor<Scalar>& t, ReduceOp op, std::optional<Index> axis = std::nullopt);

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& t) {
  return reduce(t, ReduceOp::sum);
}
template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& t) {
  return reduce(t, ReduceOp::mean);
}

/// Repeats a rank-1 [d] tensor into [n x d].
template <typename Scalar>
Tensor<Scalar> broadcast_rows(const Tensor<Scalar>& row, Index n);

/// Diagonal of a square rank-2 tensor, as rank 1.
template <typename Scalar>
Tensor<Scalar> diagonal(const Tensor<Scalar>& a);

/// Row-wise concatenation of rank-2 tensors with equal column count.
template <typename Scalar>
Tensor<Scalar> concat_rows(std::span<const Tensor<Scalar>> parts);

/// D[i,j] = ||x_i - y_j||^2.
template <typename Scalar>
Tensor<Scalar> pairwise_sq_dists(const Tensor<Scalar>& x, const Tensor<Scalar>& y);

/// Uniform multi-bandwidth Gaussian kernel:
/// K[i,j] = mean over sigma of exp(-||x_i - y_j||^2 / (2 sigma^2)).
template <typename Scalar>
Tensor<Scalar> rbf_kernel(const Tensor<Scalar>& x, const Tensor<Scalar>& y, std::span<const double> bandwidths);

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return add(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return sub(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, const Tensor<Scalar>& a) {
  return scale(a, s);
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace lleda
