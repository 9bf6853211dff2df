#include "lleda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace lleda {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  for (Index e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
}

std::pair<Index, Index> view_dims(const Shape& shape) {
  if (shape.empty()) return {1, 1};
  if (shape.size() == 1) return {1, shape[0]};
  return {shape[0], shape_numel(shape) / shape[0]};
}

template <typename Scalar>
Matrix<Scalar> as_view(const Matrix<Scalar>& flat_source, const Shape& shape) {
  auto [r, c] = view_dims(shape);
  return Eigen::Map<const Matrix<Scalar>>(flat_source.data(), r, c);
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a) + " vs " + shape_to_string(b));
  }
}

void require_rank(Index rank, Index want, const Shape& shape, const char* op) {
  if (rank != want) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(want) + ", got " +
                         shape_to_string(shape));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

template <typename Scalar>
Tensor<Scalar>::Tensor() : node_(std::make_shared<detail::Node<Scalar>>()) {
  node_->value = Mat::Zero(1, 1);
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Mat value, bool requires_grad) : node_(std::make_shared<detail::Node<Scalar>>()) {
  node_->shape = {value.rows(), value.cols()};
  validate_shape(node_->shape);
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Mat value, bool requires_grad)
    : node_(std::make_shared<detail::Node<Scalar>>()) {
  validate_shape(shape);
  if (shape_numel(shape) != value.size()) {
    throw DimensionError("tensor value has " + std::to_string(value.size()) + " elements, shape " +
                         shape_to_string(shape) + " needs " + std::to_string(shape_numel(shape)));
  }
  node_->value = as_view(value, shape);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::scalar(Scalar v, bool requires_grad) {
  Mat m(1, 1);
  m(0, 0) = v;
  return Tensor(Shape{}, std::move(m), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::from_values(Shape shape, std::span<const Scalar> values, bool requires_grad) {
  validate_shape(shape);
  if (static_cast<Index>(values.size()) != shape_numel(shape)) {
    throw DimensionError("from_values: " + std::to_string(values.size()) + " values for shape " +
                         shape_to_string(shape));
  }
  auto [r, c] = view_dims(shape);
  Mat m = Eigen::Map<const Mat>(values.data(), r, c);
  return Tensor(std::move(shape), std::move(m), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::from_values(Shape shape, std::initializer_list<Scalar> values, bool requires_grad) {
  return from_values(std::move(shape), std::span<const Scalar>(values.begin(), values.size()), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::constant(Shape shape, Scalar v) {
  validate_shape(shape);
  auto [r, c] = view_dims(shape);
  return Tensor(std::move(shape), Mat::Constant(r, c, v));
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::zeros(Shape shape) {
  return constant(std::move(shape), Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::ones(Shape shape) {
  return constant(std::move(shape), Scalar(1));
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::identity(Index n) {
  return Tensor(Mat::Identity(n, n));
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::random_normal(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  validate_shape(shape);
  auto [r, c] = view_dims(shape);
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.normal(0.0, stddev));
  return Tensor(std::move(shape), std::move(m), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::random_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  validate_shape(shape);
  auto [r, c] = view_dims(shape);
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  return Tensor(std::move(shape), std::move(m), requires_grad);
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->value(0, 0);
}

template <typename Scalar>
typename Tensor<Scalar>::Mat Tensor<Scalar>::grad() const {
  if (node_->grad.size() == 0) return Mat::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

template <typename Scalar>
void Tensor<Scalar>::set_requires_grad(bool on) {
  if (!node_->leaf) throw ContractError("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
}

template <typename Scalar>
typename Tensor<Scalar>::Mat& Tensor<Scalar>::mutable_value() {
  if (!node_->leaf) throw ContractError("mutable_value on a non-leaf tensor");
  return node_->value;
}

template <typename Scalar>
void Tensor<Scalar>::assign(const Mat& v) {
  if (v.rows() != node_->value.rows() || v.cols() != node_->value.cols()) {
    throw DimensionError("assign: value dims do not match " + shape_to_string(shape()));
  }
  mutable_value() = v;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::clone() const {
  return Tensor(node_->shape, node_->value, node_->requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::reshape(Shape shape) const {
  validate_shape(shape);
  if (shape_numel(shape) != numel()) {
    throw DimensionError("reshape " + shape_to_string(this->shape()) + " -> " + shape_to_string(shape));
  }
  Mat v = as_view(node_->value, shape);
  const Shape from = this->shape();
  return make_result(std::move(shape), std::move(v), {*this}, [from](detail::Node<Scalar>& n) {
    n.parents[0]->accumulate(as_view(n.grad, from));
  });
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::make_result(Shape shape, Mat value, std::vector<Tensor> parents,
                                           std::function<void(detail::Node<Scalar>&)> backward) {
  auto node = std::make_shared<detail::Node<Scalar>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->leaf = false;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

template <typename Scalar>
void backward(const Tensor<Scalar>& root) {
  if (root.numel() != 1) {
    throw ContractError("backward() needs a single-element root, got " + shape_to_string(root.shape()));
  }
  if (!root.requires_grad()) return;

  using NodeT = detail::Node<Scalar>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  std::vector<std::pair<NodeT*, std::size_t>> stack{{root.node_.get(), 0}};
  seen.insert(root.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node_->accumulate(Matrix<Scalar>::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->leaf || !n->backward || n->grad.size() == 0) continue;
    n->backward(*n);
    n->grad.resize(0, 0);
  }
}

// ---------------------------------------------------------------------------
// Operations

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_rank(a.rank(), 2, a.shape(), "matmul");
  require_rank(b.rank(), 2, b.shape(), "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Matrix<Scalar> v = a.value() * b.value();
  return Tensor<Scalar>::make_result({a.rows(), b.cols()}, std::move(v), {a, b}, [](detail::Node<Scalar>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  require_rank(a.rank(), 2, a.shape(), "transpose");
  Matrix<Scalar> v = a.value().transpose();
  return Tensor<Scalar>::make_result({a.cols(), a.rows()}, std::move(v), {a}, [](detail::Node<Scalar>& n) {
    n.parents[0]->accumulate(n.grad.transpose());
  });
}

template <typename Scalar>
Tensor<Scalar> elementwise(const Tensor<Scalar>& a, const Tensor<Scalar>& b, ElementwiseOp op) {
  require_same_shape(a.shape(), b.shape(), "elementwise");
  Matrix<Scalar> v;
  switch (op) {
    case ElementwiseOp::add: v = a.value() + b.value(); break;
    case ElementwiseOp::sub: v = a.value() - b.value(); break;
    case ElementwiseOp::mul: v = a.value().cwiseProduct(b.value()); break;
  }
  return Tensor<Scalar>::make_result(a.shape(), std::move(v), {a, b}, [op](detail::Node<Scalar>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    switch (op) {
      case ElementwiseOp::add:
        if (pa.requires_grad) pa.accumulate(n.grad);
        if (pb.requires_grad) pb.accumulate(n.grad);
        break;
      case ElementwiseOp::sub:
        if (pa.requires_grad) pa.accumulate(n.grad);
        if (pb.requires_grad) pb.accumulate(-n.grad);
        break;
      case ElementwiseOp::mul:
        if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(pb.value));
        if (pb.requires_grad) pb.accumulate(n.grad.cwiseProduct(pa.value));
        break;
    }
  });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
  Matrix<Scalar> v = a.value() * factor;
  return Tensor<Scalar>::make_result(a.shape(), std::move(v), {a}, [factor](detail::Node<Scalar>& n) {
    n.parents[0]->accumulate(n.grad * factor);
  });
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& a, Scalar offset) {
  Matrix<Scalar> v = a.value().array() + offset;
  return Tensor<Scalar>::make_result(a.shape(), std::move(v), {a},
                                     [](detail::Node<Scalar>& n) { n.parents[0]->accumulate(n.grad); });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  Matrix<Scalar> v = a.value().cwiseMax(Scalar(0));
  return Tensor<Scalar>::make_result(a.shape(), std::move(v), {a}, [](detail::Node<Scalar>& n) {
    auto& p = *n.parents[0];
    p.accumulate((p.value.array() > Scalar(0)).select(n.grad, Scalar(0)));
  });
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& a) {
  Matrix<Scalar> v = a.value().array().exp();
  return Tensor<Scalar>::make_result(a.shape(), std::move(v), {a}, [](detail::Node<Scalar>& n) {
    n.parents[0]->accumulate(n.grad.cwiseProduct(n.value));
  });
}

template <typename Scalar>
Tensor<Scalar> sqrt(const Tensor<Scalar>& a) {
  if ((a.value().array() < Scalar(0)).any()) throw ParameterError("sqrt of a negative value");
  Matrix<Scalar> v = a.value().cwiseSqrt();
  return Tensor<Scalar>::make_result(a.shape(), std::move(v), {a}, [](detail::Node<Scalar>& n) {
    n.parents[0]->accumulate((n.grad.array() * Scalar(0.5) / n.value.array()).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& a) {
  Matrix<Scalar> v = a.value().array().square();
  return Tensor<Scalar>::make_result(a.shape(), std::move(v), {a}, [](detail::Node<Scalar>& n) {
    auto& p = *n.parents[0];
    p.accumulate(Scalar(2) * n.grad.cwiseProduct(p.value));
  });
}

template <typename Scalar>
Tensor<Scalar> reduce(const Tensor<Scalar>& t, ReduceOp op, std::optional<Index> axis) {
  using Mat = Matrix<Scalar>;
  if (!axis) {
    if (op == ReduceOp::var_per_dim) {
      axis = 0;
    } else {
      const Index count = t.numel();
      const Scalar s = t.value().sum();
      Mat v(1, 1);
      v(0, 0) = op == ReduceOp::sum ? s : s / Scalar(count);
      const Scalar f = op == ReduceOp::sum ? Scalar(1) : Scalar(1) / Scalar(count);
      return Tensor<Scalar>::make_result({}, std::move(v), {t}, [f](detail::Node<Scalar>& n) {
        auto& p = *n.parents[0];
        p.accumulate(Mat::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0) * f));
      });
    }
  }
  if (*axis < 0 || *axis >= t.rank()) {
    throw DimensionError("reduce: axis " + std::to_string(*axis) + " out of range for " + shape_to_string(t.shape()));
  }

  const Shape& in = t.shape();
  const Index len = in[*axis];
  Index outer = 1, inner = 1;
  for (Index i = 0; i < *axis; ++i) outer *= in[i];
  for (Index i = *axis + 1; i < t.rank(); ++i) inner *= in[i];
  if (op == ReduceOp::var_per_dim && len < 2) {
    throw InsufficientSamplesError("var_per_dim needs at least 2 samples along the axis, got " + std::to_string(len));
  }

  Shape out_shape;
  for (Index i = 0; i < t.rank(); ++i) {
    if (i != *axis) out_shape.push_back(in[i]);
  }
  auto [orows, ocols] = view_dims(out_shape);
  Mat out(orows, ocols);

  using Block = Eigen::Map<const Mat>;
  using OutRow = Eigen::Map<Mat>;
  for (Index o = 0; o < outer; ++o) {
    Block block(t.value().data() + o * len * inner, len, inner);
    OutRow dst(out.data() + o * inner, 1, inner);
    switch (op) {
      case ReduceOp::sum: dst = block.colwise().sum(); break;
      case ReduceOp::mean: dst = block.colwise().mean(); break;
      case ReduceOp::var_per_dim: {
        const Mat centered = block.rowwise() - block.colwise().mean();
        dst = centered.colwise().squaredNorm() / Scalar(len - 1);
        break;
      }
    }
  }

  return Tensor<Scalar>::make_result(
      std::move(out_shape), std::move(out), {t}, [op, outer, len, inner](detail::Node<Scalar>& n) {
        auto& p = *n.parents[0];
        Mat g(p.value.rows(), p.value.cols());
        for (Index o = 0; o < outer; ++o) {
          Eigen::Map<const Mat> go(n.grad.data() + o * inner, 1, inner);
          Eigen::Map<Mat> gi(g.data() + o * len * inner, len, inner);
          switch (op) {
            case ReduceOp::sum: gi = go.replicate(len, 1); break;
            case ReduceOp::mean: gi = go.replicate(len, 1) / Scalar(len); break;
            case ReduceOp::var_per_dim: {
              Eigen::Map<const Mat> x(p.value.data() + o * len * inner, len, inner);
              const Mat centered = x.rowwise() - x.colwise().mean();
              gi = (centered.array().rowwise() * go.row(0).array()).matrix() * (Scalar(2) / Scalar(len - 1));
              break;
            }
          }
        }
        p.accumulate(g);
      });
}

template <typename Scalar>
Tensor<Scalar> broadcast_rows(const Tensor<Scalar>& row, Index n) {
  require_rank(row.rank(), 1, row.shape(), "broadcast_rows");
  if (n <= 0) throw DimensionError("broadcast_rows: row count must be positive");
  Matrix<Scalar> v = row.value().replicate(n, 1);
  return Tensor<Scalar>::make_result({n, row.numel()}, std::move(v), {row}, [](detail::Node<Scalar>& n) {
    n.parents[0]->accumulate(n.grad.colwise().sum());
  });
}

template <typename Scalar>
Tensor<Scalar> diagonal(const Tensor<Scalar>& a) {
  require_rank(a.rank(), 2, a.shape(), "diagonal");
  if (a.rows() != a.cols()) throw DimensionError("diagonal: matrix not square " + shape_to_string(a.shape()));
  Matrix<Scalar> v = a.value().diagonal().transpose();
  return Tensor<Scalar>::make_result({a.rows()}, std::move(v), {a}, [](detail::Node<Scalar>& n) {
    auto& p = *n.parents[0];
    Matrix<Scalar> g = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
    g.diagonal() = n.grad.row(0).transpose();
    p.accumulate(g);
  });
}

template <typename Scalar>
Tensor<Scalar> concat_rows(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require_rank(p.rank(), 2, p.shape(), "concat_rows");
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    rows += p.rows();
  }
  Matrix<Scalar> v(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Tensor<Scalar>> parents(parts.begin(), parts.end());
  std::vector<Index> counts;
  for (const auto& p : parts) counts.push_back(p.rows());
  return Tensor<Scalar>::make_result(
      {rows, cols}, std::move(v), std::move(parents), [offsets, counts](detail::Node<Scalar>& n) {
        // make_result only keeps parents when at least one needs a gradient; all
        // of them are retained in that case, so indices line up with `parts`.
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          if (n.parents[i]->requires_grad) n.parents[i]->accumulate(n.grad.middleRows(offsets[i], counts[i]));
        }
      });
}

template <typename Scalar>
Tensor<Scalar> pairwise_sq_dists(const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
  require_rank(x.rank(), 2, x.shape(), "pairwise_sq_dists");
  require_rank(y.rank(), 2, y.shape(), "pairwise_sq_dists");
  if (x.cols() != y.cols()) {
    throw DimensionError("pairwise_sq_dists: feature dims differ " + shape_to_string(x.shape()) + " vs " +
                         shape_to_string(y.shape()));
  }
  const auto& xv = x.value();
  const auto& yv = y.value();
  Matrix<Scalar> d(xv.rows(), yv.rows());
  for (Index i = 0; i < xv.rows(); ++i) {
    for (Index j = 0; j < yv.rows(); ++j) d(i, j) = (xv.row(i) - yv.row(j)).squaredNorm();
  }
  return Tensor<Scalar>::make_result({xv.rows(), yv.rows()}, std::move(d), {x, y}, [](detail::Node<Scalar>& n) {
    auto& px = *n.parents[0];
    auto& py = *n.parents[1];
    const auto& g = n.grad;
    if (px.requires_grad) {
      Matrix<Scalar> gx = Scalar(2) * (g.rowwise().sum().asDiagonal() * px.value - g * py.value);
      px.accumulate(gx);
    }
    if (py.requires_grad) {
      Matrix<Scalar> gy = Scalar(2) * (g.colwise().sum().transpose().asDiagonal() * py.value -
                                       g.transpose() * px.value);
      py.accumulate(gy);
    }
  });
}

template <typename Scalar>
Tensor<Scalar> rbf_kernel(const Tensor<Scalar>& x, const Tensor<Scalar>& y, std::span<const double> bandwidths) {
  if (bandwidths.empty()) throw ParameterError("rbf_kernel: at least one bandwidth is required");
  for (double s : bandwidths) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("rbf_kernel: bandwidth must be positive, got " + std::to_string(s));
  }
  Tensor<Scalar> dists = pairwise_sq_dists(x, y);
  const auto& d = dists.value();
  const Scalar inv_count = Scalar(1) / Scalar(bandwidths.size());
  Matrix<Scalar> k = Matrix<Scalar>::Zero(d.rows(), d.cols());
  Matrix<Scalar> slope = Matrix<Scalar>::Zero(d.rows(), d.cols());
  for (double s : bandwidths) {
    const Scalar c = Scalar(1.0 / (2.0 * s * s));
    Matrix<Scalar> ks = (-c * d.array()).exp();
    k += ks;
    slope -= c * ks;
  }
  k *= inv_count;
  slope *= inv_count;
  return Tensor<Scalar>::make_result(dists.shape(), std::move(k), {dists},
                                     [slope = std::move(slope)](detail::Node<Scalar>& n) {
                                       n.parents[0]->accumulate(n.grad.cwiseProduct(slope));
                                     });
}

// ---------------------------------------------------------------------------
// Instantiations

template class Tensor<float>;
template class Tensor<double>;

#define LLEDA_INSTANTIATE_OPS(S)                                                                   \
  template void backward<S>(const Tensor<S>&);                                                     \
  template Tensor<S> matmul<S>(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> transpose<S>(const Tensor<S>&);                                               \
  template Tensor<S> elementwise<S>(const Tensor<S>&, const Tensor<S>&, ElementwiseOp);            \
  template Tensor<S> scale<S>(const Tensor<S>&, S);                                                \
  template Tensor<S> add_scalar<S>(const Tensor<S>&, S);                                           \
  template Tensor<S> relu<S>(const Tensor<S>&);                                                    \
  template Tensor<S> exp<S>(const Tensor<S>&);                                                     \
  template Tensor<S> sqrt<S>(const Tensor<S>&);                                                    \
  template Tensor<S> square<S>(const Tensor<S>&);                                                  \
  template Tensor<S> reduce<S>(const Tensor<S>&, ReduceOp, std::optional<Index>);                  \
  template Tensor<S> broadcast_rows<S>(const Tensor<S>&, Index);                                   \
  template Tensor<S> diagonal<S>(const Tensor<S>&);                                                \
  template Tensor<S> concat_rows<S>(std::span<const Tensor<S>>);                                   \
  template Tensor<S> pairwise_sq_dists<S>(const Tensor<S>&, const Tensor<S>&);                     \
  template Tensor<S> rbf_kernel<S>(const Tensor<S>&, const Tensor<S>&, std::span<const double>);

LLEDA_INSTANTIATE_OPS(float)
LLEDA_INSTANTIATE_OPS(double)

}  // namespace lleda
