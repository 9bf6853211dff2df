#include "lleda/losses.hpp"

#include <algorithm>
#include <cmath>

namespace lleda {

namespace {

template <typename Scalar>
void require_batch(const Tensor<Scalar>& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a [batch x dim] tensor, got " + shape_to_string(t.shape()));
}

/// Mean whose value depends only on the multiset of elements: values are
/// summed in ascending order, so permuting rows or transposing the kernel
/// matrix leaves the result bit-identical.
template <typename Scalar>
Tensor<Scalar> order_invariant_mean(const Tensor<Scalar>& t) {
  std::vector<Scalar> values(t.data().begin(), t.data().end());
  std::sort(values.begin(), values.end());
  Scalar total = 0;
  for (Scalar v : values) total += v;
  const Scalar inv = Scalar(1) / Scalar(values.size());
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total * inv;
  return Tensor<Scalar>::make_result({}, std::move(out), {t}, [inv](detail::Node<Scalar>& n) {
    auto& p = *n.parents[0];
    p.accumulate(Matrix<Scalar>::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0) * inv));
  });
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> mmd(const Tensor<Scalar>& source, const Tensor<Scalar>& target, std::span<const double> bandwidths) {
  require_batch(source, "mmd");
  require_batch(target, "mmd");
  if (source.rows() < 1 || target.rows() < 1) throw InsufficientSamplesError("mmd: empty batch");
  if (source.cols() != target.cols()) {
    throw DimensionError("mmd: feature dims differ " + shape_to_string(source.shape()) + " vs " +
                         shape_to_string(target.shape()));
  }
  const Tensor<Scalar> k_ss = order_invariant_mean(rbf_kernel(source, source, bandwidths));
  const Tensor<Scalar> k_st = order_invariant_mean(rbf_kernel(source, target, bandwidths));
  const Tensor<Scalar> k_tt = order_invariant_mean(rbf_kernel(target, target, bandwidths));
  // (ss + tt) - 2 st: commutative grouping keeps mmd(x, y) == mmd(y, x) exactly.
  return (k_ss + k_tt) - scale(k_st, Scalar(2));
}

template <typename Scalar>
std::vector<double> median_heuristic_bandwidths(const Matrix<Scalar>& source, const Matrix<Scalar>& target) {
  if (source.cols() != target.cols()) throw DimensionError("median_heuristic_bandwidths: feature dims differ");
  Eigen::MatrixXd joined(source.rows() + target.rows(), source.cols());
  joined << source.template cast<double>(), target.template cast<double>();

  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(joined.rows() * (joined.rows() - 1) / 2));
  for (Index i = 0; i < joined.rows(); ++i) {
    for (Index j = i + 1; j < joined.rows(); ++j) dists.push_back((joined.row(i) - joined.row(j)).norm());
  }
  double median = 0.0;
  if (!dists.empty()) {
    const std::size_t mid = dists.size() / 2;
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
    median = dists[mid];
    if (dists.size() % 2 == 0) {
      const double lower = *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
      median = 0.5 * (median + lower);
    }
  }
  if (!(median > 0.0) || !std::isfinite(median)) median = 1.0;
  return {median / 2.0, median, 2.0 * median};
}

void VicRegWeights::validate() const {
  if (lambda < 0 || mu < 0 || nu < 0) throw ParameterError("vicreg weights must be non-negative");
  if (!(lambda > 0 || mu > 0 || nu > 0)) throw ParameterError("at least one vicreg weight must be positive");
  if (!(gamma > 0)) throw ParameterError("vicreg gamma must be positive");
  if (!(epsilon >= 0)) throw ParameterError("vicreg epsilon must be non-negative");
}

template <typename Scalar>
Tensor<Scalar> vicreg_invariance(const Tensor<Scalar>& z_i, const Tensor<Scalar>& z_j) {
  require_batch(z_i, "vicreg_invariance");
  if (z_i.shape() != z_j.shape()) {
    throw DimensionError("vicreg: embedding shapes differ " + shape_to_string(z_i.shape()) + " vs " +
                         shape_to_string(z_j.shape()));
  }
  return scale(sum(square(z_i - z_j)), Scalar(1) / Scalar(z_i.rows()));
}

template <typename Scalar>
Tensor<Scalar> vicreg_variance(const Tensor<Scalar>& z, double gamma, double epsilon) {
  require_batch(z, "vicreg_variance");
  if (z.rows() < 2) throw InsufficientSamplesError("vicreg: variance needs at least 2 samples");
  const Tensor<Scalar> stddev = sqrt(add_scalar(reduce(z, ReduceOp::var_per_dim, 0), Scalar(epsilon)));
  return mean(relu(add_scalar(scale(stddev, Scalar(-1)), Scalar(gamma))));
}

template <typename Scalar>
Tensor<Scalar> vicreg_covariance(const Tensor<Scalar>& z) {
  require_batch(z, "vicreg_covariance");
  if (z.rows() < 2) throw InsufficientSamplesError("vicreg: covariance needs at least 2 samples");
  const Index n = z.rows();
  const Index d = z.cols();
  const Tensor<Scalar> centered = z - broadcast_rows(reduce(z, ReduceOp::mean, 0), n);
  const Tensor<Scalar> cov = scale(matmul(transpose(centered), centered), Scalar(1) / Scalar(n - 1));
  const Tensor<Scalar> off_diagonal = sum(square(cov)) - sum(square(diagonal(cov)));
  return scale(off_diagonal, Scalar(1) / Scalar(d));
}

template <typename Scalar>
Tensor<Scalar> vicreg(const Tensor<Scalar>& z_i, const Tensor<Scalar>& z_j, const VicRegWeights& w) {
  w.validate();
  require_batch(z_i, "vicreg");
  if (z_i.shape() != z_j.shape()) {
    throw DimensionError("vicreg: embedding shapes differ " + shape_to_string(z_i.shape()) + " vs " +
                         shape_to_string(z_j.shape()));
  }
  if (z_i.rows() < 2) throw InsufficientSamplesError("vicreg needs at least 2 samples per batch");
  const Tensor<Scalar> s = vicreg_invariance(z_i, z_j);
  const Tensor<Scalar> v = vicreg_variance(z_i, w.gamma, w.epsilon) + vicreg_variance(z_j, w.gamma, w.epsilon);
  const Tensor<Scalar> c = vicreg_covariance(z_i) + vicreg_covariance(z_j);
  return scale(s, Scalar(w.lambda)) + scale(v, Scalar(w.mu)) + scale(c, Scalar(w.nu));
}

template <typename Scalar>
Tensor<Scalar> ssl_objective(std::span<const ViewPair<Scalar>> views, const SslLoss<Scalar>& loss) {
  if (views.empty()) throw ContractError("ssl_objective: no view pairs");
  Tensor<Scalar> total = loss.compute(views.front().z_i, views.front().z_j);
  for (std::size_t k = 1; k < views.size(); ++k) total = total + loss.compute(views[k].z_i, views[k].z_j);
  return total;
}

#define LLEDA_INSTANTIATE_LOSSES(S)                                                                          \
  template Tensor<S> mmd<S>(const Tensor<S>&, const Tensor<S>&, std::span<const double>);                   \
  template std::vector<double> median_heuristic_bandwidths<S>(const Matrix<S>&, const Matrix<S>&);          \
  template Tensor<S> vicreg_invariance<S>(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> vicreg_variance<S>(const Tensor<S>&, double, double);                                  \
  template Tensor<S> vicreg_covariance<S>(const Tensor<S>&);                                                \
  template Tensor<S> vicreg<S>(const Tensor<S>&, const Tensor<S>&, const VicRegWeights&);                   \
  template Tensor<S> ssl_objective<S>(std::span<const ViewPair<S>>, const SslLoss<S>&);

LLEDA_INSTANTIATE_LOSSES(float)
LLEDA_INSTANTIATE_LOSSES(double)

}  // namespace lleda
