#pragma once

#include <span>
#include <vector>

#include "lleda/tensor.hpp"

namespace lleda {

// ---------------------------------------------------------------------------
// Maximum mean discrepancy

/// Biased (V-statistic) squared MMD between two batches under the averaged
/// multi-bandwidth Gaussian kernel:
///
///   1/N^2 sum k(s_i, s_i') - 2/(NM) sum k(s_i, t_j) + 1/M^2 sum k(t_j, t_j')
///
/// Self-pairs are included. Differentiable with respect to both batches; the
/// bandwidths are treated as constants.
template <typename Scalar>
Tensor<Scalar> mmd(const Tensor<Scalar>& source, const Tensor<Scalar>& target, std::span<const double> bandwidths);

/// Median heuristic on the joined batch: {m/2, m, 2m} where m is the median
/// pairwise Euclidean distance among all rows of [source; target]. Falls back
/// to m = 1 when every distance is zero (or only one row exists).
template <typename Scalar>
std::vector<double> median_heuristic_bandwidths(const Matrix<Scalar>& source, const Matrix<Scalar>& target);

// ---------------------------------------------------------------------------
// VICReg

struct VicRegWeights {
  double lambda = 25.0;  // invariance
  double mu = 25.0;      // variance
  double nu = 1.0;       // covariance
  double gamma = 1.0;    // target standard deviation
  double epsilon = 1e-4;

  /// Throws ParameterError unless the weights are non-negative, at least one
  /// is positive, and gamma is positive.
  void validate() const;
};

/// (1/n) sum_k ||z_i[k] - z_j[k]||^2
template <typename Scalar>
Tensor<Scalar> vicreg_invariance(const Tensor<Scalar>& z_i, const Tensor<Scalar>& z_j);

/// (1/d) sum_dims max(0, gamma - sqrt(Var + epsilon)), unbiased variance.
template <typename Scalar>
Tensor<Scalar> vicreg_variance(const Tensor<Scalar>& z, double gamma, double epsilon);

/// (1/d) sum of squared off-diagonal entries of the (n-1)-normalised covariance.
template <typename Scalar>
Tensor<Scalar> vicreg_covariance(const Tensor<Scalar>& z);

/// lambda*s(z_i,z_j) + mu*[v(z_i)+v(z_j)] + nu*[c(z_i)+c(z_j)]
template <typename Scalar>
Tensor<Scalar> vicreg(const Tensor<Scalar>& z_i, const Tensor<Scalar>& z_j, const VicRegWeights& w);

// ---------------------------------------------------------------------------
// Self-supervised objective

/// Loss over one pair of embedding batches from two views of the same inputs.
template <typename Scalar>
class SslLoss {
 public:
  virtual ~SslLoss() = default;
  virtual Tensor<Scalar> compute(const Tensor<Scalar>& z_i, const Tensor<Scalar>& z_j) const = 0;
};

template <typename Scalar>
class VicRegLoss final : public SslLoss<Scalar> {
 public:
  explicit VicRegLoss(VicRegWeights w = {}) : weights_(w) { weights_.validate(); }

  Tensor<Scalar> compute(const Tensor<Scalar>& z_i, const Tensor<Scalar>& z_j) const override {
    return vicreg(z_i, z_j, weights_);
  }

  const VicRegWeights& weights() const { return weights_; }

 private:
  VicRegWeights weights_;
};

template <typename Scalar>
struct ViewPair {
  Tensor<Scalar> z_i;
  Tensor<Scalar> z_j;
};

/// Sum of `loss` over every view pair of the minibatch.
template <typename Scalar>
Tensor<Scalar> ssl_objective(std::span<const ViewPair<Scalar>> views, const SslLoss<Scalar>& loss);

}  // namespace lleda
