#pragma once

#include <functional>
#include <vector>

#include "lleda/tensor.hpp"

namespace lleda {

struct GradCheckReport {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  Index worst_element = 0;
  std::size_t checked = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double eps = 1e-6;
  double tol = 1e-6;
  /// Relative error is |a - n| / max(|a|, |n|, floor). The floor keeps
  /// vanishing gradient entries from being judged on roundoff alone.
  double denominator_floor = 1.0;
};

/// Tape gradients of `f` with respect to each leaf in `inputs`.
///
/// The leaves are used in place: `f` is expected to read them (usually by
/// capturing the same handles). Their `requires_grad` flags and existing
/// gradients are restored on return.
template <typename Scalar>
std::vector<Matrix<Scalar>> tape_gradients(const std::function<Tensor<Scalar>()>& f,
                                           std::vector<Tensor<Scalar>> inputs);

/// Compares `analytic` against central differences of `f`, perturbing every
/// element of every leaf in place by +-eps and restoring it afterwards.
template <typename Scalar>
GradCheckReport compare_with_finite_differences(const std::function<Tensor<Scalar>()>& f,
                                                std::vector<Tensor<Scalar>> inputs,
                                                const std::vector<Matrix<Scalar>>& analytic,
                                                const GradCheckOptions& options);

/// tape_gradients followed by compare_with_finite_differences.
template <typename Scalar>
GradCheckReport grad_check(const std::function<Tensor<Scalar>()>& f, std::vector<Tensor<Scalar>> inputs,
                           const GradCheckOptions& options = {});

}  // namespace lleda
