#include "lleda/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace lleda {

namespace {

template <typename Scalar>
Scalar eval_scalar(const std::function<Tensor<Scalar>()>& f) {
  Tensor<Scalar> out = f();
  if (out.numel() != 1) {
    throw ContractError("grad_check: function must return a single element, got " + shape_to_string(out.shape()));
  }
  return out.item();
}

template <typename Scalar>
void check_leaves(const std::vector<Tensor<Scalar>>& inputs) {
  for (const auto& t : inputs) {
    if (!t.is_leaf()) throw ContractError("grad_check: inputs must be leaf tensors");
  }
}

}  // namespace

template <typename Scalar>
std::vector<Matrix<Scalar>> tape_gradients(const std::function<Tensor<Scalar>()>& f,
                                           std::vector<Tensor<Scalar>> inputs) {
  check_leaves(inputs);
  std::vector<bool> flags;
  std::vector<Matrix<Scalar>> saved;
  for (auto& t : inputs) {
    flags.push_back(t.requires_grad());
    saved.push_back(t.has_grad() ? t.grad() : Matrix<Scalar>());
    t.zero_grad();
    t.set_requires_grad(true);
  }

  Tensor<Scalar> out = f();
  if (out.numel() != 1) {
    throw ContractError("grad_check: function must return a single element, got " + shape_to_string(out.shape()));
  }
  backward(out);

  std::vector<Matrix<Scalar>> grads;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    grads.push_back(inputs[i].grad());
    inputs[i].zero_grad();
    if (saved[i].size() != 0) inputs[i].node().grad = saved[i];
    inputs[i].set_requires_grad(flags[i]);
  }
  return grads;
}

template <typename Scalar>
GradCheckReport compare_with_finite_differences(const std::function<Tensor<Scalar>()>& f,
                                                std::vector<Tensor<Scalar>> inputs,
                                                const std::vector<Matrix<Scalar>>& analytic,
                                                const GradCheckOptions& options) {
  if (options.eps < 1e-7 || options.eps > 1e-3) {
    throw ParameterError("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  if (analytic.size() != inputs.size()) throw ContractError("grad_check: one analytic gradient per input required");
  check_leaves(inputs);

  GradCheckReport report;
  const Scalar h = static_cast<Scalar>(options.eps);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& value = inputs[i].mutable_value();
    if (analytic[i].rows() != value.rows() || analytic[i].cols() != value.cols()) {
      throw DimensionError("grad_check: analytic gradient shape mismatch for input " + std::to_string(i));
    }
    for (Index k = 0; k < value.size(); ++k) {
      const Scalar original = value.data()[k];
      value.data()[k] = original + h;
      const double plus = eval_scalar(f);
      value.data()[k] = original - h;
      const double minus = eval_scalar(f);
      value.data()[k] = original;

      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[i].data()[k];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err >= report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_input = i;
        report.worst_element = k;
      }
      ++report.checked;
    }
  }
  report.passed = report.max_rel_error < options.tol;
  return report;
}

template <typename Scalar>
GradCheckReport grad_check(const std::function<Tensor<Scalar>()>& f, std::vector<Tensor<Scalar>> inputs,
                           const GradCheckOptions& options) {
  auto analytic = tape_gradients(f, inputs);
  return compare_with_finite_differences(f, std::move(inputs), analytic, options);
}

#define LLEDA_INSTANTIATE_GRADCHECK(S)                                                                      \
  template std::vector<Matrix<S>> tape_gradients<S>(const std::function<Tensor<S>()>&,                    \
                                                    std::vector<Tensor<S>>);                              \
  template GradCheckReport compare_with_finite_differences<S>(                                            \
      const std::function<Tensor<S>()>&, std::vector<Tensor<S>>, const std::vector<Matrix<S>>&,           \
      const GradCheckOptions&);                                                                           \
  template GradCheckReport grad_check<S>(const std::function<Tensor<S>()>&, std::vector<Tensor<S>>,       \
                                         const GradCheckOptions&);

LLEDA_INSTANTIATE_GRADCHECK(float)
LLEDA_INSTANTIATE_GRADCHECK(double)

}  // namespace lleda
