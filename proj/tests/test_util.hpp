#pragma once

#include <gtest/gtest.h>

#include "lleda/grad_check.hpp"
#include "lleda/networks.hpp"
#include "lleda/tensor.hpp"

namespace lleda::testing {

using T = Tensor<double>;

/// Small network for gradient checks and fast structural tests.
inline NetworkConfig tiny_network(Index input_dim = 6) {
  NetworkConfig c;
  c.input_dim = input_dim;
  c.widths = {5, 4, 4, 4};
  c.replay_index = 1;
  c.projector_hidden = 4;
  c.projector_out = 3;
  return c;
}

/// Zero biases put pre-activations of dead units exactly on the ReLU kink,
/// where central differences and the subgradient disagree.
template <typename Scalar>
void randomize_biases(DualNet<Scalar>& net, Rng& rng, double stddev = 0.3) {
  for (auto& p : net.parameters()) {
    if (p.is_bias) p.tensor.assign(Tensor<Scalar>::random_normal(p.tensor.shape(), rng, stddev).value());
  }
}

template <typename Scalar>
std::vector<Tensor<Scalar>> all_parameters(const DualNet<Scalar>& net) {
  std::vector<Tensor<Scalar>> out;
  for (const auto& p : net.parameters()) out.push_back(p.tensor);
  return out;
}

inline GradCheckOptions tolerance(double tol) {
  GradCheckOptions o;
  o.tol = tol;
  return o;
}

}  // namespace lleda::testing
