#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace lleda {
namespace {

using testing::T;

constexpr int kSeeds = 20;
const GradCheckOptions kPrimitive = testing::tolerance(1e-6);

/// Contracts any tensor with a fixed random weight so every Jacobian entry is
/// exercised by a scalar loss.
struct Probe {
  T weight;
  T operator()(const T& t) const { return sum(mul(t, weight)); }
};

Probe probe_for(const Shape& shape, Rng& rng) { return {T::random_normal(shape, rng)}; }

void expect_passes(const GradCheckReport& r, int seed) {
  EXPECT_TRUE(r.passed) << "seed " << seed << " rel " << r.max_rel_error << " input " << r.worst_input
                        << " element " << r.worst_element;
}

TEST(TensorValue, MatmulMatchesEigen) {
  Rng rng(1);
  auto a = T::random_normal({3, 4}, rng), b = T::random_normal({4, 2}, rng);
  Matrix<double> want = a.value() * b.value();
  EXPECT_TRUE(matmul(a, b).value().isApprox(want, 1e-14));
  EXPECT_THROW(matmul(a, a), DimensionError);
}

TEST(TensorValue, ReduceAxesAndVariance) {
  auto t = T::from_values({2, 3}, {1.0, 2.0, 3.0, 4.0, 6.0, 8.0});
  EXPECT_DOUBLE_EQ(sum(t).item(), 24.0);
  EXPECT_DOUBLE_EQ(mean(t).item(), 4.0);
  auto cols = reduce(t, ReduceOp::sum, 0);
  EXPECT_EQ(cols.shape(), (Shape{3}));
  EXPECT_DOUBLE_EQ(cols.value()(0, 2), 11.0);
  auto rows = reduce(t, ReduceOp::mean, 1);
  EXPECT_EQ(rows.shape(), (Shape{2}));
  EXPECT_DOUBLE_EQ(rows.value()(0, 1), 6.0);
  auto var = reduce(t, ReduceOp::var_per_dim);
  EXPECT_DOUBLE_EQ(var.value()(0, 0), 4.5);
  EXPECT_DOUBLE_EQ(var.value()(0, 2), 12.5);
  EXPECT_THROW(reduce(T::ones({1, 3}), ReduceOp::var_per_dim), InsufficientSamplesError);
  EXPECT_THROW(reduce(t, ReduceOp::sum, 2), DimensionError);
}

TEST(TensorValue, PairwiseAndKernelMatchNaive) {
  Rng rng(2);
  auto x = T::random_normal({4, 3}, rng), y = T::random_normal({5, 3}, rng);
  std::vector<double> bw{0.5, 2.0};
  auto d = pairwise_sq_dists(x, y).value();
  auto k = rbf_kernel(x, y, bw).value();
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 5; ++j) {
      double sq = 0.0;
      for (Index c = 0; c < 3; ++c) sq += std::pow(x.value()(i, c) - y.value()(j, c), 2);
      EXPECT_NEAR(d(i, j), sq, 1e-12);
      double want = 0.5 * (std::exp(-sq / (2 * 0.25)) + std::exp(-sq / (2 * 4.0)));
      EXPECT_NEAR(k(i, j), want, 1e-12);
    }
  }
  std::vector<double> bad{0.0};
  EXPECT_THROW(rbf_kernel(x, y, bad), ParameterError);
}

TEST(TensorGraph, ReusedNodeAccumulatesGradient) {
  auto x = T::from_values({2}, {1.0, -2.0}, true);
  auto y = sum(mul(x, x)) + sum(x);
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(x.grad()(0, 1), -3.0);
}

TEST(TensorGraph, DetachStopsGradient) {
  auto x = T::from_values({2}, {1.0, 2.0}, true);
  auto y = sum(mul(x, x.detach()));
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x.grad()(0, 1), 2.0);
}

TEST(TensorGraph, OnlyLeavesMutate) {
  auto x = T::ones({2, 2});
  x.set_requires_grad(true);
  auto y = scale(x, 2.0);
  EXPECT_THROW(y.mutable_value(), ContractError);
  EXPECT_THROW(y.set_requires_grad(false), ContractError);
  EXPECT_THROW(backward(y), ContractError);
  EXPECT_FALSE(scale(T::ones({2}), 2.0).requires_grad());
}

TEST(TensorGrad, Matmul) {
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(100 + s);
    auto a = T::random_normal({4, 3}, rng), b = T::random_normal({3, 5}, rng);
    auto p = probe_for({4, 5}, rng);
    expect_passes(grad_check<double>([&] { return p(matmul(a, b)); }, {a, b}, kPrimitive), s);
  }
}

TEST(TensorGrad, Transpose) {
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(200 + s);
    auto a = T::random_normal({4, 3}, rng);
    auto p = probe_for({3, 4}, rng);
    expect_passes(grad_check<double>([&] { return p(transpose(a)); }, {a}, kPrimitive), s);
  }
}

TEST(TensorGrad, Elementwise) {
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(300 + s);
    auto a = T::random_normal({3, 4}, rng), b = T::random_normal({3, 4}, rng);
    auto p = probe_for({3, 4}, rng);
    for (auto op : {ElementwiseOp::add, ElementwiseOp::sub, ElementwiseOp::mul}) {
      expect_passes(grad_check<double>([&] { return p(elementwise(a, b, op)); }, {a, b}, kPrimitive), s);
    }
    expect_passes(grad_check<double>([&] { return p(add_scalar(scale(a, 1.7), -0.3)); }, {a}, kPrimitive), s);
    expect_passes(grad_check<double>([&] { return p(relu(a)); }, {a}, kPrimitive), s);
    expect_passes(grad_check<double>([&] { return p(exp(scale(a, 0.5))); }, {a}, kPrimitive), s);
    expect_passes(grad_check<double>([&] { return p(square(a)); }, {a}, kPrimitive), s);
    auto pos = T::random_uniform({3, 4}, rng, 0.5, 2.0);
    expect_passes(grad_check<double>([&] { return p(sqrt(pos)); }, {pos}, kPrimitive), s);
  }
}

TEST(TensorGrad, Reduce) {
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(400 + s);
    auto a = T::random_normal({5, 3}, rng);
    auto p3 = probe_for({3}, rng), p5 = probe_for({5}, rng);
    expect_passes(grad_check<double>([&] { return sum(a); }, {a}, kPrimitive), s);
    expect_passes(grad_check<double>([&] { return mean(a); }, {a}, kPrimitive), s);
    for (auto op : {ReduceOp::sum, ReduceOp::mean, ReduceOp::var_per_dim}) {
      expect_passes(grad_check<double>([&] { return p3(reduce(a, op, 0)); }, {a}, kPrimitive), s);
    }
    for (auto op : {ReduceOp::sum, ReduceOp::mean, ReduceOp::var_per_dim}) {
      expect_passes(grad_check<double>([&] { return p5(reduce(a, op, 1)); }, {a}, kPrimitive), s);
    }
  }
}

TEST(TensorGrad, StructuralOps) {
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(500 + s);
    auto row = T::random_normal({3}, rng);
    auto sq = T::random_normal({4, 4}, rng);
    auto a = T::random_normal({2, 3}, rng), b = T::random_normal({3, 3}, rng);
    auto p43 = probe_for({4, 3}, rng), p4 = probe_for({4}, rng), p53 = probe_for({5, 3}, rng);
    expect_passes(grad_check<double>([&] { return p43(broadcast_rows(row, 4)); }, {row}, kPrimitive), s);
    expect_passes(grad_check<double>([&] { return p4(diagonal(sq)); }, {sq}, kPrimitive), s);
    expect_passes(grad_check<double>(
                      [&] {
                        std::vector<T> parts{a, b};
                        return p53(concat_rows<double>(parts));
                      },
                      {a, b}, kPrimitive),
                  s);
    auto p32 = probe_for({3, 2}, rng);
    expect_passes(grad_check<double>([&] { return p32(square(a).reshape({3, 2})); }, {a}, kPrimitive), s);
  }
}

TEST(TensorGrad, PairwiseDistancesAndRbf) {
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(600 + s);
    auto x = T::random_normal({4, 3}, rng), y = T::random_normal({5, 3}, rng);
    auto p = probe_for({4, 5}, rng);
    std::vector<double> bw{0.7, 1.4, 2.8};
    expect_passes(grad_check<double>([&] { return p(pairwise_sq_dists(x, y)); }, {x, y}, kPrimitive), s);
    expect_passes(grad_check<double>([&] { return p(rbf_kernel(x, y, bw)); }, {x, y}, kPrimitive), s);
  }
}

}  // namespace
}  // namespace lleda
