#include <gtest/gtest.h>

#include "scenarios.hpp"
#include "test_util.hpp"

namespace lleda {
namespace {

using testing::T;

TEST(NetworkConfig, RejectsInvalidLayouts) {
  NetworkConfig c;
  EXPECT_NO_THROW(c.validate());
  c.replay_index = 4;
  EXPECT_THROW(c.validate(), ParameterError);
  c.replay_index = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = NetworkConfig{};
  c.widths = {64};
  EXPECT_THROW(c.validate(), ParameterError);
  c = NetworkConfig{};
  c.widths = {64, 0, 3};
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(DualNet, ForwardShapesAndFuse) {
  NetworkConfig c;
  DualNet<double> net(c, 3);
  Rng rng(1);
  auto x = T::random_uniform({5, c.input_dim}, rng, 0, 1);
  auto f = net.forward_full(x);
  EXPECT_EQ(f.s_latent.shape(), (Shape{5, 128}));
  EXPECT_EQ(f.d_latent.shape(), (Shape{5, 128}));
  EXPECT_EQ(f.s4.shape(), (Shape{5, 64}));
  EXPECT_EQ(f.d4.shape(), (Shape{5, 64}));
  EXPECT_EQ(f.ssl_embedding.shape(), (Shape{5, 32}));
  EXPECT_EQ(f.da_feature.shape(), (Shape{5, 32}));
  Matrix<double> fused = f.d4.value().cwiseProduct(f.s4.value());
  EXPECT_EQ(f.d4_fused.value(), fused);
  EXPECT_EQ(net.slow_features(x).value(), f.s4.value());
  EXPECT_EQ(net.fast_features(x).value(), f.d4.value());
  EXPECT_EQ(net.da_head(f.d4_fused).value(), f.da_feature.value());
  EXPECT_THROW(net.forward_full(T::ones({2, 7})), DimensionError);
  EXPECT_THROW(net.forward_from_latent(T::ones({2, 128}), T::ones({3, 128})), DimensionError);
  EXPECT_THROW(net.forward_from_latent(T::ones({2, 64}), T::ones({2, 64})), DimensionError);
}

TEST(DualNet, SameSeedSameWeights) {
  NetworkConfig c;
  EXPECT_EQ(DualNet<float>(c, 9).checksum(), DualNet<float>(c, 9).checksum());
  EXPECT_NE(DualNet<float>(c, 9).checksum(), DualNet<float>(c, 10).checksum());
}

TEST(DualNet, ResumingFromLatentsMatchesFullForward) {
  NetworkConfig c;
  DualNet<float> net(c, 4);
  Rng rng(2);
  auto x = Tensor<float>::random_uniform({10, c.input_dim}, rng, 0, 1);
  auto f = net.forward_full(x);
  auto r = net.forward_from_latent(f.s_latent, f.d_latent);
  EXPECT_TRUE(scenario::bit_equal(f.da_feature, r.da_feature));
  EXPECT_TRUE(scenario::bit_equal(f.ssl_embedding, r.ssl_embedding));
}

TEST(DualNet, FreezeMarksLowerBlocksOnly) {
  NetworkConfig c;
  c.replay_index = 2;
  DualNet<double> net(c, 5);
  const auto before = net.trainable_parameters().size();
  net.freeze_below_replay();
  std::size_t frozen = 0;
  for (const auto& p : net.parameters()) {
    const bool lower = (p.role == ParamRole::slow || p.role == ParamRole::fast) && p.block <= 2;
    EXPECT_EQ(p.frozen, lower) << to_string(p.role) << p.block;
    EXPECT_EQ(p.tensor.requires_grad(), !lower);
    frozen += p.frozen;
  }
  EXPECT_EQ(frozen, 8u);
  EXPECT_EQ(net.trainable_parameters().size(), before - 8);

  c.freeze_slow_lower = false;
  DualNet<double> fast_only(c, 5);
  fast_only.freeze_below_replay();
  for (const auto& p : fast_only.parameters()) EXPECT_EQ(p.frozen, p.role == ParamRole::fast && p.block <= 2);
}

TEST(DualNet, FrozenParametersReceiveNoGradient) {
  NetworkConfig c;
  DualNet<double> net(c, 6);
  net.freeze_below_replay();
  Rng rng(3);
  auto x = T::random_uniform({4, c.input_dim}, rng, 0, 1);
  auto f = net.forward_full(x);
  backward(sum(f.ssl_embedding) + sum(f.da_feature));
  for (const auto& p : net.parameters()) EXPECT_EQ(p.tensor.has_grad(), !p.frozen) << to_string(p.role) << p.block;
}

TEST(DualNet, ChecksumTracksParameters) {
  NetworkConfig c;
  DualNet<double> net(c, 7);
  const auto all = net.checksum();
  const auto slow_upper = net.checksum(ParamRole::slow, 2);
  const auto fast = net.checksum(ParamRole::fast);
  net.slow().block(0).weight.mutable_value()(0, 0) += 1e-9;
  EXPECT_NE(net.checksum(), all);
  EXPECT_EQ(net.checksum(ParamRole::slow, 2), slow_upper);
  EXPECT_EQ(net.checksum(ParamRole::fast), fast);
}

TEST(DualNet, CloneIsIndependent) {
  DualNet<double> net(NetworkConfig{}, 8);
  auto copy = net.clone();
  EXPECT_EQ(copy.checksum(), net.checksum());
  copy.fast().block(3).bias.mutable_value()(0, 0) = 5.0;
  EXPECT_NE(copy.checksum(), net.checksum());
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  NetworkConfig c;
  c.replay_index = 2;
  c.freeze_slow_lower = false;
  DualNet<float> net(c, 9);
  net.freeze_below_replay();
  const auto bytes = net.save_checkpoint();
  auto back = DualNet<float>::load_checkpoint(bytes);
  EXPECT_EQ(back.checksum(), net.checksum());
  EXPECT_EQ(back.save_checkpoint(), bytes);
  EXPECT_EQ(back.config().replay_index, 2);
  EXPECT_FALSE(back.config().freeze_slow_lower);
  auto a = net.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].frozen, b[i].frozen);
  Rng rng(4);
  auto x = Tensor<float>::random_uniform({3, c.input_dim}, rng, 0, 1);
  EXPECT_TRUE(scenario::bit_equal(net.forward_full(x).da_feature, back.forward_full(x).da_feature));
}

TEST(Checkpoint, CorruptionReportsOffset) {
  DualNet<float> net(NetworkConfig{}, 10);
  auto bytes = net.save_checkpoint();
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DualNet<float>::load_checkpoint(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  try {
    DualNet<float>::load_checkpoint(truncated);
    FAIL() << "truncated checkpoint loaded";
  } catch (const FormatError& e) {
    EXPECT_GT(e.offset(), 0u);
    EXPECT_LE(e.offset(), truncated.size());
  }
  EXPECT_THROW(DualNet<double>::load_checkpoint(bytes), FormatError);
}

TEST(NetworkGrad, OutputsAgainstFiniteDifferences) {
  for (int s = 0; s < 20; ++s) {
    Rng rng(800 + s);
    DualNet<double> net(testing::tiny_network(), 100 + s);
    testing::randomize_biases(net, rng);
    auto x = T::random_uniform({5, 6}, rng, 0, 1);
    auto w = T::random_normal({5, 3}, rng);
    auto params = testing::all_parameters(net);
    auto r = grad_check<double>(
        [&] {
          auto f = net.forward_full(x);
          return sum(mul(f.ssl_embedding, w)) + sum(mul(f.da_feature, w));
        },
        params, testing::tolerance(1e-6));
    EXPECT_TRUE(r.passed) << "seed " << s << " rel " << r.max_rel_error;
  }
}

}  // namespace
}  // namespace lleda
