#include <gtest/gtest.h>

#include <map>

#include "scenarios.hpp"

namespace lleda {
namespace {

using scenario::random_pair;

std::vector<LatentPair<double>> batch_of(std::size_t n, std::int64_t domain, Rng& rng, Index width = 4) {
  std::vector<LatentPair<double>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_pair(width, domain, rng));
  return out;
}

std::size_t add(ReplayBuffer<double>& buf, const std::vector<LatentPair<double>>& batch, std::size_t k) {
  return buf.add_batch(std::span<const LatentPair<double>>(batch), k);
}

TEST(ReplayBuffer, FillModeProperty) {
  const auto r = scenario::fill_mode_property(200, 31);
  EXPECT_TRUE(r.ok()) << r.violations << " violations, first: " << r.first;
}

TEST(ReplayBuffer, AppendsDistinctBatchMembers) {
  Rng rng(1);
  ReplayBuffer<double> buf(100, 2);
  auto batch = batch_of(10, 1, rng);
  EXPECT_EQ(add(buf, batch, 6), 6u);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    int matches = 0;
    for (const auto& b : batch) matches += buf.entries()[i].s_latent_a.same_node(b.s_latent_a);
    EXPECT_EQ(matches, 1);
    for (std::size_t j = i + 1; j < buf.size(); ++j) {
      EXPECT_FALSE(buf.entries()[i].s_latent_a.same_node(buf.entries()[j].s_latent_a));
    }
  }
}

TEST(ReplayBuffer, SamplingRequiresEntriesAndLeavesContents) {
  Rng rng(2);
  ReplayBuffer<double> buf(10, 3);
  EXPECT_THROW(buf.sample(4), EmptyMemoryError);
  add(buf, batch_of(5, 1, rng), 5);
  const auto before = buf.save();
  const auto drawn = buf.sample(50);
  EXPECT_EQ(drawn.size(), 50u);
  EXPECT_EQ(buf.save(), before);
}

TEST(ReplayBuffer, RejectsInconsistentEntries) {
  Rng rng(3);
  EXPECT_THROW(ReplayBuffer<double>(0, 1), ParameterError);
  ReplayBuffer<double> buf(10, 4);
  add(buf, batch_of(2, 1, rng, 4), 2);
  EXPECT_THROW(add(buf, batch_of(2, 1, rng, 5), 2), DimensionError);
  auto bad = batch_of(1, 1, rng);
  bad[0].d_latent_b = Tensor<double>::ones({3});
  EXPECT_THROW(add(buf, bad, 1), DimensionError);
  EXPECT_THROW(add(buf, batch_of(2, 1, rng), 0), ParameterError);
  EXPECT_EQ(add(buf, {}, 3), 0u);
}

TEST(ReplayBuffer, QuotaModeRebalancesAcrossDomains) {
  Rng rng(4);
  ReplayBuffer<double> buf(12, 5, BufferMode::quota);
  for (int k = 0; k < 5; ++k) add(buf, batch_of(8, 1, rng), 8);
  EXPECT_EQ(buf.size(), 12u);
  for (int k = 0; k < 5; ++k) add(buf, batch_of(8, 2, rng), 8);
  std::map<std::int64_t, int> count;
  for (const auto& e : buf.entries()) ++count[e.domain_id];
  EXPECT_EQ(count[1], 6);
  EXPECT_EQ(count[2], 6);
  for (int k = 0; k < 5; ++k) add(buf, batch_of(8, 3, rng), 8);
  count.clear();
  for (const auto& e : buf.entries()) ++count[e.domain_id];
  EXPECT_EQ(count[1], 4);
  EXPECT_EQ(count[2], 4);
  EXPECT_EQ(count[3], 4);
  auto mixed = batch_of(2, 3, rng);
  mixed[1].domain_id = 1;
  EXPECT_THROW(add(buf, mixed, 2), ContractError);
}

TEST(ReplayBuffer, SaveLoadRoundTrip) {
  Rng rng(5);
  ReplayBuffer<float> buf(20, 6);
  std::vector<LatentPair<float>> batch;
  for (int i = 0; i < 9; ++i) {
    auto v = [&] { return Tensor<float>::random_normal({3}, rng); };
    batch.push_back({v(), v(), v(), v(), i % 2 + 1});
  }
  buf.add_batch(std::span<const LatentPair<float>>(batch), 7);
  const auto bytes = buf.save();
  auto back = ReplayBuffer<float>::load(bytes);
  EXPECT_EQ(back.capacity(), 20u);
  ASSERT_EQ(back.size(), 7u);
  EXPECT_EQ(back.save(), bytes);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(back.entries()[i].domain_id, buf.entries()[i].domain_id);
    EXPECT_TRUE(scenario::bit_equal(back.entries()[i].d_latent_b, buf.entries()[i].d_latent_b));
  }
  auto cut = bytes;
  cut.resize(bytes.size() - 1);
  EXPECT_THROW(ReplayBuffer<float>::load(cut), FormatError);
  EXPECT_THROW(ReplayBuffer<double>::load(bytes), FormatError);
}

TEST(ReplayBuffer, StackViewAUsesViewAOnly) {
  Rng rng(6);
  auto batch = batch_of(3, 1, rng);
  auto [s, d] = stack_view_a(std::span<const LatentPair<double>>(batch));
  EXPECT_EQ(s.shape(), (Shape{3, 4}));
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(Matrix<double>(s.value().row(i)), batch[static_cast<std::size_t>(i)].s_latent_a.value());
    EXPECT_EQ(Matrix<double>(d.value().row(i)), batch[static_cast<std::size_t>(i)].d_latent_a.value());
  }
}

TEST(ReplayConsistency, StoredLatentsReproduceFullForward) {
  const auto r = scenario::replay_consistency(60, 20, 7);
  EXPECT_TRUE(r.ok()) << r.violations << " violations, first: " << r.first;
}

}  // namespace
}  // namespace lleda
