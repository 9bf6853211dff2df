#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "lleda/eval.hpp"
#include "scenarios.hpp"

namespace lleda {
namespace {

using Eigen::MatrixXd;

struct Blobs {
  MatrixXd x;
  std::vector<int> y;
};

Blobs gaussian_classes(int classes, int per_class, double spread, Rng& rng, Eigen::Index dims = 8) {
  MatrixXd centres(classes, dims);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = rng.normal(0.0, 3.0);
  Blobs b{MatrixXd(classes * per_class, dims), {}};
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      const Eigen::Index row = c * per_class + k;
      for (Eigen::Index j = 0; j < dims; ++j) b.x(row, j) = centres(c, j) + rng.normal(0.0, spread);
      b.y.push_back(c);
    }
  }
  return b;
}

double probe_accuracy(const Blobs& b, std::uint64_t seed) {
  GatedLabels labels(b.y);
  const auto split = stratified_split(labels, 0.8, seed);
  MatrixXd tr(static_cast<Eigen::Index>(split.train.size()), b.x.cols());
  MatrixXd te(static_cast<Eigen::Index>(split.test.size()), b.x.cols());
  for (std::size_t k = 0; k < split.train.size(); ++k) tr.row(static_cast<Eigen::Index>(k)) = b.x.row(static_cast<Eigen::Index>(split.train[k]));
  for (std::size_t k = 0; k < split.test.size(); ++k) te.row(static_cast<Eigen::Index>(k)) = b.x.row(static_cast<Eigen::Index>(split.test[k]));
  return linear_probe(tr, labels.select(split.train), te, labels.select(split.test)).accuracy;
}

TEST(LinearProbe, SeparableClassesAreLearned) {
  Rng rng(1);
  EXPECT_GE(probe_accuracy(gaussian_classes(5, 60, 0.3, rng), 2), 0.99);
}

TEST(LinearProbe, RandomLabelsStayNearChance) {
  Rng rng(3);
  auto b = gaussian_classes(10, 60, 0.3, rng);
  for (auto& v : b.y) v = static_cast<int>(rng.index(10));
  EXPECT_LT(probe_accuracy(b, 4), 0.25);
}

TEST(LinearProbe, RejectsBadInputs) {
  MatrixXd x = MatrixXd::Random(4, 3);
  GatedLabels one({1, 1, 1, 1}), two({0, 1, 0, 1}), short_labels({0, 1});
  EXPECT_THROW(linear_probe(x, one, x, two), DegenerateLabelsError);
  EXPECT_THROW(linear_probe(x, short_labels, x, two), DimensionError);
  EXPECT_THROW(linear_probe(x, two, MatrixXd::Random(4, 2), two), DimensionError);
  EXPECT_THROW(linear_probe(MatrixXd(0, 3), GatedLabels(std::vector<int>{}), x, two), InsufficientSamplesError);
  ProbeOptions bad;
  bad.train_fraction = 1.0;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(StratifiedSplit, PartitionsEveryClass) {
  std::vector<int> y;
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < 10 + c; ++k) y.push_back(c);
  }
  y.push_back(7);  // singleton class
  GatedLabels labels(y);
  const auto s = stratified_split(labels, 0.8, 9);
  EXPECT_EQ(s.train.size() + s.test.size(), y.size());
  std::vector<std::size_t> all(s.train);
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  for (int c = 0; c < 4; ++c) {
    const auto n = static_cast<std::size_t>(10 + c);
    const auto in_train =
        std::count_if(s.train.begin(), s.train.end(), [&](std::size_t i) { return y[i] == c; });
    EXPECT_EQ(static_cast<std::size_t>(in_train), static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n))));
  }
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  const auto again = stratified_split(labels, 0.8, 9);
  EXPECT_EQ(again.train, s.train);
  EXPECT_NE(stratified_split(labels, 0.8, 10).train, s.train);
}

TEST(ProbeFeatures, FinalBlockWidthsAndNoSideEffects) {
  DualNet<float> net(NetworkConfig{}, 3);
  Rng rng(4);
  const ImageMatrix x = scenario::random_images(12, 256, rng);
  const auto before = net.checksum();
  EXPECT_EQ(probe_features(net, x, ProbeRepresentation::slow).cols(), net.config().feature_dim());
  EXPECT_EQ(probe_features(net, x, ProbeRepresentation::fast).cols(), 64);
  const auto both = probe_features(net, x, ProbeRepresentation::concat);
  EXPECT_EQ(both.cols(), 128);
  EXPECT_EQ(both.leftCols(64), probe_features(net, x, ProbeRepresentation::slow));
  EXPECT_EQ(net.checksum(), before);
}

TEST(Metrics, AverageAndForgettingFromMatrix) {
  const auto m = summarize({{0.9}, {0.6, 0.8}, {0.7, 0.5, 0.75}});
  EXPECT_NEAR(m.average, (0.7 + 0.5 + 0.75) / 3, 1e-15);
  ASSERT_EQ(m.forgetting.size(), 3u);
  EXPECT_NEAR(m.forgetting[0], 0.2, 1e-15);
  EXPECT_NEAR(m.forgetting[1], 0.3, 1e-15);
  EXPECT_EQ(m.forgetting[2], 0.0);
  EXPECT_EQ(m.at(2, 1), 0.6);
  EXPECT_THROW(summarize({{0.9}, {0.6}}), ContractError);
}

TEST(Metrics, CsvRoundTripAndSummary) {
  const auto m = summarize({{0.91}, {0.6, 0.8125}, {0.7, 0.5, 0.1 + 0.2}});
  const auto csv = accuracy_matrix_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "after_domain,domain_1,domain_2,domain_3");
  const auto back = parse_accuracy_matrix_csv(csv);
  EXPECT_EQ(back.accuracy, m.accuracy);
  EXPECT_THROW(parse_accuracy_matrix_csv("nonsense"), FormatError);
  const auto j = nlohmann::json::parse(summary_json(m));
  EXPECT_EQ(j["average"].get<double>(), m.average);
  EXPECT_EQ(j["final_accuracy"].size(), 3u);
  EXPECT_EQ(j["forgetting_per_domain"][1].get<double>(), m.forgetting[1]);
}

TEST(EvaluateSequence, NeedsOneCheckpointPerDomain) {
  auto stream = scenario::synthetic_stream({DomainTransform::identity(), DomainTransform::rotate(45)}, 5, 64, 60);
  std::vector<DualNet<float>> one{DualNet<float>(NetworkConfig{}, 1)};
  EXPECT_THROW(evaluate_sequence<float>(one, stream), ContractError);
  one.push_back(one.front().clone());
  const auto m = evaluate_sequence<float>(one, stream);
  ASSERT_EQ(m.num_domains(), 2u);
  EXPECT_EQ(m.accuracy[1].size(), 2u);
  // Identical checkpoints see identical splits, so domain 1 scores the same twice.
  EXPECT_EQ(m.at(1, 1), m.at(2, 1));
  EXPECT_GT(m.at(1, 1), 0.2);
}

}  // namespace
}  // namespace lleda
