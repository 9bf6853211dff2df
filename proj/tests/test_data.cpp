#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "lleda/data.hpp"
#include "lleda/eval.hpp"

namespace lleda {
namespace {

const std::filesystem::path kFixtures = LLEDA_FIXTURE_DIR;

SyntheticDomainSpec small_spec(DomainTransform t = DomainTransform::identity()) {
  SyntheticDomainSpec s;
  s.base_seed = 3;
  s.sample_seed = 4;
  s.n_samples = 64;
  s.n_eval = 40;
  s.transform = t;
  return s;
}

Eigen::RowVectorXd ramp(Index side) {
  Eigen::RowVectorXd v(side * side);
  for (Index k = 0; k < v.size(); ++k) v(k) = static_cast<double>(k) / static_cast<double>(v.size());
  return v;
}

TEST(SyntheticDomain, DeterministicAndBounded) {
  const auto a = generate_domain(small_spec());
  const auto b = generate_domain(small_spec());
  EXPECT_EQ(a.train.images, b.train.images);
  EXPECT_EQ(a.eval.images, b.eval.images);
  EXPECT_EQ(a.train.size(), 64);
  EXPECT_EQ(a.eval.size(), 40);
  EXPECT_EQ(a.input_dim(), 256);
  EXPECT_GE(a.train.images.minCoeff(), 0.0);
  EXPECT_LE(a.train.images.maxCoeff(), 1.0);
  const auto& labels = a.eval.labels.read(issue_label_key());
  EXPECT_EQ(std::set<int>(labels.begin(), labels.end()).size(), 10u);

  auto other = small_spec();
  other.sample_seed = 5;
  EXPECT_NE(generate_domain(other).train.images, a.train.images);
}

TEST(SyntheticDomain, TransformAppliedToBothSplits) {
  const auto plain = generate_domain(small_spec());
  const auto perm = generate_domain(small_spec(DomainTransform::pixel_permute(7)));
  Rng unused(0);
  for (Index i = 0; i < 5; ++i) {
    EXPECT_EQ(perm.train.images.row(i),
              apply_transform(plain.train.images.row(i), 16, DomainTransform::pixel_permute(7), unused));
    EXPECT_EQ(perm.eval.images.row(i),
              apply_transform(plain.eval.images.row(i), 16, DomainTransform::pixel_permute(7), unused));
  }
  EXPECT_EQ(perm.train_scene.size(), 0);
  auto spec = small_spec(DomainTransform::rotate(45));
  spec.augment_before_transform = true;
  const auto scene = generate_domain(spec);
  EXPECT_EQ(scene.train_scene, plain.train.images);
}

TEST(SyntheticDomain, RejectsBadSpecs) {
  auto s = small_spec();
  s.n_classes = 1;
  EXPECT_THROW(generate_domain(s), ParameterError);
  s = small_spec();
  s.side = 2;
  EXPECT_THROW(generate_domain(s), ParameterError);
  s = small_spec();
  s.amplitude_min = 2.0;
  EXPECT_THROW(generate_domain(s), ParameterError);
}

TEST(Transforms, ZeroRotationIsIdentity) {
  Rng rng(1);
  const auto img = ramp(16);
  EXPECT_EQ(apply_transform(img, 16, DomainTransform::rotate(0), rng), img);
  EXPECT_EQ(rotate_image(img, 16, 360), img);
  EXPECT_EQ(apply_transform(img, 16, DomainTransform::identity(), rng), img);
}

TEST(Transforms, QuarterTurnMovesPixelsOnTheGrid) {
  Eigen::RowVectorXd img = Eigen::RowVectorXd::Zero(16);
  img(0 * 4 + 1) = 1.0;  // row 0, column 1
  const auto once = rotate_image(img, 4, 90);
  EXPECT_NEAR(once.sum(), 1.0, 1e-12);
  EXPECT_NEAR(once.maxCoeff(), 1.0, 1e-12);
  auto back = rotate_image(rotate_image(rotate_image(once, 4, 90), 4, 90), 4, 90);
  EXPECT_LT((back - img).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transforms, PermutationPreservesPixelMultiset) {
  Rng rng(2);
  const auto img = ramp(16);
  const auto p7 = apply_transform(img, 16, DomainTransform::pixel_permute(7), rng);
  EXPECT_NE(p7, img);
  std::vector<double> a(img.data(), img.data() + img.size()), b(p7.data(), p7.data() + p7.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(apply_transform(img, 16, DomainTransform::pixel_permute(7), rng), p7);
  EXPECT_NE(apply_transform(img, 16, DomainTransform::pixel_permute(8), rng), p7);
}

TEST(Transforms, ChannelShiftAndNoiseStayInRange) {
  Rng rng(3);
  const auto img = ramp(8);
  const auto shifted = apply_transform(img, 8, DomainTransform::channel_shift(0.5, 2.0), rng);
  EXPECT_DOUBLE_EQ(shifted(0), 0.5);
  EXPECT_DOUBLE_EQ(shifted(63), 1.0);
  const auto noisy = apply_transform(img, 8, DomainTransform::noise(0.2), rng);
  EXPECT_NE(noisy, img);
  EXPECT_GE(noisy.minCoeff(), 0.0);
  EXPECT_LE(noisy.maxCoeff(), 1.0);
}

TEST(Augmentation, ViewsDifferAndStayInRange) {
  Rng rng(4);
  const auto d = generate_domain(small_spec());
  auto [a, b] = make_views(d.train.images.topRows(8), 16, AugmentationPolicy{}, rng);
  EXPECT_EQ(a.rows(), 8);
  EXPECT_NE(a, b);
  EXPECT_GE(std::min(a.minCoeff(), b.minCoeff()), 0.0);
  EXPECT_LE(std::max(a.maxCoeff(), b.maxCoeff()), 1.0);
  auto [c, e] = make_views(d.train.images.topRows(8), 16, AugmentationPolicy::none(), rng);
  EXPECT_EQ(c, d.train.images.topRows(8));
  EXPECT_EQ(e, c);
  EXPECT_THROW(make_views(d.train.images, 15, AugmentationPolicy{}, rng), DimensionError);
  AugmentationPolicy bad;
  bad.crop_scale_min = 0.0;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(Idx, ReadsIndependentlyWrittenFixture) {
  Index rows = 0, cols = 0;
  const auto images = read_idx_images(kFixtures / "tiny.idx3", &rows, &cols);
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(cols, 4);
  ASSERT_EQ(images.rows(), 5);
  ASSERT_EQ(images.cols(), 16);
  for (Index i = 0; i < 5; ++i) {
    for (Index k = 0; k < 16; ++k) EXPECT_DOUBLE_EQ(images(i, k), static_cast<double>((17 * i + 3 * k) % 256) / 255.0);
  }
  EXPECT_EQ(read_idx_labels(kFixtures / "tiny.idx1"), (std::vector<int>{0, 1, 2, 1, 0}));
}

TEST(Idx, DomainSplitsLastItemsForEvaluation) {
  const auto d = load_idx(kFixtures / "tiny.idx3", kFixtures / "tiny.idx1", 0.4);
  EXPECT_EQ(d.side, 4);
  EXPECT_EQ(d.train.size(), 3);
  EXPECT_EQ(d.eval.size(), 2);
  EXPECT_EQ(d.eval.labels.read(issue_label_key()), (std::vector<int>{1, 0}));
  const auto unlabeled = load_idx(kFixtures / "tiny.idx3", std::nullopt);
  EXPECT_TRUE(unlabeled.train.labels.empty());
}

TEST(Idx, RejectsMalformedFiles) {
  EXPECT_THROW(load_idx(kFixtures / "tiny.idx3", kFixtures / "short.idx1"), FormatError);
  EXPECT_THROW(read_idx_images(kFixtures / "tiny.idx1"), FormatError);
  EXPECT_THROW(read_idx_labels(kFixtures / "tiny.idx3"), FormatError);
  EXPECT_THROW(read_idx_images(kFixtures / "missing.idx3"), Error);
}

DomainStream two_domain_stream(std::uint64_t seed) {
  std::vector<DomainSource> d{generate_domain(small_spec()), generate_domain(small_spec(DomainTransform::rotate(45)))};
  StreamOptions o;
  o.batch_size = 16;
  o.seed = seed;
  return DomainStream(std::move(d), o);
}

TEST(Stream, FullBatchesPerEpoch) {
  auto s = two_domain_stream(1);
  auto c = s.next_domain();
  EXPECT_EQ(c.domain_index(), 1u);
  EXPECT_EQ(c.batches_per_epoch(), 4u);
  c.begin_epoch();
  int n = 0;
  while (auto b = c.next_batch()) {
    EXPECT_EQ(b->view_a.rows(), 16);
    EXPECT_EQ(b->view_b.rows(), 16);
    EXPECT_EQ(b->raw.rows(), 16);
    ++n;
  }
  EXPECT_EQ(n, 4);
}

TEST(Stream, AdvancingSealsEarlierDomains) {
  auto s = two_domain_stream(2);
  auto first = s.next_domain();
  first.begin_epoch();
  EXPECT_TRUE(first.next_batch().has_value());
  auto second = s.next_domain();
  EXPECT_THROW(first.next_batch(), SealedDomainError);
  EXPECT_THROW(first.begin_epoch(), SealedDomainError);
  EXPECT_THROW(s.training_pool(1), SealedDomainError);
  EXPECT_NO_THROW(s.eval_set(1));
  EXPECT_NO_THROW(second.next_batch());
  EXPECT_FALSE(s.has_next());
  EXPECT_THROW(s.next_domain(), ContractError);
}

TEST(Stream, SameSeedSameBatches) {
  auto s1 = two_domain_stream(3), s2 = two_domain_stream(3), s3 = two_domain_stream(4);
  auto c1 = s1.next_domain(), c2 = s2.next_domain(), c3 = s3.next_domain();
  c1.begin_epoch();
  c2.begin_epoch();
  c3.begin_epoch();
  auto b1 = c1.next_batch(), b2 = c2.next_batch(), b3 = c3.next_batch();
  EXPECT_EQ(b1->view_a, b2->view_a);
  EXPECT_EQ(b1->view_b, b2->view_b);
  EXPECT_NE(b1->view_a, b3->view_a);
}

}  // namespace
}  // namespace lleda
