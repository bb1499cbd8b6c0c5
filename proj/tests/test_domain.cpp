#include <gtest/gtest.h>

#include "metacrowd/domain.hpp"
#include "metacrowd/random.hpp"

using namespace metacrowd;

TEST(Annotation, ValidatesUniformMeta) {
  EXPECT_TRUE(validate_annotation(Annotation::meta({0.2, 0.2, 0.2, 0.2, 0.2}), 5));
}

TEST(Annotation, ValidatesOneHot) {
  EXPECT_TRUE(validate_annotation({{0, 0, 1, 0, 0}, AnnotationKind::crowd_onehot}, 5));
  EXPECT_FALSE(validate_annotation({{0, 1, 1, 0, 0}, AnnotationKind::crowd_onehot}, 5));
  EXPECT_FALSE(validate_annotation({{0, 0.5, 0.5, 0, 0}, AnnotationKind::crowd_onehot}, 5));
}

TEST(Annotation, RejectsMetaNotSummingToOne) { EXPECT_FALSE(validate_annotation(Annotation::meta({0.5, 0.6}), 2)); }

TEST(Annotation, RejectsNegativeMeta) { EXPECT_FALSE(validate_annotation(Annotation::meta({-0.1, 1.1}), 2)); }

TEST(Annotation, PadIsAllMinusOne) {
  EXPECT_TRUE(validate_annotation(Annotation::pad(4), 4));
  EXPECT_FALSE(validate_annotation({{-1, -1, 0, -1}, AnnotationKind::pad}, 4));
}

TEST(Annotation, LengthMismatchIsStructural) {
  EXPECT_THROW(validate_annotation(Annotation::meta({0.5, 0.5}), 3), StructuralError);
}

TEST(Normalize, AlreadyNormalized) {
  const auto a = normalize_annotation(std::vector<double>{0.5, 0.5});
  EXPECT_DOUBLE_EQ(a.values[0], 0.5);
  EXPECT_DOUBLE_EQ(a.values[1], 0.5);
}

TEST(Normalize, ClipsThenRenormalizes) {
  const auto a = normalize_annotation(std::vector<double>{-0.1, 1.1});
  EXPECT_DOUBLE_EQ(a.values[0], 0.0);
  EXPECT_DOUBLE_EQ(a.values[1], 1.0);
}

TEST(Normalize, DegenerateGoesUniform) {
  const auto a = normalize_annotation(std::vector<double>{0, 0, 0});
  for (double v : a.values) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Normalize, IdempotentAndValid) {
  Rng rng(7);
  std::normal_distribution<double> g(0.3, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(2 + trial % 7);
    for (double& x : v) x = g(rng);
    const auto once = normalize_annotation(v);
    const auto twice = normalize_annotation(once.values);
    ASSERT_TRUE(validate_annotation(once, v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_NEAR(once.values[i], twice.values[i], 1e-15);
  }
}

TEST(Label, ArgmaxTiesGoLow) {
  EXPECT_EQ(argmax_label(std::vector<double>{0.3, 0.3, 0.2}), Label(1));
  EXPECT_EQ(argmax_label(std::vector<double>{0.1, 0.45, 0.45}), Label(2));
  EXPECT_EQ(Label::from_index(4).value(), 5);
  EXPECT_EQ(Label(3).index(), 2u);
}

TEST(ProjectConfig, DefaultsValidate) { EXPECT_NO_THROW(ProjectConfig{}.validate()); }

TEST(ProjectConfig, ThetaOutsideUnitIntervalRejected) {
  ProjectConfig c;
  c.theta = 1.2;
  EXPECT_THROW(c.validate(), ConfigurationError);
  c.theta = -0.1;
  EXPECT_THROW(c.validate(), ConfigurationError);
  c.theta = 1.0;
  EXPECT_NO_THROW(c.validate());
}

TEST(ProjectConfig, SupportMustFitInProject) {
  ProjectConfig c;
  c.N = 33;  // 1.34 * 25 = 33.5
  EXPECT_THROW(c.validate(), ConfigurationError);
  c.N = 34;
  EXPECT_NO_THROW(c.validate());
}

TEST(ProjectConfig, ProportionsMustSumToOne) {
  ProjectConfig c;
  c.worker_proportions[WorkerType::expert] = 0.3;
  EXPECT_THROW(c.validate(), ConfigurationError);
}

TEST(Random, StreamsAreIndependentAndReproducible) {
  EXPECT_EQ(derive_seed(1, Stream::project), derive_seed(1, Stream::project));
  EXPECT_NE(derive_seed(1, Stream::project), derive_seed(1, Stream::clustering));
  EXPECT_NE(derive_seed(1, Stream::meta_annotation, {3, 0}), derive_seed(1, Stream::meta_annotation, {0, 3}));
  Rng a = make_rng(5, Stream::crowd_pool), b = make_rng(5, Stream::crowd_pool);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
}

TEST(Random, DirichletMeanMatchesConcentration) {
  Rng rng(11);
  const std::vector<double> alpha{6.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<double> mean(5, 0.0);
  constexpr int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto x = sample_dirichlet(alpha, rng);
    for (int c = 0; c < 5; ++c) mean[c] += x[c] / draws;
  }
  EXPECT_NEAR(mean[0], 0.6, 0.01);
  for (int c = 1; c < 5; ++c) EXPECT_NEAR(mean[c], 0.1, 0.01);
}

TEST(Random, DirichletSurvivesTinyConcentrations) {
  Rng rng(3);
  const std::vector<double> alpha{1e-3, 1e-3, 1e-3};
  for (int i = 0; i < 1000; ++i) {
    const auto x = sample_dirichlet(alpha, rng);
    ASSERT_NEAR(x[0] + x[1] + x[2], 1.0, 1e-9);
  }
}

TEST(Random, NormalCdfReferencePoints) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
}
