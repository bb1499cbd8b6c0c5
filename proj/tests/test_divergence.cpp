#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "metacrowd/divergence.hpp"
#include "metacrowd/random.hpp"
#include "metacrowd/workers.hpp"

using namespace metacrowd;

namespace {

using V = std::vector<double>;

// Entropy-form reference in long double: JS = H((P+Q)/2) - (H(P) + H(Q)) / 2.
long double entropy2(const std::vector<long double>& p) {
  long double h = 0.0L;
  for (long double x : p) {
    if (x > 0.0L) h -= x * std::log2(x);
  }
  return h;
}

double reference_js(const V& p, const V& q) {
  std::vector<long double> lp(p.begin(), p.end()), lq(q.begin(), q.end()), m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = (lp[i] + lq[i]) / 2.0L;
  return static_cast<double>(entropy2(m) - (entropy2(lp) + entropy2(lq)) / 2.0L);
}

std::vector<Annotation> metas(std::initializer_list<V> rows) {
  std::vector<Annotation> out;
  for (const auto& r : rows) out.push_back(Annotation::meta(r));
  return out;
}

}  // namespace

TEST(KL, IdenticalIsZero) { EXPECT_NEAR(kl_divergence(V(5, 0.2), V(5, 0.2)), 0.0, 1e-15); }

TEST(KL, OneBit) { EXPECT_NEAR(kl_divergence(V{1, 0}, V{0.5, 0.5}), 1.0, 1e-9); }

TEST(KL, SkewedAgainstUniform) {
  // 0.9 log2(1.8) + 0.1 log2(0.2), evaluated in long double.
  const long double ref = 0.9L * std::log2(1.8L) + 0.1L * std::log2(0.2L);
  EXPECT_NEAR(kl_divergence(V{0.9, 0.1}, V{0.5, 0.5}), static_cast<double>(ref), 1e-12);
  EXPECT_NEAR(kl_divergence(V{0.9, 0.1}, V{0.5, 0.5}), 0.53100, 1e-4);
}

TEST(KL, LengthMismatch) { EXPECT_THROW(kl_divergence(V{1, 0}, V{0.3, 0.3, 0.4}), StructuralError); }

TEST(JS, Examples) {
  EXPECT_NEAR(js_divergence(V(4, 0.25), V(4, 0.25)), 0.0, 1e-15);
  EXPECT_NEAR(js_divergence(V{1, 0}, V{0, 1}), 1.0, 1e-9);
  EXPECT_NEAR(js_divergence(V{1, 0}, V{0.5, 0.5}), reference_js({1, 0}, {0.5, 0.5}), 1e-9);
  EXPECT_NEAR(js_divergence(V{1, 0}, V{0.5, 0.5}), 0.31128, 1e-4);
}

TEST(JS, SymmetricBoundedAndMatchesReference) {
  Rng rng(31);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + trial % 8;
    const V conc(n, trial % 2 ? 0.3 : 2.0);
    const auto p = sample_dirichlet(conc, rng);
    const auto q = sample_dirichlet(conc, rng);
    const double pq = js_divergence(p, q);
    ASSERT_EQ(pq, js_divergence(q, p));
    ASSERT_GE(pq, 0.0);
    ASSERT_LE(pq, 1.0);
    ASSERT_NEAR(pq, reference_js(p, q), 1e-6);
  }
}

TEST(JS, ZeroOnlyForEqualInputs) {
  EXPECT_GT(js_divergence(V{0.5, 0.5}, V{0.5 + 1e-3, 0.5 - 1e-3}), 0.0);
  EXPECT_EQ(js_divergence(V{0.3, 0.7}, V{0.3, 0.7}), 0.0);
}

TEST(MeanPairwiseJS, IdenticalAnnotations) {
  EXPECT_NEAR(mean_pairwise_js(metas({{0.6, 0.4}, {0.6, 0.4}, {0.6, 0.4}})), 0.0, 1e-15);
}

TEST(MeanPairwiseJS, TwoAnnotationsReduceToPair) {
  EXPECT_DOUBLE_EQ(mean_pairwise_js(metas({{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}})),
                   js_divergence(V{0.7, 0.2, 0.1}, V{0.1, 0.3, 0.6}));
}

TEST(MeanPairwiseJS, DisjointOneHotsAreMaximal) {
  EXPECT_NEAR(mean_pairwise_js(metas({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})), 1.0, 1e-9);
}

TEST(MeanPairwiseJS, AverageNotSum) {
  // Two disjoint pairs at 1 and one identical pair at 0 average to 2/3.
  EXPECT_NEAR(mean_pairwise_js(metas({{1, 0}, {1, 0}, {0, 1}})), 2.0 / 3.0, 1e-9);
}

TEST(MeanPairwiseJS, NeedsTwo) {
  EXPECT_THROW(mean_pairwise_js(metas({{1, 0}})), InsufficientAnnotationsError);
  EXPECT_THROW(mean_pairwise_js(std::vector<Annotation>{}), InsufficientAnnotationsError);
}

TEST(MeanPairwiseJS, PermutationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Annotation> set;
    for (int w = 0; w < 5; ++w) set.push_back(Annotation::meta(sample_dirichlet(V(4, 1.0), rng)));
    const double base = mean_pairwise_js(set);
    std::shuffle(set.begin(), set.end(), rng);
    ASSERT_NEAR(mean_pairwise_js(set), base, 1e-12);
  }
}

TEST(Routing, ThetaOneRoutesNothing) {
  std::vector<std::vector<Annotation>> sets = {metas({{1, 0}, {0, 1}}), metas({{0.5, 0.5}, {0.9, 0.1}})};
  EXPECT_TRUE(route_difficult_tasks(sets, 1.0).difficult_set.empty());
}

TEST(Routing, ThetaZeroRoutesAnyDisagreement) {
  std::vector<std::vector<Annotation>> sets = {metas({{0.5, 0.5}, {0.5, 0.5}}), metas({{0.5, 0.5}, {0.51, 0.49}})};
  const auto r = route_difficult_tasks(sets, 0.0);
  EXPECT_EQ(r.difficult_set, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.scores.size(), 2u);
}

TEST(Routing, MissingAnnotationsStructural) {
  std::vector<std::vector<Annotation>> sets = {metas({{0.5, 0.5}, {0.5, 0.5}}), metas({{0.5, 0.5}, {1, 0}, {0, 1}})};
  EXPECT_THROW(route_difficult_tasks(sets, 0.3), StructuralError);
}

TEST(Routing, DifficultSetIsExactlyAboveTheta) {
  Rng rng(8);
  std::vector<std::vector<Annotation>> sets(300);
  for (auto& s : sets) {
    for (int w = 0; w < 3; ++w) s.push_back(Annotation::meta(sample_dirichlet(V(5, 0.7), rng)));
  }
  std::size_t previous = sets.size() + 1;
  for (int i = 0; i <= 20; ++i) {
    const double theta = i / 20.0;
    const auto r = route_difficult_tasks(sets, theta);
    for (std::size_t t = 0; t < sets.size(); ++t) {
      const bool flagged = std::binary_search(r.difficult_set.begin(), r.difficult_set.end(), t);
      ASSERT_EQ(flagged, r.scores[t] > theta);
      ASSERT_GE(r.scores[t], 0.0);
      ASSERT_LE(r.scores[t], 1.0);
    }
    EXPECT_LE(r.difficult_set.size(), previous);
    previous = r.difficult_set.size();
  }
}

TEST(Routing, PinnedCountTakesHighestScores) {
  std::vector<std::vector<Annotation>> sets = {metas({{1, 0}, {0, 1}}), metas({{0.5, 0.5}, {0.5, 0.5}}),
                                               metas({{0.9, 0.1}, {0.1, 0.9}}), metas({{1, 0}, {0, 1}})};
  auto r = route_difficult_tasks(sets, 0.5);
  pin_difficult_tasks(r, 2);
  EXPECT_EQ(r.difficult_set, (std::vector<std::size_t>{0, 3}));
  EXPECT_THROW(pin_difficult_tasks(r, 5), ConfigurationError);
}

TEST(Routing, TypicalMetaWorkersRouteAboutAThird) {
  const auto workers = spawn_meta_workers(5, 3, 0.6, 1);
  Rng rng(2);
  std::vector<std::vector<Annotation>> sets(3000);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    Task t;
    t.id = i;
    t.true_label = Label::from_index(i % 5);
    const auto d = draw_task_difficulty(t, 5, rng);
    for (const auto& w : workers) sets[i].push_back(simulate_meta_annotation(w, t, d, rng));
  }
  const double beta = static_cast<double>(route_difficult_tasks(sets, 0.33).difficult_set.size()) / sets.size();
  EXPECT_NEAR(beta, 1.0 / 3.0, 0.1);
}
