#include <gtest/gtest.h>

#include <map>

#include "metacrowd/workers.hpp"

using namespace metacrowd;

namespace {

std::map<WorkerType, int> type_counts(const std::vector<CrowdWorker>& pool) {
  std::map<WorkerType, int> out;
  for (const auto& w : pool) ++out[w.worker_type];
  return out;
}

Task task_with_label(int label) {
  Task t;
  t.true_label = Label(label);
  return t;
}

}  // namespace

TEST(CrowdPool, TypicalThirtySplitsThreeThreeTwentyOneThree) {
  const auto pool = spawn_crowd_pool(typical_proportions(), 30, 1);
  ASSERT_EQ(pool.size(), 30u);
  auto c = type_counts(pool);
  EXPECT_EQ(c[WorkerType::spammer], 3);
  EXPECT_EQ(c[WorkerType::random], 3);
  EXPECT_EQ(c[WorkerType::normal], 21);
  EXPECT_EQ(c[WorkerType::expert], 3);
}

TEST(CrowdPool, AllExpertsStayInBand) {
  const auto pool = spawn_crowd_pool({{WorkerType::expert, 1.0}}, 5, 9);
  ASSERT_EQ(pool.size(), 5u);
  for (const auto& w : pool) {
    EXPECT_EQ(w.worker_type, WorkerType::expert);
    EXPECT_GE(w.true_accuracy, 0.8);
    EXPECT_LE(w.true_accuracy, 1.0);
  }
}

TEST(CrowdPool, EveryWorkerInsideItsBand) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    for (const auto& w : spawn_crowd_pool(low_quality_proportions(), 37, seed)) {
      const auto band = accuracy_band(w.worker_type);
      ASSERT_GE(w.true_accuracy, band.floor);
      ASSERT_LE(w.true_accuracy, band.ceiling);
    }
  }
}

TEST(CrowdPool, NonPositiveCountRejected) {
  EXPECT_THROW(spawn_crowd_pool(typical_proportions(), 0, 1), ConfigurationError);
  EXPECT_THROW(spawn_crowd_pool(typical_proportions(), -3, 1), ConfigurationError);
}

TEST(CrowdPool, MeanCapacityNearPointSix) {
  double total = 0.0;
  constexpr int seeds = 1000;
  for (int s = 0; s < seeds; ++s) {
    double pool_mean = 0.0;
    const auto pool = spawn_crowd_pool(typical_proportions(), 30, static_cast<std::uint64_t>(s));
    for (const auto& w : pool) pool_mean += w.true_accuracy / 30.0;
    total += pool_mean / seeds;
  }
  EXPECT_NEAR(total, 0.600, 0.02);
  EXPECT_NEAR(expected_capacity(typical_proportions()), 0.600, 1e-12);
  EXPECT_NEAR(expected_capacity(high_quality_proportions()), 0.650, 1e-12);
  EXPECT_NEAR(expected_capacity(capacity_535_proportions()), 0.535, 1e-12);
}

TEST(CrowdPool, DeterministicGivenSeed) {
  const auto a = spawn_crowd_pool(typical_proportions(), 30, 42);
  const auto b = spawn_crowd_pool(typical_proportions(), 30, 42);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].true_accuracy, b[i].true_accuracy);
}

TEST(CrowdAnnotation, PerfectAndAdversarialWorkers) {
  CrowdWorker perfect, hopeless;
  perfect.true_accuracy = 1.0;
  hopeless.true_accuracy = 0.0;
  Rng rng(1);
  const Task t = task_with_label(3);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(argmax_label(simulate_crowd_annotation(perfect, t, 5, rng).values), Label(3));
    ASSERT_NE(argmax_label(simulate_crowd_annotation(hopeless, t, 5, rng).values), Label(3));
  }
}

TEST(CrowdAnnotation, FrequenciesMatchWorkerModel) {
  CrowdWorker w;
  w.true_accuracy = 0.6;
  Rng rng(2);
  const Task t = task_with_label(2);
  std::vector<double> freq(5, 0.0);
  constexpr int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto a = simulate_crowd_annotation(w, t, 5, rng);
    ASSERT_TRUE(validate_annotation(a, 5));
    freq[argmax_label(a.values).index()] += 1.0 / draws;
  }
  EXPECT_NEAR(freq[1], 0.6, 0.01);
  for (int c : {0, 2, 3, 4}) EXPECT_NEAR(freq[c], 0.1, 0.01);
}

TEST(MetaWorkers, RowStochasticNearTargetDiagonal) {
  const auto metas = spawn_meta_workers(5, 3, 0.6, 1);
  ASSERT_EQ(metas.size(), 3u);
  for (const auto& m : metas) {
    EXPECT_EQ(m.true_confusion.rows(), 5);
    for (Eigen::Index r = 0; r < 5; ++r) EXPECT_NEAR(m.true_confusion.row(r).sum(), 1.0, 1e-9);
    EXPECT_GE(m.true_confusion.minCoeff(), 0.0);
    const double mean_diag = m.true_confusion.diagonal().mean();
    EXPECT_GE(mean_diag, 0.55);
    EXPECT_LE(mean_diag, 0.65);
  }
  EXPECT_EQ(metas[0].algorithm_name, "MAML-like");
}

TEST(MetaWorkers, TargetOneGivesIdentity) {
  for (const auto& m : spawn_meta_workers(5, 3, 1.0, 4)) {
    EXPECT_TRUE(m.true_confusion.isApprox(Eigen::MatrixXd::Identity(5, 5), 1e-12));
  }
}

TEST(MetaWorkers, TargetAtChanceRejected) { EXPECT_THROW(spawn_meta_workers(5, 3, 0.2, 1), ConfigurationError); }

TEST(MetaWorkers, DeterministicGivenSeed) {
  const auto a = spawn_meta_workers(5, 3, 0.6, 8);
  const auto b = spawn_meta_workers(5, 3, 0.6, 8);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].true_confusion, b[i].true_confusion);
}

namespace {

MetaWorker flat_row_worker(double blend, double correlation) {
  MetaWorker w;
  w.true_confusion = Eigen::MatrixXd::Constant(5, 5, 0.1);
  w.true_confusion.diagonal().setConstant(0.6);
  w.sharpness = 10.0;
  w.prior_blend = blend;
  w.error_correlation = correlation;
  return w;
}

struct MetaMoments {
  std::vector<double> mean = std::vector<double>(5, 0.0);
  std::vector<double> argmax = std::vector<double>(5, 0.0);
};

MetaMoments moments(const MetaWorker& w, int draws, std::uint64_t seed) {
  MetaMoments m;
  Rng rng(seed);
  const Task t = task_with_label(1);
  for (int i = 0; i < draws; ++i) {
    const auto d = draw_task_difficulty(t, 5, rng);
    const auto a = simulate_meta_annotation(w, t, d, rng);
    for (int c = 0; c < 5; ++c) m.mean[c] += a.values[c] / draws;
    m.argmax[argmax_label(a.values).index()] += 1.0 / draws;
  }
  return m;
}

}  // namespace

TEST(MetaAnnotation, SharpIdentityIsNearlyOneHot) {
  MetaWorker w = flat_row_worker(0.45, 0.9);
  w.true_confusion = Eigen::MatrixXd::Identity(5, 5);
  w.sharpness = 1e6;
  Rng rng(3);
  const Task t = task_with_label(4);
  for (int i = 0; i < 200; ++i) {
    const auto a = simulate_meta_annotation(w, t, draw_task_difficulty(t, 5, rng), rng);
    EXPECT_NEAR(a.values[3], 1.0, 1e-2);
  }
}

TEST(MetaAnnotation, MeanMatchesConfusionRow) {
  for (double blend : {1.0, 0.45, 0.0}) {
    const auto m = moments(flat_row_worker(blend, 0.9), 100000, 5);
    EXPECT_NEAR(m.mean[0], 0.6, 0.01) << "blend " << blend;
    for (int c = 1; c < 5; ++c) EXPECT_NEAR(m.mean[c], 0.1, 0.01) << "blend " << blend;
  }
}

TEST(MetaAnnotation, ArgmaxConfusionTracksRowWhenBlendIsZero) {
  const auto m = moments(flat_row_worker(0.0, 0.9), 100000, 6);
  EXPECT_NEAR(m.argmax[0], 0.6, 0.01);
  for (int c = 1; c < 5; ++c) EXPECT_NEAR(m.argmax[c], 0.1, 0.01);
}

TEST(MetaAnnotation, ArgmaxConfusionAtDefaultBlend) {
  const auto m = moments(flat_row_worker(0.45, 0.9), 100000, 7);
  EXPECT_NEAR(m.argmax[0], 0.6, 0.05);
  for (int c = 1; c < 5; ++c) EXPECT_NEAR(m.argmax[c], 0.1, 0.02);
}

TEST(MetaAnnotation, PlainDirichletArgmaxIsFarSharperThanRow) {
  // With no label-choice stage the argmax hits the diagonal far more often
  // than the row says, which is why the label-choice stage exists.
  const auto m = moments(flat_row_worker(1.0, 0.0), 50000, 8);
  EXPECT_GT(m.argmax[0], 0.9);
}

TEST(MetaAnnotation, SharedDifficultyCorrelatesErrors) {
  const auto metas = spawn_meta_workers(5, 3, 0.6, 2);
  auto independent = metas;
  for (auto& w : independent) w.error_correlation = 0.0;
  const Task t = task_with_label(1);
  auto both_wrong = [&](const std::vector<MetaWorker>& ws) {
    Rng rng(10);
    int joint = 0;
    for (int i = 0; i < 20000; ++i) {
      const auto d = draw_task_difficulty(t, 5, rng);
      const bool a = argmax_label(simulate_meta_annotation(ws[0], t, d, rng).values) != t.true_label;
      const bool b = argmax_label(simulate_meta_annotation(ws[1], t, d, rng).values) != t.true_label;
      joint += a && b;
    }
    return joint;
  };
  EXPECT_GT(both_wrong(metas), 1.5 * both_wrong(independent));
}

TEST(MetaAnnotation, OutputsAlwaysValid) {
  const auto metas = spawn_meta_workers(7, 3, 0.5, 3);
  Rng rng(4);
  for (int i = 0; i < 5000; ++i) {
    const Task t = task_with_label(1 + i % 7);
    const auto d = draw_task_difficulty(t, 7, rng);
    for (const auto& w : metas) ASSERT_TRUE(validate_annotation(simulate_meta_annotation(w, t, d, rng), 7));
  }
}

TEST(WorkerQuality, AllCorrect) {
  const std::vector<Label> golden(25, Label(2));
  const auto q = estimate_worker_quality(golden, golden);
  EXPECT_DOUBLE_EQ(q.estimated_accuracy, 1.0);
  EXPECT_TRUE(q.eligible_for_difficult);
}

TEST(WorkerQuality, FifteenOfTwentyFive) {
  const std::vector<Label> golden(25, Label(1));
  std::vector<Label> answers(25, Label(2));
  std::fill_n(answers.begin(), 15, Label(1));
  const auto q = estimate_worker_quality(answers, golden);
  EXPECT_DOUBLE_EQ(q.estimated_accuracy, 0.6);
  EXPECT_TRUE(q.eligible_for_difficult);
}

TEST(WorkerQuality, SevenOfTwentyFiveIneligible) {
  const std::vector<Label> golden(25, Label(1));
  std::vector<Label> answers(25, Label(3));
  std::fill_n(answers.begin(), 7, Label(1));
  const auto q = estimate_worker_quality(answers, golden);
  EXPECT_DOUBLE_EQ(q.estimated_accuracy, 0.28);
  EXPECT_FALSE(q.eligible_for_difficult);
}

TEST(WorkerQuality, NoGoldenTasks) {
  EXPECT_THROW(estimate_worker_quality(std::vector<Label>{}, std::vector<Label>{}), EstimationError);
}

TEST(WorkerQuality, ErrorShrinksWithGoldenSetSize) {
  auto mean_abs_error = [](std::size_t golden_size) {
    Rng rng(12);
    std::uniform_real_distribution<double> mu(0.1, 1.0);
    double err = 0.0;
    for (int w = 0; w < 1000; ++w) {
      CrowdWorker worker;
      worker.true_accuracy = mu(rng);
      std::vector<Label> answers, golden;
      for (std::size_t i = 0; i < golden_size; ++i) {
        const Task t = task_with_label(1 + static_cast<int>(i % 5));
        golden.push_back(t.true_label);
        answers.push_back(argmax_label(simulate_crowd_annotation(worker, t, 5, rng).values));
      }
      err += std::abs(estimate_worker_quality(answers, golden).estimated_accuracy - worker.true_accuracy) / 1000.0;
    }
    return err;
  };
  const double small = mean_abs_error(25), large = mean_abs_error(400);
  EXPECT_LT(large, small / 2.5);
  EXPECT_LT(large, 0.03);
}
